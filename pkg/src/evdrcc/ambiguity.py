"""Empirical moments of station demand and the moment-based ambiguity set.

The set contains every distribution whose mean lies in the ellipsoid
``(mu - c)^T S^-1 (mu - c) <= gamma1`` around a center ``c`` and whose second
moment about ``c`` is dominated by ``gamma2 * S``.  With ``c`` the empirical
mean this is the plain set (M1); re-centering ``c`` on the price-adjusted mean
gives the decision-dependent set (M2) with the same ``S``.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_covariance, check_vector

EIG_FLOOR = 1e-8
ABS_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class Moments:
    mean: np.ndarray
    cov: np.ndarray
    k_sc: int

    def __post_init__(self):
        check_covariance(self.cov, size=self.mean.shape[0])

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class AmbiguityParams:
    gamma1: float = 0.1
    gamma2: float = 1.0
    epsilon: float = 0.1
    mode: str = "M1"

    def __post_init__(self):
        if self.gamma1 < 0:
            raise ValueError("gamma1 must be nonnegative")
        if self.gamma2 < 1:
            raise ValueError("gamma2 must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.mode not in ("M1", "M2"):
            raise ValueError("mode must be 'M1' or 'M2'")


def empirical_moments(scenarios):
    """Sample mean and biased (divisor K) covariance of the scenario demands.

    ``scenarios`` is a sequence of objects with a ``p_ev`` vector or a
    ``(K, n_stations)`` array.
    """
    if isinstance(scenarios, np.ndarray):
        P = scenarios
    else:
        if len(scenarios) == 0:
            raise ValueError("no scenarios")
        rows = [np.asarray(getattr(s, "p_ev", s), dtype=float) for s in scenarios]
        if len({r.shape for r in rows}) != 1:
            raise ValueError("scenarios have inconsistent station dimension")
        P = np.vstack(rows)
    P = check_array(P, ensure_min_samples=1)
    mean = P.mean(axis=0)
    D = P - mean
    cov = D.T @ D / P.shape[0]
    return Moments(mean=mean, cov=0.5 * (cov + cov.T), k_sc=P.shape[0])


def regularize_covariance(m, ridge):
    """Make the covariance positive definite when it is (near) singular.

    Adds ``ridge * trace / dim`` to the diagonal when the smallest eigenvalue
    is below 1e-8; falls back to an absolute 1e-6 shift when that is zero.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    cov = m.cov
    if np.linalg.eigvalsh(cov).min() >= EIG_FLOOR:
        return m
    shift = ridge * np.trace(cov) / m.dim
    if shift <= 0:
        shift = ABS_FLOOR
    return Moments(mean=m.mean, cov=cov + shift * np.eye(m.dim), k_sc=m.k_sc)


def eta(params):
    """Safety factor of the distributionally robust chance constraint."""
    g1, g2, eps = params.gamma1, params.gamma2, params.epsilon
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if g1 / g2 <= eps:
        return float(np.sqrt(g1) + np.sqrt((1.0 - eps) / eps * (g2 - g1)))
    return float(np.sqrt(g2 / eps))


def membership_check(candidate_mean, candidate_cov, m, params, mean_ref=None):
    """Whether a distribution with the given mean/covariance lies in the set.

    Returns ``(mean_ok, cov_ok)``.  The covariance test uses the second moment
    about ``mean_ref``, i.e. ``candidate_cov + d d^T`` with ``d = mean - mean_ref``.
    """
    ref = m.mean if mean_ref is None else check_vector(mean_ref, "mean_ref", size=m.dim)
    mu = check_vector(candidate_mean, "candidate_mean", size=m.dim)
    C = check_covariance(candidate_cov, "candidate_cov", size=m.dim)
    try:
        L = np.linalg.cholesky(m.cov)
    except np.linalg.LinAlgError:
        raise ValueError("covariance is singular; regularize it first") from None
    if np.linalg.eigvalsh(m.cov).min() < 1e-14 * max(1.0, np.abs(m.cov).max()):
        raise ValueError("covariance is singular; regularize it first")
    d = mu - ref
    y = np.linalg.solve(L, d)
    mean_ok = bool(y @ y <= params.gamma1)
    second = C + np.outer(d, d)
    cov_ok = bool(np.linalg.eigvalsh(params.gamma2 * m.cov - second).min() >= -1e-9)
    return mean_ok, cov_ok


class MomentAmbiguitySet(BaseEstimator):
    """Moment ambiguity set fitted to a ``(K, n_stations)`` demand matrix.

    Parameters
    ----------
    gamma1, gamma2 : float
        Radii of the mean ellipsoid and the covariance cap.
    epsilon : float
        Chance-constraint violation level used for :attr:`eta_`.
    ridge : float
        Relative diagonal loading applied when the covariance is singular.

    Attributes
    ----------
    mean_, covariance_ : ndarray
        Empirical mean and (regularized) covariance.
    center_ : ndarray
        Set center; the empirical mean unless ``mean_ref`` was given to ``fit``.
    eta_ : float
    """

    def __init__(self, gamma1=0.1, gamma2=1.0, epsilon=0.1, ridge=1e-3):
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.epsilon = epsilon
        self.ridge = ridge

    def _params(self, mode="M1"):
        return AmbiguityParams(self.gamma1, self.gamma2, self.epsilon, mode)

    def fit(self, X, y=None, mean_ref=None):
        m = empirical_moments(check_array(X))
        self.raw_covariance_ = m.cov
        self.moments_ = regularize_covariance(m, self.ridge)
        self.mean_ = m.mean
        self.covariance_ = self.moments_.cov
        self.n_scenarios_ = m.k_sc
        self.n_features_in_ = m.dim
        mode = "M1" if mean_ref is None else "M2"
        self.center_ = m.mean if mean_ref is None else check_vector(mean_ref, "mean_ref", size=m.dim)
        self.params_ = self._params(mode)
        self.eta_ = eta(self.params_)
        return self

    def contains(self, mean, cov):
        check_is_fitted(self, "moments_")
        return membership_check(mean, cov, self.moments_, self.params_, self.center_)
