"""PROMETHEE II outranking with V-shaped (linear, two-threshold) preference functions.

The functional core works on stacked arrays so that many decision makers can
be evaluated at once: a performance tensor of shape ``(..., n_alt, n_crit)``
together with broadcastable weights and thresholds of shape ``(..., n_crit)``.
:class:`PrometheeII` wraps it in the usual estimator interface.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

TIE_TOL = 1e-12


@dataclass(frozen=True)
class PreferenceThresholds:
    """Indifference (``tau_q``) and strict preference (``tau_p``) thresholds."""

    tau_q: float
    tau_p: float

    def __post_init__(self):
        q = np.asarray(self.tau_q, dtype=float)
        p = np.asarray(self.tau_p, dtype=float)
        if np.any(q < 0):
            raise ValueError("tau_q must be nonnegative")
        if np.any(p <= q):
            raise ValueError("tau_p must exceed tau_q")


@dataclass(frozen=True)
class FlowResult:
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    phi: np.ndarray


def preference(delta, th):
    """V-shaped preference degree of a criterion difference ``delta``.

    0 up to ``tau_q``, linear in between, 1 from ``tau_p`` on.  Works
    elementwise on arrays.
    """
    if not isinstance(th, PreferenceThresholds):
        th = PreferenceThresholds(*th)
    q = np.asarray(th.tau_q, dtype=float)
    p = np.asarray(th.tau_p, dtype=float)
    out = np.clip((np.asarray(delta, dtype=float) - q) / (p - q), 0.0, 1.0)
    return out if out.ndim else float(out)


def preference_index(psi, w):
    """Weighted aggregate preference ``sum_j psi_j w_j``."""
    psi = np.asarray(psi, dtype=float)
    w = check_weights(w)
    if psi.shape[-1] != w.shape[-1]:
        raise ValueError(f"psi has {psi.shape[-1]} criteria, weights have {w.shape[-1]}")
    out = np.sum(psi * w, axis=-1)
    return out if out.ndim else float(out)


def check_weights(w, atol=1e-12):
    w = np.asarray(w, dtype=float)
    if w.ndim == 0 or w.shape[-1] == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if np.any(np.abs(w.sum(axis=-1) - 1.0) > atol):
        raise ValueError("weights must sum to 1")
    return w


def outranking_flows(pi):
    """Positive, negative and net flows from a (stack of) preference-index matrices.

    The diagonal of ``pi`` is ignored; each flow is averaged over the
    ``n - 1`` other alternatives.
    """
    pi = np.array(pi, dtype=float)
    if pi.ndim < 2 or pi.shape[-1] != pi.shape[-2]:
        raise ValueError("pi must be square")
    n = pi.shape[-1]
    if n < 2:
        raise ValueError("at least two alternatives are required")
    idx = np.arange(n)
    pi[..., idx, idx] = 0.0
    plus = pi.sum(axis=-1) / (n - 1)
    minus = pi.sum(axis=-2) / (n - 1)
    return FlowResult(phi_plus=plus, phi_minus=minus, phi=plus - minus)


def select_best(flows, current):
    """Index of the best alternative; a tie with ``current`` keeps ``current``.

    ``flows`` is a :class:`FlowResult` or a net-flow array; stacked inputs
    (``(..., n)`` with matching ``current``) are handled row-wise.
    """
    phi = np.asarray(flows.phi if isinstance(flows, FlowResult) else flows, dtype=float)
    if phi.size == 0:
        raise ValueError("empty flows")
    current = np.asarray(current)
    n = phi.shape[-1]
    if np.any((current < 0) | (current >= n)):
        raise ValueError("current alternative out of range")
    top = phi.max(axis=-1, keepdims=True)
    is_max = phi >= top - TIE_TOL
    first = np.argmax(is_max, axis=-1)
    keep = np.take_along_axis(is_max, current[..., None], axis=-1)[..., 0]
    out = np.where(keep, current, first)
    return int(out) if out.ndim == 0 else out


def net_flows(G, weights, tau_q, tau_p):
    """Net flows for stacked performance tables.

    Parameters
    ----------
    G : array, shape (..., n_alt, n_crit)
        Benefit-oriented scores (larger is better on every criterion).
    weights, tau_q, tau_p : arrays broadcastable to (..., n_crit)

    Returns
    -------
    FlowResult with arrays of shape (..., n_alt)
    """
    G = np.asarray(G, dtype=float)
    q = np.asarray(tau_q, dtype=float)[..., None, None, :]
    p = np.asarray(tau_p, dtype=float)[..., None, None, :]
    w = np.asarray(weights, dtype=float)[..., None, None, :]
    with np.errstate(invalid="ignore"):
        delta = G[..., :, None, :] - G[..., None, :, :]
    delta = np.where(np.isnan(delta), 0.0, delta)  # inf - inf: equal scores
    psi = np.clip((delta - q) / (p - q), 0.0, 1.0)
    return outranking_flows(np.sum(psi * w, axis=-1))


def orient(X, directions):
    """Negate the minimize-direction columns so larger is better everywhere."""
    X = np.asarray(X, dtype=float)
    if directions is None:
        return X
    sign = np.array([-1.0 if d == "minimize" else 1.0 for d in directions])
    if any(d not in ("maximize", "minimize") for d in directions):
        raise ValueError("directions must be 'maximize' or 'minimize'")
    if sign.shape[0] != X.shape[-1]:
        raise ValueError("one direction per criterion is required")
    return X * sign


class PrometheeII(BaseEstimator):
    """PROMETHEE II ranking of the rows of a performance table.

    Parameters
    ----------
    weights : array-like of shape (n_criteria,), default=None
        Criterion weights summing to one; equal weights when None.
    tau_q, tau_p : float or array-like of shape (n_criteria,)
        Indifference and strict-preference thresholds.
    directions : sequence of {'maximize', 'minimize'}, default=None
        Orientation per criterion; all 'maximize' when None.

    Attributes
    ----------
    flows_ : FlowResult
    ranking_ : ndarray
        Alternative indices sorted by decreasing net flow (stable).
    """

    def __init__(self, weights=None, tau_q=0.0, tau_p=1.0, directions=None):
        self.weights = weights
        self.tau_q = tau_q
        self.tau_p = tau_p
        self.directions = directions

    def _params(self, n_crit):
        w = np.full(n_crit, 1.0 / n_crit) if self.weights is None else check_weights(self.weights)
        if w.shape[0] != n_crit:
            raise ValueError(f"expected {n_crit} weights, got {w.shape[0]}")
        q = np.broadcast_to(np.asarray(self.tau_q, dtype=float), (n_crit,))
        p = np.broadcast_to(np.asarray(self.tau_p, dtype=float), (n_crit,))
        PreferenceThresholds(q, p)
        return w, q, p

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        w, q, p = self._params(X.shape[1])
        self.flows_ = net_flows(orient(X, self.directions), w, q, p)
        self.ranking_ = np.argsort(-self.flows_.phi, kind="stable")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Net flow of every row of ``X`` against the other rows."""
        X = check_array(X, ensure_min_samples=2)
        w, q, p = self._params(X.shape[1])
        return net_flows(orient(X, self.directions), w, q, p).phi

    def fit_transform(self, X, y=None):
        return self.fit(X).flows_.phi

    def select(self, current):
        check_is_fitted(self, "flows_")
        return select_best(self.flows_, current)
