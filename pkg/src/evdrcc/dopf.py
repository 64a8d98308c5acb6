"""Chance-constrained LinDistFlow dispatch with affine generator recourse.

Station demand deviations ``w`` (zero mean, covariance ``S``) are balanced by
generators in proportion to participation factors ``alpha``.  The deviation
seen below each non-root bus is ``(I - alpha 1^T) w`` and flows/voltages
respond linearly through the downstream matrix, so every standard deviation
is the norm of an affine function of ``alpha``.  Each two-sided chance
constraint becomes ``y +/- eta * sd(y) within bounds``; line limits use an
inscribed regular polygon.
"""

from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import ambiguity
from ._validation import check_covariance, check_vector, psd_sqrt
from .network import downstream_matrix
from .solvers import (INFEASIBLE, OPTIMAL, InfeasibleModel, SolverFailure,
                      default_solver)

MODES = ("deterministic", "drcc", "drcc_pm")
RESIDUAL_TOL = 1e-6
OBJ_SCALE = 1e-3


@dataclass(frozen=True)
class DopfParams:
    epsilon: float = 0.1
    eta: float = 0.0
    z: float = 0.2
    polygon_edges: int = 12
    mode: str = "drcc"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.z < 0:
            raise ValueError("z must be nonnegative")
        if self.polygon_edges < 4 or self.polygon_edges % 2:
            raise ValueError("polygon_edges must be an even integer >= 4")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


@dataclass(frozen=True, eq=False)
class Dispatch:
    """Solved dispatch in physical units (MW, MVAr, per-unit squared voltage)."""

    p_g: np.ndarray
    q_g: np.ndarray
    v2: np.ndarray
    p_flow: np.ndarray
    q_flow: np.ndarray
    alpha: np.ndarray
    objective_value: float
    mode: str
    mean_ref: np.ndarray
    status: str = OPTIMAL
    residuals: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if abs(self.alpha.sum() - 1.0) > 1e-9 or np.any(self.alpha < 0):
            raise ValueError("participation factors must be nonnegative and sum to 1")
        for name in ("p_g", "q_g", "v2", "p_flow", "q_flow", "alpha"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")


@dataclass(frozen=True, eq=False)
class UncertainShift:
    dev_cov: np.ndarray
    sd_p: np.ndarray
    sd_q: np.ndarray
    sd_v: np.ndarray


@dataclass(eq=False)
class ConicModel:
    problem: cp.Problem
    variables: dict
    groups: dict
    params: DopfParams
    net: object
    data: dict
    diagnostics: list


# -- uncertainty propagation --------------------------------------------------

def lift_covariance(net, sigma):
    """Station covariance mapped onto the non-root buses (summing co-located stations)."""
    E = station_matrix(net)
    return E @ sigma @ E.T


def station_matrix(net):
    """Non-root-bus x station incidence (a station at the root maps to nothing)."""
    pos = np.array([net.bus_index[b] for b in net.nonroot_ids])
    return net.incidence("station")[pos]


def generator_matrix(net):
    pos = np.array([net.bus_index[b] for b in net.nonroot_ids])
    return net.incidence("generator")[pos]


def voltage_sensitivity(A, r, x, z):
    """Map from non-root net-load deviations to (minus half) voltage deviations."""
    return A.T @ ((np.asarray(r) + z * np.asarray(x))[:, None] * A)


def deviation_stddevs(A, Sigma, alpha, r=None, x=None, z=0.0):
    """Standard deviations of line flows and voltages under affine recourse.

    Parameters
    ----------
    A : ndarray or IncidenceMap, shape (n_lines, n_nonroot)
    Sigma : ndarray, shape (n_nonroot, n_nonroot)
        Covariance of demand deviations at the non-root buses.
    alpha : ndarray, shape (n_nonroot,)
        Participation of the generation located at each non-root bus.
    r, x : line resistance/reactance, needed for voltage deviations.
    z : reactive-to-real ratio of the uncertain demand.
    """
    A = getattr(A, "A", A)
    b = A.shape[1]
    Sigma = check_covariance(Sigma, "Sigma", size=b)
    alpha = check_vector(alpha, "alpha", size=b)
    M = np.eye(b) - np.outer(alpha, np.ones(b))
    dev_cov = M @ Sigma @ M.T
    dev_cov = 0.5 * (dev_cov + dev_cov.T)
    sd_p = np.sqrt(np.clip(np.einsum("lj,jk,lk->l", A, dev_cov, A), 0.0, None))
    if r is None or x is None:
        sd_v = np.full(b, np.nan)
    else:
        K = voltage_sensitivity(A, r, x, z)
        sd_v = 2.0 * np.sqrt(np.clip(np.einsum("ij,jk,ik->i", K, dev_cov, K), 0.0, None))
    return UncertainShift(dev_cov=dev_cov, sd_p=sd_p, sd_q=z * sd_p, sd_v=sd_v)


def polygon_coefficients(edges, s_max=1.0):
    """Edge coefficients ``(b1, b2, b3)`` of the regular polygon inscribed in the
    disc of radius ``s_max``: ``b1 p + b2 q <= b3 s_max`` for every row."""
    if edges < 4:
        raise ValueError("a polygon needs at least 4 edges")
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    theta = 2.0 * np.pi * np.arange(edges) / edges
    return np.column_stack([np.cos(theta), np.sin(theta),
                            np.full(edges, np.cos(np.pi / edges))])


# -- model ----------------------------------------------------------------

def _branch_incidence(net):
    C = np.zeros((net.n_buses, net.n_lines))
    C[net.line_from, np.arange(net.n_lines)] = 1.0
    C[net.line_to, np.arange(net.n_lines)] = -1.0
    return C


def assemble_model(net, A, moments, mean_ref, params, elastic=False):
    """Build the conic dispatch model.

    ``moments.cov`` is the station covariance in MW^2 (ignored in
    deterministic mode); ``mean_ref`` is the forecast station demand in MW.
    With ``elastic`` every inequality group gets a nonnegative slack and the
    objective becomes the total slack (used to name infeasible groups).
    """
    A = getattr(A, "A", A)
    base = net.base_mva
    nb, L, G = net.n_buses, net.n_lines, net.n_generators
    mean_ref = check_vector(mean_ref, "mean_ref", size=net.n_stations, nonnegative=True)
    det = params.mode == "deterministic"
    z, eta = params.z, (0.0 if det else params.eta)

    root = net.bus_index[net.root.id]
    nr = np.array([net.bus_index[b] for b in net.nonroot_ids])
    Eg = net.incidence("generator")
    Es = net.incidence("station")
    C = _branch_incidence(net)
    pev = Es @ mean_ref / base
    p_min, p_max, q_min, q_max = net.gen_bounds_pu
    v_lo, v_hi = net.v2_bounds

    sigma_mw = np.zeros((net.n_stations,) * 2) if det else moments.cov
    F = psd_sqrt(sigma_mw / base ** 2)
    u = F @ np.ones(net.n_stations)
    sig_tot = float(np.linalg.norm(u))
    uncertain = eta > 0 and sig_tot > 0

    pg = cp.Variable(G, name="p_g")
    qg = cp.Variable(G, name="q_g")
    v = cp.Variable(nb, name="v2")
    pf = cp.Variable(L, name="p_flow")
    qf = cp.Variable(L, name="q_flow")
    alpha = cp.Variable(G, name="alpha")

    eq = {
        "voltage_drop": [v[net.line_from] - v[net.line_to]
                         - 2 * (cp.multiply(net.r, pf) + cp.multiply(net.x, qf)) == 0],
        "p_balance": [Eg @ pg - net.p_load_pu - pev == C @ pf],
        "q_balance": [Eg @ qg - net.q_load_pu - z * pev == C @ qf],
        "alpha": [cp.sum(alpha) == 1],
    }
    if det:
        eq["alpha"].append(alpha == np.full(G, 1.0 / G))

    if uncertain:
        Es_nr, Eg_nr = Es[nr], Eg[nr]
        Kp0 = A @ Es_nr @ F
        Tp = A @ Eg_nr
        Kv = voltage_sensitivity(A, net.r, net.x, z)
        Kv0 = Kv @ Es_nr @ F
        Tv = Kv @ Eg_nr
        sd_p = cp.norm(Kp0 - cp.reshape(Tp @ alpha, (L, 1), order="C") @ u[None, :], 2, axis=1)
        sd_v = 2 * cp.norm(Kv0 - cp.reshape(Tv @ alpha, (len(nr), 1), order="C") @ u[None, :],
                           2, axis=1)
        m_pg = eta * sig_tot * alpha
        m_v = eta * sd_v
    else:
        sd_p = None
        m_pg = 0
        m_v = 0

    poly = polygon_coefficients(params.polygon_edges)
    smax = net.s_max_pu
    line_rows = []
    for b1, b2, b3 in poly:
        expr = b1 * pf + b2 * qf - b3 * smax
        if uncertain:
            expr = expr + eta * abs(b1 + z * b2) * sd_p
        line_rows.append(expr)

    ineq = {
        "generator_p_max": pg + m_pg - p_max,
        "generator_p_min": p_min - pg + m_pg,
        "generator_q_max": qg + z * m_pg - q_max,
        "generator_q_min": q_min - qg + z * m_pg,
        "voltage_max": v[nr] + m_v - v_hi[nr],
        "voltage_min": v_lo[nr] - v[nr] + m_v,
        "voltage_root": cp.hstack([v[root] - v_hi[root], v_lo[root] - v[root]]),
        "line_limit": cp.hstack(line_rows),
    }

    groups = dict(eq)
    slacks = {}
    for name, expr in ineq.items():
        if elastic:
            s = cp.Variable(expr.shape, nonneg=True, name=f"slack_{name}")
            slacks[name] = s
            groups[name] = [expr <= s]
        else:
            groups[name] = [expr <= 0]
    groups["alpha_nonneg"] = [alpha >= 0]

    P = base * pg
    c2 = np.array([g.c2 for g in net.generators])
    c1 = np.array([g.c1 for g in net.generators])
    c0 = np.array([g.c0 for g in net.generators])
    total_var = float(np.sum(sigma_mw))
    cost = (cp.sum(cp.multiply(c2, cp.square(P))) + total_var * cp.sum(cp.multiply(c2, cp.square(alpha)))
            + c1 @ P + c0.sum())
    if elastic:
        objective = cp.Minimize(sum(cp.sum(s) for s in slacks.values()))
    else:
        objective = cp.Minimize(OBJ_SCALE * cost)

    constraints = [c for cs in groups.values() for c in cs]
    problem = cp.Problem(objective, constraints)

    diagnostics = []
    demand = net.total_p_load + mean_ref.sum()
    cap = sum(g.p_max for g in net.generators)
    if demand > cap:
        diagnostics.append(f"mean demand {demand:.4g} MW exceeds generation capacity {cap:.4g} MW")

    data = dict(sigma_mw=sigma_mw, eta=eta, mean_ref=mean_ref, A=A, slacks=slacks, cost=cost)
    variables = dict(p_g=pg, q_g=qg, v2=v, p_flow=pf, q_flow=qf, alpha=alpha)
    return ConicModel(problem, variables, groups, params, net, data, diagnostics)


def _diagnose(model, solver):
    elastic = assemble_model(model.net, model.data["A"], ambiguity.Moments(
        model.data["mean_ref"], model.data["sigma_mw"], 1), model.data["mean_ref"],
        model.params, elastic=True)
    elastic.data["sigma_mw"] = model.data["sigma_mw"]
    res = solver.solve(elastic.problem)
    if res.status != OPTIMAL:
        return model.diagnostics or ["elastic model could not be solved"]
    found = [f"{name} (slack {float(np.max(s.value)):.3g})"
             for name, s in elastic.data["slacks"].items() if np.max(s.value) > 1e-7]
    return model.diagnostics + found


def solve(model, solver=None):
    """Solve an assembled model and return a verified :class:`Dispatch`."""
    solver = solver or default_solver()
    res = solver.solve(model.problem)
    if res.status == INFEASIBLE:
        diag = _diagnose(model, solver)
        raise InfeasibleModel("dispatch model infeasible: " + "; ".join(diag), diag)
    if res.status != OPTIMAL:
        raise SolverFailure(f"solver returned {res.raw_status}")

    var = model.variables
    base = model.net.base_mva
    alpha = np.clip(var["alpha"].value, 0.0, None)
    alpha = alpha / alpha.sum()
    d = Dispatch(p_g=base * var["p_g"].value, q_g=base * var["q_g"].value,
                 v2=np.asarray(var["v2"].value), p_flow=base * var["p_flow"].value,
                 q_flow=base * var["q_flow"].value, alpha=alpha,
                 objective_value=res.objective / OBJ_SCALE, mode=model.params.mode,
                 mean_ref=model.data["mean_ref"])
    resid = constraint_residuals(model.net, d, model.data["sigma_mw"], model.data["eta"],
                                 model.params)
    worst = max(resid.values())
    if worst > RESIDUAL_TOL:
        bad = max(resid, key=resid.get)
        raise SolverFailure(f"primal residual {worst:.3g} in {bad} exceeds {RESIDUAL_TOL}")
    recomputed = expected_cost(d, model.data["sigma_mw"], model.net.generators)
    if abs(recomputed - d.objective_value) > 1e-6 * max(1.0, abs(recomputed)):
        raise SolverFailure(f"objective mismatch: solver {d.objective_value}, recomputed {recomputed}")
    object.__setattr__(d, "objective_value", recomputed)
    object.__setattr__(d, "residuals", resid)
    return d


def expected_cost(d, Sigma, gens):
    """Expected generation cost of a dispatch with affine recourse ($)."""
    c2 = np.array([g.c2 for g in gens])
    c1 = np.array([g.c1 for g in gens])
    c0 = np.array([g.c0 for g in gens])
    total_var = float(np.sum(Sigma))
    return float(np.sum(c2 * d.p_g ** 2 + c2 * total_var * d.alpha ** 2 + c1 * d.p_g + c0))


def nominal_cost(p_g, gens):
    c2 = np.array([g.c2 for g in gens])
    c1 = np.array([g.c1 for g in gens])
    c0 = np.array([g.c0 for g in gens])
    return float(np.sum(c2 * p_g ** 2 + c1 * p_g + c0))


def uncertainty_margins(net, d, sigma_mw, z):
    """Standard deviations (per-unit) of generator, voltage and line quantities."""
    base = net.base_mva
    A = downstream_matrix(net).A
    alpha_bus = generator_matrix(net) @ d.alpha
    shift = deviation_stddevs(A, lift_covariance(net, sigma_mw / base ** 2), alpha_bus,
                              net.r, net.x, z)
    sig_tot = np.sqrt(max(float(np.sum(sigma_mw)), 0.0)) / base
    return dict(sd_pg=d.alpha * sig_tot, sd_qg=z * d.alpha * sig_tot,
                sd_v=shift.sd_v, sd_p=shift.sd_p)


def constraint_residuals(net, d, sigma_mw, eta, params):
    """Largest violation (per-unit) of every constraint group at a dispatch.

    Evaluated with numpy only, independently of the solver's model.
    """
    base = net.base_mva
    z = params.z
    pg, qg = d.p_g / base, d.q_g / base
    pf, qf = d.p_flow / base, d.q_flow / base
    v = d.v2
    p_min, p_max, q_min, q_max = net.gen_bounds_pu
    v_lo, v_hi = net.v2_bounds
    Eg, Es = net.incidence("generator"), net.incidence("station")
    C = _branch_incidence(net)
    pev = Es @ d.mean_ref / base
    m = uncertainty_margins(net, d, sigma_mw, z)
    nr = np.array([net.bus_index[b] for b in net.nonroot_ids])
    root = net.bus_index[net.root.id]

    def pos(x):
        x = np.atleast_1d(x)
        return float(np.max(np.clip(x, 0.0, None))) if x.size else 0.0

    out = {
        "voltage_drop": float(np.max(np.abs(v[net.line_from] - v[net.line_to]
                                            - 2 * (net.r * pf + net.x * qf)))),
        "p_balance": float(np.max(np.abs(Eg @ pg - net.p_load_pu - pev - C @ pf))),
        "q_balance": float(np.max(np.abs(Eg @ qg - net.q_load_pu - z * pev - C @ qf))),
        "alpha": abs(float(d.alpha.sum()) - 1.0) + pos(-d.alpha),
        "generator_p_max": pos(pg + eta * m["sd_pg"] - p_max),
        "generator_p_min": pos(p_min - pg + eta * m["sd_pg"]),
        "generator_q_max": pos(qg + eta * m["sd_qg"] - q_max),
        "generator_q_min": pos(q_min - qg + eta * m["sd_qg"]),
        "voltage_max": pos(v[nr] + eta * m["sd_v"] - v_hi[nr]),
        "voltage_min": pos(v_lo[nr] - v[nr] + eta * m["sd_v"]),
        "voltage_root": pos(np.array([v[root] - v_hi[root], v_lo[root] - v[root]])),
    }
    poly = polygon_coefficients(params.polygon_edges)
    lines = [b1 * pf + b2 * qf + eta * abs(b1 + z * b2) * m["sd_p"] - b3 * net.s_max_pu
             for b1, b2, b3 in poly]
    out["line_limit"] = pos(np.concatenate(lines))
    return out


# -- estimator ----------------------------------------------------------------

class DRCCDispatcher(BaseEstimator):
    """Dispatch policy fitted to station-demand scenarios.

    Parameters
    ----------
    network : Network
    mode : {'deterministic', 'drcc', 'drcc_pm'}
        ``drcc_pm`` needs ``mean_ref`` (the price-adjusted mean) at fit time;
        the other modes default to the empirical mean.
    epsilon, gamma1, gamma2 : float
        Violation level and ambiguity radii.
    z : float
        Reactive-to-real ratio of charging demand.
    polygon_edges : int
    ridge : float
        Covariance regularization, see :func:`ambiguity.regularize_covariance`.
    eta : float or None
        Override of the safety factor (computed from the ambiguity set if None).
    solver : object with ``solve(problem)``, optional

    Attributes
    ----------
    dispatch_ : Dispatch
    ambiguity_ : MomentAmbiguitySet
    """

    def __init__(self, network=None, mode="drcc", epsilon=0.1, gamma1=0.1, gamma2=1.0,
                 z=0.2, polygon_edges=12, ridge=1e-3, eta=None, solver=None):
        self.network = network
        self.mode = mode
        self.epsilon = epsilon
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.z = z
        self.polygon_edges = polygon_edges
        self.ridge = ridge
        self.eta = eta
        self.solver = solver

    def fit(self, X, y=None, mean_ref=None):
        if self.network is None:
            raise ValueError("network is required")
        X = check_array(X)
        if X.shape[1] != self.network.n_stations:
            raise ValueError(f"X has {X.shape[1]} columns, network has "
                             f"{self.network.n_stations} stations")
        amb = ambiguity.MomentAmbiguitySet(self.gamma1, self.gamma2, self.epsilon, self.ridge)
        if self.mode == "drcc_pm":
            if mean_ref is None:
                raise ValueError("drcc_pm mode needs the price-adjusted mean_ref")
            amb.fit(X, mean_ref=mean_ref)
        else:
            amb.fit(X)
        center = amb.center_ if mean_ref is None else check_vector(mean_ref, "mean_ref",
                                                                   size=X.shape[1])
        eta = amb.eta_ if self.eta is None else float(self.eta)
        params = DopfParams(self.epsilon, eta, self.z, self.polygon_edges, self.mode)
        self.ambiguity_ = amb
        self.model_ = assemble_model(self.network, downstream_matrix(self.network),
                                     amb.moments_, center, params)
        self.dispatch_ = solve(self.model_, self.solver)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Generator outputs (MW) under realized station demands ``X``."""
        check_is_fitted(self, "dispatch_")
        X = check_array(X)
        S = (X - self.dispatch_.mean_ref).sum(axis=1)
        return self.dispatch_.p_g[None, :] + S[:, None] * self.dispatch_.alpha[None, :]
