"""Post-optimization evaluation of fixed dispatches under sampled demand.

Every realization is re-evaluated with the dispatch frozen: generators follow
their participation factors, and a single LP finds the cheapest nonnegative
slacks that restore generator limits, nodal balance, voltage bounds and line
ratings.  When the frozen operating point already satisfies everything the
LP optimum is the all-zero slack vector and the LP is skipped.
"""

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import behavior
from ._validation import check_covariance, check_random_state, check_vector
from .dopf import _branch_incidence, nominal_cost, polygon_coefficients
from .network import downstream_matrix

CATEGORIES = ("balance", "voltage", "line", "generator")


@dataclass(frozen=True)
class Penalties:
    """Linear slack prices: $/MW, $/MVAr, $ per per-unit^2 of voltage, $/MVA."""

    generator: float = 1000.0
    generator_q: float = 200.0
    balance: float = 3000.0
    balance_q: float = 600.0
    voltage: float = 500.0
    line: float = 500.0

    def __post_init__(self):
        if any(getattr(self, f.name) <= 0 for f in fields(self)):
            raise ValueError("penalties must be positive")


@dataclass(frozen=True, eq=False)
class Realization:
    p_ev_actual: np.ndarray
    source: str = "gaussian-moments"

    def __post_init__(self):
        if np.any(self.p_ev_actual < 0):
            raise ValueError("realized demand must be nonnegative")


@dataclass(frozen=True, eq=False)
class RedispatchResult:
    slack_up: np.ndarray
    slack_down: np.ndarray
    q_slack_up: np.ndarray
    q_slack_down: np.ndarray
    balance_slacks: np.ndarray
    voltage_slacks: np.ndarray
    line_slacks: np.ndarray
    penalty_cost: float
    generation_cost: float
    feasible_flag: bool
    p_actual: np.ndarray = field(repr=False, default=None)

    @property
    def d_bar(self):
        return float(self.slack_up.sum())

    @property
    def d_under(self):
        return float(self.slack_down.sum())

    @property
    def total_cost(self):
        return self.generation_cost + self.penalty_cost

    def category_max(self):
        return {
            "balance": float(self.balance_slacks.max(initial=0.0)),
            "voltage": float(self.voltage_slacks.max(initial=0.0)),
            "line": float(self.line_slacks.max(initial=0.0)),
            "generator": float(max(self.slack_up.max(initial=0.0), self.slack_down.max(initial=0.0),
                                   self.q_slack_up.max(initial=0.0),
                                   self.q_slack_down.max(initial=0.0))),
        }


@dataclass(frozen=True)
class EvalSummary:
    mode: str
    mean_cost: float
    d_bar: float
    d_under: float
    violation_pct: float
    breakdown: dict
    n_realizations: int
    seed: int
    cost_increase_pct: float = float("nan")


def sample_realizations(mean, cov, count, seed=None):
    """Gaussian draws of station demand, censored at zero (shape ``(count, n)``)."""
    if count < 1:
        raise ValueError("count must be positive")
    mean = check_vector(mean, "mean")
    cov = check_covariance(cov, size=mean.shape[0])
    rng = check_random_state(seed)
    if not np.any(cov):
        return np.tile(mean, (count, 1))
    w, V = np.linalg.eigh(cov)
    F = V * np.sqrt(np.clip(w, 0.0, None))
    draws = mean + rng.standard_normal((count, mean.shape[0])) @ F.T
    return np.maximum(draws, 0.0)


def sample_behavioral_realizations(cfg, prices, chargers, lambda_ref, count, seed):
    """Full re-simulation with fresh owners; each owner scales its own charge with price.

    Returns ``(P, counts)`` with realized demand and post-switching vehicle counts.
    """
    if count < 1:
        raise ValueError("count must be positive")
    P, N = [], []
    for k in range(count):
        pop = behavior.sample_population(cfg, behavior.scenario_rng(seed, k))
        states = behavior.station_states(prices, pop.home_counts, chargers, cfg.service_minutes)
        sc = behavior.simulate_scenario(pop, states)
        P.append(behavior.realized_demand(pop, sc, prices, lambda_ref))
        N.append(sc.counts)
    return np.array(P), np.array(N)


class Redispatcher:
    """Slack LP for one network and frozen dispatch, reused across realizations.

    Variable layout (per-unit): s_up, s_dn, t_up, t_dn (per generator),
    b_p+, b_p-, b_q+, b_q- (per bus), o+, o- (per non-root bus), e (per line),
    p_flow, q_flow (per line, free), v (per non-root bus, free).
    """

    def __init__(self, net, dispatch, z=0.2, penalties=None, polygon_edges=12, tol=1e-6):
        self.net = net
        self.d = dispatch
        self.z = z
        self.pen = penalties or Penalties()
        self.tol = tol
        base = net.base_mva
        G, nb, L = net.n_generators, net.n_buses, net.n_lines
        self.nr = np.array([net.bus_index[b] for b in net.nonroot_ids])
        self.root = net.bus_index[net.root.id]
        b = len(self.nr)
        self.Eg = net.incidence("generator")
        self.Es = net.incidence("station")
        self.C = _branch_incidence(net)
        self.A = downstream_matrix(net).A
        self.poly = polygon_coefficients(polygon_edges)

        sizes = [("s_up", G), ("s_dn", G), ("t_up", G), ("t_dn", G), ("bp_p", nb), ("bp_m", nb),
                 ("bq_p", nb), ("bq_m", nb), ("o_p", b), ("o_m", b), ("e", L), ("pf", L),
                 ("qf", L), ("v", b)]
        self.sl = {}
        k = 0
        for name, n in sizes:
            self.sl[name] = slice(k, k + n)
            k += n
        self.nvar = k
        c = np.zeros(k)
        c[self.sl["s_up"]] = c[self.sl["s_dn"]] = self.pen.generator * base
        c[self.sl["t_up"]] = c[self.sl["t_dn"]] = self.pen.generator_q * base
        c[self.sl["bp_p"]] = c[self.sl["bp_m"]] = self.pen.balance * base
        c[self.sl["bq_p"]] = c[self.sl["bq_m"]] = self.pen.balance_q * base
        c[self.sl["o_p"]] = c[self.sl["o_m"]] = self.pen.voltage
        c[self.sl["e"]] = self.pen.line * base
        self.c = c
        bounds = [(0, None)] * self.sl["e"].stop + [(None, None)] * (k - self.sl["e"].stop)
        self.bounds = bounds
        self._build()

    def _block(self, rows, entries):
        M = sp.lil_matrix((rows, self.nvar))
        for name, mat in entries:
            s = self.sl[name]
            M[:, s] = mat
        return M

    def _build(self):
        net = self.net
        G, nb, L, b = net.n_generators, net.n_buses, net.n_lines, len(self.nr)
        I_g, I_b, I_nb, I_l = sp.eye(G), sp.eye(b), sp.eye(nb), sp.eye(L)
        Eg = sp.csr_matrix(self.Eg)
        C = sp.csr_matrix(self.C)
        # equalities: real balance, reactive balance, voltage drop
        Aeq_p = self._block(nb, [("s_up", -Eg), ("s_dn", Eg), ("bp_p", I_nb), ("bp_m", -I_nb),
                                 ("pf", -C)])
        Aeq_q = self._block(nb, [("t_up", -Eg), ("t_dn", Eg), ("bq_p", I_nb), ("bq_m", -I_nb),
                                 ("qf", -C)])
        # v_to - v_from + 2(r p + x q) = 0 with the root voltage moved to the rhs
        to_nr = np.zeros((L, b))
        from_nr = np.zeros((L, b))
        nr_pos = {bus: j for j, bus in enumerate(self.nr)}
        self.from_root = np.zeros(L)
        for l in range(L):
            to_nr[l, nr_pos[net.line_to[l]]] = 1.0
            f = net.line_from[l]
            if f == self.root:
                self.from_root[l] = 1.0
            else:
                from_nr[l, nr_pos[f]] = 1.0
        Aeq_v = self._block(L, [("v", sp.csr_matrix(to_nr - from_nr)),
                                ("pf", sp.diags(2 * net.r)), ("qf", sp.diags(2 * net.x))])
        self.A_eq = sp.vstack([Aeq_p, Aeq_q, Aeq_v]).tocsr()
        # inequalities: generator limits, voltage limits, line polygon
        E = len(self.poly)
        rows = [
            self._block(G, [("s_up", -I_g), ("s_dn", I_g)]),   # P - s_up + s_dn <= pmax
            self._block(G, [("s_up", I_g), ("s_dn", -I_g)]),   # -(...) <= -pmin
            self._block(G, [("t_up", -I_g), ("t_dn", I_g)]),
            self._block(G, [("t_up", I_g), ("t_dn", -I_g)]),
            self._block(b, [("v", I_b), ("o_p", -I_b)]),
            self._block(b, [("v", -I_b), ("o_m", -I_b)]),
        ]
        smax = net.s_max_pu
        for b1, b2, b3 in self.poly:
            rows.append(self._block(L, [("pf", b1 * I_l), ("qf", b2 * I_l), ("e", -b3 * I_l)]))
        self.A_ub = sp.vstack(rows).tocsr()
        self.n_poly = E
        self.smax = smax

    def schedule(self, p_ev_actual):
        base = self.net.base_mva
        S = float(np.sum(p_ev_actual - self.d.mean_ref))
        P = (self.d.p_g + self.d.alpha * S) / base
        Q = (self.d.q_g + self.z * self.d.alpha * S) / base
        return P, Q

    def _loads(self, p_ev_actual):
        base = self.net.base_mva
        pev = self.Es @ p_ev_actual / base
        return self.net.p_load_pu + pev, self.net.q_load_pu + self.z * pev

    def _rhs(self, p_ev_actual):
        net = self.net
        P, Q = self.schedule(p_ev_actual)
        pl, ql = self._loads(p_ev_actual)
        v_root = self.d.v2[self.root]
        b_eq = np.concatenate([pl - self.Eg @ P, ql - self.Eg @ Q, self.from_root * v_root])
        p_min, p_max, q_min, q_max = net.gen_bounds_pu
        v_lo, v_hi = net.v2_bounds
        b_ub = np.concatenate([p_max - P, P - p_min, q_max - Q, Q - q_min,
                               v_hi[self.nr], -v_lo[self.nr]]
                              + [b3 * self.smax for _, _, b3 in self.poly])
        return b_eq, b_ub

    def _frozen_state(self, p_ev_actual):
        """Flows and voltages with zero slacks; ``None`` if any limit is broken."""
        net = self.net
        P, Q = self.schedule(p_ev_actual)
        p_min, p_max, q_min, q_max = net.gen_bounds_pu
        tol = self.tol
        if np.any(P > p_max + tol) or np.any(P < p_min - tol) or \
                np.any(Q > q_max + tol) or np.any(Q < q_min - tol):
            return None
        pl, ql = self._loads(p_ev_actual)
        netp = (pl - self.Eg @ P)[self.nr]
        netq = (ql - self.Eg @ Q)[self.nr]
        pf = self.A @ netp
        qf = self.A @ netq
        v = self.d.v2[self.root] - 2 * self.A.T @ (net.r * pf + net.x * qf)
        v_lo, v_hi = net.v2_bounds
        if np.any(v > v_hi[self.nr] + tol) or np.any(v < v_lo[self.nr] - tol):
            return None
        for b1, b2, b3 in self.poly:
            if np.any(b1 * pf + b2 * qf > b3 * self.smax + tol):
                return None
        return P

    def evaluate(self, p_ev_actual):
        p_ev_actual = check_vector(p_ev_actual, "p_ev_actual", size=self.net.n_stations,
                                   nonnegative=True)
        base = self.net.base_mva
        G, nb, L, b = self.net.n_generators, self.net.n_buses, self.net.n_lines, len(self.nr)
        P = self._frozen_state(p_ev_actual)
        if P is not None:
            zg, zb, zl = np.zeros(G), np.zeros(2 * nb), np.zeros(L)
            return RedispatchResult(zg, zg, zg, zg, np.zeros(4 * nb), np.zeros(2 * b), zl,
                                    0.0, nominal_cost(base * P, self.net.generators), True,
                                    base * P)
        b_eq, b_ub = self._rhs(p_ev_actual)
        res = linprog(self.c, A_ub=self.A_ub, b_ub=b_ub, A_eq=self.A_eq, b_eq=b_eq,
                      bounds=self.bounds, method="highs")
        # slack completeness: nodal balance slacks and voltage/line slacks make
        # any realization feasible
        if res.status != 0:
            raise RuntimeError(f"redispatch LP failed: {res.message}")
        x = np.clip(res.x, 0.0, None)
        sl = self.sl
        Ppu, _ = self.schedule(p_ev_actual)
        p_act = base * (Ppu - x[sl["s_up"]] + x[sl["s_dn"]])
        s_up, s_dn = base * x[sl["s_up"]], base * x[sl["s_dn"]]
        t_up, t_dn = base * x[sl["t_up"]], base * x[sl["t_dn"]]
        bal = base * np.concatenate([x[sl["bp_p"]], x[sl["bp_m"]], x[sl["bq_p"]], x[sl["bq_m"]]])
        volt = np.concatenate([x[sl["o_p"]], x[sl["o_m"]]])
        line = base * x[sl["e"]]
        penalty = float(self.c[: sl["e"].stop] @ x[: sl["e"].stop])
        thr = self.tol * base
        feasible = not (max(s_up.max(), s_dn.max(), t_up.max(), t_dn.max(), bal.max(),
                            line.max()) > thr or volt.max() > self.tol)
        return RedispatchResult(s_up, s_dn, t_up, t_dn, bal, volt, line, penalty,
                                nominal_cost(p_act, self.net.generators), feasible, p_act)


def redispatch(net, A, dispatch, realization, penalties=None, z=0.2, polygon_edges=12):
    """Evaluate one realization (see :class:`Redispatcher`)."""
    p = realization.p_ev_actual if isinstance(realization, Realization) else realization
    return Redispatcher(net, dispatch, z, penalties, polygon_edges).evaluate(p)


def evaluate_dispatch(net, dispatch, P, z=0.2, penalties=None, polygon_edges=12):
    rd = Redispatcher(net, dispatch, z, penalties, polygon_edges)
    return [rd.evaluate(p) for p in P]


def violation_stats(results, tol=1e-4, base_mva=1.0):
    """Share of realizations (%) with any slack above ``tol`` (per-unit), by category."""
    if not results:
        raise ValueError("no results")
    thr = {"balance": tol * base_mva, "voltage": tol, "line": tol * base_mva,
           "generator": tol * base_mva}
    flags = np.array([[r.category_max()[c] > thr[c] for c in CATEGORIES] for r in results])
    any_v = flags.any(axis=1)
    pct = 100.0 * any_v.mean()
    breakdown = {c: 100.0 * flags[:, i].mean() for i, c in enumerate(CATEGORIES)}
    return pct, breakdown


def summarize(mode, results, seed, tol=1e-4, base_mva=1.0):
    pct, breakdown = violation_stats(results, tol, base_mva)
    return EvalSummary(mode=mode,
                       mean_cost=float(np.mean([r.total_cost for r in results])),
                       d_bar=float(np.mean([r.d_bar for r in results])),
                       d_under=float(np.mean([r.d_under for r in results])),
                       violation_pct=pct, breakdown=breakdown,
                       n_realizations=len(results), seed=seed)


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    system: str = ""

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "average_cost", "cost_increase_pct", "d_bar", "d_under",
                    "violation_pct", "balance_pct", "voltage_pct", "line_pct", "generator_pct",
                    "n_realizations", "seed"])
        for s in self.rows:
            w.writerow([s.mode] + [fmt(v) for v in (s.mean_cost, s.cost_increase_pct, s.d_bar,
                                                    s.d_under, s.violation_pct)]
                       + [fmt(s.breakdown[c]) for c in CATEGORIES] + [s.n_realizations, s.seed])
        return buf.getvalue()

    def to_text(self):
        names = {"deterministic": "Deterministic", "drcc": "DRCC", "drcc_pm": "DRCC+PM"}
        heads = [names.get(s.mode, s.mode) for s in self.rows]
        width = max(14, *(len(h) + 2 for h in heads))
        lines = [f"Post-optimization analysis{(' - ' + self.system) if self.system else ''}",
                 f"{'Benchmark':<28}" + "".join(f"{h:>{width}}" for h in heads)]
        best = min(s.mean_cost for s in self.rows)

        def row(label, vals):
            return f"{label:<28}" + "".join(f"{v:>{width}}" for v in vals)

        lines.append(row("Average cost", [f"{s.mean_cost:.2f}" for s in self.rows]))
        lines.append(row("Cost Increase (%)", ["-" if s.mean_cost == best else
                                               f"{s.cost_increase_pct:.2f}" for s in self.rows]))
        lines.append(row("Imbalance metric D_bar", [f"{s.d_bar:.4f}" for s in self.rows]))
        lines.append(row("Constraint violation (%)", [f"{s.violation_pct:.1f}" for s in self.rows]))
        return "\n".join(lines) + "\n"


def fmt(v):
    """Fixed 9-significant-digit formatting for reproducible CSVs."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == 0:
        return "0"
    return f"{v:.9g}"


def compare(summaries, system=""):
    """Table of per-mode summaries with cost increase relative to the cheapest mode."""
    summaries = list(summaries.values()) if isinstance(summaries, dict) else list(summaries)
    if len(summaries) < 2:
        raise ValueError("at least two modes are needed for a comparison")
    keys = {(s.seed, s.n_realizations) for s in summaries}
    if len(keys) != 1:
        raise ValueError("modes were evaluated on different realization sets")
    best = min(s.mean_cost for s in summaries)
    rows = tuple(EvalSummary(**{**s.__dict__,
                                "cost_increase_pct": 100.0 * (s.mean_cost - best) / best})
                 for s in summaries)
    return ComparisonReport(rows, system)
