"""End-to-end experiment: simulate -> moments -> dispatch -> post-evaluation.

The in-memory path (:func:`run_experiment`) is used by the tests and the
penetration sweep; the CLI stages in :mod:`evdrcc.cli` persist each step to
CSV through :mod:`evdrcc.io` and read it back, so both paths share the same
numerical kernels.
"""

from dataclasses import dataclass

import numpy as np

from . import ambiguity, behavior, dopf, posteval
from .network import downstream_matrix, load_network, total_load


@dataclass
class StationData:
    prices: np.ndarray
    lambda_ref: np.ndarray
    chargers: np.ndarray

    @classmethod
    def from_network(cls, net):
        return cls(prices=np.array([s.lambda_offered for s in net.stations]),
                   lambda_ref=np.array([s.lambda_nominal for s in net.stations]),
                   chargers=np.array([s.chargers for s in net.stations]))


@dataclass
class MomentSummary:
    """Everything the dispatch stage needs from the scenarios."""

    mean: np.ndarray
    n_bar: np.ndarray
    mean_pm: np.ndarray
    cov: np.ndarray
    k_sc: int


def simulate(cfg, net, seed=None):
    st = StationData.from_network(net)
    seed = cfg.seed if seed is None else seed
    return behavior.simulate_scenarios(cfg.population, st.prices, st.chargers,
                                       cfg.scenarios, seed)


def scenario_arrays(scenarios):
    return (np.array([s.counts for s in scenarios], dtype=float),
            np.array([s.p_ev for s in scenarios], dtype=float))


def moments_from_arrays(cfg, net, counts, p_ev):
    st = StationData.from_network(net)
    m = ambiguity.empirical_moments(p_ev)
    n_bar = counts.mean(axis=0)
    mean_pm = behavior.price_adjusted_mean(n_bar, st.prices, st.lambda_ref,
                                           cfg.population.ch_avg, cfg.population.mean_beta)
    return MomentSummary(mean=m.mean, n_bar=n_bar, mean_pm=mean_pm, cov=m.cov, k_sc=m.k_sc)


def mode_center(ms, mode):
    return ms.mean_pm if mode == "drcc_pm" else ms.mean


def solve_mode(cfg, net, ms, mode, solver=None, eta=None):
    """Dispatch for one mode from precomputed moments."""
    amb = cfg.ambiguity
    params = ambiguity.AmbiguityParams(amb.gamma1, amb.gamma2, amb.epsilon,
                                       "M2" if mode == "drcc_pm" else "M1")
    mom = ambiguity.regularize_covariance(
        ambiguity.Moments(ms.mean, ms.cov, ms.k_sc), amb.ridge)
    e = ambiguity.eta(params) if eta is None else eta
    p = dopf.DopfParams(amb.epsilon, e, cfg.dopf.z, cfg.dopf.polygon_edges, mode)
    model = dopf.assemble_model(net, downstream_matrix(net), mom, mode_center(ms, mode), p)
    from .solvers import CvxpySolver
    return dopf.solve(model, solver or CvxpySolver(cfg.dopf.solver))


def realizations(cfg, net, ms, seed):
    ev = cfg.evaluation
    if ev.source == "gaussian":
        return posteval.sample_realizations(ms.mean_pm, ms.cov, ev.realizations, seed)
    st = StationData.from_network(net)
    P, _ = posteval.sample_behavioral_realizations(cfg.population, st.prices, st.chargers,
                                                   st.lambda_ref, ev.realizations, seed)
    return P


def evaluate(cfg, net, dispatches, P, seed, threads=1):
    """Per-mode summaries and raw redispatch results on a shared realization set."""
    ev = cfg.evaluation
    out, raw = {}, {}
    for mode, d in dispatches.items():
        rd = posteval.Redispatcher(net, d, cfg.dopf.z, ev.penalties, cfg.dopf.polygon_edges)
        results = parallel_map(rd.evaluate, P, threads)
        raw[mode] = results
        out[mode] = posteval.summarize(mode, results, seed, ev.tol, net.base_mva)
    return out, raw


def parallel_map(fn, items, threads=1):
    """Map preserving input order; any thread count gives identical results."""
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_experiment(cfg, seed=None, threads=1, net=None):
    """Full in-memory run for one master seed; returns a dict of intermediate results."""
    seed = cfg.seed if seed is None else seed
    net = net or load_network(cfg.network_path)
    counts, p_ev = scenario_arrays(simulate(cfg, net, seed))
    ms = moments_from_arrays(cfg, net, counts, p_ev)
    dispatches = {m: solve_mode(cfg, net, ms, m) for m in cfg.dopf.modes}
    P = realizations(cfg, net, ms, seed)
    summaries, raw = evaluate(cfg, net, dispatches, P, seed, threads)
    report = posteval.compare(summaries, net.name) if len(summaries) > 1 else None
    return dict(net=net, moments=ms, dispatches=dispatches, realizations=P,
                summaries=summaries, results=raw, report=report)


def penetration_sweep(cfg, evcd_targets_mw, mode="drcc_pm", seed=None, net=None):
    """Objective value at several total EV demand levels.

    The station mean is rescaled to each target total (covariance by the
    square of the factor).  Returns ``[(total_mw, evcd_mw, pct, objective), ...]``.
    """
    net = net or load_network(cfg.network_path)
    counts, p_ev = scenario_arrays(simulate(cfg, net, seed))
    ms = moments_from_arrays(cfg, net, counts, p_ev)
    center = mode_center(ms, mode)
    rows = []
    for target in evcd_targets_mw:
        f = target / center.sum()
        scaled = MomentSummary(mean=ms.mean * f, n_bar=ms.n_bar * f, mean_pm=ms.mean_pm * f,
                               cov=ms.cov * f * f, k_sc=ms.k_sc)
        d = solve_mode(cfg, net, scaled, mode)
        tot, evcd, pct = total_load(net, mode_center(scaled, mode))
        rows.append((tot, evcd, pct, d.objective_value))
    return rows
