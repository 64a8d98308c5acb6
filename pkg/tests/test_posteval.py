import dataclasses

import numpy as np
import pytest

from evdrcc.ambiguity import Moments
from evdrcc.behavior import PopulationConfig, sample_population, scenario_rng
from evdrcc.dopf import DopfParams, assemble_model, solve
from evdrcc.network import Bus, Network, downstream_matrix
from evdrcc.posteval import (EvalSummary, Penalties, Realization, Redispatcher, compare,
                             evaluate_dispatch, redispatch, sample_behavioral_realizations,
                             sample_realizations, summarize, violation_stats)

from conftest import make_network


def dispatch_for(net, mean, cov=None, mode="drcc"):
    mean = np.asarray(mean, float)
    cov = np.zeros((len(mean),) * 2) if cov is None else np.asarray(cov, float)
    model = assemble_model(net, downstream_matrix(net), Moments(mean, cov, 10), mean,
                           DopfParams(0.1, np.sqrt(10), 0.2, 12, mode))
    return solve(model)


@pytest.fixture
def tight():
    # generator capacity equals the base load, so any extra EV demand is unserved
    return make_network({1: (1.0, 0.0)}, [(0, 1, 0.01, 0.01, 10.0)],
                        [(0, 0.0, 1.0, -10.0, 10.0, 1.0, 10.0, 0.0)], [(1, 1)])


def test_mean_realization_has_no_slack(two_bus):
    d = dispatch_for(two_bus, [0.5])
    r = redispatch(two_bus, downstream_matrix(two_bus), d, Realization(np.array([0.5])))
    assert r.feasible_flag and r.d_bar == 0 and r.penalty_cost == 0
    assert r.generation_cost == pytest.approx(d.objective_value, rel=1e-6)


def test_unserved_megawatt(tight):
    d = dispatch_for(tight, [0.0])
    assert d.p_g[0] == pytest.approx(1.0, abs=1e-6)
    r = Redispatcher(tight, d).evaluate([1.0])
    assert r.d_bar == pytest.approx(1.0, abs=1e-6)
    assert r.d_bar == pytest.approx(r.slack_up.sum())
    assert not r.feasible_flag
    assert r.p_actual[0] == pytest.approx(1.0, abs=1e-6)


def test_voltage_violation(two_bus):
    d = dispatch_for(two_bus, [0.0])
    buses = list(two_bus.buses)
    buses[1] = dataclasses.replace(buses[1], v2_min=1.30, v2_max=1.40)
    squeezed = Network(two_bus.base_mva, tuple(buses), two_bus.lines, two_bus.generators,
                       two_bus.stations, "squeezed")
    r = Redispatcher(squeezed, d).evaluate([0.0])
    assert r.voltage_slacks.max() > 0
    assert not r.feasible_flag
    pct, breakdown = violation_stats([r])
    assert pct == 100 and breakdown["voltage"] == 100 and breakdown["line"] == 0


def test_lp_path_agrees_with_fast_path(two_bus, monkeypatch):
    d = dispatch_for(two_bus, [0.5])
    rd = Redispatcher(two_bus, d)
    fast = rd.evaluate([0.7])
    monkeypatch.setattr(rd, "_frozen_state", lambda p: None)
    slow = rd.evaluate([0.7])
    assert slow.penalty_cost == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(slow.p_actual, fast.p_actual, atol=1e-9)


def test_violation_stats_extremes(two_bus, tight):
    ok = evaluate_dispatch(two_bus, dispatch_for(two_bus, [0.5]), np.full((5, 1), 0.5))
    assert violation_stats(ok) == (0.0, {"balance": 0.0, "voltage": 0.0, "line": 0.0,
                                         "generator": 0.0})
    bad = evaluate_dispatch(tight, dispatch_for(tight, [0.0]), np.full((4, 1), 2.0))
    assert violation_stats(bad)[0] == 100.0
    with pytest.raises(ValueError):
        violation_stats([])


def test_evaluation_reproducible(two_bus):
    d = dispatch_for(two_bus, [0.5], [[0.04]])
    P1 = sample_realizations([0.5], [[0.04]], 50, 3)
    P2 = sample_realizations([0.5], [[0.04]], 50, 3)
    np.testing.assert_array_equal(P1, P2)
    a = summarize("drcc", evaluate_dispatch(two_bus, d, P1), 3)
    b = summarize("drcc", evaluate_dispatch(two_bus, d, P2), 3)
    assert a == b


def test_sampling():
    np.testing.assert_array_equal(sample_realizations([0.1, 0.2], np.zeros((2, 2)), 4, 0),
                                  np.tile([0.1, 0.2], (4, 1)))
    mean = np.array([1.0, 0.8, 1.2])
    cov = np.array([[0.04, 0.01, 0.0], [0.01, 0.03, 0.0], [0.0, 0.0, 0.05]])
    P = sample_realizations(mean, cov, 10_000, 1)
    assert np.all(np.abs(P.mean(axis=0) / mean - 1) <= 0.05)
    assert P.min() >= 0


def test_behavioral_sampling_conserves_vehicles():
    cfg = PopulationConfig(arrivals=(20, 16, 18, 16))
    P, N = sample_behavioral_realizations(cfg, [0.3, 0.3, 0.3, 0.3], [20, 16, 24, 20],
                                          [0.3, 0.26, 0.3, 0.34], 1000, 9)
    sizes = [len(sample_population(cfg, scenario_rng(9, k))) for k in range(1000)]
    np.testing.assert_array_equal(N.sum(axis=1), sizes)
    assert P.min() >= 0


def summary(mode, cost, seed=1, n=10):
    return EvalSummary(mode, cost, 0.0, 0.0, 0.0, {}, n, seed)


def test_compare():
    rep = compare({"drcc": summary("drcc", 110.0), "drcc_pm": summary("drcc_pm", 100.0)})
    assert [r.cost_increase_pct for r in rep.rows] == [pytest.approx(10.0), 0.0]
    same = compare([summary("a", 5.0), summary("b", 5.0)])
    assert same.rows[0].cost_increase_pct == same.rows[1].cost_increase_pct == 0.0
    with pytest.raises(ValueError, match="two modes"):
        compare([summary("a", 1.0)])
    with pytest.raises(ValueError, match="different realization"):
        compare([summary("a", 1.0, seed=1), summary("b", 1.0, seed=2)])


def test_report_layout(two_bus):
    d = dispatch_for(two_bus, [0.5], [[0.04]])
    P = sample_realizations([0.5], [[0.04]], 20, 0)
    res = evaluate_dispatch(two_bus, d, P)
    rep = compare({m: summarize(m, res, 0) for m in ("deterministic", "drcc", "drcc_pm")},
                  "33-node")
    text = rep.to_text().splitlines()
    assert "Deterministic" in text[1] and "DRCC+PM" in text[1]
    labels = [ln.split("  ")[0] for ln in text[2:]]
    assert labels == ["Average cost", "Cost Increase (%)", "Imbalance metric D_bar",
                      "Constraint violation (%)"]
    assert len(rep.to_csv().splitlines()) == 4


def test_penalties_positive():
    with pytest.raises(ValueError):
        Penalties(line=0)
    with pytest.raises(ValueError):
        Realization(np.array([-0.1]))
