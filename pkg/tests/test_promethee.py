import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from evdrcc.promethee import (PreferenceThresholds, PrometheeII, net_flows, outranking_flows,
                              preference, preference_index, select_best)


@pytest.mark.parametrize("delta,expected", [(0.5, 0.0), (2.0, 0.5), (5.0, 1.0), (-3.0, 0.0)])
def test_preference_examples(delta, expected):
    assert preference(delta, (1.0, 3.0)) == pytest.approx(expected)


def test_preference_continuity():
    th = PreferenceThresholds(1.0, 3.0)
    for t, lim in ((1.0, 0.0), (3.0, 1.0)):
        for s in (-1e-9, 1e-9):
            assert abs(preference(t + s, th) - lim) <= 1e-6


@settings(max_examples=200)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 3), st.floats(1e-3, 5))
def test_preference_monotone(d1, d2, q, gap):
    lo, hi = sorted((d1, d2))
    th = PreferenceThresholds(q, q + gap)
    assert preference(lo, th) <= preference(hi, th)


def test_thresholds_validated():
    with pytest.raises(ValueError):
        PreferenceThresholds(2.0, 2.0)
    with pytest.raises(ValueError):
        PreferenceThresholds(-0.1, 1.0)


def test_preference_index_examples():
    assert preference_index([1, 0], [0.6, 0.4]) == pytest.approx(0.6)
    assert preference_index([0, 0, 0], [0.2, 0.3, 0.5]) == 0.0
    assert preference_index([0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="sum to 1"):
        preference_index([1, 0], [0.6, 0.5])
    with pytest.raises(ValueError, match="nonnegative"):
        preference_index([1, 0], [1.2, -0.2])


def test_flow_examples():
    f = outranking_flows([[0, 0.6], [0.2, 0]])
    np.testing.assert_allclose(f.phi, [0.4, -0.4])
    np.testing.assert_allclose(f.phi, f.phi_plus - f.phi_minus)
    assert np.all(outranking_flows(np.full((4, 4), 0.3)).phi == 0)
    with pytest.raises(ValueError):
        outranking_flows([[0.0]])


def test_select_examples():
    # stations are 0-based here
    assert select_best([0.4, -0.4], 1) == 0
    assert select_best([0.0, 0.0, 0.0], 2) == 2
    assert select_best([0.1, 0.1, 0.2], 0) == 2
    assert select_best([0.2, 0.1, 0.2], 1) == 0
    np.testing.assert_array_equal(select_best(np.array([[0.0, 0.0], [0.3, 0.1]]), [1, 1]), [1, 0])
    with pytest.raises(ValueError):
        select_best([0.1, 0.2], 5)


def test_flow_invariants_many_instances():
    rng = np.random.default_rng(0)
    pi = rng.uniform(size=(10_000, 5, 5))
    f = outranking_flows(pi)
    assert np.abs(f.phi.sum(axis=-1)).max() <= 1e-9
    assert f.phi_plus.min() >= 0 and f.phi_plus.max() <= 1
    assert f.phi_minus.min() >= 0 and f.phi_minus.max() <= 1


def test_stacked_matches_loop(rng):
    G = rng.normal(size=(20, 4, 3))
    w = rng.dirichlet(np.ones(3), size=20)
    q = rng.uniform(0, 0.5, size=(20, 3))
    p = q + rng.uniform(0.1, 1.0, size=(20, 3))
    stacked = net_flows(G, w, q, p).phi
    for k in range(20):
        n = G.shape[1]
        pi = np.zeros((n, n))
        for a in range(n):
            for b in range(n):
                psi = [preference(G[k, a, j] - G[k, b, j], (q[k, j], p[k, j])) for j in range(3)]
                pi[a, b] = preference_index(psi, w[k])
        np.testing.assert_allclose(stacked[k], outranking_flows(pi).phi, atol=1e-12)


def test_estimator():
    X = np.array([[0.30, 10.0], [0.20, 10.0], [0.25, 2.0]])
    est = PrometheeII(weights=[0.5, 0.5], tau_q=0.0, tau_p=[0.1, 10.0],
                      directions=["minimize", "minimize"])
    phi = est.fit_transform(X)
    assert abs(phi.sum()) < 1e-12
    assert est.ranking_[-1] == 0
    np.testing.assert_allclose(est.transform(X), phi)
    assert est.ranking_[0] == 2 and est.select(0) == 2
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ValueError):
        PrometheeII(weights=[0.5, 0.6]).fit(X)
    with pytest.raises(ValueError):
        PrometheeII(directions=["up", "down"]).fit(X)
