import numpy as np
import pytest
from sklearn.base import clone

from evdrcc.ambiguity import (AmbiguityParams, MomentAmbiguitySet, Moments, empirical_moments,
                              eta, membership_check, regularize_covariance)


def test_moment_examples():
    m = empirical_moments(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_allclose(m.mean, [2, 3])
    np.testing.assert_allclose(m.cov, [[1, 1], [1, 1]])
    assert m.k_sc == 2
    one = empirical_moments(np.array([[1.0, 5.0]]))
    np.testing.assert_array_equal(one.cov, np.zeros((2, 2)))
    same = empirical_moments([np.array([0.2, 0.3])] * 7)
    np.testing.assert_allclose(same.mean, [0.2, 0.3])
    np.testing.assert_allclose(same.cov, 0.0, atol=1e-30)


def test_moments_match_numpy(rng):
    P = rng.gamma(2.0, 0.3, size=(500, 4))
    m = empirical_moments(P)
    np.testing.assert_allclose(m.cov, np.cov(P, rowvar=False, bias=True), atol=1e-14)
    assert np.abs(m.cov - m.cov.T).max() <= 1e-12
    assert np.linalg.eigvalsh(m.cov).min() >= -1e-10


def test_regularization():
    pd = Moments(np.zeros(2), np.array([[2.0, 0.5], [0.5, 1.0]]), 10)
    assert regularize_covariance(pd, 0.0) is pd
    z = regularize_covariance(Moments(np.zeros(3), np.zeros((3, 3)), 1), 1e-3)
    np.testing.assert_allclose(z.cov, 1e-6 * np.eye(3))
    r = regularize_covariance(Moments(np.zeros(2), np.ones((2, 2)), 2), 1e-3)
    assert np.linalg.eigvalsh(r.cov).min() > 0


@pytest.mark.parametrize("g1,g2,eps,expected", [
    (0.1, 1.0, 0.1, np.sqrt(10)), (0.5, 1.0, 0.1, np.sqrt(10)), (0.0, 1.0, 0.5, 1.0)])
def test_eta_examples(g1, g2, eps, expected):
    assert eta(AmbiguityParams(g1, g2, eps)) == pytest.approx(expected, abs=1e-12)


def test_eta_monotone():
    eps = np.linspace(0.01, 0.99, 60)
    vals = [eta(AmbiguityParams(0.1, 1.0, e)) for e in eps]
    assert np.all(np.diff(vals) <= 1e-12)
    g2 = np.linspace(1, 3, 40)
    vals = [eta(AmbiguityParams(0.1, g, 0.1)) for g in g2]
    assert np.all(np.diff(vals) >= -1e-12)


def test_params_validated():
    for bad in (dict(gamma1=-1), dict(gamma2=0.5), dict(epsilon=0), dict(epsilon=1),
                dict(mode="M3")):
        with pytest.raises(ValueError):
            AmbiguityParams(**bad)


def test_membership_examples():
    m = Moments(np.array([1.0, 2.0]), np.array([[2.0, 0.3], [0.3, 1.0]]), 50)
    p = AmbiguityParams(0.0, 1.0, 0.1)
    assert membership_check(m.mean, m.cov, m, p) == (True, True)
    m1 = Moments(np.zeros(1), np.array([[4.0]]), 10)
    assert membership_check([1.0], [[0.0]], m1, AmbiguityParams(0.2, 1.0, 0.1))[0] is False
    assert membership_check([0.8], [[0.0]], m1, AmbiguityParams(0.2, 1.0, 0.1))[0] is True
    # second moment about the reference grows with the mean offset
    assert membership_check([1.0], [[4.0]], m1, AmbiguityParams(1.0, 1.0, 0.1))[1] is False
    assert membership_check([1.0], [[4.0]], m1, AmbiguityParams(1.0, 1.25, 0.1))[1] is True
    with pytest.raises(ValueError, match="singular"):
        membership_check([0, 0], np.zeros((2, 2)), Moments(np.zeros(2), np.ones((2, 2)), 2), p)


def test_estimator(rng):
    X = rng.normal([1, 2, 3], 0.5, size=(200, 3))
    s = MomentAmbiguitySet().fit(X)
    assert s.eta_ == pytest.approx(np.sqrt(10))
    np.testing.assert_allclose(s.center_, X.mean(axis=0))
    assert s.contains(s.mean_, s.covariance_) == (True, True)
    s2 = clone(s).fit(X, mean_ref=X.mean(axis=0) + 0.5)
    assert s2.params_.mode == "M2"
    assert s2.contains(s2.mean_, s2.covariance_)[0] is False
