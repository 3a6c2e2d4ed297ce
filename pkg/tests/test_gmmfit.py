import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from divjudge.distributions import isotropic_mixture, sample
from divjudge.errors import DataError
from divjudge.gmmfit import EMConfig, fit_gmm, fit_gmm_with_history, kmeans_pp, log_likelihood


class TestEM:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 3))
    def test_history_nondecreasing(self, seed, k, d):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(int(rng.integers(k + 5, 200)), d)) * rng.uniform(0.1, 5.0, d)
        fit = fit_gmm_with_history(x, EMConfig(k=k, n_init=1, seed=seed))
        assert np.all(np.diff(fit.history) >= -1e-8)

    def test_k1_recovers_sample_moments(self):
        x = np.random.default_rng(0).normal([1.0, -2.0], [0.5, 3.0], (1000, 2))
        m = fit_gmm(x, EMConfig(k=1))
        np.testing.assert_allclose(m.components[0].mean, x.mean(axis=0), atol=1e-10)
        np.testing.assert_allclose(np.diag(m.components[0].cov), x.var(axis=0) + 1e-6, rtol=1e-8)

    def test_recovers_separated_mixture(self):
        truth = isotropic_mixture([[-5.0, 0.0], [5.0, 0.0]], [1.0, 1.0], [0.3, 0.7])
        m = fit_gmm(sample(truth, 4000, 0), EMConfig(k=2))
        order = np.argsort([c.mean[0] for c in m.components])
        np.testing.assert_allclose(m.weights[order], [0.3, 0.7], atol=0.03)
        np.testing.assert_allclose(m.components[order[0]].mean, [-5, 0], atol=0.1)

    def test_weights_and_variance_floor(self):
        x = np.vstack([np.zeros((20, 2)), np.ones((20, 2))])  # zero within-cluster spread
        m = fit_gmm(x, EMConfig(k=2, reg=1e-4))
        assert m.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert all(np.all(np.diag(c.cov) >= 1e-4) for c in m.components)

    def test_deterministic(self):
        x = np.random.default_rng(3).normal(size=(200, 2))
        a = fit_gmm_with_history(x, EMConfig(k=3, seed=4))
        b = fit_gmm_with_history(x, EMConfig(k=3, seed=4))
        assert a.history == b.history and a.model == b.model

    def test_best_restart_at_least_single(self):
        x = sample(isotropic_mixture([[0.0], [4.0], [9.0]], [1, 1, 1], [0.3, 0.3, 0.4]), 300, 2)
        best = fit_gmm_with_history(x, EMConfig(k=3, n_init=5, seed=0)).history[-1]
        single = fit_gmm_with_history(x, EMConfig(k=3, n_init=1, seed=0)).history[-1]
        assert best >= single - 1e-9

    def test_history_ends_at_model_likelihood(self):
        x = np.random.default_rng(5).normal(size=(100, 2))
        fit = fit_gmm_with_history(x, EMConfig(k=2))
        assert fit.history[-1] == pytest.approx(log_likelihood(fit.model, x), rel=1e-9)

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            fit_gmm(np.zeros((2, 1)), EMConfig(k=3))

    def test_non_finite(self):
        x = np.ones((10, 2))
        x[0, 0] = np.inf
        with pytest.raises(DataError):
            fit_gmm(x)

    @pytest.mark.parametrize("bad", [{"k": 0}, {"tol": 0}, {"reg": -1}, {"n_init": 0}])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            EMConfig(**bad)


def test_kmeans_pp_picks_data_points():
    x = np.random.default_rng(0).normal(size=(50, 3))
    c = kmeans_pp(x, 4, np.random.default_rng(1))
    assert c.shape == (4, 3)
    assert all(any(np.array_equal(ci, xi) for xi in x) for ci in c)


class TestLogLikelihood:
    def test_single_gaussian_against_scipy(self):
        m = isotropic_mixture([[0.0, 1.0]], [2.0], [1.0])
        x = np.random.default_rng(0).normal(size=(25, 2))
        ref = stats.multivariate_normal([0, 1], 2 * np.eye(2)).logpdf(x).sum()
        assert log_likelihood(m, x) == pytest.approx(ref, rel=1e-12)

    def test_standard_normal_at_origin(self):
        m = isotropic_mixture([[0.0]], [1.0], [1.0])
        assert log_likelihood(m, np.zeros((1, 1))) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_shape_mismatch(self):
        m = isotropic_mixture([[0.0]], [1.0], [1.0])
        with pytest.raises(ValueError):
            log_likelihood(m, np.zeros((3, 2)))


def test_duplicate_row_doubles_contribution():
    m = isotropic_mixture([[0.0, 0.0], [2.0, 1.0]], [1.0, 0.5], [0.4, 0.6])
    row = np.array([[0.3, -0.7]])
    assert log_likelihood(m, np.vstack([row, row])) == pytest.approx(2 * log_likelihood(m, row), rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_fit_beats_initialization(seed):
    x = sample(isotropic_mixture([[0.0, 0.0], [3.0, 3.0]], [1.0, 1.0], [0.3, 0.7]), 100, seed)
    fit = fit_gmm_with_history(x, EMConfig(k=2, seed=seed))
    assert log_likelihood(fit.model, x) >= log_likelihood(fit.init_model, x)
