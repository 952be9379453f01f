"""Synthetic benchmark generator: AR(1) designs, signal draws, responses."""

import numpy as np
import pytest

from onestep_select import SimConfig, Support, design_matrix, draw_response, simulate
from onestep_select.families import GAUSSIAN, LOGISTIC, POISSON
from onestep_select.simulate import RateOverflowError


class TestConfig:
    def test_family_tag_resolution(self):
        cfg = SimConfig(n=10, p=4, s_star=2, family="gaussian")
        assert cfg.family == GAUSSIAN
        cfg = SimConfig(n=10, p=4, s_star=2, family=POISSON)
        assert cfg.family == POISSON
        with pytest.raises(ValueError):
            SimConfig(n=10, p=4, s_star=2, family="probit")

    def test_validation(self):
        with pytest.raises(ValueError, match="n must"):
            SimConfig(n=0, p=4, s_star=2)
        with pytest.raises(ValueError, match="p must"):
            SimConfig(n=10, p=0, s_star=0)
        with pytest.raises(ValueError, match="rho"):
            SimConfig(n=10, p=4, s_star=2, rho=1.0)
        with pytest.raises(ValueError, match="rho"):
            SimConfig(n=10, p=4, s_star=2, rho=-0.1)
        with pytest.raises(ValueError, match="s_star"):
            SimConfig(n=10, p=4, s_star=5)
        with pytest.raises(ValueError, match="signal"):
            SimConfig(n=10, p=4, s_star=2, signal_low=3.0, signal_high=2.0)
        with pytest.raises(ValueError, match="signal"):
            SimConfig(n=10, p=4, s_star=2, signal_low=0.0, signal_high=1.0)


class TestDesign:
    def test_ar1_correlation_profile(self):
        rho = 0.6
        X = design_matrix(200_000, 5, rho, np.random.default_rng(0))
        C = np.corrcoef(X.T)
        for j in range(5):
            for k in range(5):
                assert C[j, k] == pytest.approx(rho ** abs(j - k), abs=0.01)
        assert X.var(axis=0) == pytest.approx(np.ones(5), abs=0.02)

    def test_independent_columns_at_rho_zero(self):
        X = design_matrix(100_000, 3, 0.0, np.random.default_rng(1))
        C = np.corrcoef(X.T)
        off = C[~np.eye(3, dtype=bool)]
        assert np.abs(off).max() < 0.02


class TestResponses:
    def test_logistic_binary(self):
        y = draw_response(LOGISTIC, np.linspace(-3, 3, 500),
                          np.random.default_rng(0))
        assert set(np.unique(y)) <= {0.0, 1.0}

    def test_logistic_mean_tracks_sigmoid(self):
        eta = np.full(200_000, 1.0)
        y = draw_response(LOGISTIC, eta, np.random.default_rng(3))
        assert y.mean() == pytest.approx(1 / (1 + np.exp(-1.0)), abs=0.005)

    def test_gaussian_unit_noise(self):
        eta = np.zeros(200_000)
        y = draw_response(GAUSSIAN, eta, np.random.default_rng(2))
        assert y.mean() == pytest.approx(0.0, abs=0.01)
        assert y.std() == pytest.approx(1.0, abs=0.01)

    def test_poisson_counts(self):
        y = draw_response(POISSON, np.full(1000, 1.5), np.random.default_rng(4))
        assert np.all(y >= 0)
        assert np.all(y == np.round(y))
        assert y.mean() == pytest.approx(np.exp(1.5), rel=0.1)

    def test_poisson_rate_cap(self):
        with pytest.raises(RateOverflowError):
            draw_response(POISSON, np.array([40.0]), np.random.default_rng(0))


class TestSimulate:
    def test_shapes_and_truth(self):
        cfg = SimConfig(n=50, p=12, rho=0.3, s_star=4, signal_low=1.0,
                        signal_high=2.0, family="gaussian", seed=7)
        data, theta_star, delta_star = simulate(cfg)
        assert data.X.shape == (50, 12)
        assert data.y.shape == (50,)
        assert data.family == GAUSSIAN
        assert delta_star == Support.from_indices(12, [1, 2, 3, 4])
        mags = np.abs(theta_star[:4])
        assert np.all((mags > 1.0) & (mags < 2.0))
        assert np.all(theta_star[4:] == 0.0)

    def test_deterministic_in_seed(self):
        cfg = SimConfig(n=30, p=6, s_star=2, signal_low=0.5, signal_high=1.0,
                        family="logistic", seed=42)
        a = simulate(cfg)
        b = simulate(cfg)
        np.testing.assert_array_equal(a[0].X, b[0].X)
        np.testing.assert_array_equal(a[0].y, b[0].y)
        np.testing.assert_array_equal(a[1], b[1])
        c = simulate(SimConfig(n=30, p=6, s_star=2, signal_low=0.5,
                               signal_high=1.0, family="logistic", seed=43))
        assert not np.array_equal(a[0].y, c[0].y)

    def test_signs_vary(self):
        cfg = SimConfig(n=20, p=30, s_star=20, signal_low=1.0,
                        signal_high=1.5, family="gaussian", seed=1)
        _, theta_star, _ = simulate(cfg)
        assert (theta_star[:20] > 0).any() and (theta_star[:20] < 0).any()

    def test_poisson_moderate_signal_succeeds(self):
        cfg = SimConfig(n=40, p=5, s_star=1, signal_low=0.3, signal_high=0.6,
                        family="poisson", seed=3)
        data, _, _ = simulate(cfg)
        assert np.all(data.y >= 0)

    def test_poisson_hopeless_signal_raises(self):
        cfg = SimConfig(n=40, p=5, s_star=5, signal_low=49.0,
                        signal_high=50.0, family="poisson", seed=3)
        with pytest.raises(RuntimeError, match="overflow"):
            simulate(cfg)
