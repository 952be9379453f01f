"""GLM family primitives: link derivatives, restricted likelihood calculus,
overflow policy, and the curvature checks."""

import math

import numpy as np
import pytest

from onestep_select import (
    GAUSSIAN,
    LOGISTIC,
    POISSON,
    Dataset,
    LinkOverflowError,
    Support,
    family_from_tag,
    link_eval,
    log_lik,
    remainder_bound_check,
    restricted_grad,
    restricted_hess,
    restricted_objective,
    self_concordance_check,
)
from onestep_select.families import POISSON_CLAMP


class TestLinkEval:
    def test_gaussian_is_quadratic(self):
        assert link_eval(GAUSSIAN, 3.0, 0) == pytest.approx(4.5)
        assert link_eval(GAUSSIAN, 3.0, 1) == 3.0
        assert link_eval(GAUSSIAN, -7.0, 2) == 1.0
        assert link_eval(GAUSSIAN, 5.0, 3) == 0.0

    def test_poisson_is_exponential(self):
        for order in range(4):
            assert link_eval(POISSON, 1.3, order) == pytest.approx(math.exp(1.3))

    def test_logistic_values(self):
        assert link_eval(LOGISTIC, 0.0, 0) == pytest.approx(math.log(2))
        assert link_eval(LOGISTIC, 0.0, 1) == 0.5
        assert link_eval(LOGISTIC, 0.0, 2) == 0.25
        assert link_eval(LOGISTIC, 0.0, 3) == 0.0

    def test_logistic_softplus_stable_for_large_arguments(self):
        """log(1+e^x) evaluated as x + log(1+e^{-x}): no overflow, exact tail."""
        assert link_eval(LOGISTIC, 800.0, 0) == pytest.approx(800.0)
        assert link_eval(LOGISTIC, -800.0, 0) == 0.0
        assert link_eval(LOGISTIC, 50.0, 0) == pytest.approx(50.0, abs=1e-12)

    def test_poisson_overflow_typed(self):
        with pytest.raises(LinkOverflowError):
            link_eval(POISSON, POISSON_CLAMP + 1, 0)
        err = None
        try:
            link_eval(POISSON, -800.0, 2)
        except LinkOverflowError as e:
            err = e
        assert err is not None and err.max_abs_eta == 800.0

    def test_bad_order_rejected(self):
        with pytest.raises(ValueError):
            link_eval(LOGISTIC, 0.0, 4)

    def test_family_from_tag(self):
        assert family_from_tag("logistic") == LOGISTIC
        with pytest.raises(ValueError):
            family_from_tag("probit")

    def test_derivative_ladder_finite_differences(self):
        """Each order is the numerical derivative of the one below."""
        h = 1e-6
        rng = np.random.default_rng(0)
        for fam in (LOGISTIC, POISSON, GAUSSIAN):
            for x in rng.uniform(-3, 3, size=20):
                for order in (0, 1, 2):
                    num = (
                        link_eval(fam, x + h, order) - link_eval(fam, x - h, order)
                    ) / (2 * h)
                    assert num == pytest.approx(
                        link_eval(fam, x, order + 1), abs=5e-5, rel=5e-5
                    )


class TestRestrictedCalculus:
    """Gradient, Hessian and objective of the penalized restricted
    log-likelihood agree with each other and with direct formulas."""

    def _instance(self, seed, family=LOGISTIC):
        rng = np.random.default_rng(seed)
        n, p = 18, 5
        X = rng.standard_normal((n, p))
        if family.tag == "logistic":
            y = rng.integers(0, 2, size=n).astype(float)
        elif family.tag == "poisson":
            y = rng.poisson(2.0, size=n).astype(float)
        else:
            y = rng.standard_normal(n)
        return Dataset(X=X, y=y, family=family)

    def test_empty_support_is_null_model(self):
        data = self._instance(1)
        d0 = Support.empty(5)
        w = np.zeros(0)
        assert restricted_objective(data, d0, w) == pytest.approx(
            log_lik(data, np.zeros(5))
        )
        assert restricted_grad(data, d0, w).shape == (0,)
        assert restricted_hess(data, d0, w).shape == (0, 0)

    @pytest.mark.parametrize("family", [LOGISTIC, POISSON, GAUSSIAN])
    def test_grad_matches_finite_differences(self, family):
        data = self._instance(7, family)
        delta = Support.from_indices(5, [1, 3, 4])
        rng = np.random.default_rng(11)
        w = 0.3 * rng.standard_normal(3)
        g = restricted_grad(data, delta, w)
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            num = (
                restricted_objective(data, delta, w + e)
                - restricted_objective(data, delta, w - e)
            ) / (2 * h)
            assert g[i] == pytest.approx(num, rel=1e-6, abs=1e-6)

    @pytest.mark.parametrize("family", [LOGISTIC, POISSON, GAUSSIAN])
    def test_hess_matches_finite_differences(self, family):
        data = self._instance(5, family)
        delta = Support.from_indices(5, [2, 5])
        w = np.array([0.2, -0.4])
        H = restricted_hess(data, delta, w)
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            num = (
                restricted_grad(data, delta, w + e)
                - restricted_grad(data, delta, w - e)
            ) / (2 * h)
            np.testing.assert_allclose(-H[:, i], num, rtol=1e-4, atol=1e-5)

    def test_hessian_dominates_identity(self):
        """The ridge penalty contributes a full identity block, so the
        negative objective curvature has smallest eigenvalue >= 1."""
        for seed in range(6):
            data = self._instance(seed)
            delta = Support.from_indices(5, [1, 2, 4])
            w = np.random.default_rng(seed).standard_normal(3)
            H = restricted_hess(data, delta, w)
            assert np.linalg.eigvalsh(H).min() >= 1.0 - 1e-10

    def test_concave_along_segments(self):
        data = self._instance(9)
        delta = Support.from_indices(5, [1, 2])
        rng = np.random.default_rng(4)
        for _ in range(10):
            a = rng.standard_normal(2)
            b = rng.standard_normal(2)
            mid = restricted_objective(data, delta, 0.5 * (a + b))
            avg = 0.5 * (
                restricted_objective(data, delta, a)
                + restricted_objective(data, delta, b)
            )
            assert mid >= avg
            if not np.allclose(a, b):
                assert mid > avg


class TestCurvatureChecks:
    def test_logistic_grid(self):
        grid = np.arange(-30, 30.0001, 0.01)
        rep = self_concordance_check(LOGISTIC, grid, c3=1.0)
        assert rep.passed
        assert rep.max_ratio <= 1.0 + 1e-12

    def test_poisson_ratio_is_exactly_one(self):
        grid = np.arange(-30, 30.0001, 0.01)
        rep = self_concordance_check(POISSON, grid, c3=1.0)
        assert rep.passed
        assert rep.max_ratio == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_ratio_zero(self):
        rep = self_concordance_check(GAUSSIAN, np.linspace(-5, 5, 100), c3=0.0)
        assert rep.passed
        assert rep.max_ratio == 0.0

    def test_remainder_gaussian_exact(self):
        rep = remainder_bound_check(GAUSSIAN, 1.7, -2.3)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)
        assert rep.passed

    def test_remainder_poisson_hand_value(self):
        # psi = exp: |e - 1 - 1 - 1/2| = e - 2.5 against (1/6) e^{1} * 1
        rep = remainder_bound_check(POISSON, 0.0, 1.0, c3=1.0)
        assert rep.lhs == pytest.approx(math.e - 2.5, abs=1e-12)
        assert rep.rhs == pytest.approx(math.e / 6.0, abs=1e-12)
        assert rep.passed

    def test_remainder_logistic_grid(self):
        pts = np.linspace(-5, 5, 21)
        for u in pts:
            for h in pts:
                assert remainder_bound_check(LOGISTIC, u, h, c3=1.0).passed


class TestDataset:
    def test_logistic_requires_binary(self):
        X = np.ones((3, 1))
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.array([0.0, 1.0, 2.0]), family=LOGISTIC)

    def test_poisson_requires_counts(self):
        X = np.ones((2, 1))
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.array([1.0, -1.0]), family=POISSON)
        with pytest.raises(ValueError):
            Dataset(X=X, y=np.array([1.5, 2.0]), family=POISSON)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            Dataset(X=np.ones(3), y=np.ones(3), family=GAUSSIAN)
        with pytest.raises(ValueError):
            Dataset(X=np.ones((3, 2)), y=np.ones(4), family=GAUSSIAN)
