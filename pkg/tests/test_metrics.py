"""Recovery metrics and posterior-averaged prediction."""

import numpy as np
import pytest

from onestep_select import (
    GAUSSIAN,
    LOGISTIC,
    Dataset,
    OlapModel,
    Support,
    f1_score,
    median_model,
    modal_model,
    one_step,
    predict,
    rmse,
    run_chain,
)
from onestep_select.samplers import Trace


def fake_trace(p, mask_path):
    """Trace with a prescribed dense visit path (steps = len - 1)."""
    path = np.asarray(mask_path, dtype=np.uint64)
    steps = path.size - 1
    return Trace(
        p=p,
        steps=steps,
        thin=1,
        retained_steps=range(steps + 1),
        retained_masks=[int(m) for m in path],
        log_scores=np.zeros(steps + 1),
        step_seconds=np.zeros(steps),
        mask_path=path,
    )


class TestF1:
    def test_one_false_negative(self):
        truth = Support.from_indices(20, range(1, 11))
        est = Support.from_indices(20, range(1, 10))
        assert f1_score(est, truth) == pytest.approx(18 / 19)

    def test_ten_false_positives(self):
        truth = Support.from_indices(20, range(1, 11))
        est = Support.full(20)
        assert f1_score(est, truth) == pytest.approx(20 / 30)

    def test_exact_recovery(self):
        d = Support.from_indices(6, [2, 5])
        assert f1_score(d, d) == 1.0

    def test_both_empty_counts_as_perfect(self):
        assert f1_score(Support.empty(4), Support.empty(4)) == 1.0

    def test_disjoint_is_zero(self):
        assert f1_score(
            Support.from_indices(4, [1]), Support.from_indices(4, [2])
        ) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            f1_score(Support.empty(3), Support.empty(4))


class TestMedianModel:
    def test_strictly_above_half(self):
        # coordinate 1 active 2/4 steps, coordinate 2 active 3/4
        trace = fake_trace(2, [0b01, 0b11, 0b10, 0b10])
        assert median_model(trace) == Support.from_indices(2, [2])

    def test_exactly_half_excluded(self):
        trace = fake_trace(1, [1, 1, 0, 0])
        assert median_model(trace) == Support.empty(1)

    def test_burnin_shifts_frequencies(self):
        trace = fake_trace(1, [0, 0, 0, 1, 1, 1])
        assert median_model(trace) == Support.empty(1)
        assert median_model(trace, burnin=2) == Support.full(1)

    def test_burnin_validation(self):
        trace = fake_trace(1, [0, 1, 0])
        with pytest.raises(ValueError):
            median_model(trace, burnin=-1)
        with pytest.raises(ValueError):
            median_model(trace, burnin=2)


class TestModalModel:
    def test_most_visited(self):
        trace = fake_trace(3, [5, 5, 5, 3, 1])
        assert modal_model(trace) == Support(3, 5)

    def test_tie_takes_smallest_mask(self):
        trace = fake_trace(3, [5, 5, 3, 3, 1])
        assert modal_model(trace) == Support(3, 3)

    def test_burnin(self):
        trace = fake_trace(3, [5, 5, 5, 1, 1])
        assert modal_model(trace, burnin=3) == Support(3, 1)

    def test_thinned_fallback_without_dense_path(self):
        trace = Trace(
            p=3, steps=10, thin=5, retained_steps=[0, 5, 10],
            retained_masks=[3, 3, 1], log_scores=np.zeros(3),
            step_seconds=np.zeros(10), mask_path=None, counts={3: 2, 1: 1},
        )
        assert modal_model(trace) == Support(3, 3)
        assert modal_model(trace, burnin=6) == Support(3, 1)


class TestPredict:
    def make_model(self, family=GAUSSIAN, seed=0, n=40, p=3):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        if family is GAUSSIAN:
            y = X[:, 0] + 0.3 * rng.standard_normal(n)
        else:
            y = (rng.random(n) < 0.5).astype(float)
        return OlapModel(Dataset(X=X, y=y, family=family), np.zeros(p), u=1.0)

    def test_empty_support_logistic_is_half(self):
        model = self.make_model(LOGISTIC)
        trace = fake_trace(3, [0, 0, 0])
        X_new = np.random.default_rng(1).standard_normal((7, 3))
        np.testing.assert_allclose(predict(model, trace, 0, X_new), 0.5)

    def test_single_support_matches_estimator(self):
        model = self.make_model()
        d = Support.from_indices(3, [1, 3])
        trace = fake_trace(3, [d.mask] * 4)
        X_new = np.random.default_rng(2).standard_normal((5, 3))
        expected = X_new[:, [0, 2]] @ one_step(model, d)
        np.testing.assert_allclose(predict(model, trace, 0, X_new), expected)

    def test_visit_weighted_average(self):
        model = self.make_model()
        a = Support.from_indices(3, [1])
        b = Support.from_indices(3, [2])
        # a on 2 of 5 retained states, b on 3
        trace = fake_trace(3, [a.mask, b.mask, a.mask, b.mask, b.mask])
        X_new = np.random.default_rng(3).standard_normal((6, 3))
        pa = X_new[:, [0]] @ one_step(model, a)
        pb = X_new[:, [1]] @ one_step(model, b)
        np.testing.assert_allclose(
            predict(model, trace, 0, X_new), 0.4 * pa + 0.6 * pb
        )

    def test_input_validation(self):
        model = self.make_model()
        trace = fake_trace(3, [0, 0])
        with pytest.raises(ValueError):
            predict(model, trace, 0, np.zeros((2, 4)))
        with pytest.raises(ValueError):
            predict(model, trace, 5, np.zeros((2, 3)))

    def test_on_real_chain(self):
        """Gaussian signal on coordinate 1: averaged predictions beat the
        trivial zero forecast on held-out rows."""
        model = self.make_model(seed=9, n=60)
        trace = run_chain(model, Support.empty(3), 400, J=3, seed=4)
        rng = np.random.default_rng(5)
        X_new = rng.standard_normal((30, 3))
        y_new = X_new[:, 0] + 0.3 * rng.standard_normal(30)
        y_hat = predict(model, trace, 100, X_new)
        assert rmse(y_new, y_hat) < rmse(y_new, np.zeros(30))


class TestRmse:
    def test_hand_value(self):
        assert rmse([1.0, 2.0], [2.0, 4.0]) == pytest.approx(np.sqrt(2.5))

    def test_zero_on_equal(self):
        assert rmse([1.5, -2.0], [1.5, -2.0]) == 0.0

    def test_nan_propagates(self):
        assert np.isnan(rmse([1.0, np.nan], [1.0, 1.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse([1.0, 2.0], [1.0])
