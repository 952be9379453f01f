"""Augmented-variable comparator chain: joint (support, coefficient) sweeps
with a Langevin coefficient move.

Its support marginal is the exact conjugate posterior in the gaussian
family, which gives a quantitative end-to-end check.
"""

import math

import numpy as np
import pytest
from scipy.special import logsumexp

from onestep_select import (
    GAUSSIAN,
    DaConfig,
    Dataset,
    OlapModel,
    Support,
    da_step,
    exact_gaussian_log_marginal,
    run_da_chain,
)


def gaussian_instance(seed=0, n=50, p=4, beta=None, sigma=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = np.zeros(p)
        beta[0] = 1.0
    y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(X=X, y=y, family=GAUSSIAN)


def exact_support_law(model):
    """Normalized conjugate posterior over all supports."""
    p = model.p
    scores = np.array(
        [exact_gaussian_log_marginal(model, Support(p, m)) for m in range(1 << p)]
    )
    return np.exp(scores - logsumexp(scores))


def test_da_config_defaults():
    cfg = DaConfig()
    data = gaussian_instance()
    model = OlapModel(data, np.zeros(4), u=1.0)
    assert cfg.resolve_rho0(model) == float(data.n)
    assert cfg.mala_step == pytest.approx(0.1)
    assert cfg.adapt_target == pytest.approx(0.57)
    assert DaConfig(rho0=7.0).resolve_rho0(model) == 7.0
    with pytest.raises(ValueError):
        DaConfig(rho0=-1.0)


def test_da_step_shapes_and_types():
    model = OlapModel(gaussian_instance(), np.zeros(4), u=1.0)
    theta, delta = da_step(
        model, np.zeros(4), Support.empty(4), DaConfig(),
        rng=np.random.default_rng(0),
    )
    assert theta.shape == (4,)
    assert isinstance(delta, Support) and delta.p == 4


def test_da_step_rejects_bad_theta():
    model = OlapModel(gaussian_instance(), np.zeros(4), u=1.0)
    with pytest.raises(ValueError):
        da_step(model, np.zeros(3), Support.empty(4), DaConfig())
    with pytest.raises(ValueError):
        da_step(model, np.array([np.inf, 0, 0, 0]), Support.empty(4), DaConfig())


def test_zero_column_inclusion_odds():
    """For a zero design column with theta_j = 0 the likelihood terms
    cancel, leaving inclusion odds of exactly p^{-u} rho0^{-1/2}."""
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    X[:, 2] = 0.0
    y = 0.3 * rng.standard_normal(30)
    data = Dataset(X=X, y=y, family=GAUSSIAN)
    u, rho0 = 1.0, 25.0
    model = OlapModel(data, np.zeros(4), u=u)
    cfg = DaConfig(rho0=rho0, adapt=False)
    target = 1.0 / (1.0 + 4.0**u * math.sqrt(rho0))
    hits = 0
    reps = 4000
    gen = np.random.default_rng(9)
    for _ in range(reps):
        _, delta = da_step(model, np.zeros(4), Support.empty(4), cfg, rng=gen)
        hits += delta.contains(3)
    assert hits / reps == pytest.approx(target, abs=0.01)


def test_run_da_chain_deterministic():
    model = OlapModel(gaussian_instance(3), np.zeros(4), u=1.0)
    kw = dict(steps=200, cfg=DaConfig(), seed=11)
    a = run_da_chain(model, np.zeros(4), Support.empty(4), **kw)
    b = run_da_chain(model, np.zeros(4), Support.empty(4), **kw)
    assert a.sequence == b.sequence
    np.testing.assert_array_equal(a.final_theta, b.final_theta)
    assert a.accept_rate == b.accept_rate


def test_rng_consumption_per_step():
    """Each step consumes p inclusion uniforms, p proposal normals, and one
    acceptance uniform, regardless of the trajectory."""
    model = OlapModel(gaussian_instance(5), np.zeros(4), u=1.0)
    g1 = np.random.default_rng(42)
    g2 = np.random.default_rng(42)
    da_step(model, np.zeros(4), Support.empty(4), DaConfig(), rng=g1)
    g2.random(4)
    g2.standard_normal(4)
    g2.random()
    assert g1.random() == g2.random()


def test_adaptation_reaches_target_band():
    """After Robbins-Monro warm-up the frozen-segment acceptance rate sits
    in a band around 0.57."""
    model = OlapModel(gaussian_instance(7, n=80), np.zeros(4), u=1.0)
    trace = run_da_chain(
        model, np.zeros(4), Support.empty(4), 3000, DaConfig(), seed=5
    )
    assert 0.4 <= trace.accept_rate <= 0.75
    assert trace.mala_step_final > 0


def test_adapt_off_keeps_step_size():
    model = OlapModel(gaussian_instance(8), np.zeros(4), u=1.0)
    cfg = DaConfig(mala_step=0.05, adapt=False)
    trace = run_da_chain(model, np.zeros(4), Support.empty(4), 300, cfg, seed=2)
    assert trace.mala_step_final == pytest.approx(0.05)


def test_trace_bookkeeping():
    model = OlapModel(gaussian_instance(9), np.zeros(4), u=1.0)
    trace = run_da_chain(model, np.zeros(4), Support.empty(4), 83, DaConfig(),
                         seed=1, thin=7)
    assert trace.kind == "da"
    assert sum(trace.visit_counts.values()) == 84
    assert trace.steps_recorded[0] == 0
    assert trace.steps_recorded[-1] == 83


def test_support_marginal_matches_conjugate_posterior():
    """Long-run support frequencies agree with the closed-form posterior.

    This pins the derived inclusion odds: any error in the rho0 terms or
    the likelihood difference shifts the marginal visibly.
    """
    data = gaussian_instance(13, n=40, p=3, beta=np.array([1.2, 0.0, 0.0]))
    model = OlapModel(data, np.zeros(3), u=1.0)
    exact = exact_support_law(model)
    trace = run_da_chain(
        model, np.zeros(3), Support.empty(3), 10**5, DaConfig(), seed=29
    )
    counts = np.zeros(8)
    for d, c in trace.visit_counts.items():
        counts[d.mask] = c
    emp = counts / counts.sum()
    tv = np.abs(emp - exact).sum()
    assert tv <= 0.05
