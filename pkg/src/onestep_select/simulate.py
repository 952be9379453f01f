"""Synthetic GLM benchmarks with AR(1)-correlated designs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .families import Dataset, GlmFamily, family_from_tag, _sigmoid
from .support import Support

_POISSON_RATE_CAP = 1e15
_MAX_SIGNAL_ATTEMPTS = 10


@dataclass(frozen=True)
class SimConfig:
    """Design and signal settings for one synthetic dataset.

    Rows of the design follow the AR(1) recursion with parameter rho, so
    column k and column j have correlation rho^|j-k|.  The first s_star
    coefficients are active, with magnitudes uniform in
    (signal_low, signal_high) and independent random signs.
    """

    n: int
    p: int
    rho: float = 0.0
    s_star: int = 10
    signal_low: float = 2.0
    signal_high: float = 3.0
    family: GlmFamily | str = "logistic"
    seed: object = 0

    def __post_init__(self):
        if isinstance(self.family, str):
            object.__setattr__(self, "family", family_from_tag(self.family))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not 0 <= self.s_star <= self.p:
            raise ValueError("s_star must lie in [0, p]")
        if not 0 < self.signal_low < self.signal_high:
            raise ValueError("need 0 < signal_low < signal_high")


class RateOverflowError(RuntimeError):
    """A poisson response draw was requested at an unrepresentable rate."""


def design_matrix(n, p, rho, rng):
    """AR(1) rows: column j is rho * column (j-1) plus fresh noise."""
    eps = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = eps[:, 0]
    if p > 1:
        scale = math.sqrt(1.0 - rho * rho)
        for j in range(1, p):
            X[:, j] = rho * X[:, j - 1] + scale * eps[:, j]
    return X


def draw_response(family, eta, rng):
    """Sample y from the family's mean model at linear predictor eta."""
    eta = np.asarray(eta, dtype=float)
    tag = family.tag
    if tag == "logistic":
        return (rng.random(eta.size) < _sigmoid(eta)).astype(float)
    if tag == "gaussian":
        return eta + rng.standard_normal(eta.size)
    with np.errstate(over="ignore"):
        rate = np.exp(eta)
    if not np.all(rate < _POISSON_RATE_CAP):
        raise RateOverflowError(
            f"poisson rate exceeds {_POISSON_RATE_CAP:g}"
        )
    return rng.poisson(rate).astype(float)


def _draw_theta_star(cfg, rng):
    mags = rng.uniform(cfg.signal_low, cfg.signal_high, size=cfg.s_star)
    signs = np.where(rng.random(cfg.s_star) < 0.5, -1.0, 1.0)
    theta = np.zeros(cfg.p)
    theta[: cfg.s_star] = signs * mags
    return theta


def simulate(cfg):
    """Draw (Dataset, theta_star, delta_star) from the config.

    The design is sampled once; for the poisson family, signal draws whose
    rates overflow are rejected and redrawn up to 10 times before raising.
    """
    rng = np.random.default_rng(cfg.seed)
    X = design_matrix(cfg.n, cfg.p, cfg.rho, rng)
    for _ in range(_MAX_SIGNAL_ATTEMPTS):
        theta_star = _draw_theta_star(cfg, rng)
        eta = X[:, : cfg.s_star] @ theta_star[: cfg.s_star]
        try:
            y = draw_response(cfg.family, eta, rng)
        except RateOverflowError:
            continue
        delta_star = Support.from_indices(cfg.p, range(1, cfg.s_star + 1))
        return Dataset(X=X, y=y, family=cfg.family), theta_star, delta_star
    raise RuntimeError(
        f"poisson rates overflowed in {_MAX_SIGNAL_ATTEMPTS} consecutive "
        "signal draws; weaken the signal range or shrink s_star"
    )
