"""GLM families and the support-restricted penalized log-likelihood.

The model for a response y given a covariate row x is an exponential-family
likelihood with log-partition psi, so the log-likelihood of a coefficient
vector theta is

    loglik(theta) = sum_i  y_i <theta, x_i> - psi(<theta, x_i>)

with psi(x) = log(1+e^x) (logistic), e^x (poisson), or x^2/2 (gaussian, unit
variance).  The restricted objective used by every model score is this
log-likelihood evaluated on the active coordinates of a support, minus half
the squared norm of the active coefficients.

All functions here are pure; the poisson family signals overflow through a
typed error instead of returning infinities, so a diverging predictor always
surfaces to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .support import Support

#: linear predictors beyond this magnitude make exp() meaningless in float64
POISSON_CLAMP = 700.0


class LinkOverflowError(FloatingPointError):
    """A poisson linear predictor left the representable range of exp()."""

    def __init__(self, max_abs_eta, clamp=POISSON_CLAMP):
        self.max_abs_eta = float(max_abs_eta)
        self.clamp = float(clamp)
        super().__init__(
            f"poisson predictor magnitude {self.max_abs_eta:.3g} exceeds clamp {clamp:g}"
        )


@dataclass(frozen=True)
class GlmFamily:
    """One of the three supported response families.

    Attributes:
        tag: "logistic", "poisson" or "gaussian".
    """

    tag: str

    _TAGS = ("logistic", "poisson", "gaussian")

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise ValueError(f"unknown family {self.tag!r}; expected one of {self._TAGS}")

    @property
    def c3(self):
        """Self-concordance constant: |psi'''| <= c3 * psi'' holds everywhere."""
        return 0.0 if self.tag == "gaussian" else 1.0


LOGISTIC = GlmFamily("logistic")
POISSON = GlmFamily("poisson")
GAUSSIAN = GlmFamily("gaussian")


def family_from_tag(tag):
    return GlmFamily(str(tag).lower())


def _sigmoid(x):
    # piecewise form avoids overflow in exp for large |x|
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _psi_vec(family, x, order):
    """Vectorized d^order psi / dx^order on a float array."""
    x = np.asarray(x, dtype=float)
    if family.tag == "gaussian":
        if order == 0:
            return 0.5 * x * x
        if order == 1:
            return x.copy()
        if order == 2:
            return np.ones_like(x)
        return np.zeros_like(x)
    if family.tag == "poisson":
        if x.size and np.max(np.abs(x)) > POISSON_CLAMP:
            raise LinkOverflowError(np.max(np.abs(x)))
        return np.exp(x)
    # logistic
    if order == 0:
        # softplus, evaluated as x + log(1+e^{-x}) for x > 0
        out = np.where(x > 0, x, 0.0) + np.log1p(np.exp(-np.abs(x)))
        return out
    s = _sigmoid(x)
    if order == 1:
        return s
    if order == 2:
        return s * (1.0 - s)
    # third derivative: e^x (1-e^x) / (1+e^x)^3 = s(1-s)(1-2s), via the stable sigmoid
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def link_eval(family, x, order=0):
    """Evaluate d^order psi / dx^order at a scalar x.

    Args:
        family: GlmFamily.
        x: finite scalar.
        order: derivative order in {0, 1, 2, 3}.

    Returns:
        The derivative value as a float.

    Raises:
        LinkOverflowError: poisson family with |x| beyond the clamp.
        ValueError: order outside 0..3 or non-finite x.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be in 0..3, got {order}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    return float(_psi_vec(family, np.array([x]), order)[0])


@dataclass(frozen=True)
class Dataset:
    """Design matrix, response and family, validated once at construction."""

    X: np.ndarray
    y: np.ndarray
    family: GlmFamily

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d matrix")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError("need n >= 1 and p >= 1")
        if y.shape != (n,):
            raise ValueError(f"y has shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("X and y must be finite")
        if self.family.tag == "logistic" and not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic family requires y in {0,1}")
        if self.family.tag == "poisson" and (np.any(y < 0) or np.any(y != np.round(y))):
            raise ValueError("poisson family requires nonnegative integer y")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def log_lik(data, theta):
    """Full-model log-likelihood sum_i y_i eta_i - psi(eta_i), eta = X theta."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (data.p,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({data.p},)")
    eta = data.X @ theta
    return float(data.y @ eta - _psi_vec(data.family, eta, 0).sum())


def _restricted_eta(data, delta, w):
    w = np.asarray(w, dtype=float)
    if delta.p != data.p:
        raise ValueError(f"support length {delta.p} does not match p={data.p}")
    if w.shape != (delta.weight,):
        raise ValueError(f"w has shape {w.shape}, expected ({delta.weight},)")
    if delta.weight == 0:
        return w, np.zeros(data.n)
    return w, data.X[:, delta.active_idx()] @ w


def restricted_objective(data, delta, w):
    """Penalized restricted log-likelihood: loglik on delta's coordinates minus ||w||^2/2.

    The empty support is legal and returns the null-model log-likelihood.
    """
    w, eta = _restricted_eta(data, delta, w)
    ll = data.y @ eta - _psi_vec(data.family, eta, 0).sum()
    return float(ll - 0.5 * (w @ w))


def restricted_grad(data, delta, w):
    """Gradient of restricted_objective: X_delta' (y - psi'(eta)) - w."""
    w, eta = _restricted_eta(data, delta, w)
    if delta.weight == 0:
        return np.zeros(0)
    resid = data.y - _psi_vec(data.family, eta, 1)
    return data.X[:, delta.active_idx()].T @ resid - w


def restricted_hess(data, delta, w):
    """Negative second derivative of restricted_objective.

    Returns X_delta' diag(psi''(eta)) X_delta + I, which is symmetric with
    every eigenvalue >= 1: the identity comes from the quadratic penalty.
    """
    w, eta = _restricted_eta(data, delta, w)
    if delta.weight == 0:
        return np.zeros((0, 0))
    Xd = data.X[:, delta.active_idx()]
    wts = _psi_vec(data.family, eta, 2)
    H = (Xd * wts[:, None]).T @ Xd
    H[np.diag_indices_from(H)] += 1.0
    return H


@dataclass(frozen=True)
class ConcordanceReport:
    max_ratio: float
    passed: bool


def self_concordance_check(family, grid, c3=None):
    """Check |psi'''(x)| <= c3 * psi''(x) over a grid of points.

    Args:
        family: GlmFamily.
        grid: nonempty array of finite evaluation points.
        c3: bound to test against; defaults to the family's own constant.

    Returns:
        ConcordanceReport with the largest observed ratio and a pass flag.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be nonempty and finite")
    if c3 is None:
        c3 = family.c3
    d2 = _psi_vec(family, grid, 2)
    d3 = _psi_vec(family, grid, 3)
    ratio = float(np.max(np.abs(d3) / d2)) if family.tag != "gaussian" else float(
        np.max(np.abs(d3))
    )
    return ConcordanceReport(max_ratio=ratio, passed=bool(ratio <= c3 + 1e-12))


@dataclass(frozen=True)
class RemainderReport:
    lhs: float
    rhs: float
    passed: bool


def remainder_bound_check(family, u, h, c3=None):
    """Second-order Taylor remainder bound implied by self-concordance.

    Checks |psi(u+h) - psi(u) - psi'(u) h - h^2/2 psi''(u)|
    against (c3/6) |h|^3 exp(c3 |h|) psi''(u).
    """
    if c3 is None:
        c3 = family.c3
    lhs = abs(
        link_eval(family, u + h, 0)
        - link_eval(family, u, 0)
        - link_eval(family, u, 1) * h
        - 0.5 * h * h * link_eval(family, u, 2)
    )
    rhs = (c3 / 6.0) * abs(h) ** 3 * np.exp(c3 * abs(h)) * link_eval(family, u, 2)
    return RemainderReport(lhs=float(lhs), rhs=float(rhs), passed=bool(lhs <= rhs + 1e-12))
