"""Model scores from a single Newton step, and their exact comparators.

The posterior over supports that everything downstream samples from is

    score(delta) = exp( -u ||delta||_0 log p + barL(theta_check) )

where barL is the penalized restricted log-likelihood of the support and
theta_check is one Newton-Raphson update away from the initial estimator's
restriction to the support.  Because the penalized Hessian is at least the
identity, the update is a well-posed SPD solve for every support.

Comparators included here:
  * mle_restricted / full_laplace_log_score: the classical Laplace score at
    the exact restricted maximizer, with the half log-determinant term.
  * exact_gaussian_log_marginal: the closed-form marginal for the gaussian
    family, which the Laplace score must reproduce exactly.
  * enumerate_posterior: exhaustive normalization over all 2^p supports.

Scores are cached per support; a cached value equals a fresh recomputation
bit for bit, and entries are immutable once inserted, so concurrent readers
sharing one model are safe.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .families import (
    Dataset,
    LinkOverflowError,
    _psi_vec,
    restricted_hess,
    restricted_objective,
)
from .support import Support

DEFAULT_SPARSITY = 0.8


class FactorizationError(RuntimeError):
    """SPD factorization failed numerically for a specific support."""

    def __init__(self, delta):
        self.delta = delta
        super().__init__(f"Cholesky factorization failed for support {delta!r}")


@dataclass(frozen=True, eq=False)
class ModelScore:
    """Score record for one support.

    log_score = -u * weight * log(p) + bar_ell, exactly.
    """

    delta: Support
    theta_check: np.ndarray
    log_score: float
    bar_ell: float


@dataclass(frozen=True)
class ConsistencyDiagnostic:
    """Empirical selection-consistency constants.

    c1_hat: largest per-variable gain from irrelevant additions, in units of
        log p.  c2_hat: smallest per-variable gain from relevant additions,
        in units of n.  violations: nested relevant pairs whose gain was not
        positive (these defeat any positive consistency constant).
    """

    c1_hat: float
    c2_hat: float
    pairs_checked: int
    violations: tuple
    irrelevant_pairs: int = 0
    relevant_pairs: int = 0


class _ScoreCache:
    """Mask-keyed score store; optional LRU cap, safe for concurrent use.

    Uncapped mode is a plain dict: single bytecode get/set under the GIL,
    and races are benign because entries for the same key are identical.
    """

    def __init__(self, cap=None):
        if cap is not None and cap < 1:
            raise ValueError("cache_cap must be >= 1")
        self.cap = cap
        self._store = OrderedDict() if cap is not None else {}
        self._lock = threading.Lock() if cap is not None else None

    def get(self, key):
        if self._lock is None:
            return self._store.get(key)
        with self._lock:
            val = self._store.get(key)
            if val is not None:
                self._store.move_to_end(key)
            return val

    def put(self, key, value):
        if self._lock is None:
            self._store[key] = value
            return
        with self._lock:
            self._store[key] = value
            self._store.move_to_end(key)
            while len(self._store) > self.cap:
                self._store.popitem(last=False)

    def clear(self):
        if self._lock is None:
            self._store.clear()
        else:
            with self._lock:
                self._store.clear()

    def __len__(self):
        return len(self._store)


def _mask_bits(mask):
    """Set bit positions of mask, increasing (0-based)."""
    out = []
    m = mask
    while m:
        low = m & -m
        out.append(low.bit_length() - 1)
        m ^= low
    return out


def _submasks(mask):
    """All submasks of mask, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class OlapModel:
    """Dataset + initial estimator + sparsity penalty, with a score cache.

    Attributes:
        data: Dataset.
        theta_tilde: length-p initial estimator the one-step update expands
            around (typically an elastic-net fit).
        u: sparsity parameter; each active variable costs p^{-u} in prior mass.
        cache_cap: optional LRU bound on cached scores (default unbounded).
    """

    def __init__(self, data, theta_tilde, u=DEFAULT_SPARSITY, cache_cap=None):
        if not isinstance(data, Dataset):
            raise TypeError("data must be a Dataset")
        theta_tilde = np.asarray(theta_tilde, dtype=float)
        if theta_tilde.shape != (data.p,):
            raise ValueError(
                f"theta_tilde has shape {theta_tilde.shape}, expected ({data.p},)"
            )
        if not np.all(np.isfinite(theta_tilde)):
            raise ValueError("theta_tilde must be finite")
        if not u > 0:
            raise ValueError("u must be positive")
        self.data = data
        self.theta_tilde = theta_tilde
        self.u = float(u)
        self._cache = _ScoreCache(cache_cap)
        self._log_p = math.log(data.p)

    @property
    def p(self):
        return self.data.p

    @property
    def n(self):
        return self.data.n

    def cache_size(self):
        return len(self._cache)

    def clear_cache(self):
        self._cache.clear()

    # ---- internals keyed by the packed mask (the samplers' hot path) ----

    def _one_step_raw(self, mask):
        """One Newton update from theta_tilde on the support mask.

        Returns (theta_check, bar_ell).  Overflow and factorization errors
        propagate to the caller.
        """
        idx = _mask_bits(mask)
        X, y, family = self.data.X, self.data.y, self.data.family
        if not idx:
            bar = float(-_psi_vec(family, np.zeros(self.n), 0).sum())
            return np.zeros(0), bar
        Xd = X[:, idx]
        w = self.theta_tilde[idx]
        eta = Xd @ w
        grad = Xd.T @ (y - _psi_vec(family, eta, 1)) - w
        wts = _psi_vec(family, eta, 2)
        H = (Xd * wts[:, None]).T @ Xd
        H[np.diag_indices_from(H)] += 1.0
        try:
            factor = cho_factor(H, lower=True)
            theta_check = w + cho_solve(factor, grad)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(Support(self.p, mask)) from exc
        eta_c = Xd @ theta_check
        bar = float(
            y @ eta_c - _psi_vec(family, eta_c, 0).sum() - 0.5 * (theta_check @ theta_check)
        )
        return theta_check, bar

    def _entry(self, mask):
        """Cached (log_score, bar_ell, theta_check); overflow scores -inf."""
        hit = self._cache.get(mask)
        if hit is not None:
            return hit
        weight = mask.bit_count()
        try:
            theta_check, bar = self._one_step_raw(mask)
            entry = (-self.u * weight * self._log_p + bar, bar, theta_check)
        except LinkOverflowError:
            entry = (-math.inf, -math.inf, np.full(weight, np.nan))
        self._cache.put(mask, entry)
        return entry

    def _log_score_mask(self, mask):
        return self._entry(mask)[0]

    def _cond_prob_mask(self, mask, j0):
        """Inclusion probability of 0-based coordinate j0 given the others."""
        bit = 1 << j0
        s1 = self._entry(mask | bit)[0]
        s0 = self._entry(mask & ~bit)[0]
        if s1 == -math.inf:
            return 0.0
        if s0 == -math.inf:
            return 1.0
        d = s1 - s0
        if d >= 0:
            return 1.0 / (1.0 + math.exp(-d))
        e = math.exp(d)
        return e / (1.0 + e)

    def _check_delta(self, delta):
        if not isinstance(delta, Support) or delta.p != self.p:
            raise ValueError(f"support must have length p={self.p}")


def one_step(model, delta):
    """Single Newton update of the initial estimator on delta's coordinates.

    Returns a vector of length ||delta||_0 (empty for the empty support).
    Raises LinkOverflowError when the poisson predictor leaves range, and
    FactorizationError on numerical failure of the SPD solve.
    """
    model._check_delta(delta)
    hit = model._cache.get(delta.mask)
    if hit is not None and np.isfinite(hit[0]):
        return hit[2].copy()
    theta_check, _ = model._one_step_raw(delta.mask)
    return theta_check


def olap_log_score(model, delta):
    """Score the support: -u ||delta||_0 log p + barL(one-step estimator).

    Cached and idempotent; a model whose poisson predictor overflows is
    recorded with log_score -inf so a sampler can never accept it.
    """
    model._check_delta(delta)
    log_score, bar, theta_check = model._entry(delta.mask)
    return ModelScore(
        delta=delta, theta_check=theta_check.copy(), log_score=log_score, bar_ell=bar
    )


def cond_prob(model, delta, j):
    """Conditional inclusion probability of coordinate j (1-based).

    Equals sigmoid of the log-score difference between the two flips of j,
    and therefore does not depend on delta's current value at j.  If one
    flip's score is -inf the probability collapses to 0 or 1; if both are,
    the coordinate is excluded (probability 0), keeping the chain defined.
    """
    model._check_delta(delta)
    delta._check_index(j)
    return model._cond_prob_mask(delta.mask, j - 1)


def mle_restricted(model, delta, tol=1e-10, max_iter=100):
    """Exact maximizer of the penalized restricted log-likelihood.

    Newton iteration with step halving, started from theta_tilde's
    restriction.  The objective is strongly concave (Hessian >= identity),
    so the maximizer is unique.  If max_iter is exhausted the last iterate
    is returned with a warning.
    """
    model._check_delta(delta)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if delta.weight == 0:
        return np.zeros(0)
    data = model.data
    idx = delta.active_idx()
    Xd = data.X[:, idx]
    y, family = data.y, data.family

    def value(w):
        eta = Xd @ w
        return float(y @ eta - _psi_vec(family, eta, 0).sum() - 0.5 * (w @ w))

    w = model.theta_tilde[idx].copy()
    fw = value(w)
    for _ in range(max_iter):
        eta = Xd @ w
        grad = Xd.T @ (y - _psi_vec(family, eta, 1)) - w
        if np.max(np.abs(grad)) <= tol:
            return w
        wts = _psi_vec(family, eta, 2)
        H = (Xd * wts[:, None]).T @ Xd
        H[np.diag_indices_from(H)] += 1.0
        try:
            step = cho_solve(cho_factor(H, lower=True), grad)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(delta) from exc
        t = 1.0
        for _ in range(60):
            try:
                cand = w + t * step
                fc = value(cand)
            except LinkOverflowError:
                t *= 0.5
                continue
            if fc >= fw - 1e-12:
                w, fw = cand, fc
                break
            t *= 0.5
        else:
            break
    eta = Xd @ w
    grad = Xd.T @ (y - _psi_vec(family, eta, 1)) - w
    if np.max(np.abs(grad)) > tol:
        warnings.warn(
            f"restricted Newton stopped at gradient norm {np.max(np.abs(grad)):.3g} "
            f"after {max_iter} iterations",
            RuntimeWarning,
        )
    return w


def _chol_logdet(H):
    if H.shape[0] == 0:
        return 0.0
    factor, _ = cho_factor(H, lower=True)
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def full_laplace_log_score(model, delta, tol=1e-10, max_iter=100):
    """Laplace score at the exact restricted maximizer.

    -u ||delta||_0 log p + barL(theta_hat) - (1/2) log det H(theta_hat).
    """
    model._check_delta(delta)
    theta_hat = mle_restricted(model, delta, tol=tol, max_iter=max_iter)
    bar = restricted_objective(model.data, delta, theta_hat)
    H = restricted_hess(model.data, delta, theta_hat)
    return float(-model.u * delta.weight * model._log_p + bar - 0.5 * _chol_logdet(H))


def exact_gaussian_log_marginal(model, delta):
    """Closed-form log marginal score for the gaussian family.

    log of p^{-u ||delta||_0} det(X_d' X_d + I)^{-1/2} exp(barL(theta_hat)),
    computed through a Cholesky factorization.  This is the exactness oracle
    the Laplace machinery is checked against.
    """
    model._check_delta(delta)
    if model.data.family.tag != "gaussian":
        raise ValueError("exact marginal requires the gaussian family")
    if delta.weight == 0:
        return float(-_psi_vec(model.data.family, np.zeros(model.n), 0).sum())
    idx = delta.active_idx()
    Xd = model.data.X[:, idx]
    M = Xd.T @ Xd
    M[np.diag_indices_from(M)] += 1.0
    factor = cho_factor(M, lower=True)
    theta_hat = cho_solve(factor, Xd.T @ model.data.y)
    logdet = float(2.0 * np.sum(np.log(np.diag(factor[0]))))
    bar = restricted_objective(model.data, delta, theta_hat)
    return float(-model.u * delta.weight * model._log_p - 0.5 * logdet + bar)


def enumerate_posterior(model, max_p=20):
    """Normalized probabilities of every support, in bitmask order.

    Returns a list of (Support, probability) pairs whose order matches the
    integer value of the bit vector, so the probability column doubles as a
    stationary law for the finite-chain analysis.  Probabilities sum to one
    within 1e-12 (log-sum-exp normalization).
    """
    p = model.p
    if p > max_p:
        raise ValueError(f"p={p} exceeds max_p={max_p} for exhaustive enumeration")
    scores = np.array([model._log_score_mask(m) for m in range(1 << p)])
    probs = np.exp(scores - logsumexp(scores))
    probs /= probs.sum()
    return [(Support(p, m), float(probs[m])) for m in range(1 << p)]


def _normalized_gain(model, mask0, mask1, scale):
    bar0 = model._entry(mask0)[1]
    bar1 = model._entry(mask1)[1]
    dw = mask1.bit_count() - mask0.bit_count()
    return (bar1 - bar0) / (dw * scale)


def consistency_diagnostic(model, delta_star, sample_size=2000, seed=0):
    """Empirical consistency constants from nested support pairs.

    Irrelevant pairs add only coordinates outside delta_star to a base
    support inside it; relevant pairs grow strictly within delta_star.  The
    scan is exhaustive for 2^p <= 4096 and seeded-random otherwise.  Emits a
    warning when u falls below 2 (1 + c1_hat), the regime where the sparsity
    penalty provably dominates spurious gains.
    """
    model._check_delta(delta_star)
    p, n = model.p, model.n
    star = delta_star.mask
    comp = ((1 << p) - 1) ^ star
    log_p = model._log_p

    c1 = -math.inf
    c2 = math.inf
    violations = []
    n_irr = 0
    n_rel = 0

    def visit_irrelevant(mask0, mask1):
        nonlocal c1, n_irr
        c1 = max(c1, _normalized_gain(model, mask0, mask1, log_p))
        n_irr += 1

    def visit_relevant(mask0, mask1):
        nonlocal c2, n_rel
        g = _normalized_gain(model, mask0, mask1, n)
        c2 = min(c2, g)
        n_rel += 1
        if g <= 0:
            violations.append((Support(p, mask0), Support(p, mask1)))

    if (1 << p) <= 4096:
        if p >= 2 and comp:
            for base in _submasks(star):
                for add in _submasks(comp):
                    if add:
                        visit_irrelevant(base, base | add)
        for d in _submasks(star):
            if d:
                for d0 in _submasks(d):
                    if d0 != d:
                        visit_relevant(d0, d)
    else:
        rng = np.random.default_rng(seed)
        star_bits = _mask_bits(star)
        comp_bits = _mask_bits(comp)
        for _ in range(sample_size):
            if comp_bits and (not star_bits or rng.random() < 0.5):
                base = 0
                for b in star_bits:
                    if rng.random() < 0.5:
                        base |= 1 << b
                k = int(rng.integers(1, min(5, len(comp_bits)) + 1))
                add = 0
                for b in rng.choice(comp_bits, size=k, replace=False):
                    add |= 1 << int(b)
                visit_irrelevant(base, base | add)
            elif star_bits:
                d = 0
                while d == 0:
                    for b in star_bits:
                        d = d | (1 << b) if rng.random() < 0.5 else d
                bits = _mask_bits(d)
                k = int(rng.integers(1, len(bits) + 1))
                rem = 0
                for b in rng.choice(bits, size=k, replace=False):
                    rem |= 1 << int(b)
                visit_relevant(d ^ rem, d)

    c1_hat = c1 if n_irr else 0.0
    c2_hat = c2 if n_rel else 0.0
    if model.u < 2.0 * (1.0 + max(c1_hat, 0.0)):
        warnings.warn(
            f"u={model.u:g} is below 2(1 + c1_hat)={2 * (1 + max(c1_hat, 0.0)):.3g}; "
            "the sparsity penalty may not dominate spurious gains",
            RuntimeWarning,
        )
    return ConsistencyDiagnostic(
        c1_hat=float(c1_hat),
        c2_hat=float(c2_hat),
        pairs_checked=n_irr + n_rel,
        violations=tuple(violations),
        irrelevant_pairs=n_irr,
        relevant_pairs=n_rel,
    )
