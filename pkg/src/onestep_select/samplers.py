"""Random-scan Gibbs over supports, and the exact data-augmentation chain.

The primary sampler updates J coordinates per step: it draws a uniformly
random ordered subset of 1..p (partial Fisher-Yates) and then, sequentially,
a Bernoulli for each selected coordinate from its conditional inclusion
probability given the rest of the current support.  One step consumes
exactly two bulk uniform draws of size J, so trajectories replay exactly
from (seed, initial support).

The comparator targets the joint augmentation over (support, full theta):
a fixed-order sweep over coordinates updates the support given theta, then
one Metropolis-adjusted Langevin proposal updates theta given the support.
Its support-marginal is exactly the posterior the Gibbs sampler targets up
to the Laplace approximation, which is what makes it a useful yardstick.

A single chain is strictly sequential.  Multiple chains may run in threads
sharing one read-only model (the score cache tolerates concurrent use);
each chain owns its Trace.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .families import LinkOverflowError, _psi_vec
from .posterior import OlapModel
from .support import Support

_MASK_PATH_MAX_P = 63  # uint64 packing bound for the dense visit path


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _sigmoid_scalar(t):
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


@dataclass
class ChainState:
    """Current support, step counter, and the chain's generator.

    The generator is owned by the chain: successive gibbs_step calls
    advance it in place, so rebuilding a state from the same seed and
    initial support replays the trajectory exactly.
    """

    delta: Support
    step: int
    rng: np.random.Generator

    @classmethod
    def start(cls, delta0, seed):
        if not isinstance(delta0, Support):
            raise TypeError("delta0 must be a Support")
        return cls(delta=delta0, step=0, rng=_as_rng(seed))

    @property
    def rng_state(self):
        """Serializable bit-generator state (replay/debugging hook)."""
        return self.rng.bit_generator.state


class Trace:
    """Recorded history of one chain.

    Retains the support sequence (every ``thin``-th step plus the initial
    and final states), the log-score of each retained sample, visit counts
    over every step including the initial state (their sum is steps + 1),
    and per-step wall-clock seconds.  DA chains also carry the MaLA
    acceptance rate and the final theta vector.
    """

    def __init__(
        self,
        p,
        steps,
        thin,
        retained_steps,
        retained_masks,
        log_scores,
        step_seconds,
        mask_path=None,
        counts=None,
        kind="gibbs",
        accept_rate=None,
        final_theta=None,
        mala_step_final=None,
    ):
        self.p = p
        self.steps = steps
        self.thin = thin
        self.kind = kind
        self.steps_recorded = tuple(retained_steps)
        self._retained_masks = list(retained_masks)
        self.log_scores = np.asarray(log_scores, dtype=float)
        self.step_seconds = np.asarray(step_seconds, dtype=float)
        self._mask_path = mask_path
        self._counts = counts
        self.accept_rate = accept_rate
        self.final_theta = final_theta
        self.mala_step_final = mala_step_final
        self._sequence = None
        self._visit_counts = None

    @property
    def sequence(self):
        if self._sequence is None:
            self._sequence = tuple(
                Support(self.p, int(m)) for m in self._retained_masks
            )
        return self._sequence

    @property
    def visit_counts(self):
        if self._visit_counts is None:
            if self._mask_path is not None:
                vals, cnts = np.unique(self._mask_path, return_counts=True)
                self._visit_counts = {
                    Support(self.p, int(v)): int(c) for v, c in zip(vals, cnts)
                }
            else:
                self._visit_counts = {
                    Support(self.p, m): c for m, c in self._counts.items()
                }
        return self._visit_counts

    def __len__(self):
        return len(self._retained_masks)

    def save_jsonl(self, path):
        """One JSON record per retained sample: {step, delta, log_score}.

        delta is the sorted list of active 1-based indices.
        """
        with open(path, "w", encoding="utf-8") as fh:
            for step, mask, score in zip(
                self.steps_recorded, self._retained_masks, self.log_scores
            ):
                rec = {
                    "step": int(step),
                    "delta": list(Support(self.p, int(mask)).indices),
                    "log_score": float(score),
                }
                fh.write(json.dumps(rec) + "\n")


class _TraceBuilder:
    def __init__(self, p, steps, thin, kind):
        if thin < 1:
            raise ValueError("thin must be >= 1")
        self.p = p
        self.steps = steps
        self.thin = thin
        self.kind = kind
        self.small = p <= _MASK_PATH_MAX_P
        self.mask_path = np.empty(steps + 1, dtype=np.uint64) if self.small else None
        self.counts = None if self.small else {}
        self.ret_steps = []
        self.ret_masks = []
        self.ret_scores = []
        self.step_seconds = np.zeros(steps)

    def record(self, step, mask, score):
        if self.small:
            self.mask_path[step] = mask
        else:
            self.counts[mask] = self.counts.get(mask, 0) + 1
        if step % self.thin == 0 or step == self.steps:
            self.ret_steps.append(step)
            self.ret_masks.append(mask)
            self.ret_scores.append(score)

    def close(self, **extra):
        return Trace(
            self.p,
            self.steps,
            self.thin,
            self.ret_steps,
            self.ret_masks,
            self.ret_scores,
            self.step_seconds,
            mask_path=self.mask_path,
            counts=self.counts,
            kind=self.kind,
            **extra,
        )


def _sweep_masks(model, mask, rng, J, perm, base):
    """One random-scan update of the packed support mask.

    Consumes exactly two bulk uniform draws of size J.  perm/base are
    reusable length-p integer buffers for the partial Fisher-Yates pass.
    """
    p = model.p
    u_sel = rng.random(J)
    u_inc = rng.random(J)
    if J == 1:
        j0 = int(u_sel[0] * p)
        if j0 >= p:
            j0 = p - 1
        bit = 1 << j0
        q = model._cond_prob_mask(mask, j0)
        return (mask | bit) if u_inc[0] < q else (mask & ~bit)
    perm[:] = base
    for i in range(J):
        r = i + int(u_sel[i] * (p - i))
        if r >= p:
            r = p - 1
        perm[i], perm[r] = perm[r], perm[i]
        j0 = int(perm[i])
        bit = 1 << j0
        q = model._cond_prob_mask(mask, j0)
        mask = (mask | bit) if u_inc[i] < q else (mask & ~bit)
    return mask


def gibbs_step(model, state, J):
    """Advance the random-scan sampler by one step of J coordinate updates.

    Selection is a uniformly random ordered subset without replacement;
    each selected coordinate is redrawn from its conditional given the
    coordinates already updated this step.  The RNG consumption per call is
    fixed by J, independent of the path taken.
    """
    if not isinstance(model, OlapModel):
        raise TypeError("model must be an OlapModel")
    p = model.p
    if not 1 <= J <= p:
        raise ValueError(f"J must satisfy 1 <= J <= p={p}")
    model._check_delta(state.delta)
    base = np.arange(p, dtype=np.intp)
    perm = np.empty_like(base)
    new_mask = _sweep_masks(model, state.delta.mask, state.rng, J, perm, base)
    return ChainState(delta=Support(p, new_mask), step=state.step + 1, rng=state.rng)


def run_chain(model, delta0, steps, J=100, seed=0, *, thin=1):
    """Run the random-scan sampler and record its trace.

    Deterministic given (seed, delta0, steps, J).  steps counts
    transitions; the trace always includes the initial support.
    """
    model._check_delta(delta0)
    p = model.p
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if not 1 <= J <= p:
        raise ValueError(f"J must satisfy 1 <= J <= p={p}")
    rng = _as_rng(seed)
    base = np.arange(p, dtype=np.intp)
    perm = np.empty_like(base)
    builder = _TraceBuilder(p, steps, thin, "gibbs")
    mask = delta0.mask
    score = model._log_score_mask
    builder.record(0, mask, score(mask))
    times = builder.step_seconds
    for k in range(1, steps + 1):
        t0 = time.perf_counter()
        mask = _sweep_masks(model, mask, rng, J, perm, base)
        times[k - 1] = time.perf_counter() - t0
        builder.record(k, mask, score(mask))
    return builder.close()


def inclusion_probs(trace, burnin=0):
    """Per-coordinate inclusion frequency over samples with step >= burnin.

    Uses every post-burn-in step when the dense path is available (p <= 63)
    and the retained subsequence otherwise.
    """
    hi = max(trace.steps - 1, 0)
    if not 0 <= burnin <= hi:
        raise ValueError(f"burnin must lie in [0, {hi}]")
    p = trace.p
    if trace._mask_path is not None:
        seg = trace._mask_path[burnin:]
        return np.array(
            [float(((seg >> np.uint64(j)) & np.uint64(1)).mean()) for j in range(p)]
        )
    kept = [m for s, m in zip(trace.steps_recorded, trace._retained_masks) if s >= burnin]
    out = np.zeros(p)
    for m in kept:
        mm = m
        while mm:
            low = mm & -mm
            out[low.bit_length() - 1] += 1.0
            mm ^= low
    return out / len(kept)


# ---------------------------------------------------------------------------
# Exact data-augmentation comparator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DaConfig:
    """Settings for the augmented chain.

    rho0 is the pseudo-prior precision on inactive coordinates; None means
    "use n", resolved when a chain starts.  mala_step is the Langevin step
    size h; with adapt=True, run_da_chain tunes log h by Robbins-Monro
    toward adapt_target during the first half of the run, then freezes it
    so the measured segment is a genuine Markov chain.
    """

    rho0: float | None = None
    mala_step: float = 0.1
    adapt_target: float = 0.57
    adapt: bool = True

    def __post_init__(self):
        if self.rho0 is not None and not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.mala_step > 0:
            raise ValueError("mala_step must be positive")
        if not 0 < self.adapt_target < 1:
            raise ValueError("adapt_target must lie in (0, 1)")

    def resolve_rho0(self, model):
        return float(self.rho0) if self.rho0 is not None else float(model.n)


def _da_log_target(model, theta, act, rho0):
    """Unnormalized log joint density at (theta, support).

    act is a boolean activity vector.  Raises LinkOverflowError when the
    restricted predictor leaves the family's range.
    """
    X, y, family = model.data.X, model.data.y, model.data.family
    th_act = np.where(act, theta, 0.0)
    eta = X @ th_act
    ll = float(y @ eta - _psi_vec(family, eta, 0).sum())
    pen_act = 0.5 * float(th_act @ th_act)
    th_in = theta - th_act
    pen_in = 0.5 * rho0 * float(th_in @ th_in)
    s = int(act.sum())
    base = -model.u * model._log_p - 0.5 * math.log(rho0)
    return s * base + ll - pen_act - pen_in


def _da_grad(model, theta, act, rho0):
    X, y, family = model.data.X, model.data.y, model.data.family
    th_act = np.where(act, theta, 0.0)
    eta = X @ th_act
    resid = y - _psi_vec(family, eta, 1)
    g = X.T @ resid - theta
    return np.where(act, g, -rho0 * theta)


def da_step(model, theta, delta, cfg, rng=None):
    """One sweep of the augmented sampler: supports, then theta.

    (i) For j = 1..p in fixed order, the bit of j is redrawn from its
    conditional given theta: the inclusion log-odds are
    -u log p - (1/2) log rho0 + ((rho0 - 1)/2) theta_j^2 + [likelihood gain
    of adding theta_j x_j to the predictor].  (ii) theta moves by one
    Langevin proposal with drift (h/2) grad log target, accepted by the
    Metropolis ratio; a proposal whose predictor overflows is rejected.

    The fixed sweep order is deliberate; the primary sampler's random
    subsets are its own contract.  Step size is taken from cfg as-is here;
    adaptation lives in run_da_chain.
    """
    model._check_delta(delta)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.p,):
        raise ValueError(f"theta must have shape ({model.p},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    rng = _as_rng(rng)
    rho0 = cfg.resolve_rho0(model)
    act = delta.to_array().astype(bool)
    u_inc = rng.random(model.p)
    xi = rng.standard_normal(model.p)
    u_mh = rng.random()
    act, _ = _da_sweep(model, theta, act, rho0, u_inc)
    theta, _, _ = _da_mala(model, theta, act, rho0, cfg.mala_step, xi, u_mh)
    return theta, Support.from_array(np.where(act, 1, 0))


def _da_sweep(model, theta, act, rho0, u_inc):
    """Fixed-order support sweep given theta; returns (act, eta)."""
    X, y, family = model.data.X, model.data.y, model.data.family
    base = -model.u * model._log_p - 0.5 * math.log(rho0)
    eta = X @ np.where(act, theta, 0.0)
    s_cur = float(_psi_vec(family, eta, 0).sum())
    for j in range(model.p):
        tj = theta[j]
        xj = X[:, j]
        if act[j]:
            eta1, s1 = eta, s_cur
            eta0 = eta - tj * xj
            try:
                s0 = float(_psi_vec(family, eta0, 0).sum())
            except LinkOverflowError:
                s0 = math.inf
        else:
            eta0, s0 = eta, s_cur
            eta1 = eta + tj * xj
            try:
                s1 = float(_psi_vec(family, eta1, 0).sum())
            except LinkOverflowError:
                s1 = math.inf
        if math.isinf(s1) and math.isinf(s0):
            continue  # neither option evaluable; keep the current bit
        if math.isinf(s1):
            take = False
        elif math.isinf(s0):
            take = True
        else:
            log_odds = (
                base
                + 0.5 * (rho0 - 1.0) * tj * tj
                + (tj * float(xj @ y) - (s1 - s0))
            )
            take = u_inc[j] < _sigmoid_scalar(log_odds)
        if take:
            act[j], eta, s_cur = True, eta1, s1
        else:
            act[j], eta, s_cur = False, eta0, s0
    return act, eta


def _da_mala(model, theta, act, rho0, h, xi, u_mh):
    """One Langevin proposal; returns (theta', accepted, accept_prob)."""
    cur = _da_log_target(model, theta, act, rho0)
    g_cur = _da_grad(model, theta, act, rho0)
    prop = theta + 0.5 * h * g_cur + math.sqrt(h) * xi
    try:
        tgt_prop = _da_log_target(model, prop, act, rho0)
        g_prop = _da_grad(model, prop, act, rho0)
    except LinkOverflowError:
        return theta, False, 0.0
    fwd = prop - theta - 0.5 * h * g_cur
    rev = theta - prop - 0.5 * h * g_prop
    log_alpha = (
        tgt_prop - cur - (rev @ rev) / (2.0 * h) + (fwd @ fwd) / (2.0 * h)
    )
    alpha = 1.0 if log_alpha >= 0 else math.exp(log_alpha)
    if u_mh < alpha:
        return prop, True, alpha
    return theta, False, alpha


def run_da_chain(model, theta0, delta0, steps, cfg, seed=0, *, thin=1):
    """Run the augmented chain; the trace records the support component.

    Retained log-scores are the unnormalized log joint density at the
    current (theta, support).  With cfg.adapt the step size follows a
    Robbins-Monro recursion toward cfg.adapt_target for the first half of
    the run and is frozen afterwards; the recorded acceptance rate covers
    the frozen segment (the whole run when adaptation is off).
    """
    model._check_delta(delta0)
    theta = np.asarray(theta0, dtype=float).copy()
    if theta.shape != (model.p,):
        raise ValueError(f"theta0 must have shape ({model.p},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta0 must be finite")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    rng = _as_rng(seed)
    rho0 = cfg.resolve_rho0(model)
    p = model.p
    act = delta0.to_array().astype(bool)

    log_h = math.log(cfg.mala_step)
    freeze_at = steps // 2 if cfg.adapt else 0
    n_acc = 0.0
    n_meas = 0

    builder = _TraceBuilder(p, steps, thin, "da")

    def mask_of(a):
        m = 0
        for j in np.flatnonzero(a):
            m |= 1 << int(j)
        return m

    builder.record(0, mask_of(act), _da_log_target(model, theta, act, rho0))
    times = builder.step_seconds
    for k in range(1, steps + 1):
        t0 = time.perf_counter()
        u_inc = rng.random(p)
        xi = rng.standard_normal(p)
        u_mh = rng.random()
        act, _ = _da_sweep(model, theta, act, rho0, u_inc)
        h = math.exp(log_h)
        theta, accepted, alpha = _da_mala(model, theta, act, rho0, h, xi, u_mh)
        if cfg.adapt and k <= freeze_at:
            log_h += (alpha - cfg.adapt_target) / (10.0 + k) ** 0.7
            log_h = min(max(log_h, math.log(1e-10)), math.log(1e4))
        else:
            n_acc += 1.0 if accepted else 0.0
            n_meas += 1
        times[k - 1] = time.perf_counter() - t0
        builder.record(k, mask_of(act), _da_log_target(model, theta, act, rho0))
    return builder.close(
        accept_rate=(n_acc / n_meas) if n_meas else None,
        final_theta=theta,
        mala_step_final=math.exp(log_h),
    )
