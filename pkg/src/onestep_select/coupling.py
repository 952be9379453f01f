"""Lagged couplings of the support sampler and mixing-time upper bounds.

Two copies of the random-scan chain share their coordinate subset and
their uniforms each step.  Per selected coordinate this is the monotone
maximal coupling of two Bernoullis: both chains set the bit to 1{U < q}
with their own conditional q, so they disagree with probability exactly
|q_x - q_y| and can never separate once equal.

Meeting times of an L-lagged pair convert into the empirical curve

    d_hat(t) = mean over records of max(0, ceil((tau - L - t) / L)),

a pointwise upper bound (in the half total-variation convention) on the
distance to stationarity at time t of a chain started from the same
initial law.  The smallest t with d_hat(t) below a threshold is the
mixing-time estimate the benchmark reports.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .posterior import OlapModel, enumerate_posterior
from .samplers import _as_rng, _sweep_masks
from .support import Support

DEFAULT_LAG = 1
DEFAULT_THRESHOLD = 0.25


@dataclass(frozen=True)
class MeetingRecord:
    """Outcome of one lagged-pair run.

    tau is the first t >= L with X_t = Y_{t-L}; censored records carry
    tau = the last step reached (a lower bound) and are excluded from
    curve estimates.  Invariant: tau >= L.
    """

    tau: int
    L: int
    seed: int
    delta0_x: Support
    delta0_y: Support
    censored: bool = False
    init_kind: str = ""

    def __post_init__(self):
        if self.tau < self.L:
            raise ValueError("tau must be >= L")


def _coupled_sweep(model, mx, my, rng, J, perm, base):
    """Advance both packed masks with shared subset and uniforms.

    Faithful: equal masks on entry leave equal (asserted).  Consumes the
    same two bulk draws as the single-chain sweep.
    """
    p = model.p
    equal_in = mx == my
    u_sel = rng.random(J)
    u_inc = rng.random(J)
    if J == 1:
        j0 = int(u_sel[0] * p)
        if j0 >= p:
            j0 = p - 1
        sel = (j0,)
    else:
        perm[:] = base
        for i in range(J):
            r = i + int(u_sel[i] * (p - i))
            if r >= p:
                r = p - 1
            perm[i], perm[r] = perm[r], perm[i]
        sel = tuple(int(perm[i]) for i in range(J))
    for i, j0 in enumerate(sel):
        bit = 1 << j0
        u = u_inc[i]
        qx = model._cond_prob_mask(mx, j0)
        if (my & ~bit) == (mx & ~bit):
            # the conditional ignores bit j itself, so the chains agree here
            qy = qx
        else:
            qy = model._cond_prob_mask(my, j0)
        mx = (mx | bit) if u < qx else (mx & ~bit)
        my = (my | bit) if u < qy else (my & ~bit)
    if equal_in and mx != my:
        raise AssertionError("coupled chains separated from an equal state")
    return mx, my


def coupled_gibbs_step(model, x, y, J, rng=None):
    """One shared-randomness step of the coupled pair.

    Marginally each chain moves exactly like the single-chain sampler;
    jointly, per-coordinate disagreement has probability |q_x - q_y|.
    """
    if not isinstance(model, OlapModel):
        raise TypeError("model must be an OlapModel")
    model._check_delta(x)
    model._check_delta(y)
    p = model.p
    if not 1 <= J <= p:
        raise ValueError(f"J must satisfy 1 <= J <= p={p}")
    rng = _as_rng(rng)
    base = np.arange(p, dtype=np.intp)
    perm = np.empty_like(base)
    mx, my = _coupled_sweep(model, x.mask, y.mask, rng, J, perm, base)
    return Support(p, mx), Support(p, my)


def l_lag_meeting_time(model, L, delta0_sampler, max_steps, seed, *, J=1):
    """Meeting time of an L-lagged coupled pair, both started iid.

    Chain X runs alone for L steps; the pair (X_t, Y_{t-L}) then advances
    jointly with shared randomness until the first t >= L where they are
    equal.  If max_steps elapses first, a censored record is returned
    (flagged, never dropped).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if max_steps < L:
        raise ValueError("max_steps must be >= L")
    p = model.p
    if not 1 <= J <= p:
        raise ValueError(f"J must satisfy 1 <= J <= p={p}")
    rng = _as_rng(seed)
    seed_field = int(seed) if isinstance(seed, (int, np.integer)) else -1
    d0x = delta0_sampler(model, rng)
    d0y = delta0_sampler(model, rng)
    model._check_delta(d0x)
    model._check_delta(d0y)
    kind = getattr(delta0_sampler, "kind", "")
    base = np.arange(p, dtype=np.intp)
    perm = np.empty_like(base)
    mx, my = d0x.mask, d0y.mask
    for _ in range(L):
        mx = _sweep_masks(model, mx, rng, J, perm, base)
    t = L
    while mx != my:
        if t >= max_steps:
            return MeetingRecord(
                tau=t, L=L, seed=seed_field, delta0_x=d0x, delta0_y=d0y,
                censored=True, init_kind=kind,
            )
        mx, my = _coupled_sweep(model, mx, my, rng, J, perm, base)
        t += 1
    return MeetingRecord(
        tau=t, L=L, seed=seed_field, delta0_x=d0x, delta0_y=d0y,
        censored=False, init_kind=kind,
    )


def sample_meeting_times(
    model, n_records, L, delta0_sampler, max_steps, seed, *, J=1, workers=None
):
    """n_records independent meeting times with derived per-record seeds.

    Records are produced by a thread pool sharing the model's score cache
    and merged in seed order, so the output is deterministic regardless of
    scheduling.  Per-record integer seeds derive from the master seed.
    """
    if n_records < 1:
        raise ValueError("n_records must be >= 1")
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(n_records)]

    def one(s):
        return l_lag_meeting_time(model, L, delta0_sampler, max_steps, s, J=J)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, seeds))
    return [one(s) for s in seeds]


def tv_bound_curve(records, t_max):
    """Empirical distance-to-stationarity bound d_hat(t) for t = 0..t_max.

    Censored records are excluded with a warning; the remaining records
    must share one lag L.  The curve is non-increasing by construction.
    """
    if not records:
        raise ValueError("records must be non-empty")
    kept = [r for r in records if not r.censored]
    dropped = len(records) - len(kept)
    if dropped:
        warnings.warn(
            f"excluding {dropped} censored record(s) from the bound curve",
            RuntimeWarning,
        )
    if not kept:
        raise ValueError("all records are censored")
    lags = {r.L for r in kept}
    if len(lags) > 1:
        raise ValueError(f"records mix lags {sorted(lags)}")
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    L = kept[0].L
    taus = np.array([r.tau for r in kept], dtype=float)
    ts = np.arange(t_max + 1, dtype=float)
    excess = np.ceil((taus[None, :] - L - ts[:, None]) / L)
    return np.maximum(excess, 0.0).mean(axis=1)


def mixing_time_estimate(curve, threshold=DEFAULT_THRESHOLD):
    """Smallest t with curve[t] <= threshold.

    Returns len(curve) (that is, t_max + 1) with a warning when the curve
    never crosses the threshold.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 1 or curve.size == 0:
        raise ValueError("curve must be a non-empty vector")
    below = np.flatnonzero(curve <= threshold)
    if below.size == 0:
        warnings.warn(
            f"bound curve never reaches threshold {threshold}; "
            "mixing-time estimate is censored at t_max + 1",
            RuntimeWarning,
        )
        return int(curve.size)
    return int(below[0])


# ---------------------------------------------------------------------------
# Initial-state samplers (each carries a .kind label for record exports)
# ---------------------------------------------------------------------------


def init_null():
    """Start from the empty support."""

    def sample(model, rng):
        return Support.empty(model.p)

    sample.kind = "null"
    return sample


def init_fixed(delta, kind="lasso"):
    """Start from a fixed support (e.g. the initial estimator's support)."""
    if not isinstance(delta, Support):
        raise TypeError("delta must be a Support")

    def sample(model, rng):
        if delta.p != model.p:
            raise ValueError("fixed support length does not match the model")
        return delta

    sample.kind = kind
    return sample


def init_truth_plus_fp(delta_star, k):
    """Start from the true support plus k uniformly random false positives."""
    if not isinstance(delta_star, Support):
        raise TypeError("delta_star must be a Support")
    if k < 0:
        raise ValueError("k must be >= 0")

    def sample(model, rng):
        if delta_star.p != model.p:
            raise ValueError("delta_star length does not match the model")
        outside = np.flatnonzero(delta_star.to_array() == 0)
        if k > outside.size:
            raise ValueError(
                f"cannot add {k} false positives; only {outside.size} inactive"
            )
        mask = delta_star.mask
        for j in rng.choice(outside, size=k, replace=False):
            mask |= 1 << int(j)
        return Support(model.p, mask)

    sample.kind = f"truth+{k}fp"
    return sample


def init_posterior_draw(max_p=20):
    """Start from an exact posterior draw (small p; enumeration-backed)."""
    cache = {}

    def sample(model, rng):
        key = id(model)
        if key not in cache:
            table = enumerate_posterior(model, max_p=max_p)
            cache[key] = np.array([prob for _, prob in table])
        probs = cache[key]
        mask = int(rng.choice(probs.size, p=probs))
        return Support(model.p, mask)

    sample.kind = "posterior"
    return sample


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def records_to_json(records, path):
    """Write one JSON row per record: {seed, L, tau, censored, init_kind}."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "seed": r.seed,
                        "L": r.L,
                        "tau": r.tau,
                        "censored": r.censored,
                        "init_kind": r.init_kind,
                    }
                )
                + "\n"
            )


def load_records(path):
    """Read records written by records_to_json (supports lack start states)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out.append(
                MeetingRecord(
                    tau=int(d["tau"]),
                    L=int(d["L"]),
                    seed=int(d["seed"]),
                    delta0_x=None,
                    delta0_y=None,
                    censored=bool(d["censored"]),
                    init_kind=str(d.get("init_kind", "")),
                )
            )
    return out


def curve_to_csv(curve, path):
    """Write the bound curve as CSV rows (t, d_hat) with a header."""
    curve = np.asarray(curve, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "d_hat"])
        for t, v in enumerate(curve):
            writer.writerow([t, f"{v:.10g}"])
