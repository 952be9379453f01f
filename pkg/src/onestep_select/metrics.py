"""Selection and prediction metrics over chain traces."""

from __future__ import annotations

import numpy as np

from .families import POISSON_CLAMP, _psi_vec
from .samplers import inclusion_probs
from .support import Support, meet


def f1_score(estimate, truth):
    """Harmonic mean of precision and sensitivity for support recovery.

    The degenerate case with no true positives, false positives, or false
    negatives (both supports empty) counts as a perfect recovery.
    """
    if estimate.p != truth.p:
        raise ValueError("supports must have equal length")
    tp = meet(estimate, truth).weight
    fp = estimate.weight - tp
    fn = truth.weight - tp
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def median_model(trace, burnin=0):
    """Support of coordinates with inclusion probability strictly above 1/2.

    A probability of exactly one half excludes the coordinate.
    """
    probs = inclusion_probs(trace, burnin)
    return Support.from_array((probs > 0.5).astype(int))


def modal_model(trace, burnin=0):
    """Most frequently visited support after burn-in (smallest mask on ties)."""
    hi = max(trace.steps - 1, 0)
    if not 0 <= burnin <= hi:
        raise ValueError(f"burnin must lie in [0, {hi}]")
    if trace._mask_path is not None:
        seg = trace._mask_path[burnin:]
        vals, cnts = np.unique(seg, return_counts=True)
        best = vals[cnts == cnts.max()].min()
        return Support(trace.p, int(best))
    counts = {}
    for s, m in zip(trace.steps_recorded, trace._retained_masks):
        if s >= burnin:
            counts[m] = counts.get(m, 0) + 1
    top = max(counts.values())
    return Support(trace.p, min(m for m, c in counts.items() if c == top))


def _mean_response(family, eta):
    """psi'(eta) with per-row overflow flagged as NaN for the poisson link."""
    if family.tag == "poisson":
        bad = np.abs(eta) > POISSON_CLAMP
        safe = np.where(bad, 0.0, eta)
        mu = _psi_vec(family, safe, 1)
        return np.where(bad, np.nan, mu)
    return _psi_vec(family, eta, 1)


def predict(model, trace, burnin, X_new):
    """Posterior-averaged mean response at new design rows.

    Averages psi'(x . theta_check) over the retained post-burn-in supports,
    weighting each by its visit frequency.  Rows whose poisson predictor
    overflows for some support come back as NaN (flagged, not fabricated).
    """
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != model.p:
        raise ValueError(f"X_new must have {model.p} columns")
    hi = max(trace.steps - 1, 0)
    if not 0 <= burnin <= hi:
        raise ValueError(f"burnin must lie in [0, {hi}]")
    kept = [m for s, m in zip(trace.steps_recorded, trace._retained_masks)
            if s >= burnin]
    if not kept:
        raise ValueError("no retained samples after burnin")
    weights = {}
    for m in kept:
        weights[m] = weights.get(m, 0) + 1
    total = float(len(kept))
    out = np.zeros(X_new.shape[0])
    family = model.data.family
    for m, w in sorted(weights.items()):
        entry = model._entry(m)
        theta_check = entry[2]
        if not np.all(np.isfinite(theta_check)) and m != 0:
            out += np.nan * (w / total)
            continue
        idx = Support(model.p, m).active_idx()
        eta = X_new[:, idx] @ theta_check if idx.size else np.zeros(X_new.shape[0])
        out += _mean_response(family, eta) * (w / total)
    return out


def rmse(y, y_hat):
    """Root mean squared error, ignoring nothing: NaNs propagate."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError("shape mismatch")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))
