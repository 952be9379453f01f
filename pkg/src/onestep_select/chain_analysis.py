"""Exact finite-state analysis of the single-coordinate support sampler.

At small p the chain lives on all 2^p supports, so its transition matrix
can be assembled exactly from the conditional inclusion probabilities and
every mixing quantity of interest computed without sampling error:

  * spectral gap of the stationarity-symmetrized kernel,
  * zeta-conductance by exhaustive subset enumeration,
  * the canonical-path bottleneck m(X0) built from remove-then-add paths
    through a reference support,
  * exact total-variation decay curves by matrix powers.

verify_bounds ties these together: the Cheeger sandwich, the path lower
bound on the gap, the restricted-set composite bound, and the variance
decay inequality, each asserted with explicit slack and a concrete witness
on failure.

Conventions: states are indexed by the integer value of the support's bit
vector; tv distances use the l1 (factor-2) convention throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.special import expit

from .posterior import OlapModel, enumerate_posterior, _mask_bits
from .support import Support

DENSE_EIGEN_CAP = 4096
CONDUCTANCE_STATE_CAP = 20
VERIFY_STATE_CAP = 16


@dataclass(frozen=True)
class FiniteChain:
    """All 2^p supports, the J=1 kernel, and its stationary law.

    states[i] is the support whose bit vector has integer value i; K is
    row-stochastic; pi is the exact stationary distribution.  The kernel
    is reversible and positive with respect to pi, which the residuals
    helper quantifies.
    """

    states: tuple
    K: sp.csr_matrix
    pi: np.ndarray

    @property
    def n_states(self):
        return len(self.states)

    @property
    def p(self):
        return self.states[0].p

    def invariant_residuals(self, check_eigen=True):
        """Max deviations from row-stochasticity, stationarity,
        reversibility, and (optionally) positivity."""
        K = self.K
        pi = self.pi
        rows = np.abs(np.asarray(K.sum(axis=1)).ravel() - 1.0).max()
        stat = np.abs(pi @ K - pi).sum()
        F = sp.diags(pi) @ K
        rev = np.abs((F - F.T).toarray()).max()
        out = {"row_sums": float(rows), "stationarity": float(stat),
               "reversibility": float(rev)}
        if check_eigen:
            if self.n_states > DENSE_EIGEN_CAP:
                raise ValueError(
                    f"{self.n_states} states exceeds the dense eigen cap "
                    f"{DENSE_EIGEN_CAP}"
                )
            evals = eigh(_symmetrized(self), eigvals_only=True)
            out["min_eigenvalue"] = float(evals[0])
        return out


def build_transition_matrix(model, max_p=12):
    """Assemble the exact J=1 kernel over all 2^p supports.

    Row delta sends probability (1/p) q_j to the state with bit j on and
    (1/p)(1-q_j) to the state with it off, for each coordinate j; mass
    landing on delta itself accumulates on the diagonal.  The stationary
    law comes from exhaustive enumeration.
    """
    if not isinstance(model, OlapModel):
        raise TypeError("model must be an OlapModel")
    p = model.p
    if p > max_p:
        raise ValueError(f"p={p} exceeds max_p={max_p}")
    n = 1 << p
    table = enumerate_posterior(model, max_p=max_p)
    pi = np.array([prob for _, prob in table])
    scores = np.array([model._log_score_mask(m) for m in range(n)])
    masks = np.arange(n, dtype=np.int64)
    rows = []
    cols = []
    vals = []
    inv_p = 1.0 / p
    for j in range(p):
        bit = 1 << j
        m1 = masks | bit
        m0 = masks & ~bit
        with np.errstate(invalid="ignore"):
            d = scores[m1] - scores[m0]
        q = np.where(np.isnan(d), 0.0, expit(d))
        rows.append(masks)
        cols.append(m1)
        vals.append(inv_p * q)
        rows.append(masks)
        cols.append(m0)
        vals.append(inv_p * (1.0 - q))
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    states = tuple(s for s, _ in table)
    return FiniteChain(states=states, K=K, pi=pi)


def _symmetrized(chain):
    """Dense D^{1/2} K D^{-1/2}, numerically symmetrized."""
    pi = chain.pi
    if np.any(pi <= 0):
        raise ValueError(
            "stationary law has zero-mass states; the symmetrized kernel "
            "is undefined (did a score overflow to -inf?)"
        )
    root = np.sqrt(pi)
    S = chain.K.toarray() * (root[:, None] / root[None, :])
    return 0.5 * (S + S.T)


def spectral_gap(chain):
    """1 minus the second-largest eigenvalue of the symmetrized kernel."""
    if chain.n_states > DENSE_EIGEN_CAP:
        raise ValueError(
            f"{chain.n_states} states exceeds the dense eigen cap {DENSE_EIGEN_CAP}"
        )
    evals = eigh(_symmetrized(chain), eigvals_only=True)
    return float(1.0 - evals[-2])


def _conductance_impl(chain, zeta):
    """(phi_zeta, witness subset as a state-index tuple or None).

    Exhaustive over all nonempty proper subsets; inf over an empty
    admissible family is +inf with witness None.
    """
    n = chain.n_states
    if n > CONDUCTANCE_STATE_CAP:
        raise ValueError(
            f"{n} states exceeds the subset-enumeration cap {CONDUCTANCE_STATE_CAP}"
        )
    if not 0 <= zeta < 0.5:
        raise ValueError("zeta must lie in [0, 1/2)")
    pi = chain.pi
    Q = chain.K.toarray() * pi[:, None]
    best = math.inf
    best_mask = None
    n_subsets = 1 << n
    chunk = 1 << 16
    sub_ids = np.arange(1, n_subsets - 1, dtype=np.int64)
    for lo in range(0, sub_ids.size, chunk):
        ids = sub_ids[lo : lo + chunk]
        B = ((ids[:, None] >> np.arange(n)) & 1).astype(float)
        Bc = 1.0 - B
        # Sums of nonnegative terms: pi(A^c) and the boundary flow must not
        # be formed by subtraction, or near-full subsets cancel to noise.
        pi_A = B @ pi
        pi_comp = Bc @ pi
        ok = (pi_A > zeta) & (pi_comp > zeta)
        if not ok.any():
            continue
        Bok = B[ok]
        flow = np.einsum("cy,cy->c", Bok @ Q, Bc[ok])
        denom = (pi_A[ok] - zeta) * (pi_comp[ok] - zeta)
        ratio = flow / denom
        i = int(np.argmin(ratio))
        if ratio[i] < best:
            best = float(ratio[i])
            best_mask = int(ids[np.flatnonzero(ok)[i]])
    if best_mask is None:
        return math.inf, None
    witness = tuple(int(b) for b in _mask_bits(best_mask))
    return best, witness


def conductance(chain, zeta=0.0):
    """Exact zeta-conductance by subset enumeration.

    Minimizes flow(A) / ((pi(A) - zeta)(pi(A^c) - zeta)) over subsets with
    zeta < pi(A) < 1 - zeta; returns +inf when no subset qualifies.
    """
    phi, _ = _conductance_impl(chain, zeta)
    return phi


def _path_to_target(mask, target):
    """Remove false positives (decreasing index), then add missing bits
    (increasing index); returns the state sequence starting at mask."""
    out = [mask]
    cur = mask
    for b in sorted(_mask_bits(mask & ~target), reverse=True):
        cur &= ~(1 << b)
        out.append(cur)
    for b in sorted(_mask_bits(target & ~cur)):
        cur |= 1 << b
        out.append(cur)
    return out


def _pair_path(x, y, target):
    """Canonical path x -> y through the first shared state of the two
    target-directed paths."""
    px = _path_to_target(x, target)
    py = _path_to_target(y, target)
    pos = {s: i for i, s in enumerate(py)}
    for i, s in enumerate(px):
        if s in pos:
            return px[: i + 1] + py[: pos[s]][::-1]
    raise AssertionError("target-directed paths failed to meet")


def canonical_path_bound(chain, delta_star, X0):
    """Bottleneck constant m(X0) of the remove-then-add path family.

    For every ordered pair of distinct states in X0, the canonical path
    routes through the reference support delta_star; each directed edge
    accumulates |path| pi(x) pi(y), and m is the worst ratio of that load
    to the edge's stationary flow.  A path edge with zero flow means the
    restriction is disconnected and raises.
    """
    if not isinstance(delta_star, Support) or delta_star.p != chain.p:
        raise ValueError("delta_star must be a Support of the chain's dimension")
    masks = sorted({s.mask for s in X0})
    if not masks:
        raise ValueError("X0 must be non-empty")
    n = chain.n_states
    for m in masks:
        if not 0 <= m < n:
            raise ValueError("X0 contains a state outside the chain")
    pi = chain.pi
    Kd = chain.K.toarray()
    star = delta_star.mask
    load = {}
    for x in masks:
        for y in masks:
            if x == y:
                continue
            path = _pair_path(x, y, star)
            w = (len(path) - 1) * pi[x] * pi[y]
            seen = set()
            for a, b in zip(path[:-1], path[1:]):
                if (a, b) in seen:
                    raise AssertionError("edge repeated within a canonical path")
                seen.add((a, b))
                load[(a, b)] = load.get((a, b), 0.0) + w
    m_val = 0.0
    for (a, b), w in load.items():
        q = pi[a] * Kd[a, b]
        if q <= 0.0:
            raise ValueError(
                f"zero-flow edge {Support(chain.p, a).indices} -> "
                f"{Support(chain.p, b).indices}: X0 is disconnected for the chain"
            )
        m_val = max(m_val, w / q)
    return float(m_val)


def tv_curve(chain, pi0, N):
    """Exact distance to stationarity, l1 convention, for t = 0..N."""
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.shape != (chain.n_states,):
        raise ValueError(f"pi0 must have length {chain.n_states}")
    if np.any(pi0 < -1e-15) or abs(pi0.sum() - 1.0) > 1e-10:
        raise ValueError("pi0 must be a probability vector")
    if N < 0:
        raise ValueError("N must be >= 0")
    mu = pi0.copy()
    out = np.empty(N + 1)
    for t in range(N + 1):
        out[t] = np.abs(mu - chain.pi).sum()
        if t < N:
            mu = mu @ chain.K
    return out


def tv_curve_to_csv(curve, path):
    """Write a TV decay curve as CSV rows (t, tv) with a header."""
    curve = np.asarray(curve, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,tv\n")
        for t, v in enumerate(curve):
            fh.write(f"{t},{v:.10g}\n")


# ---------------------------------------------------------------------------
# The verification suite
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Outcome of verify_bounds: quantities plus per-assertion records.

    Each assertion record has name, passed, skipped, reason, and a witness
    (the violating subset, edge, or time index) when it failed.
    """

    lam: float
    phi_by_zeta: dict
    m_all: float | None
    m_X0: float | None
    s_star: int
    J0: int
    assertions: tuple

    @property
    def passed(self):
        return all(a["passed"] or a["skipped"] for a in self.assertions)

    def to_json(self, path):
        payload = {
            "lambda": self.lam,
            "phi_by_zeta": {f"{z:g}": v for z, v in self.phi_by_zeta.items()},
            "m_X0": self.m_X0,
            "m_all": self.m_all,
            "s_star": self.s_star,
            "J0": self.J0,
            "assertions": list(self.assertions),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)


_SLACK = 1e-10


def _indices_of(chain, state_idx):
    return list(chain.states[state_idx].indices)


def verify_bounds(chain, delta_star, epsilons, J0=1):
    """Assert the four finite-state mixing bounds with explicit slack.

    (i)   Cheeger sandwich: Phi^2/8 <= lambda <= Phi at zeta = 0.
    (ii)  Path bound on all states: 1/m(all) <= lambda.
    (iii) Restricted composite: 1/m(X0) <= Phi_{2 eps} for each eps whose
          preconditions hold, where X0 is the ball of supports with at
          most s_star + J0 active coordinates and pi(X0) >= 1 - eps/8.
          Out-of-scope eps (2 eps >= 1/2, or too little mass on the ball)
          are reported as skipped, never silently passed.
    (iv)  Variance decay: tv(t)^2 <= (1 - lambda/2)^t (1/pi(x) - 1) for
          every point-mass start x and t <= 200.

    Failures carry witnesses: the minimizing subset for (i)/(iii), the
    bottleneck edge for (ii), and the (start, t) pair for (iv).
    """
    n = chain.n_states
    if n > VERIFY_STATE_CAP:
        raise ValueError(
            f"{n} states exceeds the verification cap {VERIFY_STATE_CAP}"
        )
    if not isinstance(delta_star, Support) or delta_star.p != chain.p:
        raise ValueError("delta_star must be a Support of the chain's dimension")
    epsilons = [float(e) for e in epsilons]
    for e in epsilons:
        if not 0 <= e < 0.5:
            raise ValueError(f"epsilon {e} outside [0, 1/2)")

    lam = spectral_gap(chain)
    phi0, phi0_set = _conductance_impl(chain, 0.0)
    phi_by_zeta = {0.0: phi0}
    assertions = []

    def record(name, passed, *, skipped=False, reason="", witness=None, **extra):
        rec = {"name": name, "passed": bool(passed), "skipped": bool(skipped),
               "reason": reason, "witness": witness}
        rec.update(extra)
        assertions.append(rec)

    # (i) Cheeger sandwich at zeta = 0
    lower_ok = phi0 * phi0 / 8.0 <= lam + _SLACK
    upper_ok = lam <= phi0 + _SLACK
    witness = None
    if not (lower_ok and upper_ok):
        witness = {"set_A": [_indices_of(chain, i) for i in phi0_set]}
    record("cheeger_sandwich", lower_ok and upper_ok, witness=witness,
           phi=phi0, lam=lam)

    # (ii) path bound over every state
    all_states = set(chain.states)
    m_all = None
    try:
        m_all = canonical_path_bound(chain, delta_star, all_states)
        ok = 1.0 / m_all <= lam + _SLACK
        witness = None
        if not ok:
            witness = {"m": m_all, "edge": _bottleneck_edge(chain, delta_star, all_states)}
        record("path_bound_all", ok, witness=witness, m=m_all, lam=lam)
    except ValueError as exc:
        record("path_bound_all", False, reason=str(exc))

    # (iii) restricted composite per epsilon
    s_star = delta_star.weight
    cap = s_star + J0
    ball = {s for s in chain.states if s.weight <= cap}
    ball_mass = float(sum(chain.pi[s.mask] for s in ball))
    m_X0 = None
    try:
        m_X0 = canonical_path_bound(chain, delta_star, ball)
    except ValueError as exc:
        m_X0_err = str(exc)
    for eps in epsilons:
        name = "restricted_composite"
        if 2.0 * eps >= 0.5:
            record(name, False, skipped=True, epsilon=eps,
                   reason=f"2*eps = {2 * eps:g} outside the conductance domain")
            continue
        if ball_mass < 1.0 - eps / 8.0:
            record(name, False, skipped=True, epsilon=eps,
                   reason=f"pi(X0) = {ball_mass:.6g} < 1 - eps/8")
            continue
        if m_X0 is None:
            record(name, False, epsilon=eps, reason=m_X0_err)
            continue
        zeta = 2.0 * eps
        phi_z, phi_z_set = _conductance_impl(chain, zeta)
        phi_by_zeta[zeta] = phi_z
        ok = 1.0 / m_X0 <= phi_z + _SLACK
        witness = None
        if not ok and phi_z_set is not None:
            witness = {"set_A": [_indices_of(chain, i) for i in phi_z_set]}
        record(name, ok, epsilon=eps, witness=witness, m_X0=m_X0, phi=phi_z)

    # (iv) variance decay from every point-mass start
    N_max = 200
    base = 1.0 - lam / 2.0
    ok_all = True
    witness = None
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        curve = tv_curve(chain, e, N_max)
        var0 = 1.0 / chain.pi[i] - 1.0
        bound = var0 * np.power(base, np.arange(N_max + 1))
        bad = np.flatnonzero(curve**2 > bound + _SLACK)
        if bad.size:
            ok_all = False
            witness = {"start": _indices_of(chain, i), "N": int(bad[0])}
            break
    record("variance_decay", ok_all, witness=witness, N_max=N_max)

    return BoundReport(
        lam=lam,
        phi_by_zeta=phi_by_zeta,
        m_all=m_all,
        m_X0=m_X0,
        s_star=s_star,
        J0=J0,
        assertions=tuple(assertions),
    )


def _bottleneck_edge(chain, delta_star, X0):
    """Directed edge attaining the max in the path bound (for witnesses)."""
    masks = sorted({s.mask for s in X0})
    pi = chain.pi
    Kd = chain.K.toarray()
    star = delta_star.mask
    load = {}
    for x in masks:
        for y in masks:
            if x == y:
                continue
            path = _pair_path(x, y, star)
            w = (len(path) - 1) * pi[x] * pi[y]
            for a, b in zip(path[:-1], path[1:]):
                load[(a, b)] = load.get((a, b), 0.0) + w
    best = None
    best_ratio = -math.inf
    for (a, b), w in load.items():
        q = pi[a] * Kd[a, b]
        if q > 0 and w / q > best_ratio:
            best_ratio = w / q
            best = (a, b)
    if best is None:
        return None
    return [list(Support(chain.p, best[0]).indices),
            list(Support(chain.p, best[1]).indices)]
