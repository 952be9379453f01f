"""Sparsity structures: which of the p coordinates enter the model.

A ``Support`` is an immutable bit vector of length p.  It is hashable (the
packed integer mask doubles as the cache key inside the samplers) and totally
ordered lexicographically on its bits, which gives every collection of models
a canonical ordering for reports and tie-breaking.

Indices are 1-based in every public interface, matching the usual statistical
numbering of covariates x_1 .. x_p; the packed mask keeps bit j-1 for
coordinate j internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, order=False)
class Support:
    """Immutable model: a subset of {1, .., p} stored as a packed bitmask.

    Attributes:
        p: number of coordinates.
        mask: integer whose bit j-1 is set iff coordinate j is active.
        weight: number of active coordinates, cached at construction.
    """

    p: int
    mask: int
    weight: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("support length must be >= 1")
        if self.mask < 0 or self.mask >> self.p:
            raise ValueError("mask has bits outside 1..p")
        object.__setattr__(self, "weight", int(self.mask).bit_count())

    # ---- constructors ----

    @classmethod
    def empty(cls, p):
        return cls(p, 0)

    @classmethod
    def full(cls, p):
        return cls(p, (1 << p) - 1)

    @classmethod
    def from_indices(cls, p, indices):
        """Build from an iterable of active 1-based indices."""
        mask = 0
        for j in indices:
            if not 1 <= j <= p:
                raise IndexError(f"index {j} outside 1..{p}")
            mask |= 1 << (j - 1)
        return cls(p, mask)

    @classmethod
    def from_array(cls, bits):
        """Build from a 0/1 array-like of length p."""
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise ValueError("bit vector must be one-dimensional")
        mask = 0
        for j, b in enumerate(arr):
            if b not in (0, 1):
                raise ValueError("entries must be 0 or 1")
            if b:
                mask |= 1 << j
        return cls(arr.shape[0], mask)

    # ---- views ----

    @property
    def indices(self):
        """Sorted tuple of active 1-based indices (the serialized form)."""
        return tuple(j + 1 for j in range(self.p) if self.mask >> j & 1)

    def active_idx(self):
        """Active coordinates as a 0-based numpy index array, increasing."""
        return np.array([j for j in range(self.p) if self.mask >> j & 1], dtype=np.intp)

    def to_array(self):
        return np.array([(self.mask >> j) & 1 for j in range(self.p)], dtype=np.int8)

    def contains(self, j):
        """Membership of the 1-based index j."""
        self._check_index(j)
        return bool(self.mask >> (j - 1) & 1)

    def _check_index(self, j):
        if not 1 <= j <= self.p:
            raise IndexError(f"index {j} outside 1..{self.p}")

    # ---- ordering: lexicographic on the bit vector (delta_1 first) ----

    def _lex_key(self):
        return tuple(self.mask >> j & 1 for j in range(self.p))

    def __lt__(self, other):
        self._check_same_length(other)
        return self._lex_key() < other._lex_key()

    def __le__(self, other):
        self._check_same_length(other)
        return self._lex_key() <= other._lex_key()

    def __gt__(self, other):
        return not self.__le__(other)

    def __ge__(self, other):
        return not self.__lt__(other)

    def _check_same_length(self, other):
        if not isinstance(other, Support):
            raise TypeError("expected a Support")
        if self.p != other.p:
            raise ValueError(f"length mismatch: {self.p} vs {other.p}")

    def __repr__(self):
        return f"Support(p={self.p}, active={list(self.indices)})"


def meet(a, b):
    """Component-wise minimum of two supports (bitwise AND)."""
    a._check_same_length(b)
    return Support(a.p, a.mask & b.mask)


def is_subset(a, b):
    """True iff every active coordinate of a is active in b."""
    a._check_same_length(b)
    return a.mask & b.mask == a.mask


def flip(delta, j, b):
    """Copy of delta with the bit at 1-based index j set to b."""
    delta._check_index(j)
    if b not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    bit = 1 << (j - 1)
    mask = delta.mask | bit if b else delta.mask & ~bit
    return Support(delta.p, mask)


def embed(w, delta):
    """Place the entries of w at delta's active coordinates, zeros elsewhere.

    w is read in increasing coordinate order; returns a length-p vector.
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] != delta.weight:
        raise ValueError(
            f"weight mismatch: |w|={w.shape} but support has {delta.weight} active"
        )
    out = np.zeros(delta.p)
    out[delta.active_idx()] = w
    return out


def extract(theta, delta):
    """Active coordinates of a length-p vector, in increasing order."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.shape[0] != delta.p:
        raise ValueError(f"dimension mismatch: |theta|={theta.shape} but p={delta.p}")
    return theta[delta.active_idx()]
