"""Bit-vector support algebra: meet, inclusion, flips, embed/extract."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onestep_select import Support, embed, extract, flip, is_subset, meet


def sup(*bits):
    return Support.from_array(np.array(bits))


def test_meet_componentwise():
    assert meet(sup(1, 0, 1), sup(1, 1, 0)) == sup(1, 0, 0)


def test_meet_idempotent_and_annihilator():
    d = sup(0, 1, 1, 0)
    assert meet(d, d) == d
    assert meet(d, Support.empty(4)) == Support.empty(4)


def test_meet_length_mismatch():
    with pytest.raises(ValueError):
        meet(sup(1, 0), sup(1, 0, 0))


def test_is_subset_basic():
    assert is_subset(sup(1, 0, 0), sup(1, 1, 0))
    assert not is_subset(sup(0, 1), sup(1, 0))
    assert is_subset(Support.empty(3), sup(1, 1, 1))


def test_flip_examples():
    assert flip(sup(0, 0), 1, 1) == sup(1, 0)
    d = sup(1, 0, 1)
    # setting a bit to its current value is a no-op
    assert flip(d, 2, 0) == d
    assert flip(d, 1, 1) == d


def test_flip_out_of_range():
    d = sup(1, 0)
    with pytest.raises(IndexError):
        flip(d, 0, 1)
    with pytest.raises(IndexError):
        flip(d, 3, 1)


def test_weight_cached_and_correct():
    d = sup(1, 0, 1, 1)
    assert d.weight == 3
    assert flip(d, 2, 1).weight == 4
    assert flip(d, 1, 0).weight == 2


def test_embed_extract_examples():
    np.testing.assert_array_equal(
        embed(np.array([5.0, 7.0]), sup(0, 1, 0, 1)), [0, 5, 0, 7]
    )
    np.testing.assert_array_equal(
        extract(np.array([3.0, 1.0, 4.0]), sup(1, 0, 1)), [3, 4]
    )


def test_embed_dimension_mismatch():
    with pytest.raises(ValueError):
        embed(np.array([1.0]), sup(1, 1, 0))


def test_ordering_and_hash():
    a, b = sup(1, 0), sup(0, 1)
    assert a != b
    assert len({a, b, sup(1, 0)}) == 2
    assert (a < b) != (b < a)


def test_indices_are_one_based_sorted():
    assert sup(0, 1, 1, 0, 1).indices == (2, 3, 5)
    assert Support.empty(3).indices == ()


bit_arrays = st.lists(st.integers(0, 1), min_size=1, max_size=24)


@given(bit_arrays)
def test_roundtrip_extract_embed(bits):
    d = Support.from_array(np.array(bits))
    w = np.arange(1.0, d.weight + 1)
    assert np.array_equal(extract(embed(w, d), d), w)


@given(bit_arrays, bit_arrays)
def test_meet_commutes(xs, ys):
    n = min(len(xs), len(ys))
    a = Support.from_array(np.array(xs[:n]))
    b = Support.from_array(np.array(ys[:n]))
    assert meet(a, b) == meet(b, a)
    assert is_subset(meet(a, b), a)
    assert is_subset(meet(a, b), b)


@given(bit_arrays, st.data())
def test_flip_toggle_involution(bits, data):
    d = Support.from_array(np.array(bits))
    j = data.draw(st.integers(1, d.p))
    cur = 1 if d.contains(j) else 0
    assert flip(flip(d, j, 1 - cur), j, cur) == d


@given(bit_arrays)
def test_to_array_roundtrip(bits):
    arr = np.array(bits)
    assert np.array_equal(Support.from_array(arr).to_array(), arr)
