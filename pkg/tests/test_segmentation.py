import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcdart.segmentation import MaterialSpectra, segment_multi, segment_single

three = MaterialSpectra.from_materials([[0.5], [1.0]])


def test_threshold_examples():
    assert segment_single([0.26], three).tolist() == [1]
    assert segment_single([0.25], three).tolist() == [1]      # midpoint goes to the higher value
    assert segment_single([0.249], three).tolist() == [0]
    assert segment_single([0.75, 0.7499, 5.0, -3.0], three).tolist() == [2, 1, 2, 0]


def test_nearest_centroid_examples():
    sp = MaterialSpectra([[0.0, 0.0], [0.2, 0.8], [0.9, 0.1]])
    assert segment_multi(np.array([[0.2], [0.7]]), sp).tolist() == [1]
    tie = MaterialSpectra([[0.0], [1.0]])
    assert segment_multi(np.array([[0.5]]), tie).tolist() == [0]


def test_spectra_validation():
    with pytest.raises(ValueError):
        MaterialSpectra([[0.1], [0.5]])
    with pytest.raises(ValueError):
        MaterialSpectra([[0.0], [-0.5]])
    with pytest.raises(ValueError):
        MaterialSpectra([[0.0], [np.nan]])
    with pytest.raises(ValueError):
        MaterialSpectra([[0.0]])
    assert MaterialSpectra.from_materials([[0.3, 0.4]]).table.shape == (2, 2)


def test_channel_mismatch():
    sp = MaterialSpectra.from_materials([[0.3, 0.4]])
    with pytest.raises(ValueError):
        segment_multi(np.zeros((3, 4)), sp)
    with pytest.raises(ValueError):
        segment_single(np.zeros(4), sp)


def test_duplicate_attenuations_take_lowest_label():
    sp = MaterialSpectra.from_materials([[0.5], [0.5], [1.0]])
    assert segment_single([0.5, 0.6, 1.0], sp).tolist() == [1, 1, 3]
    assert segment_multi(np.array([[0.5, 0.6, 1.0]]), sp).tolist() == [1, 1, 3]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6))
def test_single_channel_rules_agree(seed, m):
    rng = np.random.default_rng(seed)
    sp = MaterialSpectra.from_materials(rng.random((m, 1)))
    x = rng.uniform(-0.2, 1.2, 500)
    assert np.array_equal(segment_multi(x[None, :], sp), segment_single(x, sp))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 4), C=st.integers(1, 3))
def test_matches_brute_force(seed, m, C):
    rng = np.random.default_rng(seed)
    sp = MaterialSpectra.from_materials(rng.random((m, C)))
    X = rng.uniform(-0.1, 1.1, (C, 64))
    expected = [min(range(m + 1), key=lambda s: (sum((X[c, j] - sp.table[s, c]) ** 2 for c in range(C)), s))
                for j in range(64)]
    assert segment_multi(X, sp).tolist() == expected


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 5), C=st.integers(1, 4))
def test_material_permutation_relabels(seed, m, C):
    rng = np.random.default_rng(seed)
    mu = rng.random((m, C))
    X = rng.random((C, 200))
    perm = rng.permutation(m)
    base = segment_multi(X, MaterialSpectra.from_materials(mu))
    permuted = segment_multi(X, MaterialSpectra.from_materials(mu[perm]))
    # permuted row i holds old material perm[i] + 1
    mapping = np.zeros(m + 1, dtype=np.intp)
    mapping[perm + 1] = np.arange(1, m + 1)
    assert np.array_equal(permuted, mapping[base])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 5), C=st.integers(1, 4))
def test_idempotent_and_channel_order_free(seed, m, C):
    rng = np.random.default_rng(seed)
    sp = MaterialSpectra.from_materials(rng.random((m, C)))
    X = rng.random((C, 200))
    labels = segment_multi(X, sp)
    again = segment_multi(np.array([sp.attenuation(labels, c) for c in range(C)]), sp)
    unique_rows = len({tuple(r) for r in sp.table}) == m + 1
    if unique_rows:
        assert np.array_equal(again, labels)
    order = rng.permutation(C)
    assert np.array_equal(segment_multi(X[order], MaterialSpectra(sp.table[:, order])), labels)


def test_repeating_every_channel_does_not_change_labels(rng):
    sp = MaterialSpectra.from_materials(rng.random((4, 2)))
    X = rng.random((2, 300))
    doubled = MaterialSpectra(np.hstack([sp.table, sp.table]))
    assert np.array_equal(segment_multi(np.vstack([X, X]), doubled), segment_multi(X, sp))
