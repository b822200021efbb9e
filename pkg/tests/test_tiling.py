import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hextile.enumeration import brute_force_enumerate, enumerate_words, successor
from hextile.lattice import build_aperture, vertex_depths
from hextile.tiling import (
    InvalidTilingError,
    complete_heights,
    decode,
    edge_steps,
    encode,
    height_field,
    is_tileable,
    is_valid_word,
    maximal_tiling,
    maximal_word,
    minimal_heights,
    minimal_tiling,
    thurston_complete,
    tiling_from_pairs,
    word_to_heights,
)


@pytest.fixture(scope="module")
def ap2():
    return build_aperture(2, 1.0)


def test_minimal_tiling_thirds(ap2):
    t = minimal_tiling(ap2)
    assert t.n_tiles == 12
    assert t.orientation_counts() == {"V": 4, "L": 4, "R": 4}
    assert minimal_tiling(build_aperture(1, 1.0)).orientation_counts() == {"V": 1, "L": 1, "R": 1}


@pytest.mark.parametrize("rings", [1, 2, 3, 4, 5])
def test_minimal_word_is_zero(rings):
    ap = build_aperture(rings, 1.0)
    assert np.all(encode(ap, minimal_tiling(ap)) == 0)


def test_minimal_heights_are_lowest(ap2):
    # every enumerated tiling sits at or above the minimal one
    h1 = minimal_heights(ap2)
    for t in brute_force_enumerate(ap2):
        assert np.all(height_field(ap2, t) >= h1)


def test_maximal_word_is_depth():
    assert maximal_word(build_aperture(1, 1.0)).tolist() == [1]
    ap = build_aperture(2, 1.0)
    w = maximal_word(ap)
    assert sorted(w.tolist()) == [1] * 6 + [2]
    t = maximal_tiling(ap)
    assert t.n_tiles == 12
    assert np.array_equal(height_field(ap, t), minimal_heights(ap) + np.r_[3 * vertex_depths(ap), np.zeros(12, int)])


def test_maximal_is_mirror_of_minimal(ap2):
    # the maximal tiling uses the same thirds, rotated by 60 degrees
    assert maximal_tiling(ap2).orientation_counts() == {"V": 4, "L": 4, "R": 4}
    assert maximal_tiling(ap2) != minimal_tiling(ap2)


def test_height_edges_valid(ap2):
    for t in brute_force_enumerate(ap2):
        steps = edge_steps(ap2, height_field(ap2, t))
        assert set(np.unique(steps)) <= {1, -2}
        assert np.all(np.isin(np.abs(steps), (1, 2)))


def test_tile_edge_rule(ap2):
    from hextile.tiling import covered_edges

    for t in brute_force_enumerate(ap2):
        steps = edge_steps(ap2, height_field(ap2, t))
        assert np.array_equal(np.abs(steps) == 2, covered_edges(ap2, t))


def test_divisible_by_three():
    ap = build_aperture(3, 1.0)
    h1 = minimal_heights(ap)
    for t in brute_force_enumerate(ap):
        assert np.all((height_field(ap, t) - h1) % 3 == 0)


def test_round_trip_two_rings(ap2):
    words = list(enumerate_words(ap2))
    tilings = [decode(ap2, w) for w in words]
    assert len(set(tilings)) == 20
    for w, t in zip(words, tilings):
        assert tuple(encode(ap2, t)) == w


def test_decode_rejects_invalid(ap2):
    bad = maximal_word(ap2).copy()
    bad[0] += 1
    assert not is_valid_word(ap2, bad)
    with pytest.raises(InvalidTilingError):
        decode(ap2, bad)
    assert not is_valid_word(ap2, [0] * 6)
    assert is_valid_word(ap2, [0] * 7)


def test_overlap_and_gap_named(ap2):
    pairs = sorted(minimal_tiling(ap2).pairs())
    with pytest.raises(InvalidTilingError) as err:
        tiling_from_pairs(ap2, pairs[1:])
    assert set(err.value.triangles) == set(pairs[0])
    a, b = pairs[0]
    c, d = pairs[1]
    with pytest.raises(InvalidTilingError) as err:
        tiling_from_pairs(ap2, [(a, b), (a, d)] + pairs[2:])
    assert a in err.value.triangles


def test_is_tileable():
    assert is_tileable((2, 2, 2, 2, 2, 2))
    assert is_tileable((1, 2, 3, 1, 2, 3))
    assert not is_tileable((1, 2, 3, 2, 1, 3))
    with pytest.raises(ValueError):
        is_tileable((1, 2, 3))


@pytest.mark.parametrize("rings", [1, 2, 3, 4, 6])
def test_thurston_from_rim_only(rings):
    ap = build_aperture(rings, 1.0)
    t = thurston_complete(ap)
    assert t.n_tiles == ap.n_tiles
    # the greedy fill from the rim gives the lowest heights
    assert np.all(encode(ap, t) == 0)


def test_thurston_idempotent(ap2):
    for t in brute_force_enumerate(ap2):
        h = height_field(ap2, t)
        fixed = {v: int(h[v]) for v in range(ap2.n_internal)}
        assert thurston_complete(ap2, fixed) == t


def test_thurston_first_transition(ap2):
    # raise the last letter that can move and let the greedy fill the rest
    w2 = successor(ap2, np.zeros(7, int), method="thurston")
    assert np.count_nonzero(w2) == 1
    xi = int(np.flatnonzero(w2)[0])
    partial = {j: int(minimal_heights(ap2)[j]) for j in range(xi)}
    partial[xi] = int(minimal_heights(ap2)[xi]) + 3
    assert thurston_complete(ap2, partial) == decode(ap2, w2)


def test_thurston_rejects_inconsistent(ap2):
    with pytest.raises(InvalidTilingError):
        complete_heights(ap2, {0: 100})


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_word_heights_identity(data):
    rings = data.draw(st.integers(1, 3))
    ap = build_aperture(rings, 1.0)
    words = list(enumerate_words(ap))
    w = data.draw(st.sampled_from(words))
    h = word_to_heights(ap, w)
    assert np.array_equal(h[: ap.n_internal], 3 * np.asarray(w) + minimal_heights(ap)[: ap.n_internal])
    assert np.array_equal(height_field(ap, decode(ap, w)), h)
