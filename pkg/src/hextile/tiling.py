"""Diamond tilings, height functions and tiling words.

Height convention: walking an edge along its orientation the height goes
up by one when the edge lies on a tile contour and down by two when the
edge is the short diagonal covered by a tile.  Around any triangle the
three steps add up to zero, so each triangle has exactly one covered edge.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import HexAperture, boundary_heights, vertex_depths

CONTOUR_STEP = 1
COVERED_STEP = -2

# Lattice direction of a covered (shared) edge -> tile orientation.
_ORIENTATION_BY_DIRECTION = {
    (1, 0): "V",  # horizontal shared edge: vertical diamond
    (-1, 1): "R",  # long axis at 30 degrees
    (0, -1): "L",  # long axis at 150 degrees
}
ORIENTATIONS = ("V", "L", "R")


class InvalidTilingError(ValueError):
    """A tiling, height field or word that violates the tiling rules."""

    def __init__(self, message: str, triangles: Sequence[int] = ()):
        super().__init__(message)
        self.triangles = tuple(triangles)


@dataclass(frozen=True)
class Tile:
    q: int
    orientation: str
    triangle_a: int
    triangle_b: int


@dataclass(frozen=True, eq=False)
class Tiling:
    """A perfect partition of the aperture triangles into diamonds.

    Tiles are numbered by their smallest triangle index, which makes the
    representation canonical: two tilings are equal iff their tiles are.
    """

    assignment: np.ndarray  # (N,) tile id per triangle
    tiles: tuple[Tile, ...]

    @property
    def n_tiles(self) -> int:
        return len(self.tiles)

    def pairs(self) -> frozenset:
        return frozenset((t.triangle_a, t.triangle_b) for t in self.tiles)

    def orientation_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(ORIENTATIONS, 0)
        for t in self.tiles:
            counts[t.orientation] += 1
        return counts

    def __eq__(self, other):
        if not isinstance(other, Tiling):
            return NotImplemented
        return self.pairs() == other.pairs()

    def __hash__(self):
        return hash(self.pairs())


def _shared_edge(aperture: HexAperture, a: int, b: int) -> int:
    common = set(aperture.tri_edges[a]) & set(aperture.tri_edges[b])
    if len(common) != 1:
        raise InvalidTilingError(f"triangles {a} and {b} are not adjacent", (a, b))
    return int(common.pop())


def tile_orientation(aperture: HexAperture, edge: int) -> str:
    e = aperture.edges[edge]
    d = tuple(int(x) for x in aperture.lattice_points[e.head] - aperture.lattice_points[e.tail])
    return _ORIENTATION_BY_DIRECTION[d]


def tiling_from_pairs(aperture: HexAperture, pairs: Iterable[tuple[int, int]]) -> Tiling:
    """Validate a set of triangle pairs and build the canonical ``Tiling``."""
    N = aperture.n_triangles
    owner = np.full(N, -1, dtype=int)
    ordered = sorted((min(a, b), max(a, b)) for a, b in pairs)
    for k, (a, b) in enumerate(ordered):
        for t in (a, b):
            if not 0 <= t < N:
                raise InvalidTilingError(f"triangle {t} outside the aperture", (t,))
            if owner[t] >= 0:
                raise InvalidTilingError(f"triangle {t} used by more than one tile", (t,))
            owner[t] = k
    missing = np.flatnonzero(owner < 0)
    if missing.size:
        raise InvalidTilingError(
            f"triangles not covered: {missing.tolist()}", missing.tolist()
        )
    tiles = []
    for k, (a, b) in enumerate(ordered):
        if aperture.tri_up[a] == aperture.tri_up[b]:
            raise InvalidTilingError(f"tile ({a}, {b}) joins two triangles of one colour", (a, b))
        edge = _shared_edge(aperture, a, b)
        tiles.append(Tile(k, tile_orientation(aperture, edge), a, b))
    return Tiling(owner, tuple(tiles))


def covered_edges(aperture: HexAperture, tiling: Tiling) -> np.ndarray:
    """Boolean mask over edges: True where the edge is a tile's short diagonal."""
    mask = np.zeros(len(aperture.edges), dtype=bool)
    for t in tiling.tiles:
        mask[_shared_edge(aperture, t.triangle_a, t.triangle_b)] = True
    return mask


def full_boundary(aperture: HexAperture) -> np.ndarray:
    """Height array of length V with rim values set and interior zeroed."""
    h = np.zeros(aperture.n_vertices, dtype=int)
    h[aperture.n_internal:] = boundary_heights(aperture)
    return h


def height_field(aperture: HexAperture, tiling: Tiling) -> np.ndarray:
    """Heights on all vertices (internal ids first, then the rim).

    Propagates breadth-first from the rim inward and checks every edge, so
    an invalid tiling is reported instead of silently producing heights.
    """
    covered = covered_edges(aperture, tiling)
    h = full_boundary(aperture)
    known = np.zeros(aperture.n_vertices, dtype=bool)
    known[aperture.n_internal:] = True
    queue = deque(aperture.external_ids)
    while queue:
        v = queue.popleft()
        for w in aperture.vertex_neighbors[v]:
            k = aperture.edge_between(v, w)
            step = COVERED_STEP if covered[k] else CONTOUR_STEP
            e = aperture.edges[k]
            value = h[v] + step if e.tail == v else h[v] - step
            if not known[w]:
                h[w] = value
                known[w] = True
                queue.append(w)
            elif h[w] != value:
                raise InvalidTilingError(
                    f"inconsistent heights across edge {v}-{w}",
                    [int(t) for t in aperture.edge_tris[k] if t >= 0],
                )
    return h


def edge_steps(aperture: HexAperture, h: np.ndarray) -> np.ndarray:
    return h[aperture.edge_head] - h[aperture.edge_tail]


def _third_containing(angle: float, starts: Sequence[float]) -> int:
    for k, a0 in enumerate(starts):
        if (angle - a0) % 360.0 < 120.0:
            return k
    raise AssertionError("angle not covered")


def minimal_tiling(aperture: HexAperture) -> Tiling:
    """Three rhombic thirds filled with L, V and R diamonds respectively.

    The hexagon is cut along the rays from the centre to the right,
    upper-left and lower-left corners.  The upper third is a rhombus with
    sides along 0 and 120 degrees and takes L diamonds, the left third
    takes V diamonds and the lower-right third takes R diamonds.
    """
    kinds = ("L", "V", "R")
    starts = (0.0, 120.0, 240.0)
    partner_dir = {"V": (1, 0), "R": (-1, 1), "L": (0, -1)}
    pairs = set()
    for t in aperture.triangles:
        cx, cy = t.centroid
        kind = kinds[_third_containing(math.degrees(math.atan2(cy, cx)), starts)]
        for k in aperture.tri_edges[t.index]:
            e = aperture.edges[k]
            d = tuple(int(x) for x in aperture.lattice_points[e.head] - aperture.lattice_points[e.tail])
            if d == partner_dir[kind]:
                other = [int(x) for x in aperture.edge_tris[k] if x not in (-1, t.index)]
                if len(other) != 1:
                    raise AssertionError("minimal tiling leaves the aperture")
                pairs.add((min(t.index, other[0]), max(t.index, other[0])))
    return tiling_from_pairs(aperture, pairs)


def minimal_heights(aperture: HexAperture) -> np.ndarray:
    cache = aperture.__dict__.get("_h_min_cache")
    if cache is None:
        cache = height_field(aperture, minimal_tiling(aperture))
        cache.setflags(write=False)
        object.__setattr__(aperture, "_h_min_cache", cache)
    return cache


def maximal_word(aperture: HexAperture) -> np.ndarray:
    return vertex_depths(aperture)


def word_to_heights(aperture: HexAperture, word: Sequence[int]) -> np.ndarray:
    w = np.asarray(word, dtype=int)
    if w.shape != (aperture.n_internal,):
        raise ValueError(f"word must have {aperture.n_internal} letters, got {w.shape}")
    h = minimal_heights(aperture).copy()
    h[: aperture.n_internal] += 3 * w
    return h


def heights_are_valid(aperture: HexAperture, h: np.ndarray) -> bool:
    steps = edge_steps(aperture, h)
    return bool(np.all((steps == CONTOUR_STEP) | (steps == COVERED_STEP)))


def is_valid_word(aperture: HexAperture, word: Sequence[int]) -> bool:
    w = np.asarray(word)
    if w.shape != (aperture.n_internal,) or not np.all(w == np.round(w)):
        return False
    return heights_are_valid(aperture, word_to_heights(aperture, w.astype(int)))


def tiling_from_heights(aperture: HexAperture, h: np.ndarray) -> Tiling:
    steps = edge_steps(aperture, h)
    bad = np.flatnonzero((steps != CONTOUR_STEP) & (steps != COVERED_STEP))
    if bad.size:
        tris = sorted({int(t) for k in bad for t in aperture.edge_tris[k] if t >= 0})
        raise InvalidTilingError("height field violates the edge rules", tris)
    pairs = []
    for k in np.flatnonzero(steps == COVERED_STEP):
        a, b = aperture.edge_tris[k]
        if b < 0:
            raise InvalidTilingError("rim edge marked as covered", [int(a)])
        pairs.append((int(a), int(b)))
    return tiling_from_pairs(aperture, pairs)


def tile_pairs_batch(aperture: HexAperture, heights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Member triangles of every tile for a stack of valid height fields.

    ``heights`` is ``(B, V)``; returns two ``(B, Q)`` arrays ordered by
    covered-edge id.  No validation: feed it heights from the enumerator.
    """
    h = np.atleast_2d(heights)
    steps = h[:, aperture.edge_head] - h[:, aperture.edge_tail]
    rows, edges = np.nonzero(steps == COVERED_STEP)
    Q = aperture.n_tiles
    if len(edges) != len(h) * Q:
        raise InvalidTilingError("height stack does not describe complete tilings")
    edges = edges.reshape(len(h), Q)
    return aperture.edge_tris[edges, 0], aperture.edge_tris[edges, 1]


def encode(aperture: HexAperture, tiling: Tiling) -> np.ndarray:
    diff = height_field(aperture, tiling)[: aperture.n_internal] - minimal_heights(aperture)[: aperture.n_internal]
    if np.any(diff % 3):
        raise InvalidTilingError("height difference not divisible by 3")
    return diff // 3


def decode(aperture: HexAperture, word: Sequence[int]) -> Tiling:
    if not is_valid_word(aperture, word):
        raise InvalidTilingError(f"invalid tiling word {list(np.asarray(word).tolist())}")
    return tiling_from_heights(aperture, word_to_heights(aperture, word))


def maximal_tiling(aperture: HexAperture) -> Tiling:
    return decode(aperture, maximal_word(aperture))


def is_tileable(side_lengths: Sequence[int]) -> bool:
    """Opposite sides equal: the diamond-tileability test for hexagons."""
    if len(side_lengths) != 6:
        raise ValueError("need six side lengths")
    if any(int(x) != x or x <= 0 for x in side_lengths):
        raise ValueError("side lengths must be positive integers")
    l = side_lengths
    return l[0] == l[3] and l[1] == l[4] and l[2] == l[5]


# --------------------------------------------------------------------------
# Completion of partially fixed height fields


def _other_vertex(aperture: HexAperture, tri: int, a: int, b: int) -> int:
    for v in aperture.tri_vertices[tri]:
        if v != a and v != b:
            return int(v)
    raise AssertionError


def _step_value(aperture: HexAperture, edge: int, frm: int, step: int, h_from: int) -> int:
    e = aperture.edges[edge]
    return h_from + step if e.tail == frm else h_from - step


class _Completion:
    """Mutable state of a partial tiling: known heights and placed tiles."""

    def __init__(self, aperture: HexAperture, partial: Mapping[int, int]):
        self.ap = aperture
        self.h = full_boundary(aperture)
        self.known = np.zeros(aperture.n_vertices, dtype=bool)
        self.known[aperture.n_internal:] = True
        for v, value in partial.items():
            v = int(v)
            if self.known[v] and self.h[v] != value:
                raise InvalidTilingError(f"vertex {v} conflicts with rim height")
            self.h[v] = int(value)
            self.known[v] = True
        self.partner = np.full(aperture.n_triangles, -1, dtype=int)
        self.placements = 0

    def _set(self, v: int, value: int) -> bool:
        if self.known[v]:
            if self.h[v] != value:
                raise InvalidTilingError(f"height conflict at vertex {v}")
            return False
        self.h[v] = value
        self.known[v] = True
        return True

    def place(self, edge: int) -> list[int]:
        """Put a tile across ``edge``; returns vertices that became known."""
        ap = self.ap
        a, b = (int(x) for x in ap.edge_tris[edge])
        if b < 0:
            raise InvalidTilingError("tile would leave the aperture", [a])
        for t in (a, b):
            if self.partner[t] >= 0:
                raise InvalidTilingError(f"triangle {t} already tiled", [t])
        self.partner[a], self.partner[b] = b, a
        self.placements += 1
        e = ap.edges[edge]
        new = []
        if self.known[e.tail] != self.known[e.head]:
            src, dst = (e.tail, e.head) if self.known[e.tail] else (e.head, e.tail)
            if self._set(dst, _step_value(ap, edge, src, COVERED_STEP, self.h[src])):
                new.append(dst)
        # Contour edges of the new tile.
        for t in (a, b):
            apex = _other_vertex(ap, t, e.tail, e.head)
            for end in (e.tail, e.head):
                k = ap.edge_between(apex, end)
                if self.known[end]:
                    value = _step_value(ap, k, end, CONTOUR_STEP, self.h[end])
                    if self._set(apex, value):
                        new.append(apex)
                elif self.known[apex]:
                    value = _step_value(ap, k, apex, CONTOUR_STEP, self.h[apex])
                    if self._set(end, value):
                        new.append(end)
        return new

    def check_known_edges(self) -> None:
        """Every edge between known vertices must step by +1 or -2."""
        ap = self.ap
        both = self.known[ap.edge_tail] & self.known[ap.edge_head]
        steps = self.h[ap.edge_head] - self.h[ap.edge_tail]
        bad = both & (steps != CONTOUR_STEP) & (steps != COVERED_STEP)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise InvalidTilingError(
                f"edge {ap.edges[k].tail}->{ap.edges[k].head} violates the height rules",
                [int(t) for t in ap.edge_tris[k] if t >= 0],
            )

    def propagate_forced(self) -> None:
        """Place every tile already implied by known heights."""
        ap = self.ap
        queue = deque(range(len(ap.edges)))
        queued = np.ones(len(ap.edges), dtype=bool)
        while queue:
            k = queue.popleft()
            queued[k] = False
            e = ap.edges[k]
            if not (self.known[e.tail] and self.known[e.head]):
                continue
            step = self.h[e.head] - self.h[e.tail]
            if step == CONTOUR_STEP:
                continue
            if step != COVERED_STEP:
                raise InvalidTilingError(
                    f"edge {e.tail}->{e.head} violates the height rules",
                    list(e.triangles),
                )
            a, b = (int(x) for x in ap.edge_tris[k])
            if b >= 0 and self.partner[a] == b:
                continue
            for v in self.place(k):
                for w in ap.vertex_neighbors[v]:
                    kk = ap.edge_between(v, w)
                    if not queued[kk]:
                        queued[kk] = True
                        queue.append(kk)

    def thurston(self) -> None:
        """Greedy completion: tile at the highest vertex of the free region's rim."""
        ap = self.ap
        free = self.partner < 0
        while np.any(free):
            # Vertices touching both a free triangle and a tiled one / the outside.
            on_rim = np.zeros(ap.n_vertices, dtype=bool)
            touches_free = np.zeros(ap.n_vertices, dtype=bool)
            for t in np.flatnonzero(free):
                touches_free[ap.tri_vertices[t]] = True
            for v in np.flatnonzero(touches_free):
                tris = ap.vertex_triangles[v]
                if v >= ap.n_internal or any(not free[t] for t in tris):
                    on_rim[v] = True
            cand = np.flatnonzero(on_rim)
            if np.any(~self.known[cand]):
                raise InvalidTilingError("free region rim has unknown heights")
            hv = self.h[cand]
            x = int(cand[np.flatnonzero(hv == hv.max())[0]])
            edge = self._forced_edge(x, free)
            if edge is None:
                raise InvalidTilingError(
                    f"no admissible tile at vertex {x}",
                    [int(t) for t in ap.vertex_triangles[x] if free[t]],
                )
            self.place(edge)
            a, b = ap.edge_tris[edge]
            free[a] = free[b] = False
            self.check_known_edges()

    def _forced_edge(self, x: int, free: np.ndarray) -> int | None:
        # Nothing inside the free region can sit above the highest rim
        # vertex, so every edge leaving x into the region drops by two and
        # is covered.  At a 120 degree corner this is the single tile
        # through x and its two rim neighbours.
        ap = self.ap
        for w in ap.vertex_neighbors[x]:
            k = ap.edge_between(x, w)
            a, b = ap.edge_tris[k]
            if ap.edges[k].tail == x and b >= 0 and free[a] and free[b]:
                return k
        return None

    def tiling(self) -> Tiling:
        pairs = {(min(a, int(b)), max(a, int(b))) for a, b in enumerate(self.partner)}
        return tiling_from_pairs(self.ap, pairs)


def complete_heights(aperture: HexAperture, partial: Mapping[int, int]) -> np.ndarray:
    """Forced placements, then Thurston's greedy completion; returns all heights."""
    state = _Completion(aperture, partial)
    state.check_known_edges()
    state.propagate_forced()
    state.thurston()
    for v, value in partial.items():
        if state.h[v] != value:
            raise InvalidTilingError(f"completion changed fixed vertex {v}")
    if not heights_are_valid(aperture, state.h):
        raise InvalidTilingError("completion produced an invalid height field")
    return state.h


def thurston_complete(aperture: HexAperture, partial: Mapping[int, int] | None = None) -> Tiling:
    """Complete a tiling from fixed heights (the rim is always fixed).

    ``partial`` maps vertex ids to heights.  Tiles implied by the fixed
    values are placed first; the rest of the aperture is filled by
    repeatedly tiling at the highest vertex on the rim of the untiled
    region (lowest vertex id on ties).
    """
    h = complete_heights(aperture, partial or {})
    return tiling_from_heights(aperture, h)
