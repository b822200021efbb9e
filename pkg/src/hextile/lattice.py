"""Regular hexagonal aperture tessellated by unit equilateral triangles.

Vertices live on a triangular lattice.  A lattice point ``(i, j)`` sits at
``x = rho * (i + j / 2)``, ``y = rho * sqrt(3) / 2 * j`` and the aperture of
side ``n`` (``rings``) is the set ``|i| <= n, |j| <= n, |i + j| <= n``.  The
hexagon has flat top and bottom sides, centred on the origin.

Conventions used throughout the package:

* triangles are raster ordered: row ``s = -n..n`` (``s != 0``) bottom to
  top, left to right inside a row;
* internal vertices get ids ``0..L-1`` in raster order (bottom-left to
  top-right), external vertices get ids ``L..L+M-1`` walking clockwise from
  the bottom-left corner;
* every edge is oriented counterclockwise around point-up (white) triangles
  and clockwise around point-down (black) ones.  That yields the three edge
  directions ``+e1``, ``e2 - e1`` and ``-e2``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)

# Oriented edge directions in lattice coordinates.
EDGE_DIRECTIONS = ((1, 0), (-1, 1), (0, -1))


@dataclass(frozen=True)
class Triangle:
    index: int
    row: int  # s, never zero
    r: int  # in-row index, symmetric about zero
    up: bool  # point-up (white) when True, point-down (black) otherwise
    vertices: tuple[int, int, int]
    centroid: tuple[float, float]

    @property
    def parity(self) -> str:
        return "white" if self.up else "black"


@dataclass(frozen=True)
class OrientedEdge:
    tail: int
    head: int
    on_boundary: bool
    triangles: tuple[int, ...]  # one triangle on the aperture rim, two inside


@dataclass(frozen=True, eq=False)
class HexAperture:
    rings: int
    cell_side: float
    lattice_points: np.ndarray  # (V, 2) integer (i, j) per vertex id
    vertex_xy: np.ndarray  # (V, 2) in wavelengths
    triangles: tuple[Triangle, ...]
    edges: tuple[OrientedEdge, ...]
    n_internal: int
    n_external: int
    # derived lookup tables, filled by build_aperture
    tri_vertices: np.ndarray = field(repr=False)  # (N, 3)
    tri_up: np.ndarray = field(repr=False)  # (N,) bool
    edge_tail: np.ndarray = field(repr=False)
    edge_head: np.ndarray = field(repr=False)
    edge_tris: np.ndarray = field(repr=False)  # (E, 2), -1 when absent
    tri_edges: np.ndarray = field(repr=False)  # (N, 3) edge ids
    tri_neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    vertex_neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    vertex_triangles: tuple[tuple[int, ...], ...] = field(repr=False)
    point_to_vertex: dict = field(repr=False)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_tiles(self) -> int:
        return len(self.triangles) // 2

    @property
    def n_vertices(self) -> int:
        return self.n_internal + self.n_external

    @property
    def internal_ids(self) -> range:
        return range(self.n_internal)

    @property
    def external_ids(self) -> range:
        return range(self.n_internal, self.n_vertices)

    def is_internal(self, vertex: int) -> bool:
        return 0 <= vertex < self.n_internal

    def row_widths(self) -> dict[int, int]:
        widths: dict[int, int] = {}
        for t in self.triangles:
            widths[t.row] = widths.get(t.row, 0) + 1
        return widths

    def edge_between(self, a: int, b: int) -> int:
        """Edge id joining vertices ``a`` and ``b`` (either orientation)."""
        return self._edge_index[(min(a, b), max(a, b))]

    @property
    def _edge_index(self) -> dict:
        cache = self.__dict__.get("_edge_index_cache")
        if cache is None:
            cache = {
                (min(e.tail, e.head), max(e.tail, e.head)): k
                for k, e in enumerate(self.edges)
            }
            object.__setattr__(self, "_edge_index_cache", cache)
        return cache


def _inside(i: int, j: int, n: int) -> bool:
    return abs(i) <= n and abs(j) <= n and abs(i + j) <= n


def _xy(i: int, j: int, rho: float) -> tuple[float, float]:
    return rho * (i + 0.5 * j), rho * 0.5 * SQRT3 * j


def _boundary_walk(n: int) -> list[tuple[int, int]]:
    """Rim lattice points, clockwise from the bottom-left corner ``(0, -n)``."""
    corners = [(0, -n), (-n, 0), (-n, n), (0, n), (n, 0), (n, -n)]
    walk = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        di = (b[0] - a[0]) // n
        dj = (b[1] - a[1]) // n
        for step in range(n):
            walk.append((a[0] + step * di, a[1] + step * dj))
    return walk


def build_aperture(rings: int, cell_side: float) -> HexAperture:
    """Build the hexagon with ``rings`` triangles per side and cell side
    ``cell_side`` (in wavelengths)."""
    if int(rings) != rings or rings < 1:
        raise ValueError(f"rings must be a positive integer, got {rings!r}")
    if not cell_side > 0 or not math.isfinite(cell_side):
        raise ValueError(f"cell_side must be positive, got {cell_side!r}")
    n = int(rings)
    rho = float(cell_side)

    rim = _boundary_walk(n)
    rim_set = set(rim)
    interior = sorted(
        ((i, j) for j in range(-n, n + 1) for i in range(-n, n + 1)
         if _inside(i, j, n) and (i, j) not in rim_set),
        key=lambda p: (p[1], p[0]),
    )
    points = interior + rim
    point_to_vertex = {p: k for k, p in enumerate(points)}
    L, M = len(interior), len(rim)

    # Triangles, row by row.  The strip between lattice rows j and j+1 is row
    # s = j + 1 for j >= 0 and s = j for j < 0.
    raw = []
    for j in range(-n, n):
        s = j + 1 if j >= 0 else j
        row = []
        for i in range(-2 * n, 2 * n + 1):
            up = ((i, j), (i + 1, j), (i, j + 1))
            if all(_inside(*p, n) for p in up):
                row.append((i + 0.5 * j + 0.5, True, up))
            down = ((i + 1, j), (i + 1, j + 1), (i, j + 1))
            if all(_inside(*p, n) for p in down):
                row.append((i + 0.5 * j + 1.0, False, down))
        row.sort(key=lambda item: item[0])
        raw.append((s, row))

    triangles = []
    for s, row in raw:
        half = (len(row) - 1) // 2
        for r_off, (_, up, pts) in enumerate(row):
            vids = tuple(point_to_vertex[p] for p in pts)
            cx = sum(_xy(*p, rho)[0] for p in pts) / 3.0
            cy = sum(_xy(*p, rho)[1] for p in pts) / 3.0
            triangles.append(
                Triangle(len(triangles), s, r_off - half, up, vids, (cx, cy))
            )

    # Orient edges by walking up triangles counterclockwise; every edge of the
    # lattice belongs to some up triangle or to a down triangle whose
    # clockwise walk gives the same direction.
    oriented: dict[tuple[int, int], list] = {}
    for t in triangles:
        a, b, c = t.vertices
        # up: (i,j) -> (i+1,j) -> (i,j+1) is counterclockwise.
        # down: stored as (i+1,j), (i+1,j+1), (i,j+1) which is
        # counterclockwise too, so walking it backwards is clockwise.
        cycle = [(a, b), (b, c), (c, a)] if t.up else [(a, c), (c, b), (b, a)]
        for tail, head in cycle:
            key = (min(tail, head), max(tail, head))
            entry = oriented.setdefault(key, [tail, head, []])
            if (entry[0], entry[1]) != (tail, head):
                raise AssertionError("inconsistent edge orientation")
            entry[2].append(t.index)

    edges = []
    for key in sorted(oriented):
        tail, head, tris = oriented[key]
        edges.append(OrientedEdge(tail, head, len(tris) == 1, tuple(sorted(tris))))

    lattice_points = np.array(points, dtype=int)
    vertex_xy = np.array([_xy(i, j, rho) for i, j in points])
    tri_vertices = np.array([t.vertices for t in triangles], dtype=int)
    tri_up = np.array([t.up for t in triangles], dtype=bool)
    edge_tail = np.array([e.tail for e in edges], dtype=int)
    edge_head = np.array([e.head for e in edges], dtype=int)
    edge_tris = np.full((len(edges), 2), -1, dtype=int)
    tri_edges = np.zeros((len(triangles), 3), dtype=int)
    fill = np.zeros(len(triangles), dtype=int)
    vnbr: list[list[int]] = [[] for _ in points]
    for k, e in enumerate(edges):
        edge_tris[k, : len(e.triangles)] = e.triangles
        for t in e.triangles:
            tri_edges[t, fill[t]] = k
            fill[t] += 1
        vnbr[e.tail].append(e.head)
        vnbr[e.head].append(e.tail)
    tri_nbrs = []
    for t in range(len(triangles)):
        nb = [int(x) for k in tri_edges[t] for x in edge_tris[k] if x not in (-1, t)]
        tri_nbrs.append(tuple(sorted(nb)))
    vtri: list[list[int]] = [[] for _ in points]
    for t in triangles:
        for v in t.vertices:
            vtri[v].append(t.index)

    return HexAperture(
        rings=n,
        cell_side=rho,
        lattice_points=lattice_points,
        vertex_xy=vertex_xy,
        triangles=tuple(triangles),
        edges=tuple(edges),
        n_internal=L,
        n_external=M,
        tri_vertices=tri_vertices,
        tri_up=tri_up,
        edge_tail=edge_tail,
        edge_head=edge_head,
        edge_tris=edge_tris,
        tri_edges=tri_edges,
        tri_neighbors=tuple(tri_nbrs),
        vertex_neighbors=tuple(tuple(sorted(v)) for v in vnbr),
        vertex_triangles=tuple(tuple(v) for v in vtri),
        point_to_vertex=point_to_vertex,
    )


def element_positions(aperture: HexAperture) -> np.ndarray:
    """One element per triangle, at its centroid; shape ``(N, 2)``."""
    return np.array([t.centroid for t in aperture.triangles])


def boundary_heights(aperture: HexAperture) -> np.ndarray:
    """Height values on the rim, in clockwise order starting at zero.

    Each step adds one when the rim edge points forward along the walk and
    subtracts one otherwise.
    """
    L, M = aperture.n_internal, aperture.n_external
    h = np.zeros(M, dtype=int)
    for m in range(M):
        a, b = L + m, L + (m + 1) % M
        e = aperture.edges[aperture.edge_between(a, b)]
        step = 1 if (e.tail, e.head) == (a, b) else -1
        if m + 1 < M:
            h[m + 1] = h[m] + step
        elif h[m] + step != h[0]:
            raise AssertionError("boundary height walk does not close")
    return h


def vertex_depths(aperture: HexAperture) -> np.ndarray:
    """Unoriented graph distance from the rim, for every internal vertex."""
    dist = np.full(aperture.n_vertices, -1, dtype=int)
    queue = deque(aperture.external_ids)
    for v in aperture.external_ids:
        dist[v] = 0
    while queue:
        v = queue.popleft()
        for w in aperture.vertex_neighbors[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist[: aperture.n_internal]


def vertex_depth(aperture: HexAperture, vertex: int) -> int:
    if not aperture.is_internal(vertex):
        raise ValueError(f"vertex {vertex} is not internal")
    return int(vertex_depths(aperture)[vertex])
