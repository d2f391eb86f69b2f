"""Uniform triangulations of axis-aligned rectangles, triangle quadrature
and constant-time point location.

Vertices are numbered row by row, ``k = j * (N + 1) + i`` for the vertex in
column ``i`` and row ``j``.  Every grid square ``(i, j)`` is split by its
lower-left to upper-right diagonal into a lower triangle (cell ``2 * s``) and
an upper triangle (cell ``2 * s + 1``) where ``s = j * N + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import PointOutsideDomain

# Points this far outside the box (relative to its diagonal) are clamped.
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class AxisBox:
    lo: tuple[float, float] = (-1.0, -1.0)
    hi: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 2 or len(hi) != 2:
            raise ValueError("AxisBox corners must be points in R^2")
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValueError(f"AxisBox requires lo < hi componentwise, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def area(self) -> float:
        w = self.widths
        return float(w[0] * w[1])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def diagonal(self) -> float:
        return float(np.hypot(*self.widths))

    def distance_to_boundary(self, points) -> np.ndarray:
        """Distance from interior points to the nearest side of the box."""
        pts = np.asarray(points, dtype=float)
        d = np.minimum(pts - np.asarray(self.lo), np.asarray(self.hi) - pts)
        return d.min(axis=-1)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform right-triangle mesh of an :class:`AxisBox`.

    Attributes
    ----------
    vertices : (nv, 2) array
    cells : (nc, 3) int array, counter-clockwise vertex triples
    boundary_vertex_flags : (nv,) bool array
    N : int
        Subdivisions per side.
    h : float
        Largest cell diameter.
    box : AxisBox
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_vertex_flags: np.ndarray
    N: int
    h: float
    box: AxisBox = field(default_factory=AxisBox)

    def __post_init__(self):
        for arr in (self.vertices, self.cells, self.boundary_vertex_flags):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> np.ndarray:
        return self.box.widths / self.N

    @cached_property
    def cell_coords(self) -> np.ndarray:
        """(nc, 3, 2) vertex coordinates of each cell."""
        c = self.vertices[self.cells]
        c.setflags(write=False)
        return c

    @cached_property
    def signed_areas(self) -> np.ndarray:
        c = self.cell_coords
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        a = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        a.setflags(write=False)
        return a

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """(nc, 3, 2) constant gradients of the three barycentric coordinates."""
        c = self.cell_coords
        # grad(lambda_k) = rot90(opposite edge) / (2 * area)
        x, y = c[..., 0], c[..., 1]
        g = np.empty_like(c)
        g[:, :, 0] = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)
        g[:, :, 1] = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)
        g /= (2.0 * self.signed_areas)[:, None, None]
        g.setflags(write=False)
        return g

    def to_text(self) -> str:
        """Plain-text dump: vertex count, vertices, cell count, cells."""
        lines = [str(self.n_vertices)]
        lines += [f"{x!r} {y!r} {int(b)}" for (x, y), b in
                  zip(self.vertices.tolist(), self.boundary_vertex_flags.tolist())]
        lines.append(str(self.n_cells))
        lines += [" ".join(map(str, c)) for c in self.cells.tolist()]
        return "\n".join(lines) + "\n"


def build_uniform_mesh(N: int, box: AxisBox | None = None) -> Mesh:
    """Split each side of ``box`` into ``N`` intervals and every square into
    two right triangles along the lower-left/upper-right diagonal."""
    if box is None:
        box = AxisBox()
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    xs = np.linspace(box.lo[0], box.hi[0], N + 1)
    ys = np.linspace(box.lo[1], box.hi[1], N + 1)
    X, Y = np.meshgrid(xs, ys)  # row j, column i
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(N), np.arange(N))
    v00 = (j * (N + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + N + 1
    v11 = v01 + 1
    cells = np.empty((2 * N * N, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([v00, v10, v11])
    cells[1::2] = np.column_stack([v00, v11, v01])

    ii, jj = np.meshgrid(np.arange(N + 1), np.arange(N + 1))
    boundary = ((ii == 0) | (ii == N) | (jj == 0) | (jj == N)).ravel()

    dx, dy = box.widths / N
    return Mesh(vertices, cells, boundary, N, float(np.hypot(dx, dy)), box)


def mesh_size(mesh: Mesh) -> float:
    """Largest edge length over all cells."""
    c = mesh.cell_coords
    edges = c - np.roll(c, 1, axis=1)
    return float(np.sqrt((edges ** 2).sum(axis=-1)).max())


def locate_points(mesh: Mesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised point location.

    Returns the containing cell index and barycentric coordinates with respect
    to that cell's vertex order for every row of ``points``.  Points on the
    diagonal of a square belong to its lower triangle.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.asarray(mesh.box.lo)
    hi = np.asarray(mesh.box.hi)
    tol = CLAMP_TOL * mesh.box.diagonal
    outside = np.any((pts < lo - tol) | (pts > hi + tol), axis=1)
    if outside.any():
        raise PointOutsideDomain(pts[np.argmax(outside)])
    s = (np.clip(pts, lo, hi) - lo) / mesh.spacing
    ij = np.minimum(np.floor(s).astype(np.int64), mesh.N - 1)
    f = np.clip(s - ij, 0.0, 1.0)
    fx, fy = f[:, 0], f[:, 1]
    square = ij[:, 1] * mesh.N + ij[:, 0]
    upper = fy > fx
    cells = 2 * square + upper
    bary = np.where(
        upper[:, None],
        np.column_stack([1.0 - fy, fx, fy - fx]),
        np.column_stack([1.0 - fx, fx - fy, fy]),
    )
    return cells, bary


def locate_point(mesh: Mesh, x) -> tuple[int, np.ndarray]:
    cells, bary = locate_points(mesh, np.asarray(x, dtype=float)[None, :])
    return int(cells[0]), bary[0]


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle.

    ``points`` are barycentric triples, ``weights`` sum to one and are scaled
    by the cell area where the rule is applied.
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _orbit_s21(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit_s111(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (b, a, c), (a, c, b), (c, a, b), (b, c, a), (c, b, a)]


def _make_rule(groups, order):
    pts, wts = [], []
    for orbit, w in groups:
        pts += orbit
        wts += [w] * len(orbit)
    wts = np.array(wts)
    return QuadratureRule(np.array(pts), wts / wts.sum(), order)


# Dunavant rules, parameters refined to full double precision.
_RULES = {
    1: _make_rule([([(1 / 3, 1 / 3, 1 / 3)], 1.0)], 1),
    2: _make_rule([(_orbit_s21(1 / 6), 1 / 3)], 2),
    4: _make_rule([
        (_orbit_s21(0.44594849091596488632), 0.22338158967801146570),
        (_orbit_s21(0.09157621350977074346), 0.10995174365532186764),
    ], 4),
    6: _make_rule([
        (_orbit_s21(0.24928674517091042129), 0.11678627572637936603),
        (_orbit_s21(0.06308901449150222834), 0.050844906370206816921),
        (_orbit_s111(0.31035245103378440542, 0.053145049844816947353), 0.082851075618373575194),
    ], 6),
}


def quadrature_rule(order: int) -> QuadratureRule:
    """Cheapest built-in rule exact for polynomials of degree ``order``."""
    for k in sorted(_RULES):
        if k >= order:
            return _RULES[k]
    raise ValueError(f"no triangle rule of order {order}; maximum is {max(_RULES)}")


def cell_quadrature(mesh: Mesh, cell: int, rule: QuadratureRule):
    """List of ``(point, weight)`` pairs for one cell, weights summing to its area."""
    coords = mesh.cell_coords[cell]
    pts = rule.points @ coords
    w = rule.weights * mesh.areas[cell]
    return list(zip(pts, w))


def quadrature_points(coords: np.ndarray, rule: QuadratureRule):
    """Physical quadrature points and weights for a stack of triangles.

    Parameters
    ----------
    coords : (nc, 3, 2) array of triangle vertices
    rule : QuadratureRule

    Returns
    -------
    points : (nc, nq, 2) array
    weights : (nc, nq) array
    """
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    points = np.einsum("qk,ckd->cqd", rule.points, coords)
    return points, area[:, None] * rule.weights[None, :]


def subdivide(coords: np.ndarray) -> np.ndarray:
    """Split every triangle into four congruent children by its edge midpoints."""
    a, b, c = coords[:, 0], coords[:, 1], coords[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    kids = np.stack([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ], axis=1)
    return kids.reshape(-1, 3, 2)
