"""Point evaluation of discrete solutions, error norms, convergence rates
and the pressure-jump probe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import NonHalvingLevels
from .mesh import AxisBox, locate_points, quadrature_points, quadrature_rule, subdivide
from .stokes_fem import DiscreteSolution, basis_gradients, basis_values

# Cells per vectorised batch in error integration.
CHUNK = 8192


def eval_solution_at(sol: DiscreteSolution, points):
    """Evaluate velocity, velocity gradient and pressure at many points.

    Returns
    -------
    u : (m, 2) array
    grad_u : (m, 2, 2) array, ``grad_u[:, i, j] = d u_i / d x_j``
    p : (m,) array
    """
    spaces = sol.spaces
    mesh = spaces.mesh
    cells, bary = locate_points(mesh, points)
    coef = sol.velocity[spaces.velocity_dofs[cells]]  # (m, 2, 4)
    u = np.einsum("mia,ma->mi", coef, basis_values(bary))
    G = basis_gradients(mesh.barycentric_gradients[cells], bary)
    grad = np.einsum("mia,maj->mij", coef, G)
    p = np.einsum("mk,mk->m", sol.pressure[mesh.cells[cells]], bary)
    return u, grad, p


def eval_solution(sol: DiscreteSolution, x):
    """Velocity, velocity gradient and pressure at a single point.

    Raises
    ------
    PointOutsideDomain
    """
    u, g, p = eval_solution_at(sol, np.asarray(x, dtype=float)[None, :])
    return u[0], g[0], float(p[0])


@dataclass
class ReferenceSolution:
    """Either a discrete solution on another mesh or closed-form fields.

    For analytic references ``velocity``, ``velocity_grad`` and ``pressure``
    map ``(m, 2)`` points to ``(m, 2)``, ``(m, 2, 2)`` and ``(m,)`` arrays.
    ``interface`` optionally gives ``(center, radius)`` of a circle across
    which the analytic pressure jumps.
    """

    kind: str
    solution: Optional[DiscreteSolution] = None
    velocity: Optional[Callable] = None
    velocity_grad: Optional[Callable] = None
    pressure: Optional[Callable] = None
    interface: Optional[tuple] = None
    body_force: Optional[Callable] = field(default=None, repr=False)

    def evaluate(self, points):
        if self.kind == "fine_mesh":
            return eval_solution_at(self.solution, points)
        pts = np.asarray(points, dtype=float)
        return self.velocity(pts), self.velocity_grad(pts), self.pressure(pts)


def fine_mesh_reference(sol: DiscreteSolution) -> ReferenceSolution:
    return ReferenceSolution("fine_mesh", solution=sol)


def analytic_reference(box: AxisBox | None = None, g=(1.0, 0.0), kappa: float = 2.0,
                       radius: float = 0.5, center=(0.0, 0.0),
                       immersed_force: bool = True) -> ReferenceSolution:
    """Exact solution of the circle experiment with the unregularised force.

    The force ``-kappa * radius * n`` per unit parameter on a circle of the
    given radius is ``-kappa * n`` per unit arc length, which a pressure jump
    of ``kappa`` balances with zero velocity; the constant body force ``g``
    adds the linear pressure ``g . x``.  The constant shift makes the mean
    pressure over ``box`` zero.
    """
    box = box or AxisBox()
    g = np.asarray(g, dtype=float)
    c0 = np.asarray(center, dtype=float)
    jump = kappa if immersed_force else 0.0
    shift = float(g @ box.center) + jump * math.pi * radius ** 2 / box.area

    def pressure(x):
        x = np.asarray(x, dtype=float)
        inside = ((x - c0) ** 2).sum(axis=-1) < radius ** 2
        return x @ g + jump * inside - shift

    def velocity(x):
        return np.zeros(np.shape(x)[:-1] + (2,))

    def velocity_grad(x):
        return np.zeros(np.shape(x)[:-1] + (2, 2))

    interface = (tuple(c0), radius) if immersed_force else None
    return ReferenceSolution("analytic", velocity=velocity, velocity_grad=velocity_grad,
                             pressure=pressure, interface=interface)


def manufactured_reference(nu: float = 1.0) -> ReferenceSolution:
    """Smooth solution on ``(-1, 1)^2`` with matching Stokes body force.

    Velocity is the curl of ``(1 - x^2)^2 (1 - y^2)^2`` (zero on the boundary,
    divergence free); pressure is ``sin(pi x) cos(pi y)`` (mean zero).
    """
    def A(s):
        return (1 - s * s) ** 2

    def A1(s):
        return -4 * s * (1 - s * s)

    def A2(s):
        return 12 * s * s - 4

    def A3(s):
        return 24 * s

    def velocity(x):
        X, Y = x[..., 0], x[..., 1]
        return np.stack([A(X) * A1(Y), -A1(X) * A(Y)], axis=-1)

    def velocity_grad(x):
        X, Y = x[..., 0], x[..., 1]
        g = np.empty(np.shape(x)[:-1] + (2, 2))
        g[..., 0, 0] = A1(X) * A1(Y)
        g[..., 0, 1] = A(X) * A2(Y)
        g[..., 1, 0] = -A2(X) * A(Y)
        g[..., 1, 1] = -A1(X) * A1(Y)
        return g

    def pressure(x):
        return np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])

    def body_force(x):
        X, Y = x[..., 0], x[..., 1]
        lap_u1 = A2(X) * A1(Y) + A(X) * A3(Y)
        lap_u2 = -(A3(X) * A(Y) + A1(X) * A2(Y))
        dp_dx = np.pi * np.cos(np.pi * X) * np.cos(np.pi * Y)
        dp_dy = -np.pi * np.sin(np.pi * X) * np.sin(np.pi * Y)
        return np.stack([-nu * lap_u1 + dp_dx, -nu * lap_u2 + dp_dy], axis=-1)

    return ReferenceSolution("analytic", velocity=velocity, velocity_grad=velocity_grad,
                             pressure=pressure, body_force=body_force)


class ErrorNorms(NamedTuple):
    E_L_u: float
    E_W1_u: float
    E_L_p: float


def _near_interface(coords, center, radius, halfwidth):
    d = np.sqrt(((coords - np.asarray(center)) ** 2).sum(axis=-1))
    diam = np.sqrt(((coords - np.roll(coords, 1, axis=1)) ** 2).sum(axis=-1)).max(axis=1)
    return (d.min(axis=1) - diam <= radius + halfwidth) & (d.max(axis=1) >= radius - halfwidth)


def integration_cells(sol: DiscreteSolution, ref: ReferenceSolution,
                      band_halfwidth: Optional[float] = None, levels: int = 2) -> np.ndarray:
    """Triangles on which the error integrands are smooth enough to integrate.

    Fine-mesh references integrate on the finer of the two meshes.  Analytic
    references integrate on the solution mesh, with cells meeting the band
    ``radius +- band_halfwidth`` around a pressure interface split into
    ``4**levels`` children.
    """
    mesh = sol.spaces.mesh
    if ref.kind == "fine_mesh":
        other = ref.solution.spaces.mesh
        return other.cell_coords if other.n_cells > mesh.n_cells else mesh.cell_coords
    coords = mesh.cell_coords
    if ref.interface is None or levels <= 0:
        return coords
    center, radius = ref.interface
    if band_halfwidth is None:
        band_halfwidth = 2.0 * mesh.h
    near = _near_interface(coords, center, radius, band_halfwidth)
    fine = coords[near]
    for _ in range(levels):
        fine = subdivide(fine)
    return np.concatenate([coords[~near], fine])


def error_norms(sol: DiscreteSolution, ref: ReferenceSolution, r: float = 2.0,
                quad_order: int = 6, band_halfwidth: Optional[float] = None,
                levels: int = 2) -> ErrorNorms:
    """``L^r`` velocity, full ``W^{1,r}`` velocity and ``L^r`` pressure errors.

    Pointwise magnitudes are Euclidean for vectors and Frobenius for
    gradients; ``W^{1,r}`` is ``(int |e|^r + |grad e|^r)^(1/r)``.
    """
    if r < 1:
        raise ValueError("norm order must be >= 1")
    rule = quadrature_rule(quad_order)
    coords = integration_cells(sol, ref, band_halfwidth, levels)
    acc = np.zeros(3)
    for start in range(0, len(coords), CHUNK):
        pts, w = quadrature_points(coords[start:start + CHUNK], rule)
        pts = pts.reshape(-1, 2)
        w = w.ravel()
        u, gu, p = eval_solution_at(sol, pts)
        ur, gr, pr = ref.evaluate(pts)
        eu = np.sqrt(((u - ur) ** 2).sum(axis=-1))
        eg = np.sqrt(((gu - gr) ** 2).sum(axis=(-2, -1)))
        ep = np.abs(p - pr)
        acc += [w @ eu ** r, w @ eg ** r, w @ ep ** r]
    L_u, G_u, L_p = acc
    return ErrorNorms(L_u ** (1 / r), (L_u + G_u) ** (1 / r), L_p ** (1 / r))


@dataclass
class ConvergenceReport:
    r: float
    h: list[float]
    errors: list[tuple[float, float, float]]
    rates: list[Optional[tuple[float, float, float]]]

    def rows(self):
        return list(zip(self.h, self.errors, self.rates))


def convergence_rates(levels: Sequence[tuple[float, Sequence[float]]], r: float = float("nan"),
                      rel_tol: float = 1e-9) -> ConvergenceReport:
    """Observed orders ``(log E_2h - log E_h) / (log 2h - log h)`` between
    consecutive levels; the first level has no rate.

    Raises
    ------
    NonHalvingLevels
    """
    hs = [float(h) for h, _ in levels]
    errs = [tuple(float(e) for e in E) for _, E in levels]
    rates: list[Optional[tuple]] = [None] if levels else []
    for (h0, e0), (h1, e1) in zip(zip(hs, errs), zip(hs[1:], errs[1:])):
        if abs(h0 / h1 - 2.0) > rel_tol * 2.0:
            raise NonHalvingLevels(f"mesh sizes {h0} -> {h1} do not halve")
        denom = math.log(h0) - math.log(h1)
        rates.append(tuple(_rate(a, b, denom) for a, b in zip(e0, e1)))
    return ConvergenceReport(r, hs, errs, rates)


def _rate(e_coarse, e_fine, denom):
    if e_coarse > 0 and e_fine > 0:
        return (math.log(e_coarse) - math.log(e_fine)) / denom
    return float("nan")


def pressure_jump_probe(sol: DiscreteSolution | ReferenceSolution, radii=(0.35, 0.65), samples: int = 720,
                        center=(0.0, 0.0)) -> float:
    """Mean discrete pressure on the inner circle minus that on the outer one.

    Linear pressure components average to zero on centred circles, so only
    the jump survives.
    """
    r_in, r_out = radii
    t = 2.0 * math.pi * (np.arange(samples) + 0.5) / samples
    ring = np.column_stack([np.cos(t), np.sin(t)])
    c0 = np.asarray(center, dtype=float)
    evaluate = sol.evaluate if isinstance(sol, ReferenceSolution) else partial(eval_solution_at, sol)
    _, _, p_in = evaluate(c0 + r_in * ring)
    _, _, p_out = evaluate(c0 + r_out * ring)
    return float(p_in.mean() - p_out.mean())
