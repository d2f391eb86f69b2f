"""MINI element (P1 + cubic bubble / P1) discretization of the Stokes problem

    a(u, v) + b(p, v) = (f, v),   b(q, u) = 0,

with the deformation-rate viscous form ``a(u, v) = 2 nu (D(u), D(v))``,
``b(q, v) = -(q, div v)``, homogeneous Dirichlet velocity data and a
mean-zero pressure enforced through one Lagrange multiplier.

Velocity dof layout: component ``d`` of vertex ``k`` is global index
``d * S + k`` and the bubble of cell ``t`` is ``d * S + n_vertices + t``,
where ``S = n_vertices + n_cells``.  Pressure dofs are the vertices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, quadrature_points, quadrature_rule
from .solver import SaddleOperator, SolveInfo, finalize, solve_symmetric_indefinite

log = logging.getLogger(__name__)

BUBBLE_SCALE = 27.0


def basis_values(bary: np.ndarray) -> np.ndarray:
    """Local scalar velocity basis ``[l0, l1, l2, 27 l0 l1 l2]`` at barycentric points."""
    bary = np.asarray(bary, dtype=float)
    bubble = BUBBLE_SCALE * bary[..., 0] * bary[..., 1] * bary[..., 2]
    return np.concatenate([bary, bubble[..., None]], axis=-1)


def basis_gradients(grad_lambda: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Gradients of the local velocity basis.

    Parameters
    ----------
    grad_lambda : (..., 3, 2) barycentric gradients of the containing cells
    bary : (..., 3) barycentric coordinates, broadcast against ``grad_lambda``

    Returns
    -------
    (..., 4, 2) array
    """
    l0, l1, l2 = bary[..., 0], bary[..., 1], bary[..., 2]
    coef = np.stack([l1 * l2, l0 * l2, l0 * l1], axis=-1)
    gb = BUBBLE_SCALE * np.einsum("...k,...kd->...d", coef, grad_lambda)
    gl = np.broadcast_to(grad_lambda, gb.shape[:-1] + (3, 2))
    return np.concatenate([gl, gb[..., None, :]], axis=-2)


class FemSpaces:
    """Dof bookkeeping for MINI velocity and P1 pressure on a mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.n_vertices = mesh.n_vertices
        self.n_cells = mesh.n_cells
        self.stride = self.n_vertices + self.n_cells

    @property
    def n_velocity(self) -> int:
        return 2 * self.stride

    @property
    def n_pressure(self) -> int:
        return self.n_vertices

    @cached_property
    def scalar_dofs(self) -> np.ndarray:
        """(nc, 4) scalar dof per local basis function: three vertices, one bubble."""
        bub = self.n_vertices + np.arange(self.n_cells)
        return np.column_stack([self.mesh.cells, bub])

    @cached_property
    def velocity_dofs(self) -> np.ndarray:
        """(nc, 2, 4) global velocity dof indexed by component and local basis."""
        s = self.scalar_dofs
        return np.stack([s, s + self.stride], axis=1)

    @cached_property
    def free_mask(self) -> np.ndarray:
        fixed_scalar = np.concatenate([self.mesh.boundary_vertex_flags,
                                       np.zeros(self.n_cells, dtype=bool)])
        return ~np.concatenate([fixed_scalar, fixed_scalar])

    @cached_property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.free_mask)

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def interpolate_velocity(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Coefficients matching ``func`` at vertices and cell centroids."""
        mesh = self.mesh
        vert = np.asarray(func(mesh.vertices), dtype=float)
        cent = np.asarray(func(mesh.cell_coords.mean(axis=1)), dtype=float)
        bubble = cent - vert[mesh.cells].mean(axis=1)
        out = np.empty(self.n_velocity)
        for d in range(2):
            out[d * self.stride:d * self.stride + self.n_vertices] = vert[:, d]
            out[d * self.stride + self.n_vertices:(d + 1) * self.stride] = bubble[:, d]
        return out

    def interpolate_pressure(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.asarray(func(self.mesh.vertices), dtype=float)

    def _cell_quadrature(self, order: int):
        rule = quadrature_rule(order)
        _, w = quadrature_points(self.mesh.cell_coords, rule)
        return rule, w


def assemble_viscous(spaces: FemSpaces, nu: float = 1.0, quad_order: int = 4) -> sp.csr_matrix:
    """Viscous matrix on all velocity dofs (no boundary conditions)."""
    if not nu > 0:
        raise ValueError("viscosity must be positive")
    rule, w = spaces._cell_quadrature(quad_order)
    G = basis_gradients(spaces.mesh.barycentric_gradients[:, None], rule.points[None])
    # a(phi_a e_i, phi_b e_j) = nu * int(delta_ij grad phi_a . grad phi_b + d_j phi_a d_i phi_b)
    lap = np.einsum("cq,cqad,cqbd->cab", w, G, G)
    cross = np.einsum("cq,cqaj,cqbi->ciajb", w, G, G)
    local = cross
    local[:, 0, :, 0, :] += lap
    local[:, 1, :, 1, :] += lap
    local *= nu
    dofs = spaces.velocity_dofs
    rows = np.broadcast_to(dofs[:, :, :, None, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, None, :, :], local.shape)
    n = spaces.n_velocity
    return finalize(rows, cols, local, (n, n))


def assemble_divergence(spaces: FemSpaces, quad_order: int = 4):
    """Divergence coupling ``B[k, v] = -int psi_k div(phi_v)`` and pressure
    basis integrals ``c[k] = int psi_k``."""
    rule, w = spaces._cell_quadrature(quad_order)
    G = basis_gradients(spaces.mesh.barycentric_gradients[:, None], rule.points[None])
    local = -np.einsum("cq,qk,cqai->ckia", w, rule.points, G)
    cells = spaces.mesh.cells
    dofs = spaces.velocity_dofs
    rows = np.broadcast_to(cells[:, :, None, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :, :], local.shape)
    B = finalize(rows, cols, local, (spaces.n_pressure, spaces.n_velocity))
    return B, pressure_integrals(spaces)


def assemble_rhs(spaces: FemSpaces, force: Callable[[np.ndarray], np.ndarray],
                 quad_order: int = 6) -> np.ndarray:
    """Load vector ``int force . phi`` on all velocity dofs.

    ``force`` maps an ``(m, 2)`` array of points to ``(m, 2)`` force values.
    """
    rule = quadrature_rule(quad_order)
    pts, w = quadrature_points(spaces.mesh.cell_coords, rule)
    fvals = np.asarray(force(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape)
    phi = basis_values(rule.points)  # (nq, 4)
    local = np.einsum("cq,qa,cqi->cia", w, phi, fvals)
    return np.bincount(spaces.velocity_dofs.ravel(), weights=local.ravel(),
                       minlength=spaces.n_velocity)


@dataclass
class StokesSystem:
    """Reduced saddle-point system on the free velocity dofs."""

    spaces: FemSpaces
    A: sp.csr_matrix
    B: sp.csr_matrix
    c: np.ndarray
    rhs_u: np.ndarray
    nu: float
    full_A: Optional[sp.csr_matrix] = field(default=None, repr=False)
    full_B: Optional[sp.csr_matrix] = field(default=None, repr=False)
    full_rhs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def operator(self) -> SaddleOperator:
        return SaddleOperator(self.A, self.B, self.c)

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_u, np.zeros(self.spaces.n_pressure + 1)])


def assemble_stokes(spaces: FemSpaces, force: Optional[Callable] = None, nu: float = 1.0,
                    quad_order: int = 6) -> StokesSystem:
    A = assemble_viscous(spaces, nu)
    B, c = assemble_divergence(spaces)
    if force is None:
        rhs = np.zeros(spaces.n_velocity)
    else:
        rhs = assemble_rhs(spaces, force, quad_order)
    free = spaces.free_dofs
    return StokesSystem(spaces, A[free][:, free].tocsr(), B[:, free].tocsr(), c,
                        rhs[free], float(nu), A, B, rhs)


@dataclass
class DiscreteSolution:
    spaces: FemSpaces
    velocity: np.ndarray
    pressure: np.ndarray
    multiplier: float = 0.0
    info: Optional[SolveInfo] = None

    def velocity_components(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.spaces.stride
        return self.velocity[:s], self.velocity[s:]


def solve_stokes(system: StokesSystem, tol: float = 1e-10, **solver_kw) -> DiscreteSolution:
    """Solve the reduced system and scatter back to all velocity dofs.

    Raises
    ------
    SolverBreakdown
    """
    x, info = solve_symmetric_indefinite(system.operator, system.rhs, tol=tol, **solver_kw)
    spaces = system.spaces
    nf = spaces.n_free
    velocity = np.zeros(spaces.n_velocity)
    velocity[spaces.free_dofs] = x[:nf]
    pressure = x[nf:nf + spaces.n_pressure]
    return DiscreteSolution(spaces, velocity, pressure, float(x[-1]), info)


def interpolate_pressure_mean_shift(solution: DiscreteSolution,
                                   c: Optional[np.ndarray] = None) -> DiscreteSolution:
    """Shift the pressure by a constant so that its integral vanishes."""
    if c is None:
        c = pressure_integrals(solution.spaces)
    p = solution.pressure - np.dot(c, solution.pressure) / c.sum()
    return replace(solution, pressure=p)


def pressure_integrals(spaces: FemSpaces) -> np.ndarray:
    cells = spaces.mesh.cells
    return np.bincount(cells.ravel(), weights=np.repeat(spaces.mesh.areas / 3.0, 3),
                       minlength=spaces.n_pressure)
