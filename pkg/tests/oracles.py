"""Independent reference computations used by the test-suite.

Nothing here goes through the assembly or solver code paths.
"""

import math

import numpy as np

from ibstokes.analysis import eval_solution_at
from ibstokes.mesh import quadrature_points, quadrature_rule


def triangle_monomial_mean(i, j):
    """Mean of x**i * y**j over the reference triangle (0,0), (1,0), (0,1)."""
    return 2.0 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


def bubble_test_field(rng):
    """Random polynomial vector field vanishing on the boundary of (-1, 1)^2.

    Returns callables ``phi(x) -> (m, 2)`` and ``grad(x) -> (m, 2, 2)``.
    """
    coef = rng.standard_normal((2, 3))

    def phi(x):
        X, Y = x[..., 0], x[..., 1]
        w = (1 - X ** 2) * (1 - Y ** 2)
        lin = coef[:, 0] + coef[:, 1] * X[..., None] + coef[:, 2] * Y[..., None]
        return w[..., None] * lin

    def grad(x):
        X, Y = x[..., 0], x[..., 1]
        w = (1 - X ** 2) * (1 - Y ** 2)
        wx = -2 * X * (1 - Y ** 2)
        wy = -2 * Y * (1 - X ** 2)
        lin = coef[:, 0] + coef[:, 1] * X[..., None] + coef[:, 2] * Y[..., None]
        g = np.empty(np.shape(x)[:-1] + (2, 2))
        g[..., :, 0] = wx[..., None] * lin + w[..., None] * coef[:, 1]
        g[..., :, 1] = wy[..., None] * lin + w[..., None] * coef[:, 2]
        return g

    return phi, grad


def polar_sector_rule(radius, n_theta=64, n_r=24, box_half=1.0):
    """Gauss rules for the disk ``|x| < radius`` and for ``(-b, b)^2`` minus
    that disk, written in polar coordinates.

    The outer region is split into eight angular sectors on which the
    distance to the square boundary is smooth.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_r)
    tg, twg = np.polynomial.legendre.leggauss(n_theta)

    def gl(a, b, x, w):
        return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w

    inner_pts, inner_w, outer_pts, outer_w = [], [], [], []
    for k in range(8):
        t, wt = gl(k * math.pi / 4, (k + 1) * math.pi / 4, tg, twg)
        for ti, wti in zip(t, wt):
            direction = np.array([math.cos(ti), math.sin(ti)])
            r_max = box_half / max(abs(direction[0]), abs(direction[1]))
            r, wr = gl(0.0, radius, xg, wg)
            inner_pts.append(r[:, None] * direction)
            inner_w.append(wti * wr * r)
            r, wr = gl(radius, r_max, xg, wg)
            outer_pts.append(r[:, None] * direction)
            outer_w.append(wti * wr * r)
    return (np.concatenate(inner_pts), np.concatenate(inner_w),
            np.concatenate(outer_pts), np.concatenate(outer_w))


def analytic_weak_defect(pressure, phi, grad, F, X, g, radius, n_boundary=4096):
    """``-int pi div(phi) - (int_Theta F . phi(X) dtheta + int g . phi)`` for a
    zero velocity field and a pressure that may jump across ``|x| = radius``.

    The pressure is integrated separately on each side of the circle so the
    rule never straddles the discontinuity.
    """
    ip, iw, op, ow = polar_sector_rule(radius)
    total = 0.0
    for pts, w in ((ip, iw), (op, ow)):
        div = np.trace(grad(pts), axis1=-2, axis2=-1)
        total += -(w * pressure(pts) * div).sum()
        total -= (w * (phi(pts) @ np.asarray(g))).sum()
    theta = 2 * math.pi * np.arange(n_boundary) / n_boundary  # periodic trapezoid
    boundary = (F(theta) * phi(X(theta))).sum(axis=-1).sum() * (2 * math.pi / n_boundary)
    return total - boundary


def fem_weak_residual(sol, phi_sol, force, nu, quad_order=6):
    """``a(u_h, phi_h) + b(p_h, phi_h) - (force, phi_h)`` by pointwise quadrature
    of the finite element functions (no assembled matrices)."""
    mesh = sol.spaces.mesh
    rule = quadrature_rule(quad_order)
    pts, w = quadrature_points(mesh.cell_coords, rule)
    pts = pts.reshape(-1, 2)
    w = w.ravel()
    u, gu, p = eval_solution_at(sol, pts)
    v, gv, _ = eval_solution_at(phi_sol, pts)
    Du = 0.5 * (gu + np.swapaxes(gu, 1, 2))
    Dv = 0.5 * (gv + np.swapaxes(gv, 1, 2))
    a = 2 * nu * (w * np.einsum("mij,mij->m", Du, Dv)).sum()
    b = -(w * p * np.trace(gv, axis1=1, axis2=2)).sum()
    f = (w * (force(pts) * v).sum(axis=-1)).sum()
    return a + b - f


def full_gradient_energy(coef_grad_func, area):
    """``nu * int |grad v|^2`` for a velocity with constant gradient (nu = 1)."""
    G = np.asarray(coef_grad_func)
    return float((G ** 2).sum() * area)
