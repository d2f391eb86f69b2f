import math

import numpy as np
import pytest

from ibstokes.analysis import (ReferenceSolution, analytic_reference, convergence_rates,
                               error_norms, eval_solution, eval_solution_at,
                               fine_mesh_reference, manufactured_reference,
                               pressure_jump_probe)
from ibstokes.errors import NonHalvingLevels, PointOutsideDomain
from ibstokes.lagrangian import ImmersedBoundary
from ibstokes.mesh import build_uniform_mesh
from ibstokes.stokes_fem import DiscreteSolution, FemSpaces, assemble_stokes, solve_stokes

from oracles import analytic_weak_defect, bubble_test_field, polar_sector_rule

H10 = 2 * math.sqrt(2) / 10


def zero_solution(N):
    S = FemSpaces(build_uniform_mesh(N))
    return DiscreteSolution(S, np.zeros(S.n_velocity), np.zeros(S.n_pressure))


def g_only_solution(N):
    S = FemSpaces(build_uniform_mesh(N))
    force = lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))])
    return solve_stokes(assemble_stokes(S, force))


def test_eval_zero():
    u, g, p = eval_solution(zero_solution(3), [0.2, -0.4])
    assert not np.any(u) and not np.any(g) and p == 0.0


def test_eval_linear_pressure(rng):
    sol = zero_solution(5)
    sol.pressure[:] = sol.spaces.mesh.vertices[:, 0]
    pts = rng.uniform(-1, 1, (200, 2))
    _, _, p = eval_solution_at(sol, pts)
    assert np.allclose(p, pts[:, 0], atol=1e-14)


def test_eval_bubble():
    sol = zero_solution(4)
    S = sol.spaces
    t = 9
    sol.velocity[S.n_vertices + t] = 1.0
    u, g, _ = eval_solution(sol, S.mesh.cell_coords[t].mean(axis=0))
    assert u == pytest.approx([1.0, 0.0], abs=1e-14)
    assert np.allclose(g, 0.0, atol=1e-12)  # bubble peaks at the centroid
    for v in S.mesh.cell_coords[t]:
        assert eval_solution(sol, v)[0] == pytest.approx([0.0, 0.0], abs=1e-14)


def test_eval_outside():
    with pytest.raises(PointOutsideDomain):
        eval_solution(zero_solution(2), [2.0, 0.0])


def test_error_against_self_is_zero():
    sol = g_only_solution(6)
    assert error_norms(sol, fine_mesh_reference(sol), 1.5) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 3.0])
def test_error_norms_of_constant_fields(r):
    ref = ReferenceSolution(
        "analytic",
        velocity=lambda x: np.tile([0.6, 0.8], (len(x), 1)),
        velocity_grad=lambda x: np.zeros((len(x), 2, 2)),
        pressure=lambda x: np.full(len(x), 2.0))
    E = error_norms(zero_solution(4), ref, r)
    assert E.E_L_u == pytest.approx(4 ** (1 / r), rel=1e-13)
    assert E.E_W1_u == pytest.approx(4 ** (1 / r), rel=1e-13)
    assert E.E_L_p == pytest.approx(2 * 4 ** (1 / r), rel=1e-13)


def test_w1_norm_includes_gradient():
    ref = ReferenceSolution(
        "analytic",
        velocity=lambda x: np.column_stack([x[:, 0], np.zeros(len(x))]),
        velocity_grad=lambda x: np.tile([[1.0, 0.0], [0.0, 0.0]], (len(x), 1, 1)),
        pressure=lambda x: np.zeros(len(x)))
    E = error_norms(zero_solution(8), ref, 2.0)
    # int x^2 = 4/3, int 1 = 4
    assert E.E_L_u == pytest.approx(math.sqrt(4 / 3), rel=1e-12)
    assert E.E_W1_u == pytest.approx(math.sqrt(4 / 3 + 4), rel=1e-12)


def test_g_only_pressure_error_vanishes():
    ref = analytic_reference(immersed_force=False)
    for N in (10, 20, 40):
        E = error_norms(g_only_solution(N), ref, 1.0)
        assert E.E_L_p < 1e-10
        # exact discrete solution: velocity at solver round-off
        assert E.E_W1_u < 1e-10


def test_analytic_reference_mean_zero():
    ref = analytic_reference()
    ip, iw, op, ow = polar_sector_rule(0.5)
    total = (iw * ref.pressure(ip)).sum() + (ow * ref.pressure(op)).sum()
    assert abs(total) < 1e-12
    assert (iw.sum() + ow.sum()) == pytest.approx(4.0, rel=1e-13)


def test_analytic_reference_satisfies_weak_form(rng):
    ref = analytic_reference()
    ib = ImmersedBoundary.circle()
    for _ in range(20):
        phi, grad = bubble_test_field(rng)
        defect = analytic_weak_defect(ref.pressure, phi, grad, ib.F, ib.X, (1.0, 0.0), 0.5)
        assert abs(defect) <= 1e-8


def test_wrong_jump_fails_weak_form(rng):
    wrong = analytic_reference(kappa=1.0)  # jump 1 instead of 2
    ib = ImmersedBoundary.circle()
    phi, grad = bubble_test_field(rng)
    phi2 = lambda x: phi(x) + np.stack([x[..., 0] * (1 - x[..., 0] ** 2) * (1 - x[..., 1] ** 2),
                                       np.zeros(np.shape(x)[:-1])], axis=-1)
    def grad2(x):
        g = grad(x).copy()
        X, Y = x[..., 0], x[..., 1]
        g[..., 0, 0] += (1 - 3 * X ** 2) * (1 - Y ** 2)
        g[..., 0, 1] += X * (1 - X ** 2) * (-2 * Y)
        return g
    defect = analytic_weak_defect(wrong.pressure, phi2, grad2, ib.F, ib.X, (1.0, 0.0), 0.5)
    assert abs(defect) > 1e-3


def test_analytic_jump_probe():
    assert pressure_jump_probe(analytic_reference()) == pytest.approx(2.0, abs=1e-12)


def test_g_only_jump_is_zero():
    assert abs(pressure_jump_probe(g_only_solution(20))) < 1e-10


def test_manufactured_force_matches_symbolic():
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y")
    psi = (1 - x ** 2) ** 2 * (1 - y ** 2) ** 2
    u = sympy.Matrix([sympy.diff(psi, y), -sympy.diff(psi, x)])
    p = sympy.sin(sympy.pi * x) * sympy.cos(sympy.pi * y)
    nu = 1.7
    f = [sympy.simplify(-nu * (sympy.diff(u[i], x, 2) + sympy.diff(u[i], y, 2)) + sympy.diff(p, v))
         for i, v in enumerate((x, y))]
    ref = manufactured_reference(nu)
    pts = np.random.default_rng(3).uniform(-1, 1, (50, 2))
    fx = sympy.lambdify((x, y), f, "numpy")
    ux = sympy.lambdify((x, y), list(u), "numpy")
    gx = sympy.lambdify((x, y), [[sympy.diff(u[i], v) for v in (x, y)] for i in range(2)], "numpy")
    assert np.allclose(ref.body_force(pts), np.array(fx(pts[:, 0], pts[:, 1])).T, rtol=1e-12)
    assert np.allclose(ref.velocity(pts), np.array(ux(pts[:, 0], pts[:, 1])).T, rtol=1e-12)
    assert np.allclose(ref.velocity_grad(pts), np.moveaxis(np.array(gx(pts[:, 0], pts[:, 1])), -1, 0),
                       rtol=1e-12)
    assert sympy.simplify(sympy.diff(u[0], x) + sympy.diff(u[1], y)) == 0
    assert sympy.integrate(p, (x, -1, 1), (y, -1, 1)) == 0


def test_rate_of_tabulated_pair():
    rep = convergence_rates([(H10, [0.0104959]), (H10 / 2, [0.00525413])])
    assert rep.rates[0] is None
    assert rep.rates[1][0] == pytest.approx(0.9983, abs=5e-5)


def test_rate_quartering():
    rep = convergence_rates([(0.2, [4.0, 1.0]), (0.1, [1.0, 1.0])])
    assert rep.rates[1] == pytest.approx((2.0, 0.0))


def test_rate_uses_literal_formula_for_quartered_ratio():
    rep = convergence_rates([(H10, [0.00196196]), (H10 / 2, [0.000535873])])
    assert rep.rates[1][0] == pytest.approx(math.log2(0.00196196 / 0.000535873), rel=1e-12)
    assert rep.rates[1][0] == pytest.approx(1.872, abs=1e-3)


def test_geometric_sequence_rates_exact():
    levels = [(0.4 / 2 ** k, [3.0 * (0.4 / 2 ** k) ** 1.37]) for k in range(5)]
    rep = convergence_rates(levels)
    for rate in rep.rates[1:]:
        assert rate[0] == pytest.approx(1.37, abs=1e-12)


def test_non_halving_levels():
    with pytest.raises(NonHalvingLevels):
        convergence_rates([(0.2, [1.0]), (0.15, [0.5])])


def test_single_level_has_no_rates():
    rep = convergence_rates([(0.2, [1.0, 2.0, 3.0])])
    assert rep.rates == [None]
