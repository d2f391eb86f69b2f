"""Command line interface: ``ibstokes {study,solve,kernel-check,jump}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import scipy.io

from .analysis import pressure_jump_probe
from .errors import (BoundaryTooClose, ConfigError, DegenerateParametrization,
                     SolverBreakdown)
from .kernel import PROFILES, DeltaKernel, expected_scaling_exponent, loglog_slopes, \
    moment_zero, weighted_lp_scaling
from .mesh import build_uniform_mesh
from .stokes_fem import FemSpaces, assemble_stokes
from .study import StudyConfig, emit_report, parse_config, run_study, solve_level

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def load_config(args) -> StudyConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
    cfg = parse_config(text)
    overrides = {}
    if getattr(args, "quad_order", None) is not None:
        overrides["quad_order"] = args.quad_order
    if getattr(args, "profile", None) is not None:
        overrides["profile"] = args.profile
    if getattr(args, "reference", None) is not None:
        overrides["reference"] = args.reference
    return replace(cfg, **overrides).validate() if overrides else cfg


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_study(args) -> int:
    cfg = load_config(args)
    result = run_study(cfg, parallel_levels=args.parallel_levels)
    _write(emit_report(result, args.format), args.out)
    for lv in result.metadata["levels"]:
        t = lv["timings"]
        logging.info("N=%d residual=%.2e assembly=%.2fs solve=%.2fs error=%.2fs", lv["N"],
                     lv["residual"], t["assembly"], t["solve"], t.get("error", 0.0))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args)
    N = args.N if args.N is not None else cfg.levels[-1]
    lv = solve_level(cfg, N)
    sol = lv.solution
    lines = [
        f"N: {lv.N}",
        f"h: {lv.h!r}",
        f"epsilon: {lv.epsilon!r}",
        f"M: {lv.M}",
        f"velocity_dofs: {sol.spaces.n_velocity}",
        f"pressure_dofs: {sol.spaces.n_pressure}",
        f"solver: {sol.info.method}",
        f"residual: {lv.residual:.3e}",
        f"max_abs_velocity: {abs(sol.velocity).max()!r}",
        f"pressure_range: {sol.pressure.min()!r} {sol.pressure.max()!r}",
    ]
    if cfg.boundary == "circle":
        lines.append(f"pressure_jump: {pressure_jump_probe(sol)!r}")
    lines += [f"time_{k}: {v:.3f}" for k, v in lv.timings.items()]
    _write("\n".join(lines) + "\n", args.out)
    if args.dump_mesh:
        Path(args.dump_mesh).write_text(sol.spaces.mesh.to_text())
    if args.dump_matrix:
        spaces = FemSpaces(build_uniform_mesh(N, cfg.box))
        system = assemble_stokes(spaces, None, cfg.nu)
        scipy.io.mmwrite(args.dump_matrix, system.operator.matrix(), symmetry="symmetric")
    return EXIT_OK


def cmd_kernel_check(args) -> int:
    eps_list = [0.2, 0.1, 0.05, 0.025]
    lines = []
    for name in ([args.profile] if args.profile else sorted(PROFILES)):
        prof = PROFILES[name]
        for eps in eps_list:
            m0 = moment_zero(DeltaKernel(prof, eps))
            lines.append(f"{name} eps={eps:g} moment_zero={m0:.15f}")
        for p, wp in ((1, 1), (1, 0), (2, 0)):
            slopes = loglog_slopes(weighted_lp_scaling(prof, eps_list, p, wp))
            expect = expected_scaling_exponent(p, wp)
            lines.append(f"{name} p={p} weight_power={wp} expected={expect:g} slopes="
                         + " ".join(f"{s:.6f}" for s in slopes))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_jump(args) -> int:
    cfg = load_config(args)
    N = args.N if args.N is not None else 80
    lv = solve_level(cfg, N)
    jump = pressure_jump_probe(lv.solution, (args.r_in, args.r_out))
    _write(f"{jump!r}\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibstokes", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, study_opts=True):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--profile", choices=sorted(PROFILES))
        if study_opts:
            p.add_argument("--quad-order", type=int, metavar="K")
            p.add_argument("--reference", metavar="analytic|fine:N|none")

    p = sub.add_parser("study", help="run the full refinement ladder")
    common(p)
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.add_argument("--parallel-levels", action="store_true")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("solve", help="solve one level and print statistics")
    common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--dump-mesh", metavar="PATH")
    p.add_argument("--dump-matrix", metavar="PATH", help="write the Stokes matrix (Matrix Market)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("kernel-check", help="moment and scaling report for the kernels")
    common(p, study_opts=False)
    p.set_defaults(func=cmd_kernel_check)

    p = sub.add_parser("jump", help="pressure jump across the circle")
    common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--r-in", type=float, default=0.35)
    p.add_argument("--r-out", type=float, default=0.65)
    p.set_defaults(func=cmd_jump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BoundaryTooClose, SolverBreakdown, DegenerateParametrization) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
