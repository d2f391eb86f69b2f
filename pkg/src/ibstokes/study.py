"""Convergence-study configuration, orchestration and report formatting.

Configuration is a flat YAML mapping.  Every key is optional; an empty
document reproduces the circle experiment on ``(-1, 1)^2``::

    domain_lo: [-1, -1]
    domain_hi: [1, 1]
    boundary: circle          # or a path to a "theta X1 X2 F1 F2" file
    radius: 0.5               # circle only
    kappa: 2.0                # circle only, force = kappa * X''
    g: [1, 0]                 # constant body force
    immersed_force: true      # false drops the boundary force
    nu: 1.0
    profile: cosine           # cosine | hat
    levels: [10, 20, 40, 80]  # subdivisions per side, strictly doubling
    gamma1: 1.0               # kernel width = gamma1 * h
    m_per_n: 1                # boundary partition count M = m_per_n * N
    reference: fine:160       # fine:<N> | analytic | none
    r_list: [1, 1.5, 2]
    quad_order: 6             # load-vector quadrature
    error_quad_order: 6
    solver_tol: 1.0e-10
    direct_threshold: 200000
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
import yaml

from .analysis import (ConvergenceReport, ReferenceSolution, analytic_reference,
                       convergence_rates, error_norms, fine_mesh_reference,
                       pressure_jump_probe)
from .errors import ConfigError
from .kernel import PROFILES, DeltaKernel, get_profile
from .lagrangian import ForceSpreader, ImmersedBoundary, validate_separation
from .mesh import AxisBox, build_uniform_mesh, quadrature_rule
from .solver import DIRECT_SOLVE_THRESHOLD
from .stokes_fem import DiscreteSolution, FemSpaces, assemble_stokes, solve_stokes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StudyConfig:
    domain_lo: tuple[float, float] = (-1.0, -1.0)
    domain_hi: tuple[float, float] = (1.0, 1.0)
    boundary: str = "circle"
    radius: float = 0.5
    kappa: float = 2.0
    g: tuple[float, float] = (1.0, 0.0)
    immersed_force: bool = True
    nu: float = 1.0
    profile: str = "cosine"
    levels: tuple[int, ...] = (10, 20, 40, 80)
    gamma1: float = 1.0
    m_per_n: int = 1
    reference: str = "fine:160"
    r_list: tuple[float, ...] = (1.0, 1.5, 2.0)
    quad_order: int = 6
    error_quad_order: int = 6
    solver_tol: float = 1e-10
    direct_threshold: int = DIRECT_SOLVE_THRESHOLD

    @property
    def box(self) -> AxisBox:
        return AxisBox(self.domain_lo, self.domain_hi)

    @property
    def reference_kind(self) -> str:
        return self.reference.split(":", 1)[0]

    @property
    def reference_N(self) -> Optional[int]:
        if self.reference_kind != "fine":
            return None
        return int(self.reference.split(":", 1)[1])

    def validate(self) -> "StudyConfig":
        try:
            self.box
        except ValueError as exc:
            raise ConfigError("domain_lo", str(exc)) from None
        if not self.levels:
            raise ConfigError("levels", "at least one level is required")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels", "subdivision counts must be positive")
        if any(b != 2 * a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError("levels", f"levels must double strictly, got {list(self.levels)}")
        if not self.gamma1 > 0:
            raise ConfigError("gamma1", "must be positive")
        if self.m_per_n < 1:
            raise ConfigError("m_per_n", "must be a positive integer")
        if not self.nu > 0:
            raise ConfigError("nu", "must be positive")
        if self.profile not in PROFILES:
            raise ConfigError("profile", f"unknown profile {self.profile!r}")
        if any(r < 1 for r in self.r_list):
            raise ConfigError("r_list", "norm orders must be >= 1")
        for key in ("quad_order", "error_quad_order"):
            try:
                quadrature_rule(getattr(self, key))
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None
        if not self.solver_tol > 0:
            raise ConfigError("solver_tol", "must be positive")
        kind = self.reference_kind
        if kind == "fine":
            try:
                n_ref = self.reference_N
            except ValueError:
                raise ConfigError("reference", f"bad fine-mesh size in {self.reference!r}") from None
            if n_ref <= max(self.levels):
                raise ConfigError("reference", "fine reference must be finer than every level")
        elif kind == "analytic":
            if self.boundary != "circle" and self.immersed_force:
                raise ConfigError("reference", "analytic reference needs the built-in circle")
        elif kind != "none":
            raise ConfigError("reference", f"expected fine:<N>, analytic or none, got {self.reference!r}")
        return self


_TUPLE_FIELDS = {"domain_lo": float, "domain_hi": float, "g": float, "levels": int,
                 "r_list": float}


def _coerce(key, value, default):
    if key in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            value = [value]
        return tuple(_TUPLE_FIELDS[key](v) for v in value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError("expected an integer")
        return int(value)
    if isinstance(default, float):
        return float(value)  # also accepts YAML strings such as "1e-10"
    return str(value)


def parse_config(text: str) -> StudyConfig:
    """Parse a flat YAML mapping into a validated :class:`StudyConfig`.

    Raises
    ------
    ConfigError
        Naming the offending key.
    """
    try:
        data = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"invalid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<document>", "expected a key-value mapping")
    defaults = StudyConfig()
    values = {}
    for key, value in data.items():
        key = str(key)
        if key not in StudyConfig.__dataclass_fields__:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = _coerce(key, value, getattr(defaults, key))
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"bad value {value!r}: {exc}") from None
    return replace(defaults, **values).validate()


@dataclass
class LevelResult:
    N: int
    h: float
    epsilon: float
    M: int
    solution: DiscreteSolution = field(repr=False)
    residual: float = 0.0
    timings: dict = field(default_factory=dict)


@dataclass
class StudyResult:
    config: StudyConfig
    reports: dict
    levels: list
    metadata: dict = field(default_factory=dict)


def build_boundary(cfg: StudyConfig) -> ImmersedBoundary:
    if cfg.boundary == "circle":
        return ImmersedBoundary.circle(cfg.radius, cfg.kappa)
    try:
        return ImmersedBoundary.from_file(cfg.boundary)
    except (OSError, ValueError) as exc:
        raise ConfigError("boundary", str(exc)) from None


def solve_level(cfg: StudyConfig, N: int, ib: Optional[ImmersedBoundary] = None) -> LevelResult:
    """Mesh, spread, assemble and solve one refinement level.

    Raises
    ------
    BoundaryTooClose, SolverBreakdown
    """
    timings = {}
    t0 = time.perf_counter()
    mesh = build_uniform_mesh(N, cfg.box)
    spaces = FemSpaces(mesh)
    eps = cfg.gamma1 * mesh.h
    g = np.asarray(cfg.g, dtype=float)
    M = cfg.m_per_n * N
    if cfg.immersed_force:
        ib = ib or build_boundary(cfg)
        kernel = DeltaKernel(get_profile(cfg.profile), eps)
        part = ib.partition(M)
        M = part.M
        validate_separation(ib, cfg.box, kernel, part)
        spreader = ForceSpreader(ib, part, kernel)

        def force(x):
            return spreader(x) + g
    else:
        def force(x):
            return np.broadcast_to(g, np.shape(x)).copy()
    timings["setup"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    system = assemble_stokes(spaces, force, cfg.nu, cfg.quad_order)
    timings["assembly"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sol = solve_stokes(system, tol=cfg.solver_tol, direct_threshold=cfg.direct_threshold)
    timings["solve"] = time.perf_counter() - t0
    log.info("N=%d h=%.4g dofs=%d residual=%.2e solve=%.2fs", N, mesh.h,
             system.operator.size, sol.info.residual, timings["solve"])
    return LevelResult(N, mesh.h, eps, M, sol, sol.info.residual, timings)


def make_reference(cfg: StudyConfig, ib=None) -> tuple[Optional[ReferenceSolution], Optional[LevelResult]]:
    kind = cfg.reference_kind
    if kind == "fine":
        ref_level = solve_level(cfg, cfg.reference_N, ib)
        return fine_mesh_reference(ref_level.solution), ref_level
    if kind == "analytic":
        return analytic_reference(cfg.box, cfg.g, cfg.kappa, cfg.radius,
                                  immersed_force=cfg.immersed_force), None
    return None, None


def run_study(cfg: StudyConfig, parallel_levels: bool = False) -> StudyResult:
    """Solve every level, measure errors against the reference and compute rates."""
    cfg.validate()
    ib = build_boundary(cfg) if cfg.immersed_force else None
    if parallel_levels:
        with ThreadPoolExecutor() as pool:
            levels = list(pool.map(lambda n: solve_level(cfg, n, ib), cfg.levels))
    else:
        levels = [solve_level(cfg, n, ib) for n in cfg.levels]
    ref, ref_level = make_reference(cfg, ib)

    reports = {}
    if ref is not None:
        for lv in levels:
            lv.timings["error"] = 0.0
        for r in cfg.r_list:
            rows = []
            for lv in levels:
                t0 = time.perf_counter()
                E = error_norms(lv.solution, ref, r, cfg.error_quad_order,
                                band_halfwidth=2.0 * lv.epsilon)
                lv.timings["error"] += time.perf_counter() - t0
                rows.append((lv.h, E))
            reports[r] = convergence_rates(rows, r)

    meta = {
        "config": asdict(cfg),
        "levels": [{"N": lv.N, "h": lv.h, "epsilon": lv.epsilon, "M": lv.M,
                    "residual": lv.residual, "timings": lv.timings} for lv in levels],
    }
    if ref_level is not None:
        meta["reference"] = {"N": ref_level.N, "residual": ref_level.residual,
                             "timings": ref_level.timings}
    if cfg.immersed_force and cfg.boundary == "circle":
        meta["pressure_jump"] = [pressure_jump_probe(lv.solution) for lv in levels]
    return StudyResult(cfg, reports, levels, meta)


CSV_HEADER = ["r", "h", "E_L_u", "E_W1_u", "E_L_p", "rho_L_u", "rho_W1_u", "rho_L_p"]
ABSENT = "---"


def _fmt_r(r: float) -> str:
    return f"{r:g}"


def emit_report(result: StudyResult, fmt: str = "csv") -> str:
    """Render the convergence tables as CSV or markdown."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r, rep in result.reports.items():
            for h, E, rho in rep.rows():
                rates = [repr(x) for x in rho] if rho is not None else [ABSENT] * 3
                w.writerow([_fmt_r(r), repr(h), *map(repr, E), *rates])
        return buf.getvalue()
    if fmt == "markdown":
        out = []
        for r, rep in result.reports.items():
            s = _fmt_r(r)
            head = ["h"]
            for i in (1, 2, 3):
                head += [f"E^{{{s}({i})}}", f"rho^{{{s}({i})}}"]
            out.append(f"### r = {s}\n")
            out.append("| " + " | ".join(head) + " |")
            out.append("|" + "---|" * len(head))
            for h, E, rho in rep.rows():
                cells = [f"{h:.4f}"]
                for i in range(3):
                    cells.append(f"{E[i]:.6g}")
                    cells.append(ABSENT if rho is None else _fmt_rate(rho[i]))
                out.append("| " + " | ".join(cells) + " |")
            out.append("")
        return "\n".join(out)
    raise ValueError(f"unknown report format {fmt!r}")


def _fmt_rate(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"
