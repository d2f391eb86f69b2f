"""Immersed boundary finite element method for the stationary Stokes problem.

Regularized delta-function force spreading, MINI-element discretization and
a convergence-study harness.
"""

from .analysis import (ReferenceSolution, analytic_reference, convergence_rates, error_norms,
                       eval_solution, fine_mesh_reference, pressure_jump_probe)
from .errors import (BoundaryTooClose, ConfigError, DegenerateParametrization,
                     NonHalvingLevels, PointOutsideDomain, SolverBreakdown)
from .kernel import COSINE, HAT, DeltaKernel, Profile1D, moment_zero, support_radius
from .lagrangian import (ForceSpreader, ImmersedBoundary, MidpointPartition,
                         build_midpoint_partition, spread_force, validate_separation)
from .mesh import AxisBox, Mesh, build_uniform_mesh, locate_point, mesh_size
from .stokes_fem import FemSpaces, assemble_stokes, solve_stokes
from .study import StudyConfig, emit_report, parse_config, run_study

__version__ = "0.1.0"
