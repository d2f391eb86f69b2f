"""Exception types raised across the package."""


class IBStokesError(Exception):
    """Base class for all package errors."""


class PointOutsideDomain(IBStokesError, ValueError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"point {tuple(point)} lies outside the mesh domain")


class BoundaryTooClose(IBStokesError):
    """The kernel support around some boundary node leaves the fluid box."""

    def __init__(self, min_distance, required_radius):
        self.min_distance = float(min_distance)
        self.required_radius = float(required_radius)
        super().__init__(
            f"immersed boundary is {self.min_distance:.6g} from the domain "
            f"boundary, kernel support radius is {self.required_radius:.6g}"
        )


class DegenerateParametrization(IBStokesError):
    pass


class SolverBreakdown(IBStokesError):
    def __init__(self, iterations, residual, message="linear solve failed"):
        self.iterations = iterations
        self.residual = float(residual)
        super().__init__(
            f"{message} (iterations={iterations}, relative residual={self.residual:.3e})"
        )


class IndexOutOfRange(IBStokesError, IndexError):
    pass


class NonHalvingLevels(IBStokesError, ValueError):
    pass


class ConfigError(IBStokesError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
