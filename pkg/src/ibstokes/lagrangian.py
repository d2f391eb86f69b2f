"""Immersed boundary curves, the midpoint partition of the parameter
interval, and spreading of the boundary force onto Eulerian points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import BoundaryTooClose, DegenerateParametrization
from .kernel import DeltaKernel, support_radius
from .mesh import AxisBox

JACOBIAN_TOL = 1e-12


@dataclass(frozen=True)
class MidpointPartition:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def M(self) -> int:
        return len(self.nodes) - 1

    @property
    def zeta_max(self) -> float:
        return float(self.weights.max())


def partition_from_nodes(nodes) -> MidpointPartition:
    """Midpoint weights for an arbitrary strictly increasing node list.

    Each node owns the interval between the neighbouring half-nodes; the two
    end nodes own only the inner half of their adjacent interval.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
        raise ValueError("partition nodes must be a strictly increasing list of length >= 2")
    half = np.concatenate([[nodes[0]], 0.5 * (nodes[1:] + nodes[:-1]), [nodes[-1]]])
    weights = np.diff(half)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return MidpointPartition(nodes, weights)


def build_midpoint_partition(interval, M: int, spacing: str = "uniform") -> MidpointPartition:
    c, d = map(float, interval)
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if spacing != "uniform":
        raise ValueError(f"unsupported spacing {spacing!r}")
    nodes = c + np.arange(M + 1) * ((d - c) / M)
    nodes[-1] = d
    return partition_from_nodes(nodes)


@dataclass(frozen=True)
class ImmersedBoundary:
    """A parametrised curve ``X(theta)`` carrying force density ``F(theta)``.

    ``X`` and ``F`` map an array of parameters of shape ``(m,)`` to arrays of
    shape ``(m, 2)``.  ``dX`` is the analytic derivative when known.  For
    sampled data (``samples`` set) the curve is only known at the sample
    parameters, which must then be used as the partition nodes.
    """

    interval: tuple[float, float]
    X: Optional[Callable[[np.ndarray], np.ndarray]] = None
    F: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dX: Optional[Callable[[np.ndarray], np.ndarray]] = None
    samples: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None
    name: str = "custom"

    @classmethod
    def circle(cls, radius: float = 0.5, kappa: float = 2.0, center=(0.0, 0.0)):
        """Circle with the elastic force ``kappa * X''``, written in closed form."""
        cx, cy = map(float, center)

        def X(t):
            t = np.asarray(t, dtype=float)
            return np.stack([cx + radius * np.cos(t), cy + radius * np.sin(t)], axis=-1)

        def dX(t):
            t = np.asarray(t, dtype=float)
            return radius * np.stack([-np.sin(t), np.cos(t)], axis=-1)

        def F(t):
            t = np.asarray(t, dtype=float)
            return -kappa * radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

        return cls((0.0, 2.0 * math.pi), X, F, dX, name="circle")

    @classmethod
    def from_samples(cls, theta, X, F):
        theta = np.asarray(theta, dtype=float)
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        F = np.asarray(F, dtype=float).reshape(-1, 2)
        if not (len(theta) == len(X) == len(F)) or len(theta) < 2:
            raise ValueError("theta, X and F must have the same length >= 2")
        if np.any(np.diff(theta) <= 0):
            raise ValueError("theta must be strictly increasing")
        for a in (theta, X, F):
            a.setflags(write=False)
        return cls((float(theta[0]), float(theta[-1])), samples=(theta, X, F), name="sampled")

    @classmethod
    def from_file(cls, path):
        """Read lines ``theta X1 X2 F1 F2``; ``#`` starts a comment."""
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        if data.shape[1] != 5:
            raise ValueError(f"{path}: expected 5 columns (theta X1 X2 F1 F2), got {data.shape[1]}")
        return cls.from_samples(data[:, 0], data[:, 1:3], data[:, 3:5])

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    def partition(self, M: Optional[int] = None) -> MidpointPartition:
        """Sample nodes for sampled data, otherwise a uniform partition."""
        if self.is_sampled:
            return partition_from_nodes(self.samples[0])
        if M is None:
            raise ValueError("M is required for a closure-defined boundary")
        return build_midpoint_partition(self.interval, M)

    def _check_nodes(self, part: MidpointPartition):
        theta = self.samples[0]
        if len(theta) != len(part.nodes) or not np.array_equal(theta, part.nodes):
            raise ValueError("sampled boundary data must be used with its own sample nodes")

    def positions(self, part: MidpointPartition) -> np.ndarray:
        if self.is_sampled:
            self._check_nodes(part)
            return self.samples[1]
        return self.X(part.nodes)

    def forces(self, part: MidpointPartition) -> np.ndarray:
        if self.is_sampled:
            self._check_nodes(part)
            return self.samples[2]
        return self.F(part.nodes)


def jacobian(ib: ImmersedBoundary, theta) -> float | np.ndarray:
    """Length of the tangent vector ``|X'(theta)|``.

    Uses the analytic derivative when available and central differences with
    step ``1e-6 * |interval|`` otherwise (linear interpolation for sampled data).
    """
    t = np.asarray(theta, dtype=float)
    c, d = ib.interval
    if ib.dX is not None:
        tangent = ib.dX(t)
    else:
        step = (d - c) * 1e-6
        if ib.is_sampled:
            th, xs, _ = ib.samples

            def X(s):
                s = np.clip(s, c, d)
                return np.stack([np.interp(s, th, xs[:, 0]), np.interp(s, th, xs[:, 1])], axis=-1)
        else:
            X = ib.X
        lo = np.clip(t - step, c, d)
        hi = np.clip(t + step, c, d)
        tangent = (X(hi) - X(lo)) / (hi - lo)[..., None]
    J = np.sqrt((tangent ** 2).sum(axis=-1))
    if np.any(J < JACOBIAN_TOL):
        raise DegenerateParametrization(f"|X'(theta)| < {JACOBIAN_TOL} on {ib.name} boundary")
    return float(J) if J.ndim == 0 else J


def validate_separation(ib: ImmersedBoundary, box: AxisBox, kernel: DeltaKernel,
                        part: Optional[MidpointPartition] = None, M: int = 1024) -> None:
    """Require every kernel support ball around a boundary node to fit in the box.

    Raises
    ------
    BoundaryTooClose
    """
    if part is None:
        part = ib.partition(None if ib.is_sampled else M)
    pts = ib.positions(part)
    dist = float(box.distance_to_boundary(pts).min())
    radius = support_radius(kernel)
    if not dist > radius:
        raise BoundaryTooClose(dist, radius)


class ForceSpreader:
    """Evaluates ``sum_i F(theta_i) * delta(x - X(theta_i)) * zeta_i``.

    Boundary nodes are binned on a grid whose cell equals the half side of
    the kernel support box, so only nodes in the 3x3 bin neighbourhood of a
    point can contribute.  Contributions are accumulated node by node in
    ascending order, which reproduces the unpruned sum exactly: the skipped
    terms are exact zeros.
    """

    def __init__(self, ib: ImmersedBoundary, part: MidpointPartition, kernel: DeltaKernel):
        if kernel.dim != 2:
            raise ValueError("force spreading is implemented for dim=2")
        self.kernel = kernel
        self.positions = np.asarray(ib.positions(part), dtype=float)
        self.weighted_forces = np.asarray(ib.forces(part), dtype=float) * part.weights[:, None]
        self.bin_size = kernel.box_halfwidth
        self.node_bins = np.floor(self.positions / self.bin_size).astype(np.int64)

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        shape = pts.shape
        pts = pts.reshape(-1, 2)
        out = np.zeros_like(pts)
        if len(pts) == 0:
            return out.reshape(shape)
        bins = np.floor(pts / self.bin_size).astype(np.int64)
        order = np.lexsort((bins[:, 1], bins[:, 0]))
        sorted_bins = bins[order]
        keys, starts = np.unique(sorted_bins, axis=0, return_index=True)
        ends = np.append(starts[1:], len(order))
        lookup = {(int(a), int(b)): (s, e) for (a, b), s, e in zip(keys, starts, ends)}

        for X, Fz, (bx, by) in zip(self.positions, self.weighted_forces, self.node_bins):
            chunks = []
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    hit = lookup.get((int(bx) + dx, int(by) + dy))
                    if hit is not None:
                        chunks.append(order[hit[0]:hit[1]])
            if not chunks:
                continue
            idx = np.concatenate(chunks)
            d = self.kernel(pts[idx] - X)
            out[idx] += Fz[None, :] * d[:, None]
        return out.reshape(shape)


def spread_force_dense(ib: ImmersedBoundary, part: MidpointPartition, kernel: DeltaKernel,
                       points) -> np.ndarray:
    """Unpruned sum over every partition node, in node order."""
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    X = ib.positions(part)
    Fz = ib.forces(part) * part.weights[:, None]
    out = np.zeros_like(flat)
    for i in range(len(X)):
        out += Fz[i][None, :] * kernel(flat - X[i])[:, None]
    return out.reshape(pts.shape)


def spread_force(ib: ImmersedBoundary, part: MidpointPartition, kernel: DeltaKernel,
                 x) -> np.ndarray:
    """Regularised boundary force at a single point ``x``."""
    return ForceSpreader(ib, part, kernel)(np.asarray(x, dtype=float)[None, :])[0]
