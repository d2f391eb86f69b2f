"""Product-form regularized delta functions.

A kernel of width ``epsilon`` in ``dim`` dimensions is

    delta(y) = epsilon**-dim * prod_i phi(y_i / epsilon)

for a continuous one-variable profile ``phi`` with unit integral and support
in ``[-support_halfwidth, support_halfwidth]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Profile1D:
    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    support_halfwidth: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) < self.support_halfwidth, self.func(s), 0.0)

    def scaled(self, factor: float) -> "Profile1D":
        """Profile multiplied by a constant (breaks the unit-mass property)."""
        f = self.func
        return Profile1D(f"{factor:g}*{self.kind}", lambda s: factor * f(s),
                         self.support_halfwidth)


def _cosine(s):
    return 0.5 * (1.0 + np.cos(np.pi * s))


def _hat(s):
    return 1.0 - np.abs(s)


COSINE = Profile1D("cosine", _cosine)
HAT = Profile1D("hat", _hat)

PROFILES = {"cosine": COSINE, "hat": HAT}


def get_profile(name: str) -> Profile1D:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class DeltaKernel:
    profile: Profile1D
    epsilon: float
    dim: int = 2

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"kernel width must be positive, got {self.epsilon}")
        if self.dim not in (2, 3):
            raise ValueError(f"kernel dimension must be 2 or 3, got {self.dim}")

    @property
    def box_halfwidth(self) -> float:
        """Half side of the axis box containing the support."""
        return self.epsilon * self.profile.support_halfwidth

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        vals = self.profile(y / self.epsilon)
        return vals.prod(axis=-1) / self.epsilon ** self.dim


def evaluate_delta(kernel: DeltaKernel, y) -> float | np.ndarray:
    """Kernel value at ``y`` (the last axis of ``y`` holds coordinates)."""
    out = kernel(y)
    return float(out) if np.ndim(out) == 0 else out


def support_radius(kernel: DeltaKernel) -> float:
    """Radius of the smallest centered ball enclosing the support box."""
    return math.sqrt(kernel.dim) * kernel.profile.support_halfwidth * kernel.epsilon


def _composite_gauss(a, b, panels=16, order=4):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tensor_grid(kernel: DeltaKernel, panels: int):
    a = kernel.box_halfwidth
    x, w = _composite_gauss(-a, a, panels=panels)
    grids = np.meshgrid(*([x] * kernel.dim), indexing="ij")
    pts = np.stack(grids, axis=-1)
    wgrids = np.meshgrid(*([w] * kernel.dim), indexing="ij")
    wts = np.prod(np.stack(wgrids, axis=-1), axis=-1)
    return pts, wts


def moment_zero(kernel: DeltaKernel) -> float:
    """Integral of the kernel over its support box.

    Uses a 64-point composite Gauss rule per axis (16 panels of 4 points);
    panel edges include the origin so kinks of even profiles are respected.
    """
    pts, wts = _tensor_grid(kernel, panels=16)
    return float((kernel(pts) * wts).sum())


def weighted_lp_norm(kernel: DeltaKernel, p: float, weight_power: int,
                     panels: int = 32) -> float:
    """``(integral |y|**(p*weight_power) * |delta(y)|**p dy)**(1/p)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    pts, wts = _tensor_grid(kernel, panels=panels)
    radius = np.sqrt((pts ** 2).sum(axis=-1))
    integrand = radius ** (p * weight_power) * np.abs(kernel(pts)) ** p
    return float((integrand * wts).sum()) ** (1.0 / p)


def weighted_lp_scaling(profile: Profile1D, epsilons, p: float, weight_power: int,
                        dim: int = 2) -> list[tuple[float, float]]:
    """Weighted L^p norms of the kernel family over a decreasing list of widths."""
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    if weight_power not in (0, 1):
        raise ValueError("weight_power must be 0 or 1")
    return [(e, weighted_lp_norm(DeltaKernel(profile, e, dim), p, weight_power))
            for e in eps]


def expected_scaling_exponent(p: float, weight_power: int, dim: int = 2) -> float:
    """Exponent ``s`` with ``weighted_lp_norm ~ epsilon**s``."""
    return weight_power - dim + dim / p


def loglog_slopes(pairs) -> list[float]:
    return [math.log(v1 / v0) / math.log(e1 / e0)
            for (e0, v0), (e1, v1) in zip(pairs, pairs[1:])]
