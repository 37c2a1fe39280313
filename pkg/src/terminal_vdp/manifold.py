"""Terminal manifolds ``M = {r = g(theta)}`` and the offset coordinate ``v = r - g``."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import DEFAULT_R_GUARD, TWO_PI, Box, CartesianState, PolarState

DEFAULT_B_SET = Box.from_dict({"b0": (2.0, 8.0), "b1": (-2.0, 2.0)})


@dataclass(frozen=True)
class ManifoldParams:
    """Mean radius ``b0`` and sinusoidal amplitude ``b1``."""

    b0: float
    b1: float

    def min_radius(self) -> float:
        return self.b0 - abs(self.b1)

    def violations(self, b_set: Box = DEFAULT_B_SET, r_guard: float = DEFAULT_R_GUARD) -> list[str]:
        out = []
        if not self.min_radius() > r_guard:
            out.append(f"manifold crosses origin (b0 - |b1| = {self.min_radius():.6g} <= r_guard)")
        if not b_set.contains((self.b0, self.b1)):
            out.append(f"(b0, b1) = ({self.b0}, {self.b1}) outside admissible box {b_set.as_dict()}")
        return out


class OffsetState(NamedTuple):
    v: float
    theta: float


class Manifold(ABC):
    """A closed star-shaped curve ``r = g(theta)``, 2*pi-periodic in ``theta``.

    Subclasses may override :meth:`cancelled_control` when the control law's
    ``cos(theta)`` singularity cancels analytically for their family.
    """

    has_cancelled_form = False

    @abstractmethod
    def g(self, theta: float) -> float: ...

    @abstractmethod
    def dg_dtheta(self, theta: float) -> float: ...

    def cancelled_control(self, r, theta, a, mu):
        raise NotImplementedError


class SinusoidalManifold(Manifold):
    """``g(theta) = b0 + b1 sin(theta)``."""

    has_cancelled_form = True

    def __init__(self, params: ManifoldParams):
        self.params = params

    def __repr__(self) -> str:
        return f"SinusoidalManifold(b0={self.params.b0}, b1={self.params.b1})"

    def g(self, theta: float) -> float:
        return g_sinusoidal(theta, self.params)

    def dg_dtheta(self, theta: float) -> float:
        return dg_dtheta_sinusoidal(theta, self.params)

    def cancelled_control(self, r, theta, a, mu):
        from .control import cancelled_u_raw

        return cancelled_u_raw(r, theta, a.a1, a.a2, self.params.b0, self.params.b1, mu)


def g_sinusoidal(theta: float, b: ManifoldParams) -> float:
    return b.b0 + b.b1 * math.sin(theta)


def dg_dtheta_sinusoidal(theta: float, b: ManifoldParams) -> float:
    return b.b1 * math.cos(theta)


def as_manifold(b) -> Manifold:
    return b if isinstance(b, Manifold) else SinusoidalManifold(b)


def offset(state: PolarState, b) -> OffsetState:
    m = as_manifold(b)
    return OffsetState(state.r - m.g(state.theta), state.theta)


def add_back(point: OffsetState, b) -> PolarState:
    m = as_manifold(b)
    return PolarState(point.v + m.g(point.theta), point.theta)


def implicit_cartesian_residual(p: CartesianState, b: ManifoldParams) -> float:
    """``(x^2 + y^2 - b1 y)^2 - b0^2 (x^2 + y^2)``; zero on the sinusoidal manifold."""
    rho2 = p.x * p.x + p.y * p.y
    return (rho2 - b.b1 * p.y) ** 2 - b.b0 * b.b0 * rho2


def manifold_curve(m: Manifold, n: int = 721) -> tuple[np.ndarray, np.ndarray]:
    """Closed sampling of ``(theta, g(theta))`` over one revolution, endpoint included."""
    theta = np.linspace(0.0, TWO_PI, n)
    return theta, np.array([m.g(t) for t in theta])


def verify_manifold(m: Manifold, n: int = 257, r_guard: float = DEFAULT_R_GUARD,
                    fd_step: float = 1e-5, fd_tol: float = 1e-6) -> list[str]:
    """Check periodicity, derivative consistency and clearance; returns failures."""
    failures = []
    grid = np.linspace(-TWO_PI, 2 * TWO_PI, n)
    for t in grid:
        if abs(m.g(t + TWO_PI) - m.g(t)) > 1e-12:
            failures.append(f"g not 2pi-periodic at theta={t:.6g}")
            break
    for t in grid:
        fd = (m.g(t + fd_step) - m.g(t - fd_step)) / (2 * fd_step)
        if abs(fd - m.dg_dtheta(t)) > fd_tol:
            failures.append(f"dg_dtheta disagrees with finite difference at theta={t:.6g}")
            break
    gmin = min(m.g(t) for t in np.linspace(0.0, TWO_PI, 4 * n))
    if not gmin > r_guard:
        failures.append(f"min g = {gmin:.6g} does not clear r_guard")
    return failures
