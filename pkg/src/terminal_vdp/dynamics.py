"""Phase state, parameter containers and the open-loop forced Van der Pol field.

The oscillator is written in polar phase coordinates::

    dr/dt     = mu r cos^2(th) (1 - r^2 sin^2(th)) + u cos(th)
    dtheta/dt = 1 - mu sin(th) cos(th) (1 - r^2 sin^2(th)) - u sin(th) / r

``theta`` is kept unwrapped everywhere; trig functions take care of the
reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import NonPositiveRadius, OriginUndefined

TWO_PI = 2.0 * math.pi
DEFAULT_R_GUARD = 1e-3


class PolarState(NamedTuple):
    r: float
    theta: float


class CartesianState(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def as_list(self) -> list[float]:
        return [self.lo, self.hi]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of admissible parameter vectors, keyed by name."""

    names: tuple[str, ...]
    intervals: tuple[Interval, ...]

    @classmethod
    def from_dict(cls, d: dict[str, Sequence[float]]) -> "Box":
        names = tuple(d)
        return cls(names, tuple(Interval(float(d[n][0]), float(d[n][1])) for n in names))

    def contains(self, values: Sequence[float]) -> bool:
        return all(v in iv for v, iv in zip(values, self.intervals))

    def interval(self, name: str) -> Interval:
        return self.intervals[self.names.index(name)]

    def as_dict(self) -> dict[str, list[float]]:
        return {n: iv.as_list() for n, iv in zip(self.names, self.intervals)}


DEFAULT_MU_SET = Interval(0.0, 1.0)


@dataclass(frozen=True)
class SystemParams:
    mu: float
    mu_set: Interval = DEFAULT_MU_SET

    def __post_init__(self):
        if self.mu not in self.mu_set:
            raise ValueError(f"mu={self.mu} outside admissible set {self.mu_set.as_list()}")


@dataclass(frozen=True)
class ControlBounds:
    u_min: float = -math.inf
    u_max: float = math.inf

    def __post_init__(self):
        if self.u_min > self.u_max:
            raise ValueError("u_min must not exceed u_max")
        if math.isinf(self.u_min) != math.isinf(self.u_max):
            raise ValueError("bounds must be both finite or both infinite")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.u_max)

    def contains(self, lo: float, hi: float) -> bool:
        return self.u_min <= lo and hi <= self.u_max


UNBOUNDED = ControlBounds()


def _rates(r: float, theta: float, u: float, mu: float) -> tuple[float, float]:
    s = math.sin(theta)
    c = math.cos(theta)
    damping = 1.0 - r * r * s * s
    return mu * r * c * c * damping + u * c, 1.0 - mu * s * c * damping - s / r * u


def vector_field_polar(state: PolarState, u: float, mu: float) -> tuple[float, float]:
    """Return ``(dr/dt, dtheta/dt)`` of the forced oscillator at ``state``."""
    if not state.r > 0.0:
        raise NonPositiveRadius(f"r={state.r} must be positive")
    return _rates(state.r, state.theta, u, mu)


def polar_to_cartesian(state: PolarState) -> CartesianState:
    return CartesianState(state.r * math.cos(state.theta), state.r * math.sin(state.theta))


def cartesian_to_polar(state: CartesianState) -> PolarState:
    """Convert to polar form with ``theta`` in ``[0, 2*pi)``."""
    x, y = state
    if x == 0.0 and y == 0.0:
        raise OriginUndefined("polar angle undefined at the origin")
    theta = math.atan2(y, x)
    if theta < 0.0:
        theta += TWO_PI
        # atan2 can return -0.0 or a tiny negative that rounds up to 2*pi
        if theta >= TWO_PI:
            theta = 0.0
    return PolarState(math.hypot(x, y), theta)


def wrap_angle(theta: float) -> float:
    """Reduce an unwrapped angle into ``[0, 2*pi)``."""
    w = math.fmod(theta, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    return 0.0 if w >= TWO_PI else w
