"""Backstepping control law that makes the terminal manifold attractive.

With ``v = r - g(theta)`` the offset obeys ``dv/dt = P(v, theta, u)``. The law
solves ``P = chi(v, theta, a)`` for ``u``::

    u = [chi - mu cos(th) G1 G2 + g'] / [cos(th) + g' sin(th) / r]
    G1 = 1 - r^2 sin^2(th),   G2 = r cos(th) + g' sin(th)

For ``g = b0 + b1 sin(th)`` a common ``cos(th)`` factor cancels and the law
stays finite at ``cos(th) = 0``; :func:`cancelled_u_raw` is that closed form.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .dynamics import UNBOUNDED, Box, ControlBounds, PolarState, _rates
from .errors import DegenerateManifold, NonPositiveRadius, SingularDenominator
from .manifold import Manifold, ManifoldParams, as_manifold

EPS_DEN = 1e-8
# Symmetric theta offset used when a generic manifold hits cos(theta) = 0.
NUDGE = 1e-5

DEFAULT_A_SET = Box.from_dict({"a1": (0.0, 2.0), "a2": (0.1, 5.0)})


@dataclass(frozen=True)
class ChiParams:
    a1: float
    a2: float

    def violations(self, a_set: Box = DEFAULT_A_SET) -> list[str]:
        out = []
        if not self.a1 >= 0.0:
            out.append(f"a1={self.a1} must be >= 0")
        if not self.a2 > 0.0:
            out.append(f"a2={self.a2} must be > 0")
        if not a_set.contains((self.a1, self.a2)):
            out.append(f"(a1, a2) = ({self.a1}, {self.a2}) outside admissible box {a_set.as_dict()}")
        return out


@dataclass(frozen=True)
class ControlEvaluation:
    u_raw: float
    u_applied: float
    clamped: bool
    near_singular: bool = False


class ChiFunction(ABC):
    """Prescribed offset dynamics ``dv/dt = chi(v, theta, a)``.

    Members must vanish at ``v = 0`` and oppose the sign of ``v``.
    """

    @abstractmethod
    def evaluate(self, v: float, theta: float, a: ChiParams) -> float: ...


class ArctanChi(ChiFunction):
    """``chi = -a1 cos^2(theta) arctan(a2 v)``, bounded by ``a1 pi / 2``."""

    def evaluate(self, v, theta, a):
        c = math.cos(theta)
        return -a.a1 * c * c * math.atan(a.a2 * v)


ARCTAN_CHI = ArctanChi()
CHI_REGISTRY: dict[str, ChiFunction] = {}


def check_chi(fn: ChiFunction, a: ChiParams = ChiParams(0.5, 1.0), n: int = 65) -> list[str]:
    failures = []
    for th in np.linspace(0.0, 2 * math.pi, n):
        if fn.evaluate(0.0, th, a) != 0.0:
            failures.append(f"chi(0, {th:.4g}) != 0")
        for v in np.linspace(-5.0, 5.0, n):
            if v * fn.evaluate(v, th, a) > 0.0:
                failures.append(f"v * chi > 0 at v={v:.4g}, theta={th:.4g}")
    return failures


def register_chi(name: str, fn: ChiFunction) -> None:
    failures = check_chi(fn)
    if failures:
        raise ValueError(f"chi function {name!r} rejected: {failures[0]}")
    CHI_REGISTRY[name] = fn


register_chi("arctan", ARCTAN_CHI)


def chi(v: float, theta: float, a: ChiParams) -> float:
    return ARCTAN_CHI.evaluate(v, theta, a)


def transformed_field_P(v: float, theta: float, u: float, mu: float, b) -> float:
    """Offset rate ``dv/dt`` of the plant for control ``u``."""
    m = as_manifold(b)
    g = m.g(theta)
    dg = m.dg_dtheta(theta)
    r = v + g
    if not r > 0.0:
        raise NonPositiveRadius(f"v + g = {r} must be positive")
    s = math.sin(theta)
    c = math.cos(theta)
    damping = 1.0 - r * r * s * s
    return (u * (c + dg * s / r)
            + mu * c * c * r * damping
            + mu * s * c * dg * damping
            - dg)


def generic_denominator(r: float, theta: float, m: Manifold) -> float:
    return math.cos(theta) + m.dg_dtheta(theta) * math.sin(theta) / r


def _generic_u(r, theta, a, m, mu, chi_fn):
    s = math.sin(theta)
    c = math.cos(theta)
    dg = m.dg_dtheta(theta)
    gamma1 = 1.0 - r * r * s * s
    gamma2 = r * c + s * dg
    num = chi_fn.evaluate(r - m.g(theta), theta, a) - mu * c * gamma1 * gamma2 + dg
    return num, c + dg * s / r


def saturate(u_raw: float, bounds: ControlBounds = UNBOUNDED, near_singular: bool = False) -> ControlEvaluation:
    u = min(max(u_raw, bounds.u_min), bounds.u_max)
    return ControlEvaluation(u_raw, u, u != u_raw, near_singular)


def control_generic(state: PolarState, a: ChiParams, b, mu: float,
                    bounds: ControlBounds = UNBOUNDED, chi_fn: ChiFunction = ARCTAN_CHI,
                    eps_den: float = EPS_DEN) -> ControlEvaluation:
    """Evaluate the control law directly from ``g`` and ``dg/dtheta``.

    Near ``|denominator| < eps_den`` the manifold's cancelled form is used if it
    has one (and ``chi_fn`` is the arctan family it was derived for); otherwise
    the law is averaged over ``theta +/- NUDGE``.
    """
    r, theta = state
    if not r > 0.0:
        raise NonPositiveRadius(f"r={r} must be positive")
    m = as_manifold(b)
    num, den = _generic_u(r, theta, a, m, mu, chi_fn)
    if abs(den) >= eps_den:
        return saturate(num / den, bounds)
    if m.has_cancelled_form and chi_fn is ARCTAN_CHI:
        return saturate(m.cancelled_control(r, theta, a, mu), bounds, near_singular=True)
    values = []
    for th in (theta - NUDGE, theta + NUDGE):
        num, den = _generic_u(r, th, a, m, mu, chi_fn)
        if abs(den) < eps_den:
            raise SingularDenominator(f"denominator {den:.3g} at r={r}, theta={theta}")
        values.append(num / den)
    # a pole flips sign across theta with magnitude ~ 1/NUDGE; a removable point barely moves
    jump = abs(values[0] - values[1])
    if jump > max(1.0, 0.5 * (abs(values[0]) + abs(values[1]))):
        raise SingularDenominator(f"non-removable singularity at r={r}, theta={theta}")
    return saturate(0.5 * (values[0] + values[1]), bounds, near_singular=True)


def cancelled_u_raw(r: float, theta: float, a1: float, a2: float, b0: float, b1: float,
                    mu: float, eps_den: float = EPS_DEN) -> float:
    s = math.sin(theta)
    c = math.cos(theta)
    d = r + b1 * s
    if not d > eps_den * r:
        raise DegenerateManifold(f"r + b1 sin(theta) = {d:.6g} at r={r}, theta={theta}")
    v = r - (b0 + b1 * s)
    return r * (b1 - a1 * c * math.atan(a2 * v) - mu * c * (1.0 - r * r * s * s) * d) / d


def control_sinusoidal_cancelled(state: PolarState, a: ChiParams, b: ManifoldParams, mu: float,
                                 bounds: ControlBounds = UNBOUNDED) -> ControlEvaluation:
    r, theta = state
    if not r > 0.0:
        raise NonPositiveRadius(f"r={r} must be positive")
    u = cancelled_u_raw(r, theta, a.a1, a.a2, b.b0, b.b1, mu)
    near = abs(math.cos(theta) * (r + b.b1 * math.sin(theta)) / r) < EPS_DEN
    return saturate(u, bounds, near_singular=near)


def _closed_loop_rates(r, theta, a1, a2, b0, b1, mu, u_min, u_max):
    """Scalar kernel for the integrator: returns ``(dr, dtheta, u_raw, u_applied)``."""
    if not r > 0.0:
        raise NonPositiveRadius(f"r={r} must be positive")
    u_raw = cancelled_u_raw(r, theta, a1, a2, b0, b1, mu)
    u = u_min if u_raw < u_min else (u_max if u_raw > u_max else u_raw)
    dr, dth = _rates(r, theta, u, mu)
    return dr, dth, u_raw, u


def closed_loop_field(state: PolarState, a: ChiParams, b, mu: float,
                      bounds: ControlBounds = UNBOUNDED) -> tuple[float, float, ControlEvaluation]:
    """Plant rates under the saturated control law.

    Sinusoidal manifolds use the cancelled form; other manifolds go through
    :func:`control_generic`.
    """
    if isinstance(b, ManifoldParams):
        ev = control_sinusoidal_cancelled(state, a, b, mu, bounds)
    else:
        ev = control_generic(state, a, b, mu, bounds)
    dr, dth = _rates(state.r, state.theta, ev.u_applied, mu)
    return dr, dth, ev


def backstepping_residual(v: float, theta: float, a: ChiParams, b, mu: float) -> float:
    """``P(v, theta, u(v, theta)) - chi(v, theta)``; zero when the law is right."""
    m = as_manifold(b)
    r = v + m.g(theta)
    u = control_generic(PolarState(r, theta), a, m, mu).u_raw
    return transformed_field_P(v, theta, u, mu, m) - chi(v, theta, a)
