"""Self-checks run by ``terminal-vdp verify``."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .control import (
    ChiParams,
    DEFAULT_A_SET,
    backstepping_residual,
    chi,
    control_generic,
    control_sinusoidal_cancelled,
    generic_denominator,
    transformed_field_P,
)
from .dynamics import DEFAULT_R_GUARD, PolarState, cartesian_to_polar, polar_to_cartesian, vector_field_polar, wrap_angle
from .manifold import DEFAULT_B_SET, ManifoldParams, SinusoidalManifold, verify_manifold

DEN_MIN = 0.05


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


class RandomCase(NamedTuple):
    v: float
    theta: float
    a: ChiParams
    b: ManifoldParams
    mu: float


def random_cases(n: int, seed: int = 0, v_range=(-2.0, 2.0), mu_range=(0.01, 0.3),
                 den_min: float = DEN_MIN, cancelled_domain: bool = False) -> list[RandomCase]:
    """Uniform draws over the admissible boxes, keeping only ``|denominator| >= den_min``.

    ``cancelled_domain`` additionally requires ``r + b1 sin(theta) > 0``, where the
    cancelled closed form is defined.
    """
    rng = np.random.default_rng(seed)
    a1s, a2s = DEFAULT_A_SET.intervals
    b0s, b1s = DEFAULT_B_SET.intervals
    out = []
    while len(out) < n:
        v = rng.uniform(*v_range)
        th = rng.uniform(0.0, 2 * math.pi)
        a = ChiParams(rng.uniform(a1s.lo, a1s.hi), rng.uniform(a2s.lo, a2s.hi))
        b = ManifoldParams(rng.uniform(b0s.lo, b0s.hi), rng.uniform(b1s.lo, b1s.hi))
        mu = rng.uniform(*mu_range)
        if not b.min_radius() > DEFAULT_R_GUARD:
            continue
        r = v + b.b0 + b.b1 * math.sin(th)
        if not r > DEFAULT_R_GUARD:
            continue
        if abs(generic_denominator(r, th, SinusoidalManifold(b))) < den_min:
            continue
        if cancelled_domain and not r + b.b1 * math.sin(th) > 0.0:
            continue
        out.append(RandomCase(v, th, a, b, mu))
    return out


def check_backstepping(n=10_000, seed=0, tol=1e-9) -> CheckResult:
    worst = max(abs(backstepping_residual(c.v, c.theta, c.a, c.b, c.mu)) for c in random_cases(n, seed))
    return CheckResult("backstepping identity", worst <= tol, f"max |P - chi| = {worst:.3e} (tol {tol:g})")


def check_cancelled_form(n=10_000, seed=1, rtol=1e-9) -> CheckResult:
    worst = 0.0
    for c in random_cases(n, seed, cancelled_domain=True):
        m = SinusoidalManifold(c.b)
        st = PolarState(c.v + m.g(c.theta), c.theta)
        u1 = control_sinusoidal_cancelled(st, c.a, c.b, c.mu).u_raw
        u2 = control_generic(st, c.a, m, c.mu).u_raw
        worst = max(worst, abs(u1 - u2) / (1.0 + abs(u1)))
    finite = all(math.isfinite(control_sinusoidal_cancelled(PolarState(r, th), ChiParams(0.5, 1.0),
                                                           ManifoldParams(4.0, 1.5), 0.1).u_raw)
                 for th in (math.pi / 2, 3 * math.pi / 2) for r in (3.0, 4.0, 5.5))
    ok = worst <= rtol and finite
    return CheckResult("cancelled-form equivalence", ok, f"max rel diff = {worst:.3e}, finite at cos=0: {finite}")


def check_chi(n=2000, seed=2) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        a = ChiParams(rng.uniform(0, 2), rng.uniform(0.1, 5))
        v, th = rng.uniform(-10, 10), rng.uniform(0, 2 * math.pi)
        x = chi(v, th, a)
        if chi(0.0, th, a) != 0.0 or v * x > 0.0 or abs(x) > a.a1 * math.pi / 2:
            bad += 1
    return CheckResult("chi invariants", bad == 0, f"{bad} violations in {n} samples")


def check_chain_rule(n=10_000, seed=3, tol=1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for c in random_cases(n, seed):
        m = SinusoidalManifold(c.b)
        u = rng.uniform(-5, 5)
        r = c.v + m.g(c.theta)
        dr, dth = vector_field_polar(PolarState(r, c.theta), u, c.mu)
        p = transformed_field_P(c.v, c.theta, u, c.mu, m)
        ref = dr - m.dg_dtheta(c.theta) * dth
        worst = max(worst, abs(p - ref) / max(1.0, abs(ref)))
    return CheckResult("transformed field chain rule", worst <= tol, f"max rel diff = {worst:.3e}")


def check_manifold() -> CheckResult:
    failures = []
    for b in (ManifoldParams(4.0, 1.5), ManifoldParams(4.0, 1.0), ManifoldParams(2.5, -2.0)):
        failures += verify_manifold(SinusoidalManifold(b))
    return CheckResult("manifold contract", not failures, "; ".join(failures) or "ok")


def check_round_trip(n=1000, seed=4) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        s = PolarState(rng.uniform(0.01, 10), rng.uniform(-20, 20))
        back = cartesian_to_polar(polar_to_cartesian(s))
        dth = abs(back.theta - wrap_angle(s.theta))
        worst = max(worst, abs(back.r - s.r), min(dth, 2 * math.pi - dth))
    return CheckResult("coordinate round trip", worst <= 1e-12, f"max error = {worst:.3e}")


CHECKS: list[Callable[[], CheckResult]] = [
    check_backstepping, check_cancelled_form, check_chi, check_chain_rule, check_manifold, check_round_trip,
]


def run_all() -> list[CheckResult]:
    return [check() for check in CHECKS]
