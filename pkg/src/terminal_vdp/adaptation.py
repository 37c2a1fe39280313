"""Model-identification adaptive control around the backstepping law.

Each epoch the loop senses the state, identifies ``mu`` from recent samples,
takes the commanded manifold parameters as identified ``b``, and rescales the
gain ``a1`` so that the unsaturated control stays inside ``[u_min, u_max]`` over
a band ``|v| <= v_max`` around the manifold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .control import DEFAULT_A_SET, EPS_DEN, ChiParams
from .dynamics import DEFAULT_R_GUARD, TWO_PI, Box, ControlBounds, PolarState
from .errors import AdmissibleSetViolation, DegenerateManifold, Infeasible, InsufficientExcitation
from .manifold import ManifoldParams

logger = logging.getLogger(__name__)

MIN_ID_SAMPLES = 10
SCALE_TOL = 1e-3


@dataclass(frozen=True)
class AdaptationConfig:
    epoch_period: float = 5.0
    id_window: int = 200
    v_max: float = 0.5
    grid_n: int = 128
    sigma: float = 0.0
    phi_min: float = 0.1

    def violations(self) -> list[str]:
        out = []
        for name in ("epoch_period", "id_window", "v_max", "phi_min"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        if not self.sigma >= 0:
            out.append("sigma must be non-negative")
        if not self.grid_n >= 64:
            out.append("grid_n must be >= 64")
        return out

    @property
    def region(self) -> "Region":
        return Region(self.v_max, self.grid_n)


class Region(NamedTuple):
    """Grid over a full revolution in theta times ``[-v_max, v_max]`` in v."""

    v_max: float
    grid_n: int = 128


class SampleWindow(NamedTuple):
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class EstimateBundle:
    r_hat: float
    theta_hat: float
    b_tilde: ManifoldParams
    mu_tilde: float


@dataclass(frozen=True)
class EpochRecord:
    t: float
    status: str  # adjusted | skipped | infeasible | degenerate | inadmissible
    mu_tilde: float | None = None
    b_tilde: tuple[float, float] | None = None
    scale: float | None = None
    a1: float | None = None
    a2: float | None = None
    u_lo: float | None = None
    u_hi: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class AdaptationState:
    a_nominal: ChiParams
    delta_a: tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0
    epoch_log: tuple[EpochRecord, ...] = field(default=())

    @property
    def a_current(self) -> ChiParams:
        return ChiParams(self.a_nominal.a1 + self.delta_a[0], self.a_nominal.a2 + self.delta_a[1])

    def logged(self, record: EpochRecord) -> "AdaptationState":
        return replace(self, epoch_log=self.epoch_log + (record,))


def identify_mu(window: SampleWindow, phi_min: float = 0.1) -> float:
    """Least-squares ``mu`` from ``dr/dt - u cos(th) = mu * r cos^2(th) (1 - r^2 sin^2(th))``.

    ``dr/dt`` comes from second-order finite differences on the (possibly
    non-uniform) sample times. Samples whose regressor is below ``phi_min`` in
    magnitude carry no information about ``mu`` and are dropped.
    """
    t, r, theta, u = (np.asarray(x, dtype=float) for x in window)
    if len(t) < 3:
        raise InsufficientExcitation(f"only {len(t)} samples in window")
    drdt = np.gradient(r, t)
    c = np.cos(theta)
    s = np.sin(theta)
    phi = r * c * c * (1.0 - r * r * s * s)
    y = drdt - u * c
    keep = np.abs(phi) >= phi_min
    if keep.sum() < MIN_ID_SAMPLES:
        raise InsufficientExcitation(f"{int(keep.sum())} usable samples after regressor exclusion")
    phi = phi[keep]
    return float(phi @ y[keep] / (phi @ phi))


def _check_region(b: ManifoldParams, region: Region, r_guard: float = DEFAULT_R_GUARD) -> None:
    # r + b1 sin(th) >= b0 - 2|b1| - v_max and r >= b0 - |b1| - v_max on the band
    if not b.b0 - 2.0 * abs(b.b1) - region.v_max > 0.0:
        raise DegenerateManifold(
            f"band |v| <= {region.v_max} around b=({b.b0}, {b.b1}) meets r + b1 sin(theta) = 0")
    if not b.b0 - abs(b.b1) - region.v_max > r_guard:
        raise DegenerateManifold(f"band |v| <= {region.v_max} around b=({b.b0}, {b.b1}) reaches r_guard")


def control_grid(a2: float, b: ManifoldParams, mu: float, region: Region) -> tuple[np.ndarray, np.ndarray]:
    """Split the unsaturated control on the grid as ``base + a1 * slope``."""
    _check_region(b, region)
    theta = np.linspace(0.0, TWO_PI, region.grid_n, endpoint=False)[:, None]
    v = np.linspace(-region.v_max, region.v_max, region.grid_n)[None, :]
    s = np.sin(theta)
    c = np.cos(theta)
    r = b.b0 + b.b1 * s + v
    d = r + b.b1 * s
    if np.any(d <= EPS_DEN * r):
        raise DegenerateManifold("control law singular inside the evaluation region")
    base = r * (b.b1 - mu * c * (1.0 - r * r * s * s) * d) / d
    slope = -r * c * np.arctan(a2 * v) / d
    return base, slope


def worst_case_control(a: ChiParams, b: ManifoldParams, mu: float, region: Region) -> tuple[float, float]:
    """Min and max of the unsaturated control over the region grid."""
    base, slope = control_grid(a.a2, b, mu, region)
    u = base + a.a1 * slope
    return float(u.min()), float(u.max())


def adjust_gain(a_nominal: ChiParams, b_tilde: ManifoldParams, mu_tilde: float,
                bounds: ControlBounds, region: Region, a_set: Box = DEFAULT_A_SET) -> AdaptationState:
    """Largest gain scale ``s`` in ``[0, 1]`` keeping the worst-case control in bounds.

    ``a1 = s * a1_nominal``; ``a2`` is left alone.
    """
    if bounds.unbounded:
        return AdaptationState(a_nominal)
    base, slope = control_grid(a_nominal.a2, b_tilde, mu_tilde, region)

    def feasible(s: float) -> bool:
        u = base + (s * a_nominal.a1) * slope
        return bounds.contains(float(u.min()), float(u.max()))

    if feasible(1.0):
        s = 1.0
    elif not feasible(0.0):
        u0 = base.min(), base.max()
        raise Infeasible(f"gain-free control spans [{u0[0]:.4g}, {u0[1]:.4g}], outside "
                         f"[{bounds.u_min:.4g}, {bounds.u_max:.4g}]")
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > SCALE_TOL:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        s = lo
        if not all(feasible(x) for x in np.linspace(0.0, s, 17)):
            logger.warning("feasibility not monotone in gain scale; scanning exhaustively")
            s = 0.0
            for x in np.linspace(0.0, 1.0, 1024):
                if not feasible(x):
                    break
                s = float(x)
    a1 = s * a_nominal.a1
    if not a_set.contains((a1, a_nominal.a2)):
        raise AdmissibleSetViolation(f"adapted gain ({a1}, {a_nominal.a2}) leaves A")
    return AdaptationState(a_nominal, ((s - 1.0) * a_nominal.a1, 0.0), s)


def sense(truth: PolarState, history: SampleWindow, b: ManifoldParams, sigma: float,
          rng: np.random.Generator) -> tuple[EstimateBundle, SampleWindow]:
    """Add zero-mean Gaussian sensor noise; exact pass-through when ``sigma == 0``."""
    if sigma == 0.0:
        return EstimateBundle(truth.r, truth.theta, b, math.nan), history
    n = len(history.t)
    noise = rng.normal(0.0, sigma, size=(2, n + 2))
    window = SampleWindow(history.t, history.r + noise[0, :n], history.theta + noise[1, :n], history.u)
    b_noise = rng.normal(0.0, sigma, size=2)
    b_tilde = ManifoldParams(b.b0 + b_noise[0], b.b1 + b_noise[1])
    return EstimateBundle(truth.r + noise[0, n], truth.theta + noise[1, n], b_tilde, math.nan), window


def miac_step(truth: PolarState, history: SampleWindow, schedule_truth: tuple[ManifoldParams, float],
              state: AdaptationState, cfg: AdaptationConfig, bounds: ControlBounds, t: float,
              rng: np.random.Generator | None = None, a_set: Box = DEFAULT_A_SET) -> AdaptationState:
    """One sense / identify / adjust cycle. Failures are logged and leave the gain as it was."""
    rng = rng if rng is not None else np.random.default_rng(0)
    b_true, _ = schedule_truth
    est, window = sense(truth, history, b_true, cfg.sigma, rng)
    b_tilde = est.b_tilde
    bt = (b_tilde.b0, b_tilde.b1)
    try:
        mu_tilde = identify_mu(window, cfg.phi_min)
    except InsufficientExcitation as exc:
        return state.logged(EpochRecord(t, "skipped", b_tilde=bt, detail=str(exc)))
    region = cfg.region
    try:
        new = adjust_gain(state.a_nominal, b_tilde, mu_tilde, bounds, region, a_set)
    except Infeasible as exc:
        status, detail = "infeasible", str(exc)
    except DegenerateManifold as exc:
        status, detail = "degenerate", str(exc)
    except AdmissibleSetViolation as exc:
        status, detail = "inadmissible", str(exc)
    else:
        a = new.a_current
        lo, hi = (-math.inf, math.inf) if bounds.unbounded else worst_case_control(a, b_tilde, mu_tilde, region)
        if not bounds.contains(lo, hi):
            raise AssertionError("adapted gain failed its worst-case certificate")
        rec = EpochRecord(t, "adjusted", mu_tilde, bt, new.scale, a.a1, a.a2,
                          None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
        return replace(new, epoch_log=state.epoch_log + (rec,))
    logger.info("epoch at t=%g: %s (%s)", t, status, detail)
    a = state.a_current
    return state.logged(EpochRecord(t, status, mu_tilde, bt, state.scale, a.a1, a.a2, detail=detail))
