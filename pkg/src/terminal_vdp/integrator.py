"""Fixed-step RK4 integration of the closed loop across schedule breakpoints."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import adaptation as adapt
from .control import ChiParams, _closed_loop_rates
from .dynamics import DEFAULT_R_GUARD, PolarState
from .errors import GuardRadiusHit, NonFiniteDerivative, TerminalControlError
from .manifold import ManifoldParams

logger = logging.getLogger(__name__)

COLUMNS = ("t", "r", "theta", "v", "u_raw", "u_applied", "clamped", "b0", "b1", "mu", "a1", "a2")


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 0.005
    t_end: float = 100.0
    sample_every: int = 10
    error_monitor: bool = False
    r_guard: float = DEFAULT_R_GUARD
    monitor_factor: float = 10.0

    def violations(self) -> list[str]:
        out = []
        if not self.h > 0:
            out.append("h must be positive")
        if not self.t_end > 0:
            out.append("t_end must be positive")
        if not (isinstance(self.sample_every, int) and self.sample_every >= 1):
            out.append("sample_every must be an integer >= 1")
        if not self.r_guard > 0:
            out.append("r_guard must be positive")
        return out


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    detail: str = ""


@dataclass
class Trajectory:
    """Sampled closed-loop history; each column is a float array (``clamped`` is bool)."""

    initial: PolarState
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    u_raw: np.ndarray
    u_applied: np.ndarray
    clamped: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    mu: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    events: list[Event] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    min_dtheta_dt: float = math.inf
    epochs: list[adapt.EpochRecord] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return self.status != "ok"

    def __len__(self) -> int:
        return len(self.t)

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    def window(self, n_last: int, t_after: float = -math.inf) -> adapt.SampleWindow:
        keep = np.nonzero(self.t > t_after)[0][-n_last:]
        return adapt.SampleWindow(self.t[keep], self.r[keep], self.theta[keep], self.u_applied[keep])


class _Recorder:
    def __init__(self):
        self.cols = {c: [] for c in COLUMNS}

    def add(self, *values):
        for c, x in zip(COLUMNS, values):
            self.cols[c].append(x)

    def window(self, n_last, t_after):
        t = self.cols["t"]
        k = len(t)
        start = k
        while start > 0 and k - start < n_last and t[start - 1] > t_after:
            start -= 1
        return adapt.SampleWindow(*(np.array(self.cols[c][start:]) for c in ("t", "r", "theta", "u_applied")))

    def build(self, initial, **kw) -> Trajectory:
        arrays = {c: np.array(v, dtype=bool if c == "clamped" else float) for c, v in self.cols.items()}
        return Trajectory(initial, **arrays, **kw)


def _rk4(f, r, th, h):
    k1r, k1t = f(r, th)
    k2r, k2t = f(r + 0.5 * h * k1r, th + 0.5 * h * k1t)
    k3r, k3t = f(r + 0.5 * h * k2r, th + 0.5 * h * k2t)
    k4r, k4t = f(r + h * k3r, th + h * k3t)
    for x in (k1r, k1t, k2r, k2t, k3r, k3t, k4r, k4t):
        if not math.isfinite(x):
            raise NonFiniteDerivative(f"non-finite derivative near r={r}, theta={th}")
    return (r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
            th + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t))


def rk4_step(field: Callable[[PolarState], tuple[float, float]], state: PolarState, h: float) -> PolarState:
    """One classical Runge-Kutta step of ``field`` from ``state``."""
    if not h > 0:
        raise ValueError("h must be positive")
    return PolarState(*_rk4(lambda r, th: field(PolarState(r, th)), state.r, state.theta, h))


def _stops(schedule, cfg: IntegratorConfig, epoch_period: float | None):
    switches = [s.t_start for s in schedule.segments[1:] if s.t_start < cfg.t_end]
    epochs = []
    if epoch_period is not None:
        k = 1
        while k * epoch_period < cfg.t_end:
            epochs.append(k * epoch_period)
            k += 1
    return sorted(set(switches) | set(epochs) | {cfg.t_end}), set(switches), set(epochs)


def simulate_one(scenario, index: int) -> Trajectory:
    """Integrate one initial condition of ``scenario``; failures abort this trajectory only."""
    cfg: IntegratorConfig = scenario.integrator
    acfg = scenario.adaptation
    segments = scenario.schedule.segments
    bounds = scenario.bounds
    u_min, u_max = bounds.u_min, bounds.u_max
    initial = scenario.initial_conditions[index]
    rng = np.random.default_rng([scenario.seed, index])
    stops, switches, epochs = _stops(scenario.schedule, cfg, acfg.epoch_period if acfg else None)

    state = adapt.AdaptationState(scenario.a_nominal)
    a = state.a_current
    seg_i = 0
    seg = segments[0]
    rec = _Recorder()
    events: list[Event] = []
    min_dth = math.inf
    t = 0.0
    r, th = initial.r, initial.theta
    last_switch = 0.0
    status, error = "ok", None

    def field_fn(r, th):
        dr, dth, _, _ = _closed_loop_rates(r, th, a.a1, a.a2, seg.b0, seg.b1, seg.mu, u_min, u_max)
        return dr, dth

    def record(t, r, th):
        nonlocal min_dth
        _, dth, u_raw, u = _closed_loop_rates(r, th, a.a1, a.a2, seg.b0, seg.b1, seg.mu, u_min, u_max)
        min_dth = min(min_dth, dth)
        return u_raw, u

    try:
        if not r > cfg.r_guard:
            raise GuardRadiusHit(0.0, r)
        u_raw, u = record(t, r, th)
        was_clamped = u != u_raw
        if was_clamped:
            events.append(Event(0.0, "clamp_onset"))
        rec.add(t, r, th, r - (seg.b0 + seg.b1 * math.sin(th)), u_raw, u, was_clamped,
                seg.b0, seg.b1, seg.mu, a.a1, a.a2)
        steps = 0
        for stop in stops:
            t0 = t
            n = max(1, math.ceil((stop - t0) / cfg.h - 1e-6))
            for k in range(1, n + 1):
                t_next = stop if k == n else t0 + k * cfg.h
                hk = t_next - t
                r_new, th_new = _rk4(field_fn, r, th, hk)
                if cfg.error_monitor:
                    rm, tm = _rk4(field_fn, r, th, 0.5 * hk)
                    rm, tm = _rk4(field_fn, rm, tm, 0.5 * hk)
                    err = max(abs(rm - r_new), abs(tm - th_new))
                    if err > cfg.monitor_factor * hk ** 5:
                        events.append(Event(t_next, "step_doubling", f"{err:.3e}"))
                t, r, th = t_next, r_new, th_new
                if not r > cfg.r_guard:
                    raise GuardRadiusHit(t, r)
                u_raw, u = record(t, r, th)
                clamped = u != u_raw
                if clamped and not was_clamped:
                    events.append(Event(t, "clamp_onset"))
                was_clamped = clamped
                steps += 1
                if steps % cfg.sample_every == 0 or k == n:
                    rec.add(t, r, th, r - (seg.b0 + seg.b1 * math.sin(th)), u_raw, u, clamped,
                            seg.b0, seg.b1, seg.mu, a.a1, a.a2)
            if stop in switches:
                seg_i += 1
                seg = segments[seg_i]
                last_switch = stop
                events.append(Event(stop, "schedule_switch", f"b=({seg.b0}, {seg.b1}), mu={seg.mu}"))
            if stop in epochs:
                state = adapt.miac_step(
                    PolarState(r, th), rec.window(acfg.id_window, last_switch),
                    (ManifoldParams(seg.b0, seg.b1), seg.mu), state, acfg, bounds, stop, rng,
                    scenario.sets.a_set)
                a = state.a_current
                events.append(Event(stop, "adaptation_epoch", state.epoch_log[-1].status))
            if (stop in switches or stop in epochs) and stop < cfg.t_end:
                # the next step runs on new parameters; the clamp flag follows them
                u_raw, u = record(t, r, th)
                clamped = u != u_raw
                if clamped and not was_clamped:
                    events.append(Event(t, "clamp_onset"))
                was_clamped = clamped
    except TerminalControlError as exc:
        status, error = type(exc).__name__, str(exc)
        events.append(Event(t, "abort", f"{status}: {error}"))
        logger.warning("trajectory %d aborted at t=%g: %s", index, t, exc)

    return rec.build(initial, events=events, status=status, error=error,
                     min_dtheta_dt=min_dth, epochs=list(state.epoch_log))


def simulate(scenario) -> list[Trajectory]:
    return [simulate_one(scenario, i) for i in range(len(scenario.initial_conditions))]
