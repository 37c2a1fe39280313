"""Scenario configuration: schema, defaults and validation."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Any

from .adaptation import AdaptationConfig
from .control import DEFAULT_A_SET, ChiParams
from .dynamics import DEFAULT_MU_SET, Box, ControlBounds, Interval, PolarState, CartesianState, cartesian_to_polar
from .errors import ConfigError, OriginUndefined
from .integrator import IntegratorConfig
from .manifold import DEFAULT_B_SET, ManifoldParams

EPS_CONV = 1e-2


@dataclass(frozen=True)
class Segment:
    t_start: float
    b0: float
    b1: float
    mu: float

    @property
    def b(self) -> ManifoldParams:
        return ManifoldParams(self.b0, self.b1)


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant time course of ``(b0, b1, mu)``."""

    segments: tuple[Segment, ...]

    def at(self, t: float) -> Segment:
        """Segment in force on the step ending at ``t`` (switch times belong to the earlier one)."""
        current = self.segments[0]
        for seg in self.segments[1:]:
            if seg.t_start < t:
                current = seg
        return current


@dataclass(frozen=True)
class AdmissibleSets:
    a_set: Box = DEFAULT_A_SET
    b_set: Box = DEFAULT_B_SET
    mu_set: Interval = DEFAULT_MU_SET

    def as_dict(self) -> dict:
        return {"a_set": self.a_set.as_dict(), "b_set": self.b_set.as_dict(), "mu_set": self.mu_set.as_list()}


@dataclass(frozen=True)
class Scenario:
    initial_conditions: tuple[PolarState, ...]
    a_nominal: ChiParams
    schedule: Schedule
    bounds: ControlBounds = ControlBounds()
    integrator: IntegratorConfig = IntegratorConfig()
    adaptation: AdaptationConfig | None = None
    seed: int = 0
    sets: AdmissibleSets = field(default_factory=AdmissibleSets)


def reference_config(bounded: bool = True) -> dict[str, Any]:
    """Reference run: mu = 0.1, b = (4, 1.5), a = (0.5, 1), radii 1, 2, 6, 8 at theta = 0."""
    return {
        "initial_conditions": [{"r": r, "theta": 0.0} for r in (1.0, 2.0, 6.0, 8.0)],
        "a_nominal": {"a1": 0.5, "a2": 1.0},
        "schedule": [{"t_start": 0.0, "b0": 4.0, "b1": 1.5, "mu": 0.1}],
        "bounds": {"u_min": -2.0, "u_max": 2.0} if bounded else None,
        "integrator": {"h": 0.005, "t_end": 100.0, "sample_every": 10},
        "adaptation": None,
        "seed": 0,
    }


_TOP_KEYS = {"initial_conditions", "a_nominal", "schedule", "bounds", "integrator", "adaptation", "seed", "sets"}


def _unknown(raw: dict, allowed, path: str, errors: list[str]) -> None:
    for k in raw:
        if k not in allowed:
            errors.append(f"{path}.{k}: unknown key" if path else f"{k}: unknown key")


def _num(raw: dict, key: str, path: str, errors: list[str], default=None, required=False):
    if key not in raw:
        if required:
            errors.append(f"{path}.{key}: required")
        return default
    x = raw[key]
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        errors.append(f"{path}.{key}: expected a finite number, got {x!r}")
        return default
    return float(x)


def _dict(raw, path: str, errors: list[str]) -> dict:
    if not isinstance(raw, dict):
        errors.append(f"{path}: expected an object")
        return {}
    return raw


def _box(raw, default: Box, path: str, errors: list[str]) -> Box:
    if raw is None:
        return default
    raw = _dict(raw, path, errors)
    _unknown(raw, default.names, path, errors)
    ivs = []
    for name, iv in zip(default.names, default.intervals):
        pair = raw.get(name, iv.as_list())
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2 and pair[0] <= pair[1]):
            errors.append(f"{path}.{name}: expected [lo, hi] with lo <= hi")
            ivs.append(iv)
        else:
            ivs.append(Interval(float(pair[0]), float(pair[1])))
    return Box(default.names, tuple(ivs))


def validate_scenario(raw: dict[str, Any]) -> Scenario:
    """Resolve defaults and check every invariant; raises :class:`ConfigError` listing all problems."""
    errors: list[str] = []
    raw = _dict(raw, "<root>", errors)
    _unknown(raw, _TOP_KEYS, "", errors)

    sets_raw = _dict(raw.get("sets") or {}, "sets", errors)
    _unknown(sets_raw, {"a_set", "b_set", "mu_set"}, "sets", errors)
    a_set = _box(sets_raw.get("a_set"), DEFAULT_A_SET, "sets.a_set", errors)
    b_set = _box(sets_raw.get("b_set"), DEFAULT_B_SET, "sets.b_set", errors)
    mu_set = DEFAULT_MU_SET
    if sets_raw.get("mu_set") is not None:
        ms = sets_raw["mu_set"]
        if isinstance(ms, (list, tuple)) and len(ms) == 2 and ms[0] <= ms[1]:
            mu_set = Interval(float(ms[0]), float(ms[1]))
        else:
            errors.append("sets.mu_set: expected [lo, hi] with lo <= hi")
    sets = AdmissibleSets(a_set, b_set, mu_set)

    ig_raw = _dict(raw.get("integrator") or {}, "integrator", errors)
    _unknown(ig_raw, IntegratorConfig.__dataclass_fields__, "integrator", errors)
    d = IntegratorConfig()
    se = ig_raw.get("sample_every", d.sample_every)
    if isinstance(se, float) and se.is_integer():
        se = int(se)
    integ = IntegratorConfig(
        h=_num(ig_raw, "h", "integrator", errors, d.h),
        t_end=_num(ig_raw, "t_end", "integrator", errors, d.t_end),
        sample_every=se,
        error_monitor=bool(ig_raw.get("error_monitor", d.error_monitor)),
        r_guard=_num(ig_raw, "r_guard", "integrator", errors, d.r_guard),
        monitor_factor=_num(ig_raw, "monitor_factor", "integrator", errors, d.monitor_factor),
    )
    errors += [f"integrator: {m}" for m in integ.violations()]

    ics = []
    ic_raw = raw.get("initial_conditions")
    if not isinstance(ic_raw, list) or not ic_raw:
        errors.append("initial_conditions: at least one initial condition required")
        ic_raw = []
    for i, ic in enumerate(ic_raw):
        path = f"initial_conditions[{i}]"
        ic = _dict(ic, path, errors)
        if "x" in ic or "y" in ic:
            _unknown(ic, {"x", "y"}, path, errors)
            x = _num(ic, "x", path, errors, required=True)
            y = _num(ic, "y", path, errors, required=True)
            if x is None or y is None:
                continue
            try:
                ps = cartesian_to_polar(CartesianState(x, y))
            except OriginUndefined:
                errors.append(f"{path}: origin has no polar angle")
                continue
        else:
            _unknown(ic, {"r", "theta"}, path, errors)
            r = _num(ic, "r", path, errors, required=True)
            th = _num(ic, "theta", path, errors, 0.0)
            if r is None:
                continue
            ps = PolarState(r, th)
        if not ps.r > integ.r_guard:
            errors.append(f"{path}: r={ps.r} must exceed r_guard={integ.r_guard}")
        ics.append(ps)

    a_raw = _dict(raw.get("a_nominal", {"a1": 0.5, "a2": 1.0}), "a_nominal", errors)
    _unknown(a_raw, {"a1", "a2"}, "a_nominal", errors)
    a = ChiParams(_num(a_raw, "a1", "a_nominal", errors, 0.5), _num(a_raw, "a2", "a_nominal", errors, 1.0))
    errors += [f"a_nominal: {m}" for m in a.violations(a_set)]

    segs = []
    sch_raw = raw.get("schedule")
    if not isinstance(sch_raw, list) or not sch_raw:
        errors.append("schedule: at least one segment required")
        sch_raw = []
    for i, sg in enumerate(sch_raw):
        path = f"schedule[{i}]"
        sg = _dict(sg, path, errors)
        _unknown(sg, {"t_start", "b0", "b1", "mu"}, path, errors)
        vals = [_num(sg, k, path, errors, required=(k != "t_start"))
                for k in ("t_start", "b0", "b1", "mu")]
        if vals[0] is None:
            vals[0] = 0.0 if i == 0 else None
            if i > 0:
                errors.append(f"{path}.t_start: required")
        if None in vals:
            continue
        seg = Segment(*vals)
        if i == 0 and seg.t_start != 0.0:
            errors.append(f"{path}.t_start: first segment must start at t = 0")
        if segs and not seg.t_start > segs[-1].t_start:
            errors.append(f"{path}.t_start: must be strictly increasing")
        errors += [f"{path}: {m}" for m in seg.b.violations(b_set, integ.r_guard)]
        if seg.mu not in mu_set:
            errors.append(f"{path}.mu: {seg.mu} outside admissible set {mu_set.as_list()}")
        segs.append(seg)

    b_raw = raw.get("bounds")
    bounds = ControlBounds()
    if b_raw is not None:
        b_raw = _dict(b_raw, "bounds", errors)
        _unknown(b_raw, {"u_min", "u_max"}, "bounds", errors)
        lo = _num(b_raw, "u_min", "bounds", errors, required=True)
        hi = _num(b_raw, "u_max", "bounds", errors, required=True)
        if lo is not None and hi is not None:
            if lo > hi:
                errors.append(f"bounds: u_min={lo} exceeds u_max={hi}")
            else:
                bounds = ControlBounds(lo, hi)

    adaptation = None
    ad_raw = raw.get("adaptation")
    if ad_raw is not None:
        ad_raw = _dict(ad_raw, "adaptation", errors)
        _unknown(ad_raw, AdaptationConfig.__dataclass_fields__, "adaptation", errors)
        da = AdaptationConfig()
        adaptation = AdaptationConfig(
            epoch_period=_num(ad_raw, "epoch_period", "adaptation", errors, da.epoch_period),
            id_window=int(_num(ad_raw, "id_window", "adaptation", errors, da.id_window)),
            v_max=_num(ad_raw, "v_max", "adaptation", errors, da.v_max),
            grid_n=int(_num(ad_raw, "grid_n", "adaptation", errors, da.grid_n)),
            sigma=_num(ad_raw, "sigma", "adaptation", errors, da.sigma),
            phi_min=_num(ad_raw, "phi_min", "adaptation", errors, da.phi_min),
        )
        errors += [f"adaptation: {m}" for m in adaptation.violations()]

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: expected a non-negative integer, got {seed!r}")
        seed = 0

    if errors:
        raise ConfigError(errors)
    return Scenario(tuple(ics), a, Schedule(tuple(segs)), bounds, integ, adaptation, seed, sets)


def scenario_to_config(s: Scenario) -> dict[str, Any]:
    """Fully resolved config; feeding it back to :func:`validate_scenario` reproduces ``s``."""
    ig = s.integrator
    return {
        "initial_conditions": [{"r": p.r, "theta": p.theta} for p in s.initial_conditions],
        "a_nominal": {"a1": s.a_nominal.a1, "a2": s.a_nominal.a2},
        "schedule": [{"t_start": g.t_start, "b0": g.b0, "b1": g.b1, "mu": g.mu} for g in s.schedule.segments],
        "bounds": None if s.bounds.unbounded else {"u_min": s.bounds.u_min, "u_max": s.bounds.u_max},
        "integrator": {"h": ig.h, "t_end": ig.t_end, "sample_every": ig.sample_every,
                       "error_monitor": ig.error_monitor, "r_guard": ig.r_guard,
                       "monitor_factor": ig.monitor_factor},
        "adaptation": None if s.adaptation is None else dict(s.adaptation.__dict__),
        "seed": s.seed,
        "sets": s.sets.as_dict(),
    }


SWEEP_KEYS = ("mu", "b0", "b1", "a1", "a2", "u_min", "u_max")


def override(raw: dict[str, Any], **params: float) -> dict[str, Any]:
    """Copy of ``raw`` with sweep parameters applied.

    ``mu``, ``b0`` and ``b1`` override every schedule segment; ``a1``/``a2`` the
    nominal gain; ``u_min``/``u_max`` the bounds.
    """
    out = copy.deepcopy(raw)
    for k, x in params.items():
        if k not in SWEEP_KEYS:
            raise ConfigError([f"grid.{k}: not a sweepable parameter"])
        if k in ("mu", "b0", "b1"):
            for seg in out["schedule"]:
                seg[k] = x
        elif k in ("a1", "a2"):
            out.setdefault("a_nominal", {"a1": 0.5, "a2": 1.0})[k] = x
        elif k in ("u_min", "u_max"):
            b = out.get("bounds") or {"u_min": -math.inf, "u_max": math.inf}
            b[k] = x
            out["bounds"] = b
    return out
