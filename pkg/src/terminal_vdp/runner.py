"""Run scenarios and sweeps; write trajectory CSV, metrics JSON and SVG figures."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .control import EPS_DEN
from .dynamics import PolarState
from .errors import ConfigError
from .integrator import Trajectory, simulate_one
from .manifold import ManifoldParams
from .scenario import EPS_CONV, Scenario, override, scenario_to_config, validate_scenario

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "r", "theta", "x", "y", "v", "u_raw", "u_applied", "clamped",
               "b0", "b1", "mu", "a1", "a2")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    x = traj.r * np.cos(traj.theta)
    y = traj.r * np.sin(traj.theta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(traj)):
            w.writerow([_fmt(traj.t[i]), _fmt(traj.r[i]), _fmt(traj.theta[i]), _fmt(x[i]), _fmt(y[i]),
                        _fmt(traj.v[i]), _fmt(traj.u_raw[i]), _fmt(traj.u_applied[i]),
                        "1" if traj.clamped[i] else "0",
                        _fmt(traj.b0[i]), _fmt(traj.b1[i]), _fmt(traj.mu[i]),
                        _fmt(traj.a1[i]), _fmt(traj.a2[i])])


def read_trajectory_csv(path: Path) -> Trajectory:
    """Parse a trajectory CSV back into a :class:`Trajectory` (events are not stored in CSV)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    cols = {name: [row[i] for row in body] for i, name in enumerate(header)}
    arr = {k: np.array([float(s) for s in v]) for k, v in cols.items() if k not in ("clamped", "x", "y")}
    clamped = np.array([s == "1" for s in cols["clamped"]], dtype=bool)
    initial = PolarState(float(arr["r"][0]), float(arr["theta"][0])) if body else PolarState(math.nan, math.nan)
    return Trajectory(initial, clamped=clamped, **arr)


def convergence_time(t: np.ndarray, v: np.ndarray, eps: float = EPS_CONV) -> float | None:
    """First sample time after which ``|v| < eps`` holds to the end."""
    above = np.nonzero(np.abs(v) >= eps)[0]
    if len(above) == 0:
        return float(t[0]) if len(t) else None
    k = above[-1] + 1
    return float(t[k]) if k < len(t) else None


def trajectory_metrics(traj: Trajectory, index: int, t_end: float, eps: float = EPS_CONV) -> dict[str, Any]:
    tc = None if traj.aborted else convergence_time(traj.t, traj.v, eps)
    statuses: dict[str, int] = {}
    for e in traj.epochs:
        statuses[e.status] = statuses.get(e.status, 0) + 1
    return {
        "index": index,
        "initial": {"r": traj.initial.r, "theta": traj.initial.theta},
        "status": traj.status,
        "error": traj.error,
        "t_final": float(traj.t[-1]) if len(traj) else None,
        "converged": tc is not None and tc <= t_end,
        "convergence_time": tc,
        "final_offset": float(traj.v[-1]) if len(traj) else None,
        "max_abs_u": float(np.max(np.abs(traj.u_applied))) if len(traj) else None,
        "clamp_count": len(traj.events_of("clamp_onset")),
        "min_dtheta_dt": _finite_or_none(traj.min_dtheta_dt),
        "non_monotone_winding": not traj.min_dtheta_dt > 0.0,
        "adaptation": {
            "epochs": len(traj.epochs),
            "by_status": statuses,
            "final_a1": float(traj.a1[-1]) if len(traj) else None,
            "log": [e.as_dict() for e in traj.epochs],
        },
        "events": [{"t": e.t, "kind": e.kind, "detail": e.detail}
                   for e in traj.events if e.kind != "clamp_onset"],
    }


def scenario_metrics(scenario: Scenario, trajectories: Sequence[Trajectory]) -> dict[str, Any]:
    per = [trajectory_metrics(tr, i, scenario.integrator.t_end) for i, tr in enumerate(trajectories)]
    times = [m["convergence_time"] for m in per if m["converged"]]
    us = [m["max_abs_u"] for m in per if m["max_abs_u"] is not None]
    aggregate = {
        "n_trajectories": len(per),
        "n_converged": sum(m["converged"] for m in per),
        "n_aborted": sum(m["status"] != "ok" for m in per),
        "all_converged": all(m["converged"] for m in per),
        "max_convergence_time": max(times) if len(times) == len(per) and times else None,
        "max_abs_u": max(us) if us else None,
        "clamp_count": sum(m["clamp_count"] for m in per),
        "min_dtheta_dt": min((m["min_dtheta_dt"] for m in per if m["min_dtheta_dt"] is not None), default=None),
    }
    ig = scenario.integrator
    defaults = {
        "eps_conv": EPS_CONV,
        "eps_den": EPS_DEN,
        "r_guard": ig.r_guard,
        "h": ig.h,
        "sample_every": ig.sample_every,
        **scenario.sets.as_dict(),
    }
    return {"trajectories": per, "aggregate": aggregate, "defaults": defaults}


@dataclass
class RunResult:
    scenario: Scenario
    trajectories: list[Trajectory]
    metrics: dict[str, Any]
    artifacts: dict[str, Path]

    @property
    def failed(self) -> bool:
        return any(tr.aborted for tr in self.trajectories)


def _dump_json(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def _simulate_all(scenario: Scenario, workers: int) -> list[Trajectory]:
    n = len(scenario.initial_conditions)
    if workers <= 1 or n == 1:
        return [simulate_one(scenario, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(simulate_one, [scenario] * n, range(n)))


def write_figures(trajectories: Sequence[Trajectory], manifold: ManifoldParams, out: Path) -> dict[str, Path]:
    from .render import render_control_vs_theta, render_phase_portrait

    paths = {
        "portrait_polar": out / "portrait_polar.svg",
        "portrait_cartesian": out / "portrait_cartesian.svg",
        "control_vs_theta": out / "control_vs_theta.svg",
    }
    paths["portrait_polar"].write_text(render_phase_portrait(trajectories, manifold, "polar"))
    paths["portrait_cartesian"].write_text(render_phase_portrait(trajectories, manifold, "cartesian"))
    paths["control_vs_theta"].write_text(render_control_vs_theta(trajectories))
    return paths


def run_scenario(scenario: Scenario, out_dir: str | Path | None = None, workers: int = 1) -> RunResult:
    """Simulate every initial condition, compute metrics, and write the run directory if given."""
    trajectories = _simulate_all(scenario, workers)
    metrics = scenario_metrics(scenario, trajectories)
    artifacts: dict[str, Path] = {}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        artifacts["scenario"] = out / "scenario.json"
        _dump_json(scenario_to_config(scenario), artifacts["scenario"])
        for k, tr in enumerate(trajectories):
            p = out / f"trajectory_{k}.csv"
            write_trajectory_csv(tr, p)
            artifacts[f"trajectory_{k}"] = p
        artifacts["metrics"] = out / "metrics.json"
        _dump_json(metrics, artifacts["metrics"])
        final = scenario.schedule.segments[-1]
        artifacts.update(write_figures(trajectories, final.b, out))
    return RunResult(scenario, trajectories, metrics, artifacts)


def render_run_dir(run_dir: str | Path) -> dict[str, Path]:
    out = Path(run_dir)
    scenario = validate_scenario(json.loads((out / "scenario.json").read_text()))
    paths = sorted(out.glob("trajectory_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    trajectories = [read_trajectory_csv(p) for p in paths]
    return write_figures(trajectories, scenario.schedule.segments[-1].b, out)


def parse_grid(spec: str) -> dict[str, list[float]]:
    """Parse ``"mu=0.05,0.1;b1=1,1.5"`` or a path to a JSON object of lists."""
    p = Path(spec)
    if p.suffix == ".json" and p.exists():
        raw = json.loads(p.read_text())
        return {k: [float(x) for x in v] for k, v in raw.items()}
    grid = {}
    for part in filter(None, (s.strip() for s in spec.split(";"))):
        if "=" not in part:
            raise ConfigError([f"grid: cannot parse {part!r}"])
        key, values = part.split("=", 1)
        try:
            grid[key.strip()] = [float(x) for x in values.split(",") if x.strip()]
        except ValueError:
            raise ConfigError([f"grid.{key.strip()}: values must be numbers"]) from None
    return grid


def _sweep_cell(args):
    raw, params, out = args
    row: dict[str, Any] = dict(params)
    try:
        scenario = validate_scenario(override(raw, **params))
    except ConfigError as exc:
        row["status"] = "ConfigError: " + "; ".join(exc.violations)
        return row, None
    result = run_scenario(scenario, out)
    row["status"] = "RuntimeFailure" if result.failed else "ok"
    row.update(result.metrics["aggregate"])
    return row, result.metrics


def sweep(base: Scenario | Mapping[str, Any], grid: Mapping[str, Iterable[float]],
          out_dir: str | Path | None = None, workers: int = 1) -> list[dict[str, Any]]:
    """Run the cross product of ``grid`` over ``base``; one row per cell in deterministic order."""
    raw = scenario_to_config(base) if isinstance(base, Scenario) else dict(base)
    keys = list(grid)
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(list(grid[k]) for k in keys))]
    outs = [None if out_dir is None else Path(out_dir) / f"cell_{i:04d}" for i in range(len(cells))]
    jobs = [(raw, c, o) for c, o in zip(cells, outs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    rows = [r for r, _ in results]
    if out_dir is not None:
        write_sweep_table(rows, Path(out_dir) / "sweep.csv")
    return rows


def write_sweep_table(rows: Sequence[Mapping[str, Any]], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
