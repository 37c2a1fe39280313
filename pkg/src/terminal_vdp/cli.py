"""Command line entry point: ``terminal-vdp {simulate,sweep,verify,render}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .runner import parse_grid, render_run_dir, run_scenario, sweep
from .scenario import SWEEP_KEYS, validate_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 2, 3, 4


def _load(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError([f"{path}: no such file"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None


def _cmd_simulate(args) -> int:
    scenario = validate_scenario(_load(args.config))
    out = Path(args.out or Path(args.config).with_suffix("").name + "_run")
    result = run_scenario(scenario, out, workers=args.workers)
    agg = result.metrics["aggregate"]
    print(f"{out}: {agg['n_converged']}/{agg['n_trajectories']} converged, "
          f"{agg['n_aborted']} aborted, clamp events {agg['clamp_count']}")
    return EXIT_RUNTIME if result.failed else EXIT_OK


def _cmd_sweep(args) -> int:
    raw = _load(args.config)
    validate_scenario(raw)
    grid = parse_grid(args.grid)
    bad = [f"grid.{k}: not a sweepable parameter (choose from {', '.join(SWEEP_KEYS)})"
           for k in grid if k not in SWEEP_KEYS]
    if bad:
        raise ConfigError(bad)
    out = Path(args.out or Path(args.config).with_suffix("").name + "_sweep")
    rows = sweep(raw, grid, out, workers=args.workers)
    for row in rows:
        params = ", ".join(f"{k}={row[k]:g}" for k in grid)
        print(f"{params}: {row['status']}" + (f", converged {row['n_converged']}/{row['n_trajectories']}"
                                              if "n_converged" in row else ""))
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verification import run_all

    results = run_all()
    for res in results:
        print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name}: {res.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _cmd_render(args) -> int:
    for name, path in render_run_dir(args.run_dir).items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="terminal-vdp", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario config")
    s.add_argument("config")
    s.add_argument("--out", help="run directory (default: <config stem>_run)")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("sweep", help="run a parameter grid over a base config")
    s.add_argument("config")
    s.add_argument("--grid", required=True, help='e.g. "mu=0.05,0.1,0.2;b1=1,1.5" or a JSON file')
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("verify", help="run the control-law self-checks")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("render", help="regenerate SVG figures for a run directory")
    s.add_argument("run_dir")
    s.set_defaults(func=_cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
