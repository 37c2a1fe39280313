import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from terminal_vdp import ManifoldParams, reference_config, run_scenario, sweep, validate_scenario
from terminal_vdp.manifold import implicit_cartesian_residual
from terminal_vdp.dynamics import CartesianState
from terminal_vdp.render import MARGIN, HEIGHT, MANIFOLD_STROKE, render_phase_portrait
from terminal_vdp.runner import (
    CSV_COLUMNS,
    convergence_time,
    parse_grid,
    read_trajectory_csv,
    render_run_dir,
)

SVG = "{http://www.w3.org/2000/svg}"
B = ManifoldParams(4.0, 1.5)


def small_config(radii=(6.0,), t_end=60.0, bounded=False):
    cfg = reference_config(bounded=bounded)
    cfg["initial_conditions"] = [{"r": r, "theta": 0.0} for r in radii]
    cfg["integrator"]["t_end"] = t_end
    return cfg


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    result = run_scenario(validate_scenario(small_config(radii=(6.0, 8.0))), out)
    return out, result


def _points(el):
    return np.array([[float(c) for c in p.split(",")] for p in el.get("points").split()])


# CSV and metrics ----------------------------------------------------------------

def test_run_directory_layout(run_dir):
    out, _ = run_dir
    names = sorted(p.name for p in out.iterdir())
    assert names == ["control_vs_theta.svg", "metrics.json", "portrait_cartesian.svg", "portrait_polar.svg",
                     "scenario.json", "trajectory_0.csv", "trajectory_1.csv"]
    assert (out / "trajectory_0.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_csv_round_trip_is_bit_exact(run_dir):
    out, result = run_dir
    for k, tr in enumerate(result.trajectories):
        back = read_trajectory_csv(out / f"trajectory_{k}.csv")
        for col in ("t", "r", "theta", "v", "u_raw", "u_applied", "clamped", "b0", "b1", "mu", "a1", "a2"):
            assert np.array_equal(getattr(back, col), getattr(tr, col)), col


def test_metrics_consistent_with_csv(run_dir):
    out, result = run_dir
    metrics = json.loads((out / "metrics.json").read_text())
    for k, m in enumerate(metrics["trajectories"]):
        tr = read_trajectory_csv(out / f"trajectory_{k}.csv")
        assert m["max_abs_u"] == float(np.max(np.abs(tr.u_applied)))
        onsets = int(tr.clamped[0]) + int(np.sum(tr.clamped[1:] & ~tr.clamped[:-1]))
        assert m["clamp_count"] == 0 == onsets
        assert m["converged"] and m["convergence_time"] <= 60.0
        assert m["final_offset"] == tr.v[-1]
    assert metrics["defaults"]["eps_conv"] == 1e-2
    assert metrics["defaults"]["b_set"] == {"b0": [2.0, 8.0], "b1": [-2.0, 2.0]}
    assert metrics["aggregate"]["all_converged"]


def test_clamp_count_matches_onsets(tmp_path):
    result = run_scenario(validate_scenario(small_config(radii=(6.0,), t_end=20.0, bounded=True)))
    tr = result.trajectories[0]
    m = result.metrics["trajectories"][0]
    assert m["clamp_count"] == len(tr.events_of("clamp_onset")) > 0
    assert result.metrics["aggregate"]["clamp_count"] == m["clamp_count"]


def test_convergence_time_definition():
    t = np.arange(6.0)
    assert convergence_time(t, np.array([1.0, 0.5, 0.005, 0.02, 0.001, 0.0])) == 4.0
    assert convergence_time(t, np.array([0.0] * 5 + [0.5])) is None
    assert convergence_time(t, np.zeros(6)) == 0.0


def test_aborted_trajectory_recorded_batch_completes(tmp_path):
    cfg = small_config(radii=(1.0, 6.0), t_end=10.0)
    result = run_scenario(validate_scenario(cfg), tmp_path)
    per = result.metrics["trajectories"]
    assert result.failed
    assert per[0]["status"] == "DegenerateManifold" and not per[0]["converged"]
    assert per[1]["status"] == "ok"
    assert json.loads((tmp_path / "metrics.json").read_text())["aggregate"]["n_aborted"] == 1


def test_determinism_byte_identical(tmp_path):
    s = validate_scenario(small_config(radii=(6.0,), t_end=20.0))
    run_scenario(s, tmp_path / "a")
    run_scenario(s, tmp_path / "b", workers=2)
    for name in ("trajectory_0.csv", "metrics.json", "scenario.json", "portrait_polar.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# sweep -----------------------------------------------------------------------------

def test_parse_grid(tmp_path):
    assert parse_grid("mu=0.05,0.1; b1=1,1.5") == {"mu": [0.05, 0.1], "b1": [1.0, 1.5]}
    p = tmp_path / "g.json"
    p.write_text('{"a1": [0.5, 1]}')
    assert parse_grid(str(p)) == {"a1": [0.5, 1.0]}


def test_one_point_sweep_matches_run(tmp_path):
    cfg = small_config(t_end=30.0)
    rows = sweep(cfg, {"mu": [0.1]}, tmp_path)
    direct = run_scenario(validate_scenario(cfg)).metrics
    assert rows[0]["status"] == "ok"
    for k, v in direct["aggregate"].items():
        assert rows[0][k] == v
    assert json.loads((tmp_path / "cell_0000" / "metrics.json").read_text()) == json.loads(json.dumps(direct))
    assert (tmp_path / "sweep.csv").exists()


def test_sweep_mu_by_b1_all_converge():
    rows = sweep(small_config(t_end=100.0), {"mu": [0.05, 0.1, 0.2], "b1": [1.0, 1.5]}, workers=2)
    assert [(r["mu"], r["b1"]) for r in rows] == [(m, b) for m in (0.05, 0.1, 0.2) for b in (1.0, 1.5)]
    assert all(r["status"] == "ok" and r["all_converged"] for r in rows)


def test_sweep_degenerate_cell_marked():
    rows = sweep(small_config(t_end=5.0), {"b0": [4.0, 1.5]})
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("ConfigError") and "crosses origin" in rows[1]["status"]


# rendering ---------------------------------------------------------------------------

def _cartesian_inverse(rmax):
    side = HEIGHT - 2 * MARGIN
    span = 2 * rmax

    def inv(p):
        return (p[:, 0] - MARGIN) / side * span - rmax, rmax - (p[:, 1] - MARGIN) / side * span
    return inv


def test_manifold_only_overlay_lies_on_curve():
    root = ET.fromstring(render_phase_portrait([], B, "cartesian"))
    curve = [el for el in root.iter(SVG + "polyline") if el.get("class") == "manifold"]
    assert len(curve) == 1
    p = _points(curve[0])
    x, y = _cartesian_inverse(5.5 * 1.05)(p)
    res = [abs(implicit_cartesian_residual(CartesianState(a, b), B)) / 4**4 for a, b in zip(x, y)]
    assert max(res) < 1e-3
    assert np.allclose(p[0], p[-1], atol=1e-3)


def test_two_trajectories_two_polylines(run_dir):
    out, _ = run_dir
    root = ET.parse(out / "portrait_cartesian.svg").getroot()
    lines = [el for el in root.iter(SVG + "polyline") if el.get("class") == "trajectory"]
    assert [el.get("id") for el in lines] == ["trajectory-0", "trajectory-1"]
    assert len([el for el in root.iter(SVG + "circle") if el.get("class") == "start"]) == 2
    polar = ET.parse(out / "portrait_polar.svg").getroot()
    assert len([g for g in polar.iter(SVG + "g") if g.get("class") == "trajectory"]) == 2


def _distance_to_polyline(pts, curve):
    a, b = curve[:-1], curve[1:]
    d = b - a
    out = []
    for p in pts:
        s = np.clip(np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
        out.append(np.min(np.hypot(*(a + s[:, None] * d - p).T)))
    return np.array(out)


def test_converged_tail_within_line_width(run_dir):
    out, _ = run_dir
    root = ET.parse(out / "portrait_cartesian.svg").getroot()
    curve = _points(next(el for el in root.iter(SVG + "polyline") if el.get("class") == "manifold"))
    tail = _points(next(el for el in root.iter(SVG + "polyline") if el.get("id") == "trajectory-0"))[-200:]
    assert np.max(_distance_to_polyline(tail, curve)) <= MANIFOLD_STROKE / 2 + 0.5


def test_render_run_dir_regenerates_figures(run_dir):
    out, _ = run_dir
    before = (out / "portrait_polar.svg").read_text()
    (out / "portrait_polar.svg").unlink()
    paths = render_run_dir(out)
    assert set(paths) == {"portrait_polar", "portrait_cartesian", "control_vs_theta"}
    assert (out / "portrait_polar.svg").read_text() == before


def test_empty_render_is_valid_svg():
    root = ET.fromstring(render_phase_portrait([], B, "polar"))
    assert root.tag == SVG + "svg"
    with pytest.raises(ValueError):
        render_phase_portrait([], B, "spherical")
