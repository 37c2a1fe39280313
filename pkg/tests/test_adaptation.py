import math

import numpy as np
import pytest

from terminal_vdp import (
    AdaptationConfig,
    AdaptationState,
    ChiParams,
    ControlBounds,
    ManifoldParams,
    PolarState,
    Region,
    SampleWindow,
    adjust_gain,
    identify_mu,
    miac_step,
    simulate,
    simulate_one,
    validate_scenario,
    worst_case_control,
)
from terminal_vdp.adaptation import SCALE_TOL, control_grid
from terminal_vdp.control import cancelled_u_raw
from terminal_vdp.dynamics import Box
from terminal_vdp.errors import AdmissibleSetViolation, DegenerateManifold, Infeasible, InsufficientExcitation

B = ManifoldParams(4.0, 1.5)
REGION = Region(0.5, 128)
A_FEAS = ChiParams(2.0, 3.0)
BOUNDS_FEAS = ControlBounds(-3.0, 6.5)


def _history(unbounded_reference, index=2, n=400):
    tr = simulate_one(unbounded_reference, index)
    return tr, SampleWindow(tr.t[-n:], tr.r[-n:], tr.theta[-n:], tr.u_applied[-n:])


def feasible_adaptive_config(n_ic=1):
    return {
        "initial_conditions": [{"r": 4.0 + k, "theta": 0.0} for k in range(n_ic)],
        "a_nominal": {"a1": 2.0, "a2": 3.0},
        "schedule": [
            {"t_start": 0.0, "b0": 4.0, "b1": 1.0, "mu": 0.05},
            {"t_start": 50.0, "b0": 4.0, "b1": 1.5, "mu": 0.05},
        ],
        "bounds": {"u_min": -3.0, "u_max": 6.5},
        "integrator": {"h": 0.005, "t_end": 100.0, "sample_every": 10},
        "adaptation": {"v_max": 0.5},
    }


# identification ---------------------------------------------------------------

def test_identify_mu_noiseless(unbounded_reference):
    _, w = _history(unbounded_reference)
    assert 0.099 <= identify_mu(w) <= 0.101


def test_identify_mu_undamped_free_rotation():
    t = np.linspace(0.0, 10.0, 500)
    w = SampleWindow(t, np.full_like(t, 3.0), t.copy(), np.zeros_like(t))
    assert identify_mu(w) == pytest.approx(0.0, abs=1e-12)


def test_identify_mu_needs_excitation():
    t = np.linspace(0.0, 0.01, 50)
    th = math.pi / 2 + t - 0.005
    w = SampleWindow(t, np.full_like(t, 4.0), th, np.zeros_like(t))
    with pytest.raises(InsufficientExcitation):
        identify_mu(w)
    with pytest.raises(InsufficientExcitation):
        identify_mu(SampleWindow(t[:2], t[:2] + 1, t[:2], t[:2]))


# worst-case control -------------------------------------------------------------

def test_worst_case_matches_brute_force():
    a, mu, vmax, n = ChiParams(0.5, 1.0), 0.1, 0.5, 64
    lo, hi = math.inf, -math.inf
    for th in np.linspace(0.0, 2 * math.pi, n, endpoint=False):
        for v in np.linspace(-vmax, vmax, n):
            r = B.b0 + B.b1 * math.sin(th) + v
            u = cancelled_u_raw(r, th, a.a1, a.a2, B.b0, B.b1, mu)
            lo, hi = min(lo, u), max(hi, u)
    got = worst_case_control(a, B, mu, Region(vmax, n))
    assert got == pytest.approx((lo, hi), abs=1e-12)


def test_worst_case_grows_with_band():
    prev = None
    for vmax in (0.1, 0.2, 0.3, 0.4, 0.5):
        lo, hi = worst_case_control(A_FEAS, B, 0.05, Region(vmax, 256))
        if prev is not None:
            assert lo <= prev[0] + 1e-3 and hi >= prev[1] - 1e-3
        prev = (lo, hi)


def test_grid_refinement_converges():
    coarse = worst_case_control(ChiParams(0.5, 1.0), B, 0.1, Region(0.5, 128))
    fine = worst_case_control(ChiParams(0.5, 1.0), B, 0.1, Region(0.5, 256))
    assert max(abs(coarse[0] - fine[0]), abs(coarse[1] - fine[1])) < 1e-3


def test_region_touching_singular_set_is_degenerate():
    with pytest.raises(DegenerateManifold):
        worst_case_control(A_FEAS, B, 0.1, Region(2.0))
    with pytest.raises(DegenerateManifold):
        worst_case_control(A_FEAS, ManifoldParams(4.0, 3.0), 0.1, REGION)


def test_control_is_affine_in_a1():
    base, slope = control_grid(3.0, B, 0.05, REGION)
    for a1 in (0.0, 0.7, 2.0):
        th, v = 1.3, 0.2
        r = B.b0 + B.b1 * math.sin(th) + v
        u = cancelled_u_raw(r, th, a1, 3.0, B.b0, B.b1, 0.05)
        u0 = cancelled_u_raw(r, th, 0.0, 3.0, B.b0, B.b1, 0.05)
        u1 = cancelled_u_raw(r, th, 1.0, 3.0, B.b0, B.b1, 0.05)
        assert u == pytest.approx(u0 + a1 * (u1 - u0), abs=1e-12)
    assert np.all(np.isfinite(base)) and np.all(np.isfinite(slope))


# gain adjustment --------------------------------------------------------------------

def test_adjust_unbounded_keeps_nominal():
    st = adjust_gain(A_FEAS, B, 0.05, ControlBounds(), REGION)
    assert st.delta_a == (0.0, 0.0) and st.scale == 1.0


def test_adjust_keeps_feasible_nominal():
    st = adjust_gain(A_FEAS, ManifoldParams(4.0, 1.0), 0.05, BOUNDS_FEAS, REGION)
    assert st.scale == 1.0 and st.a_current == A_FEAS


def test_adjust_bisection_postcondition():
    st = adjust_gain(A_FEAS, B, 0.05, BOUNDS_FEAS, REGION)
    assert 0.0 < st.scale < 1.0
    assert st.a_current.a2 == A_FEAS.a2
    assert st.a_current.a1 == pytest.approx(st.scale * A_FEAS.a1)
    lo, hi = worst_case_control(st.a_current, B, 0.05, REGION)
    assert BOUNDS_FEAS.contains(lo, hi)
    over = ChiParams((st.scale + SCALE_TOL) * A_FEAS.a1, A_FEAS.a2)
    assert not BOUNDS_FEAS.contains(*worst_case_control(over, B, 0.05, REGION))


def test_adjust_reports_infeasible():
    with pytest.raises(Infeasible):
        adjust_gain(ChiParams(0.5, 1.0), B, 0.1, ControlBounds(-2.0, 2.0), REGION)


def test_adjust_reports_admissible_set_violation():
    a_set = Box.from_dict({"a1": (1.9, 2.0), "a2": (0.1, 5.0)})
    with pytest.raises(AdmissibleSetViolation):
        adjust_gain(A_FEAS, B, 0.05, BOUNDS_FEAS, REGION, a_set)


# MIAC epoch ---------------------------------------------------------------------------

def test_miac_fixed_point_when_nominal_fits(unbounded_reference):
    tr, w = _history(unbounded_reference)
    cfg = AdaptationConfig()
    st = AdaptationState(A_FEAS)
    for k in range(3):
        st = miac_step(PolarState(tr.r[-1], tr.theta[-1]), w, (ManifoldParams(4.0, 1.0), 0.1),
                       st, cfg, ControlBounds(-6.0, 8.0), t=5.0 * k)
        assert st.a_current == A_FEAS
    assert [r.status for r in st.epoch_log] == ["adjusted"] * 3


def test_miac_skips_without_excitation():
    t = np.linspace(0.0, 0.01, 50)
    w = SampleWindow(t, np.full_like(t, 4.0), math.pi / 2 + t - 0.005, np.zeros_like(t))
    st = miac_step(PolarState(4.0, math.pi / 2), w, (B, 0.1), AdaptationState(A_FEAS),
                   AdaptationConfig(), BOUNDS_FEAS, t=5.0)
    assert st.a_current == A_FEAS
    assert st.epoch_log[-1].status == "skipped"


def test_miac_logs_infeasible_and_keeps_gain(unbounded_reference):
    tr, w = _history(unbounded_reference)
    st = miac_step(PolarState(tr.r[-1], tr.theta[-1]), w, (B, 0.1), AdaptationState(ChiParams(0.5, 1.0)),
                   AdaptationConfig(), ControlBounds(-2.0, 2.0), t=5.0)
    assert st.epoch_log[-1].status == "infeasible"
    assert st.a_current == ChiParams(0.5, 1.0)


def test_miac_noise_is_seeded(unbounded_reference):
    tr, w = _history(unbounded_reference)
    cfg = AdaptationConfig(sigma=0.01)
    args = (PolarState(tr.r[-1], tr.theta[-1]), w, (ManifoldParams(4.0, 1.0), 0.1), AdaptationState(A_FEAS),
            cfg, BOUNDS_FEAS, 5.0)
    r1 = miac_step(*args, rng=np.random.default_rng(3)).epoch_log[-1]
    r2 = miac_step(*args, rng=np.random.default_rng(3)).epoch_log[-1]
    assert r1 == r2 and r1.b_tilde != (4.0, 1.0)


# end to end ---------------------------------------------------------------------------

def test_adaptive_run_stays_inside_bounds_after_switch():
    for tr in simulate(validate_scenario(feasible_adaptive_config(n_ic=2))):
        assert tr.status == "ok"
        post = [e for e in tr.epochs if e.t > 50.0 and e.status == "adjusted"]
        first = post[0].t
        assert 0.0 < post[0].scale < 1.0
        assert all(BOUNDS_FEAS.contains(e.u_lo, e.u_hi) for e in post)
        assert not np.any(tr.clamped[tr.t > first])
        assert tr.a1[-1] == pytest.approx(post[-1].a1)
        assert abs(tr.v[-1]) < 1e-2
