import math

import pytest
from hypothesis import given, strategies as st

from terminal_vdp import (
    CartesianState,
    ControlBounds,
    PolarState,
    SystemParams,
    cartesian_to_polar,
    polar_to_cartesian,
    vector_field_polar,
)
from terminal_vdp.dynamics import wrap_angle
from terminal_vdp.errors import NonPositiveRadius, OriginUndefined

radii = st.floats(1e-3, 50.0)
angles = st.floats(-100.0, 100.0)
controls = st.floats(-20.0, 20.0)
mus = st.floats(-1.0, 1.0)


def test_vector_field_trivial_points():
    assert vector_field_polar(PolarState(1.0, 0.0), 0.0, 0.1) == pytest.approx((0.1, 1.0), abs=1e-15)
    dr, dth = vector_field_polar(PolarState(1.0, math.pi / 2), 0.0, 0.1)
    assert dr == pytest.approx(0.0, abs=1e-15)
    assert dth == pytest.approx(1.0, abs=1e-15)


def test_vector_field_hand_substitution():
    # r=2, theta=pi/4: cos^2 = sin^2 = 1/2, 1 - r^2 sin^2 = -1
    dr, dth = vector_field_polar(PolarState(2.0, math.pi / 4), 1.0, 0.1)
    assert dr == pytest.approx(-0.1 + math.sqrt(0.5), abs=1e-14)
    assert dth == pytest.approx(1.05 - math.sqrt(0.5) / 2, abs=1e-14)
    assert dr == pytest.approx(0.60711, abs=5e-6)
    assert dth == pytest.approx(0.69645, abs=5e-6)


def _cartesian_oracle(r, th, u, mu):
    # forced Van der Pol in the plane: x' = -y + mu x (1 - y^2) + u, y' = x
    x, y = r * math.cos(th), r * math.sin(th)
    xd = -y + mu * x * (1.0 - y * y) + u
    yd = x
    return (x * xd + y * yd) / r, (x * yd - y * xd) / (r * r)


@given(st.floats(0.05, 20.0), angles, controls, mus)
def test_vector_field_matches_cartesian_oscillator(r, th, u, mu):
    got = vector_field_polar(PolarState(r, th), u, mu)
    ref = _cartesian_oracle(r, th, u, mu)
    scale = 1.0 + abs(mu) * r**3 + abs(u) / r
    assert got == pytest.approx(ref, abs=1e-12 * scale)


@given(radii, angles, controls, mus)
def test_dtheta_is_one_when_sin_vanishes(r, k, u, mu):
    th = math.pi * round(k)
    _, dth = vector_field_polar(PolarState(r, th), u, mu)
    assert dth == pytest.approx(1.0, abs=1e-12 * (1 + abs(u) / r + abs(mu) * r * r))


@given(radii, angles)
def test_pure_rotation_without_damping_or_control(r, th):
    assert vector_field_polar(PolarState(r, th), 0.0, 0.0) == (0.0, 1.0)


@given(radii, angles, controls, mus)
def test_field_is_finite_above_guard(r, th, u, mu):
    assert all(math.isfinite(x) for x in vector_field_polar(PolarState(r, th), u, mu))


@pytest.mark.parametrize("r", [0.0, -1.0])
def test_non_positive_radius_rejected(r):
    with pytest.raises(NonPositiveRadius):
        vector_field_polar(PolarState(r, 0.0), 0.0, 0.1)


@pytest.mark.parametrize("state, expected", [
    (PolarState(4.0, 0.0), (4.0, 0.0)),
    (PolarState(5.5, math.pi / 2), (0.0, 5.5)),
    (PolarState(1.0, math.pi), (-1.0, 0.0)),
])
def test_polar_to_cartesian(state, expected):
    assert polar_to_cartesian(state) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p, expected", [
    (CartesianState(4.0, 0.0), (4.0, 0.0)),
    (CartesianState(0.0, -2.0), (2.0, 3 * math.pi / 2)),
    (CartesianState(1.0, 1.0), (math.sqrt(2.0), math.pi / 4)),
])
def test_cartesian_to_polar(p, expected):
    assert cartesian_to_polar(p) == pytest.approx(expected, abs=1e-15)


def test_origin_has_no_angle():
    with pytest.raises(OriginUndefined):
        cartesian_to_polar(CartesianState(0.0, 0.0))


@given(st.floats(1e-3, 1e3), angles)
def test_round_trip(r, th):
    back = cartesian_to_polar(polar_to_cartesian(PolarState(r, th)))
    assert 0.0 <= back.theta < 2 * math.pi
    assert back.r == pytest.approx(r, rel=1e-12)
    d = abs(back.theta - wrap_angle(th))
    assert min(d, 2 * math.pi - d) <= 1e-12


def test_bounds_and_params_validation():
    assert ControlBounds().unbounded
    assert ControlBounds(-2, 2).contains(-2, 2)
    with pytest.raises(ValueError):
        ControlBounds(2, -2)
    with pytest.raises(ValueError):
        ControlBounds(-math.inf, 2)
    with pytest.raises(ValueError):
        SystemParams(2.0)
