"""Constants, equilibria and symmetries of the rotating-frame model."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracle import coefficients
from pcr3bp.explorer import omega_float, rhs_factory
from pcr3bp.interval import Interval, box
from pcr3bp.model import (DEFAULT_PARAMS, DomainError, ModelParams, SingularityError, equilibria_and_h0,
                          grad_omega, jacobi, omega, py_on_section, section_lift, taylor_coefficients,
                          vector_field)

P = DEFAULT_PARAMS


def test_primary_positions_and_offset():
    r = 2.0 ** (-2.0 / 3.0)
    assert P.R1.contains(r) and P.R2.contains(r)
    assert P.offset.contains(-(2.0 ** (5.0 / 3.0)))
    assert P.offset.hi < 0  # the offset is negative
    assert P.primaries[0] > 0 > P.primaries[1]


def test_omega_vanishes_at_origin():
    assert omega(box((0.0, 0.0), (0.0, 0.0)), P).contains_zero()


def test_equilibria_and_critical_energy():
    eq, h0 = equilibria_and_h0(P)
    assert abs(float(h0.mid) - 0.8623) < 5e-4
    assert h0.width < 1e-12
    assert eq.L1[0].contains_zero() and eq.L1[1].contains_zero()
    # L2, L3 are outside the primaries, symmetric for equal masses
    x2, x3 = float(eq.L2[0].mid), float(eq.L3[0].mid)
    assert abs(x2 + x3) < 1e-12 and abs(x2) > float(P.R1.hi)
    # gradient of Omega vanishes on every enclosure
    for L in eq.as_dict().values():
        g = grad_omega(L, P)
        assert g[0].contains_zero() and g[1].contains_zero()


def test_equilateral_points():
    eq, _ = equilibria_and_h0(P)
    d = float(P.R1.mid + P.R2.mid)
    for L in (eq.L4, eq.L5):
        x, y = float(L[0].mid), float(L[1].mid)
        assert math.hypot(x - float(P.R1.mid), y) == pytest.approx(d, rel=1e-12)
        assert math.hypot(x + float(P.R2.mid), y) == pytest.approx(d, rel=1e-12)


def test_unequal_masses_are_supported():
    p = ModelParams(1.0, 3.0)
    assert float(p.R1.mid) == pytest.approx(3.0 / 4.0 ** (2.0 / 3.0))
    eq, _ = equilibria_and_h0(p)
    g = grad_omega(eq.L1, p)
    assert g[0].contains_zero()


coord = st.floats(min_value=-1.5, max_value=1.5)


@given(coord, coord, coord, coord)
def test_vector_field_matches_float_version(x, px, y, py):
    if min(math.hypot(x - 0.63, y), math.hypot(x + 0.63, y)) < 0.05:
        return
    f = vector_field(box((x, x), (px, px), (y, y), (py, py)), P)
    ref = rhs_factory(P)(0.0, [x, px, y, py])
    for k in range(4):
        assert float(f[k].lo) - 1e-12 * (1 + abs(ref[k])) <= ref[k] <= float(f[k].hi) + 1e-12 * (1 + abs(ref[k]))
    w = omega(box((x, x), (y, y)), P)
    assert abs(float(w.mid) - omega_float(x, y, P)) < 1e-12 * (1 + abs(float(w.mid)))


@given(coord, coord, coord, coord)
def test_reversing_symmetry_of_the_field(x, px, y, py):
    """R(x, px, y, py) = (x, -px, -y, py) reverses time: f(R z) = -R f(z)."""
    if min(math.hypot(x - 0.63, y), math.hypot(x + 0.63, y)) < 0.05:
        return
    f = vector_field(box((x, x), (px, px), (y, y), (py, py)), P).mid
    g = vector_field(box((x, x), (-px, -px), (-y, -y), (py, py)), P).mid
    assert np.allclose(g, -np.array([f[0], -f[1], -f[2], f[3]]), atol=1e-12)


def test_section_lift_lands_on_the_energy_level():
    s = section_lift(Interval.point(0.04873), Interval.point(0.0), "0.3", 1, P)
    assert s[3].lo > 0
    assert jacobi(s, P).contains(0.3) or abs(float(jacobi(s, P).mid) - 0.3) < 1e-14
    with pytest.raises(DomainError):
        py_on_section(Interval.point(0.0), Interval.point(5.0), "0.3", 1, P)


def test_box_on_a_primary_is_rejected():
    r = float(P.R1.mid)
    with pytest.raises(SingularityError):
        omega(box((r - 0.01, r + 0.01), (-0.01, 0.01)), P)


def test_taylor_coefficients_match_high_precision_series():
    z = [0.3, 0.1, 0.05, 1.2]
    c = taylor_coefficients(box(*[(v, v) for v in z]), 8, P)
    ref = coefficients(z, 8)
    for j in range(9):
        for k in range(4):
            r = float(ref[k][j])
            assert float(c[j][k].lo) - 1e-15 * abs(r) <= r <= float(c[j][k].hi) + 1e-15 * abs(r)
