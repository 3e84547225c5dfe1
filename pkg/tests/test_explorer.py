"""Floating-point explorer: scans, traces, zero-velocity curves, output files."""

import math

import numpy as np
import pytest

from pcr3bp.explorer import (HEADER, ExplorerError, f_scan, f_value, omega_float, orbit_trace, py_float,
                             scan, transit, tset_image, write_series, zero_velocity_curve)
from pcr3bp.model import omega
from pcr3bp.tsets import load_catalog


def test_f_scan_finds_the_three_families_at_h_01():
    xs, ys, ch = f_scan(0.1)
    assert len(ch) == 3 and all(c.kind == "root" for c in ch)
    for c, x in zip(ch, (-0.4365, 0.02697, 0.3028)):
        assert abs(c.x - x) < 5e-4


def test_scan_tells_roots_from_poles():
    _, ch = scan(lambda x: x - 0.3, np.linspace(0, 1, 11))
    assert [c.kind for c in ch] == ["root"] and abs(ch[0].x - 0.3) < 1e-9
    _, ch = scan(lambda x: 1.0 / (x - 0.5501), np.linspace(0, 1, 11))
    assert [c.kind for c in ch] == ["pole"]


def test_omega_float_matches_interval_version():
    for x, y in [(0.1, 0.2), (-0.9, 0.05), (1.4, -0.3)]:
        assert omega([x, y]).contains(omega_float(x, y))


def test_outside_admissible_region():
    assert math.isnan(py_float(2.0, 0.0, -3.0))
    with pytest.raises(ExplorerError):
        transit(2.0, 0.0, -3.0)


def test_l_orbit_closes_after_two_halves():
    from pcr3bp.explorer import _refine

    a, b, _, _ = _refine(lambda z: f_value(z, 0.1), 0.0262, 0.0278, f_value(0.0262, 0.1), f_value(0.0278, 0.1))
    x = 0.5 * (a + b)
    tr = orbit_trace(x, 0.1)
    assert tr.shape[1] == 5
    end = tr[-1]
    assert abs(end[3]) < 1e-8  # back on y = 0
    assert abs(end[1] - x) < 1e-6 and abs(end[2]) < 1e-6


def test_zero_velocity_curve_pinches_at_origin_for_h0():
    pts = zero_velocity_curve(0.0, n=201)
    assert np.min(np.hypot(pts[:, 0], pts[:, 1])) < 0.03
    vals = 2 * omega_float(pts[:, 0], pts[:, 1]) + 0.0
    assert np.max(np.abs(vals)) < 1e-8


def test_tset_image_rows():
    t = load_catalog()["K0"]
    img = tset_image(t, 0.3, per_edge=2)
    assert img.shape == (9, 4)
    assert np.all(np.isfinite(img))


def test_write_series(tmp_path):
    p = tmp_path / "s.csv"
    write_series(p, ["x", "y"], [(0.5, float("nan")), (1, 2.0)], comment="scan\nh=0.1")
    lines = p.read_text().splitlines()
    assert lines[0] == HEADER and "NON-RIGOROUS" in lines[0]
    assert lines[1:3] == ["# scan", "# h=0.1"]
    assert lines[3:] == ["x,y", "0.5,nan", "1,2"]
