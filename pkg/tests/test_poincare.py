"""Half maps to the section y = 0, their inverses and the reversing symmetry."""

import numpy as np
import pytest

from pcr3bp.explorer import transit
from pcr3bp.poincare import (MapOptions, SectionPoint, full_map, half_map, inverse_half_map,
                             inverse_half_map_by_reflection, lift, reference_trajectory, tube_pieces)

H = "0.3"
OPTS = MapOptions(keep_tube=True)


def _points(xs, pxs=None, branch=1):
    xs = np.asarray(xs, dtype=float)
    pxs = np.zeros_like(xs) if pxs is None else np.asarray(pxs, dtype=float)
    return SectionPoint.box(xs, pxs, branch)


def test_half_map_agrees_with_float_transit():
    xs = [0.04873, -0.4294, 0.2712]
    r = half_map(_points(xs), "H1", H, OPTS)
    assert r.ok.all()
    img = r.image.hull()
    for k, x in enumerate(xs):
        s, t, _ = transit(x, 0.0, 0.3)
        assert abs(float(img[k, 0].mid) - s[0]) < 1e-8
        assert abs(float(img[k, 1].mid) - s[1]) < 1e-8
        assert r.crossing_time[k].lo > 0
        assert float(r.crossing_time[k].lo) - 1e-8 <= t <= float(r.crossing_time[k].hi) + 1e-8
    assert r.image.branch == -1


def test_branch_mismatch_is_rejected():
    with pytest.raises(ValueError):
        half_map(_points([0.05], branch=-1), "H1", H)
    with pytest.raises(ValueError):
        inverse_half_map(_points([0.05], branch=1), "H1", H)


def test_inverse_recovers_the_start():
    xs = np.array([0.04873, -0.4294])
    fwd = half_map(_points(xs), "H1", H, OPTS)
    back = inverse_half_map(fwd.image, "H1", H, OPTS)
    assert back.ok.all()
    hull = back.image.hull()
    assert np.all(hull[:, 0].contains(xs))
    assert np.all(hull[:, 1].contains(0.0))


def test_reflection_conjugacy_on_thin_boxes():
    """R H1 R = H2^-1 with R(x, p_x) = (x, -p_x): both enclosures must meet."""
    rng = np.random.default_rng(3)
    xs = rng.uniform(0.04, 0.06, 6)
    pxs = rng.uniform(-0.01, 0.01, 6)
    sp = SectionPoint.box(xs, pxs, 1)
    direct = inverse_half_map(sp, "H2", H, OPTS)
    via = inverse_half_map_by_reflection(sp, "H2", H, OPTS)
    # an element may fail transversality on one route; compare the rest
    both = direct.ok & via.ok
    assert both.sum() >= 4
    a, b = direct.image.hull(), via.image.hull()
    assert np.all(a[both].overlaps(b[both]))


def test_full_map_is_two_half_maps():
    sp = _points([0.04873])
    r1, r2 = full_map(sp, H, OPTS)
    assert r1.ok.all() and r2 is not None and r2.ok.all()
    direct = half_map(r1.image, "H2", H, OPTS)
    assert np.all(direct.image.hull().overlaps(r2.image.hull()))
    assert r2.image.branch == 1


def test_segment_images_contain_point_images():
    seg = SectionPoint.segment([[0.0482, 0.0]], [[0.0492, 0.0]], 1)
    rs = half_map(seg, "H1", H, OPTS)
    rp = half_map(_points([0.0482, 0.0487, 0.0492]), "H1", H, OPTS)
    hull = rs.image.hull()[0]
    for k in range(3):
        assert np.all(hull.contains(rp.image.hull()[k].mid))


def test_lift_is_on_the_energy_level():
    s, py = lift(_points([0.2712]), H)
    hull = s.hull()
    assert hull[0, 3].lo > 0 and hull[0, 2].contains(0.0)
    assert py[0].lo > 0


def test_tube_pieces_and_reference_trajectory():
    r = half_map(_points([0.04873]), "H1", H, OPTS)
    pieces, times = tube_pieces([r.tube])
    assert pieces.shape[1] == 4 and len(times) == pieces.shape[0]
    ref = reference_trajectory((0.04873, 0.0), 1, 0.3)
    pts = ref(times)
    inside = np.all(pieces.contains(pts), axis=-1)
    assert inside.mean() > 0.9


def test_failure_is_reported_per_element():
    # the second point starts outside the admissible region
    sp = SectionPoint.box(np.array([0.04873, 0.0]), np.array([0.0, 3.0]), 1)
    r = half_map(sp, "H1", H, OPTS)
    assert r.ok[0] and not r.ok[1]
    assert r.errors[1]
