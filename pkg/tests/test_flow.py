"""Validated integration: enclosures must contain high-precision solutions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import flow_float
from pcr3bp.flow import (DtPolicy, LohnerSet, MaxStepsError, StepSizeError, integrate, jacobi_width,
                         lohner_step, rough_enclosure, taylor_step)
from pcr3bp.interval import Interval, box
from pcr3bp.model import DEFAULT_PARAMS, SingularityError, section_lift, vector_field

R = float(DEFAULT_PARAMS.R1.mid)


def _far(x, y, d=0.1):
    return min(math.hypot(x - R, y), math.hypot(x + R, y)) > d


def _pt(z):
    return box(*[(v, v) for v in z])


states = st.tuples(st.floats(-1.2, 1.2), st.floats(-1, 1), st.floats(-0.5, 0.5), st.floats(-1, 1))


@settings(max_examples=40)
@given(states, st.floats(1e-4, 2e-2))
def test_rough_enclosure_satisfies_the_a_priori_condition(z, dt):
    if not _far(z[0], z[2], 0.2):
        return
    X = _pt(z)
    D = rough_enclosure(X, dt)
    # X + [0, dt] f(D) inside D
    step = X + Interval(0.0, dt) * vector_field(D)
    assert np.all(D.contains(step))


@settings(max_examples=25)
@given(states)
def test_single_step_contains_oracle(z):
    if not _far(z[0], z[2], 0.2):
        return
    res = lohner_step(LohnerSet.from_box(_pt(z)), 1e-2)
    ref = flow_float(list(z), 1e-2)
    assert np.all(res.end_set.hull()[0].contains(np.array(ref)))
    plain = taylor_step(_pt(z), 1e-2)
    assert np.all(plain.end_set.hull()[0].contains(np.array(ref)))
    # the tube covers the start and the end
    assert np.all(res.tube[0].contains(np.array(z)))
    assert np.all(res.tube[0].contains(np.array(ref)))


@settings(max_examples=10)
@given(st.floats(-1.0, 1.0), st.floats(-0.3, 0.3))
def test_integrate_contains_oracle_forward_and_backward(x, px):
    if not _far(x, 0.0, 0.15):
        return
    try:
        s = section_lift(Interval.point(x), Interval.point(px), "0.3", 1)
    except Exception:
        return
    z = [float(v) for v in s.mid]
    for d in (1, -1):
        try:
            ref = flow_float(z, d * 0.2)
        except ZeroDivisionError:
            return
        if not _far(ref[0], ref[2], 0.15):
            return
        t = integrate(s, t_end=0.2, direction=d, policy=DtPolicy(min_dt=1e-6))
        assert np.all(t.final.hull()[0].contains(np.array(ref)))
        assert t.time[0].contains(d * 0.2) or abs(float(t.time[0].mid) - d * 0.2) < 1e-14


def test_batches_are_independent():
    zs = np.array([[0.05, 0.0, 0.0, 1.2], [-0.2, 0.0, 0.0, 1.0], [1.1, 0.0, 0.0, 0.5]])
    B = Interval.point(zs)
    tb = integrate(B, t_end=0.3)
    for i in range(3):
        ti = integrate(B[i:i + 1], t_end=0.3)
        assert np.all(tb.final.hull()[i].contains(ti.final.hull()[0].mid))


def test_tube_pieces_cover_the_trajectory():
    z = [0.05, 0.0, 0.0, 1.2]
    t = integrate(_pt(z), t_end=0.3)
    pieces = t.pieces(0)
    t0, dts = t.times(0)
    assert len(pieces) == len(dts)
    for k in (0.05, 0.13, 0.29):
        ref = np.array(flow_float(z, k))
        inside = [np.all(pieces[j].contains(ref)) for j in range(len(dts))
                  if float(t0[j].lo) <= k <= float(t0[j].hi) + dts[j]]
        assert any(inside)


def test_stop_condition_ends_elements_early():
    z = np.array([[0.05, 0.0, 0.0, 1.2], [0.06, 0.0, 0.0, 1.2]])
    t = integrate(Interval.point(z), stop=lambda res, idx: res.end_set.hull()[:, 2].lo > 0.1)
    assert np.all(t.final.hull()[:, 2].lo > 0.1)


def test_jacobi_stays_tight_on_a_short_run():
    s = section_lift(Interval.from_mid_rad(0.04873, 1e-12), Interval.from_mid_rad(0.0, 1e-12), "0.3", 1)
    t = integrate(s, t_end=1.0, policy=DtPolicy(dt=1e-2, adaptive=False))
    assert np.all(jacobi_width(t.final) < 1e-6)
    assert len(t.steps) == 100


def test_errors_near_a_primary():
    z = [R + 0.0005, 0.0, 0.0, 1.0]
    with pytest.raises(SingularityError):
        lohner_step(LohnerSet.from_box(_pt(z)), 1e-3)
    with pytest.raises(StepSizeError):
        integrate(_pt([R + 0.01, 0.0, 0.0, 14.0]), t_end=1.0, policy=DtPolicy(dt=0.5, min_dt=0.4))


def test_step_budget():
    with pytest.raises(MaxStepsError):
        integrate(_pt([0.05, 0.0, 0.0, 1.2]), t_end=1.0, policy=DtPolicy(dt=1e-2, max_steps=5))
