"""Probe bookkeeping, sign-change proofs and winding classification."""

from fractions import Fraction

import numpy as np
import pytest

from pcr3bp.interval import Interval
from pcr3bp.model import DEFAULT_PARAMS
from pcr3bp.orbits import (PROBE_TABLE, OrbitClaim, angular_numerator, no_orbit_window, prove,
                           prove_fixed_point, table_key)


def test_table_keys():
    assert table_key(0.3) == ".3"
    assert table_key("0.30") == ".3"
    assert table_key(0) == "0"
    with pytest.raises(KeyError):
        table_key(0.35)
    assert sum(len(r) for r in PROBE_TABLE.values()) == 57


def test_claims_from_table():
    c = OrbitClaim.from_table(0.5, "D1")
    assert (c.h, c.x_center, c.half_width) == (".5", "0.06412", "5e-4")
    a, b = c.endpoints
    assert a == float(Fraction("0.06362")) and b == float(Fraction("0.06462"))
    assert set(PROBE_TABLE[".8"]) == {"S2", "L", "D1"}
    with pytest.raises(KeyError):
        OrbitClaim.from_table(0.8, "U1")
    with pytest.raises(ValueError):
        OrbitClaim("Z9", ".3", "0.1")


def test_probe_around_a_primary_is_refused():
    r1 = float(DEFAULT_PARAMS.R1.mid)
    with pytest.raises(ValueError):
        OrbitClaim("S1", ".3", repr(r1), "1e-3").check()


def test_period_two_family_needs_the_period_two_prover():
    with pytest.raises(ValueError):
        prove_fixed_point(OrbitClaim.from_table(0.3, "D1"))


def test_angular_numerator_sign():
    # moving in +y while sitting to the right of the center: counter-clockwise
    box = Interval.point(np.array([[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, -1.0]]))
    num = angular_numerator(box, 0.5)
    assert num.lo[0] > 0 and num.hi[1] < 0


def test_s2_orbit_is_proven_and_retrograde_about_p2():
    rep = prove(OrbitClaim.from_table(0.3, "S2"))
    assert rep.verdict and rep.status == "true"
    assert rep.left_value.hi < 0 < rep.right_value.lo or rep.right_value.hi < 0 < rep.left_value.lo
    assert rep.domain_ok and rep.crossing_time.lo > 0
    assert (rep.winding, rep.winding_center) == ("retrograde", "P2")
    line = rep.line(timing=False)
    assert "status=true" in line and "time=" not in line
    assert "time=" in rep.line()


def test_probe_without_root_is_false():
    rep = prove_fixed_point(OrbitClaim("S1", ".3", "0.2"))
    assert not rep.verdict and rep.status == "false"
    assert rep.left_value.lo > 0 and rep.right_value.lo > 0


def test_no_orbit_window():
    assert no_orbit_window(0.199, 0.201, "0.3")
