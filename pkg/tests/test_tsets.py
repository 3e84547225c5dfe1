"""T-set geometry, covering verdicts on affine test maps, symmetry and composition."""

import math
from importlib import resources
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcr3bp.interval import Interval
from pcr3bp.tsets import (CHAINS, AffineMaps, CoveringClaim, CoveringPolicy, IdentityMaps, TSet,
                          TSetError, check_backcovering, check_covering, compose_edges,
                          derive_symmetric, load_catalog, load_relations, reflected_claim)

POLICY = CoveringPolicy(segments=8, max_segments=64)


def _square(name, branch):
    return TSet(name, (0.0, 0.0), (1.0, 1.0), (0.0, math.pi / 2), branch, "u")


SQUARES = {"A": _square("A", 1), "B": _square("B", -1)}


def test_catalog_contents():
    cat = load_catalog()
    # 22 listed sets plus reflections of N1..N4
    assert len(cat) == 26
    assert {"N1~", "N2~", "N3~", "N4~"} <= set(cat)
    k0 = cat["K0"]
    assert k0.center == (0.04873, 0.0)
    assert k0.half_lengths == (0.0002, 0.0002)
    assert k0.edge_angles == (1.818, -1.818)
    assert (k0.branch, k0.exit_axis) == (1, "v")
    l3 = cat["L3"]
    assert l3.center == (-0.04873, 0.0) and l3.branch == -1 and l3.exit_axis == "v"
    assert cat["N3~"].center == (0.08, -0.125)
    assert sum(t.branch for t in cat.values()) == 14 - 12


def test_relations_file():
    claims = load_relations()
    assert len(claims) == 21
    assert sum(c.mode == "backcover" for c in claims) == 6
    cat = load_catalog()
    for c in claims:
        c.check_branches(cat)


def test_bad_tsets_are_rejected():
    with pytest.raises(TSetError):
        TSet("X", (0, 0), (1, 1), (0.3, 0.3))
    with pytest.raises(TSetError):
        TSet("X", (0, 0), (1, 1), (0, 1), exit_axis="w")
    with pytest.raises(TSetError):
        TSet("X", (0, 0), (1, 1), (0, 1), branch=0)


def test_claim_parsing():
    c = CoveringClaim.parse("K0:h1:L3")
    assert c == CoveringClaim("K0", "L3", "H1", "cover")
    b = CoveringClaim.parse("M1:H2:N1:back")
    assert b.mode == "backcover" and b.label() == "M1 <-H2 N1"
    for bad in ("K0-H1-L3", "K0:H3:L3", "K0:H1:L3:sideways"):
        with pytest.raises(ValueError):
            CoveringClaim.parse(bad)
    with pytest.raises(ValueError):
        CoveringClaim("K0", "N3", "H1").check_branches(load_catalog())
    with pytest.raises(KeyError):
        CoveringClaim("K9", "L3", "H1").check_branches(load_catalog())


def test_classify_square():
    g = SQUARES["A"].geometry()
    pts = Interval.point(np.array([[1.5, 0.0], [-1.5, 0.2], [0.0, 1.5], [0.2, -1.5], [0.1, 0.1], [1.0, 0.0]]))
    c = g.classify(pts)
    assert list(c["left"]) == [True, False, False, False, False, False]
    assert list(c["right"]) == [False, True, False, False, False, False]
    assert list(c["top"]) == [False, False, True, False, False, False]
    assert list(c["bottom"]) == [False, False, False, True, False, False]
    assert list(c["support"]) == [False, False, False, False, True, False]
    # on the left edge: inside the open horizontal strip, outside the vertical one
    assert c["horizontal"][5] and not c["vertical"][5] and not c["left"][5]


@settings(max_examples=60)
@given(st.sampled_from(sorted(load_catalog())),
       st.floats(-0.95, 0.95), st.floats(-0.95, 0.95))
def test_coords_invert_the_parametrisation(name, a, b):
    t = load_catalog()[name]
    e, w = t.exit_vector, t.cross_vector
    p = np.array([t.center[0] + a * e[0] + b * w[0], t.center[1] + a * e[1] + b * w[1]])
    ga, gb = t.geometry().coords(Interval.point(p))
    assert abs(float(ga.mid) - a) < 1e-9 and abs(float(gb.mid) - b) < 1e-9
    assert t.geometry().classify(Interval.point(p))["support"]


@given(st.sampled_from(sorted(load_catalog())))
def test_reflect_is_an_involution(name):
    t = load_catalog()[name]
    r = t.reflect().reflect()
    assert r.name == t.name and r.exit_axis == t.exit_axis
    assert r.center == t.center and r.edge_angles == t.edge_angles


def test_symmetric_sets_match_their_reflection():
    cat = load_catalog()
    for n in ("N0", "N5", "K0", "K1", "K2", "K3", "M0", "M6", "L3", "L4"):
        assert cat[n].same_geometry(cat[n].reflect(), tol=1e-15), n
    assert not cat["N3"].same_geometry(cat["N3"].reflect(), tol=1e-6)


@pytest.mark.parametrize("A,orient", [([[3.0, 0.0], [0.0, 0.5]], 1), ([[-3.0, 0.0], [0.0, 0.5]], -1)])
def test_stretching_map_covers(A, orient):
    v = check_covering(CoveringClaim("A", "B", "H1"), AffineMaps(A, [0.0, 0.0]), SQUARES, POLICY)
    assert v.verdict and v.status == "true" and v.orientation == orient
    assert v.margins["left"] == pytest.approx(2.0, abs=1e-9)


def test_squeezing_map_does_not_cover():
    v = check_covering(CoveringClaim("A", "B", "H1"), AffineMaps([[0.5, 0.0], [0.0, 3.0]], [0.0, 0.0]),
                       SQUARES, POLICY)
    assert not v.verdict and v.status == "false"


def test_shifted_map_does_not_cover():
    v = check_covering(CoveringClaim("A", "B", "H1"), AffineMaps([[3.0, 0.0], [0.0, 0.5]], [0.0, 4.0]),
                       SQUARES, POLICY)
    assert v.status == "false"


def test_backcovering_by_inverse_map():
    maps = AffineMaps([[2.0, 0.0], [0.0, 0.5]], [0.0, 0.0])
    v = check_backcovering(CoveringClaim("A", "B", "H1"), maps, SQUARES, POLICY)
    assert v.verdict and v.claim.mode == "backcover"
    # preimage of the top edge: b = 2, |a| <= 1/2, so the a-clearance binds
    assert v.margins["top"] == pytest.approx(0.5, abs=1e-9)
    # a map squeezing the cross direction has no backcover
    w = check_backcovering(CoveringClaim("A", "B", "H1"), AffineMaps([[0.5, 0.0], [0.0, 2.0]], [0.0, 0.0]),
                           SQUARES, POLICY)
    assert not w.verdict


def test_identity_is_borderline():
    # images land exactly on the edges of the target: never strictly inside
    v = check_covering(CoveringClaim("A", "B", "H1"), IdentityMaps(), SQUARES, POLICY)
    assert not v.verdict


@given(st.sampled_from(load_relations()))
def test_reflected_claim_is_an_involution(c):
    r = reflected_claim(c)
    assert r.mode != c.mode and {r.map, c.map} == {"H1", "H2"}
    assert reflected_claim(r) == c


def test_symmetric_derivations_and_edges():
    cat = load_catalog()
    claims = load_relations()
    verdicts = [SimpleNamespace(claim=c, verdict=True) for c in claims]
    derived = derive_symmetric(verdicts, cat)
    labels = sorted(c.label() for c, _ in derived)
    assert labels == sorted(["M0 <-H2 N0", "L3 <-H2 K0", "N5 <-H1 M6", "K3 <-H1 L4"])
    proven = {(c.source, c.target, c.map, c.mode) for c in claims}
    proven |= {(c.source, c.target, c.map, c.mode) for c, _ in derived}
    edges, missing = compose_edges(proven)
    assert not missing
    text = resources.files("pcr3bp").joinpath("data/edges.txt").read_text()
    expected = [tuple(l.split()) for l in text.splitlines() if l.strip() and l[0] != "#"]
    assert sorted(edges) == sorted(expected) and len(edges) == 22


def test_missing_link_removes_edge_and_mirror():
    proven = {link for chain in CHAINS.values() for link in chain}
    proven.discard(("K0", "L3", "H1", "cover"))
    edges, missing = compose_edges(proven)
    assert ("K0", "K0") not in edges and ("K0", "N3") not in edges and ("N3~", "K0") not in edges
    assert ("N3~", "K0") in missing
    assert len(edges) == 19
