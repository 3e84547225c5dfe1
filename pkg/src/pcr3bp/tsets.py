"""T-sets on the section plane and covering / backcovering verdicts.

A t-set is a parallelogram ``{c + s u + t v : |s|, |t| <= 1}`` in the
``(x, p_x)`` plane together with a choice of exit direction.  With exit
vector ``e`` (one of ``u``, ``v``) and cross vector ``w`` (the other one)
every point has coordinates ``(a, b)`` with ``z = c + a e + b w`` and

* left side   ``a >= 1``,  right side ``a <= -1``,
* top side    ``|a| <= 1, b >= 1``,  bottom side ``|a| <= 1, b <= -1``.

The boundary lines of the left and right sides pass through two vertices
each, so the left edge is ``a = 1`` and the right edge ``a = -1``.

The vectors ``u = l_x (cos alpha, sin alpha)`` and ``v = l_y (cos beta,
sin beta)`` are evaluated once in floating point and frozen; every
statement is about the parallelogram spanned by those floats.

Covering of ``N2`` by ``N1`` is checked on the boundary of ``N1`` only: the
images of short boundary segments (pushed through a validated map as affine
sets) are expressed in ``N2`` coordinates with interval arithmetic.  A
backcovering pushes the boundary of the target through the inverse map and
classifies against the top/bottom structure of the source.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources

import numpy as np

from .interval import Interval, IntervalError, as_interval, matvec
from .poincare import (MapOptions, SectionPoint, half_map, inverse_half_map, reference_trajectory,
                       tube_pieces, tube_welldefined_check)


class TSetError(ValueError):
    """Malformed t-set (degenerate parallelogram, unknown exit axis...)."""


@dataclass(frozen=True)
class TSet:
    name: str
    center: tuple  # (x, p_x)
    half_lengths: tuple  # (l_x, l_y)
    edge_angles: tuple  # (alpha, beta), radians
    branch: int = 1  # sign of p_y on the section
    exit_axis: str = "u"  # which edge vector points to the left edge
    weights: tuple | None = None  # metric weights for the tube check

    def __post_init__(self):
        if self.exit_axis not in ("u", "v"):
            raise TSetError(f"{self.name}: exit axis must be 'u' or 'v'")
        if self.branch not in (1, -1):
            raise TSetError(f"{self.name}: branch must be +1 or -1")
        u, v = self.u, self.v
        if abs(u[0] * v[1] - u[1] * v[0]) <= 1e-12 * math.hypot(*u) * math.hypot(*v):
            raise TSetError(f"{self.name}: edge angles are parallel")

    @property
    def u(self):
        lx, a = self.half_lengths[0], self.edge_angles[0]
        return (lx * math.cos(a), lx * math.sin(a))

    @property
    def v(self):
        ly, b = self.half_lengths[1], self.edge_angles[1]
        return (ly * math.cos(b), ly * math.sin(b))

    @property
    def exit_vector(self):
        return self.u if self.exit_axis == "u" else self.v

    @property
    def cross_vector(self):
        return self.v if self.exit_axis == "u" else self.u

    def corners(self):
        """Vertices ``c ± u ± v`` as Interval boxes, counter-clockwise from ``c + u + v``."""
        c = Interval.point(np.array(self.center, dtype=float))
        u = Interval.point(np.array(self.u))
        v = Interval.point(np.array(self.v))
        return [c + u + v, c - u + v, c - u - v, c + u - v]

    def reflect(self):
        """Mirror image under ``(x, p_x) -> (x, -p_x)``.

        The new left/right sides are the images of the old top/bottom
        sides, so the exit direction switches to the other edge vector.
        """
        x, px = self.center
        name = self.name[:-1] if self.name.endswith("~") else self.name + "~"
        return TSet(name, (x, -px), self.half_lengths, (-self.edge_angles[0], -self.edge_angles[1]),
                    self.branch, "v" if self.exit_axis == "u" else "u", self.weights)

    def same_geometry(self, other, tol=0.0):
        """True when supports and left/right sides agree (up to ``tol``)."""
        def close(p, q):
            return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol

        if not close(self.center, other.center):
            return False
        e1, w1, e2, w2 = self.exit_vector, self.cross_vector, other.exit_vector, other.cross_vector
        same_exit = close(e1, e2) or close(e1, (-e2[0], -e2[1]))
        same_cross = close(w1, w2) or close(w1, (-w2[0], -w2[1]))
        return same_exit and same_cross

    def geometry(self):
        return Geometry(self)

    def boundary_segments(self, n):
        """Descriptors ``(edge, t_lo, t_hi)`` splitting each edge into ``n`` pieces.

        Edges are ``"left"`` (``a = 1``), ``"right"`` (``a = -1``), ``"top"``
        (``b = 1``) and ``"bottom"`` (``b = -1``); ``t`` runs over [-1, 1].
        """
        cuts = [Fraction(-1) + Fraction(2 * k, n) for k in range(n + 1)]
        return [(edge, cuts[k], cuts[k + 1]) for edge in EDGES for k in range(n)]

    def segment_sets(self, segments):
        """Affine section sets for boundary segment descriptors."""
        c = Interval.point(np.array(self.center, dtype=float))
        e = Interval.point(np.array(self.exit_vector))
        w = Interval.point(np.array(self.cross_vector))
        centers, gens = [], []
        for edge, t0, t1 in segments:
            mid = Interval.enclose((t0 + t1) / 2)
            rad = Interval.enclose((t1 - t0) / 2)
            if edge in ("left", "right"):
                base = c + e * (1.0 if edge == "left" else -1.0)
                centers.append(base + w * mid)
                gens.append(w * rad)
            else:
                base = c + w * (1.0 if edge == "top" else -1.0)
                centers.append(base + e * mid)
                gens.append(e * rad)
        n = len(segments)
        C = Interval._make(np.array([x.lo for x in centers]), np.array([x.hi for x in centers]))
        G = Interval._make(np.array([x.lo for x in gens]), np.array([x.hi for x in gens]))[..., None]
        param = Interval(-np.ones((n, 1)), np.ones((n, 1)))
        return SectionPoint.from_affine(C, G, Interval.zeros((n, 2)), param, self.branch)


EDGES = ("left", "right", "top", "bottom")


class Geometry:
    """Interval-safe classifiers for one t-set.

    Points are mapped to ``(a, b)`` coordinates (exit, cross) by the inverse
    of the 2x2 matrix ``[e w]`` evaluated in interval arithmetic.
    """

    def __init__(self, t):
        self.tset = t
        self.c = Interval.point(np.array(t.center, dtype=float))
        e = Interval.point(np.array(t.exit_vector))
        w = Interval.point(np.array(t.cross_vector))
        det = e[0] * w[1] - e[1] * w[0]
        if det.contains_zero():
            raise TSetError(f"{t.name}: degenerate parallelogram")
        # rows of the inverse matrix
        self.inv = Interval._make(
            np.array([[w.lo[1], -w.hi[0]], [-e.hi[1], e.lo[0]]]),
            np.array([[w.hi[1], -w.lo[0]], [-e.lo[1], e.hi[0]]])) / det

    def corners(self):
        return self.tset.corners()

    def coords(self, box):
        """``(a, b)`` enclosures for boxes ``(…, 2)``."""
        box = as_interval(box)
        d = box - self.c
        ab = matvec(self.inv, d)
        return ab[..., 0], ab[..., 1]

    def coords_affine(self, sp):
        """``(a, b)`` enclosures of affine section sets, keeping the parametrisation."""
        d = Interval.point(sp.center) - self.c
        A0 = matvec(self.inv, d)
        A1 = _matmul_const(self.inv, sp.gen)  # (B, 2, m)
        ab = A0 + matvec(A1, sp.param) + matvec(self.inv, sp.err)
        return ab[..., 0], ab[..., 1]

    # strict (interior) membership tests on coordinate enclosures

    @staticmethod
    def in_left(a, b):
        return a.lo > 1.0

    @staticmethod
    def in_right(a, b):
        return a.hi < -1.0

    @staticmethod
    def in_horizontal(a, b):
        """Interior of left side ∪ support ∪ right side: ``|a| > 1`` or ``|b| < 1``."""
        return (a.lo > 1.0) | (a.hi < -1.0) | ((b.lo > -1.0) & (b.hi < 1.0))

    @staticmethod
    def in_top(a, b):
        return (b.lo > 1.0) & (a.lo > -1.0) & (a.hi < 1.0)

    @staticmethod
    def in_bottom(a, b):
        return (b.hi < -1.0) & (a.lo > -1.0) & (a.hi < 1.0)

    @staticmethod
    def in_vertical(a, b):
        """Interior of top side ∪ support ∪ bottom side: ``|b| > 1`` or ``|a| < 1``."""
        return (b.lo > 1.0) | (b.hi < -1.0) | ((a.lo > -1.0) & (a.hi < 1.0))

    def classify(self, box):
        """Dictionary of strict memberships for boxes ``(…, 2)``."""
        a, b = self.coords(box)
        return {
            "left": self.in_left(a, b), "right": self.in_right(a, b),
            "horizontal": self.in_horizontal(a, b), "top": self.in_top(a, b),
            "bottom": self.in_bottom(a, b), "vertical": self.in_vertical(a, b),
            "support": (a.lo > -1) & (a.hi < 1) & (b.lo > -1) & (b.hi < 1),
        }


def _matmul_const(M, G):
    """Interval 2x2 matrix times a batch of point matrices ``(B, 2, m)``."""
    G = Interval.point(G)
    return Interval.sum(M[None, :, :, None] * G[:, None, :, :], axis=2)


# -- margins -----------------------------------------------------------------------

def horizontal_margin(a, b):
    """Clearance (in t-set units) from the complement of int(left ∪ support ∪ right)."""
    return np.maximum(np.maximum(a.lo - 1.0, -1.0 - a.hi), np.minimum(b.lo + 1.0, 1.0 - b.hi))


def vertical_margin(a, b):
    return np.maximum(np.maximum(b.lo - 1.0, -1.0 - b.hi), np.minimum(a.lo + 1.0, 1.0 - a.hi))


def top_margin(a, b):
    return np.minimum(b.lo - 1.0, np.minimum(a.lo + 1.0, 1.0 - a.hi))


def bottom_margin(a, b):
    return np.minimum(-1.0 - b.hi, np.minimum(a.lo + 1.0, 1.0 - a.hi))


# -- catalogue ----------------------------------------------------------------------


def _parse_float(tok):
    return float(tok)


def load_catalog(path=None):
    """Read a t-set catalog (``name x px lx ly alpha beta branch exit [a1 a2 a3 a4]``)."""
    if path is None:
        text = resources.files("pcr3bp").joinpath("data/tsets.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) not in (9, 13):
            raise TSetError(f"malformed catalog line: {line!r}")
        name = tok[0]
        x, px, lx, ly, al, be = map(_parse_float, tok[1:7])
        weights = tuple(map(float, tok[9:13])) if len(tok) == 13 else None
        out[name] = TSet(name, (x, px), (lx, ly), (al, be), int(tok[7]), tok[8], weights)
    # reflected sets are part of the alphabet
    for name in list(out):
        if name[0] == "N" and name not in ("N0", "N5"):
            r = out[name].reflect()
            out.setdefault(r.name, r)
    return out


@dataclass(frozen=True)
class CoveringClaim:
    source: str
    target: str
    map: str  # "H1", "H2" or "P"
    mode: str = "cover"  # or "backcover"

    def __post_init__(self):
        if self.map not in ("H1", "H2", "P"):
            raise ValueError(f"unknown map {self.map!r}")
        if self.mode not in ("cover", "backcover"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def parse(cls, text):
        """``"K0:H1:L3"`` (cover) or ``"M1:H2:N1:back"`` (backcover)."""
        parts = text.strip().split(":")
        if len(parts) == 3:
            return cls(parts[0], parts[2], parts[1].upper(), "cover")
        if len(parts) == 4 and parts[3].lower().startswith("back"):
            return cls(parts[0], parts[2], parts[1].upper(), "backcover")
        raise ValueError(f"cannot parse claim {text!r}; expected SRC:MAP:DST[:back]")

    def label(self):
        arrow = "<-" if self.mode == "backcover" else "->"
        return f"{self.source} {arrow}{self.map} {self.target}"

    def check_branches(self, catalog):
        for n in (self.source, self.target):
            if n not in catalog:
                raise KeyError(f"unknown t-set {n!r}")
        src, dst = catalog[self.source], catalog[self.target]
        want = {"H1": (1, -1), "H2": (-1, 1), "P": (1, 1)}[self.map]
        if (src.branch, dst.branch) != want:
            raise ValueError(f"{self.label()}: branches {src.branch:+d} -> {dst.branch:+d} "
                             f"do not fit {self.map}")


def load_relations(path=None):
    if path is None:
        text = resources.files("pcr3bp").joinpath("data/relations.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    claims = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            src, m, mode, dst = line.split()
            claims.append(CoveringClaim(src, dst, m, mode))
    return claims


# -- maps ---------------------------------------------------------------------------


@dataclass
class MapImage:
    image: SectionPoint
    ok: np.ndarray
    errors: list
    tubes: list  # validated tubes (empty when the map has none)


class ValidatedMaps:
    """Half maps, their inverses and ``P`` at a fixed energy."""

    needs_tube_check = True

    def __init__(self, h=0.3, options=None):
        self.h = h
        self.options = options or MapOptions()

    def _chain(self, sp, steps):
        ok = np.ones(sp.size, dtype=bool)
        errors = [None] * sp.size
        tubes = []
        cur = sp
        for which, inverse in steps:
            fn = inverse_half_map if inverse else half_map
            r = fn(cur, which, self.h, self.options)
            ok &= r.ok
            errors = [a or b for a, b in zip(errors, r.errors)]
            if r.tube is not None:
                tubes.append(r.tube)
            cur = r.image
        return MapImage(cur, ok, errors, tubes)

    def forward(self, which, sp):
        steps = [("H1", False), ("H2", False)] if which == "P" else [(which, False)]
        return self._chain(sp, steps)

    def inverse(self, which, sp):
        steps = [("H2", True), ("H1", True)] if which == "P" else [(which, True)]
        return self._chain(sp, steps)


class IdentityMaps:
    """Every map is the identity (and keeps the branch); for testing the geometry."""

    needs_tube_check = False

    def forward(self, which, sp):
        return MapImage(replace(sp, branch=-sp.branch if which != "P" else sp.branch),
                        np.ones(sp.size, dtype=bool), [None] * sp.size, [])

    inverse = forward


class AffineMaps(IdentityMaps):
    """``z -> A z + b`` with exact float data (rounding enclosed); for tests."""

    def __init__(self, A, b):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def _apply(self, sp, A, b):
        Ai = Interval.point(A)
        c = matvec(Ai, Interval.point(sp.center)) + Interval.point(b)
        g = Interval.sum(Ai[None, :, :, None] * Interval.point(sp.gen)[:, None, :, :], axis=2)
        e = matvec(Ai, sp.err)
        out = SectionPoint.from_affine(c, g, e, sp.param, sp.branch)
        return MapImage(out, np.ones(sp.size, dtype=bool), [None] * sp.size, [])

    def forward(self, which, sp):
        return self._apply(sp, self.A, self.b)

    def inverse(self, which, sp):
        Ainv = np.linalg.inv(self.A)
        # the inverse of a float matrix is not exact; only use with exactly invertible data
        if not np.array_equal(Ainv @ self.A, np.eye(2)):
            raise IntervalError("affine test map is not exactly invertible in floats")
        return self._apply(sp, Ainv, -Ainv @ self.b)


# -- verdicts -----------------------------------------------------------------------


@dataclass
class CoveringPolicy:
    segments: int = 200  # per edge, initial
    max_segments: int = 5000  # per edge, after adaptive splitting
    tube_check: bool = True
    weights: dict = field(default_factory=dict)  # t-set name -> metric weights
    batch: int = 400  # segments pushed through the map at once
    support_boxes: int = 8  # cells per side for the direct transit fallback (0 disables it)
    max_support_boxes: int = 4000


@dataclass
class CoveringVerdict:
    claim: CoveringClaim
    verdict: bool
    status: str  # "true", "false" or "inconclusive"
    segments: dict  # edge -> number of segments used
    margins: dict  # condition -> minimal clearance (t-set units)
    orientation: int = 0  # +1: left->left, -1: left->right (top/bottom for backcovers)
    tube: object = None  # TubeCheckReport or None
    failures: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    runtime: float = 0.0
    boundary_ok: bool = False

    def line(self, timing=True):
        m = " ".join(f"{k}={v:.3g}" for k, v in self.margins.items())
        tube = "n/a" if self.tube is None else ("ok" if self.tube.verdict else "FAIL")
        segs = sum(self.segments.values())
        method = "" if self.tube is None else f" tube_method={self.tube.method}"
        out = f"{self.claim.label():<16} {self.status:<12} segments={segs} {m} tube={tube}{method}"
        return out + (f" time={self.runtime:.1f}s" if timing else "")


def _edge_ok(mode, edge, orientation, a, b):
    """Strict edge condition for ``edge`` under ``orientation`` (+1 keeps names)."""
    if mode == "cover":
        want_left = (edge == "left") == (orientation > 0)
        return Geometry.in_left(a, b) if want_left else Geometry.in_right(a, b)
    want_top = (edge == "top") == (orientation > 0)
    return Geometry.in_top(a, b) if want_top else Geometry.in_bottom(a, b)


def _edge_margin(mode, edge, orientation, a, b):
    if mode == "cover":
        want_left = (edge == "left") == (orientation > 0)
        return a.lo - 1.0 if want_left else -1.0 - a.hi
    want_top = (edge == "top") == (orientation > 0)
    return top_margin(a, b) if want_top else bottom_margin(a, b)


def _certainly_violates(mode, edge, orientation, a, b):
    """True where the segment image is certainly outside the required region."""
    if mode == "cover":
        want_left = (edge == "left") == (orientation > 0)
        return (a.hi <= 1.0) if want_left else (a.lo >= -1.0)
    want_top = (edge == "top") == (orientation > 0)
    return (b.hi <= 1.0) if want_top else (b.lo >= -1.0)


def _boundary_violation(mode, a, b):
    """Image certainly on the top or bottom side (left or right side for backcovers)."""
    if mode == "cover":
        # {|a| <= 1 and |b| >= 1}
        return (a.lo >= -1.0) & (a.hi <= 1.0) & ((b.lo >= 1.0) | (b.hi <= -1.0))
    return (b.lo >= -1.0) & (b.hi <= 1.0) & ((a.lo >= 1.0) | (a.hi <= -1.0))


def _push(maps, claim, sp, batch):
    """Map segments through the forward or inverse map, in chunks."""
    results = []
    for a in range(0, sp.size, batch):
        part = sp.take(np.arange(a, min(sp.size, a + batch)))
        if claim.mode == "cover":
            results.append(maps.forward(claim.map, part))
        else:
            results.append(maps.inverse(claim.map, part))
    return results


def _merge(results):
    from .interval import concatenate

    img = SectionPoint(np.concatenate([r.image.center for r in results]),
                       np.concatenate([r.image.gen for r in results]),
                       concatenate([r.image.param for r in results]),
                       concatenate([r.image.err for r in results]), results[0].image.branch)
    ok = np.concatenate([r.ok for r in results])
    errors = sum((r.errors for r in results), [])
    return img, ok, errors


def _guess_orientation(mode, edges, a, b, ok):
    first = "left" if mode == "cover" else "top"
    coord = a if mode == "cover" else b
    sel = (edges == first) & ok
    if not np.any(sel):
        return 1
    return 1 if np.mean(coord.mid[sel]) > 0 else -1


def check_relation(claim, maps, catalog, policy=None, log=None):
    """Verdict for a cover or backcover claim, per the claim's ``mode``.

    Boundary segments whose images can not be classified are split in two
    and pushed again, up to ``policy.max_segments`` per edge.
    """
    policy = policy or CoveringPolicy()
    t_start = time.time()
    claim.check_branches(catalog)
    src, dst = catalog[claim.source], catalog[claim.target]
    if claim.mode == "cover":
        domain, judge = src, dst
        allowed, bmargin, named = Geometry.in_horizontal, horizontal_margin, ("left", "right")
    else:
        domain, judge = dst, src
        allowed, bmargin, named = Geometry.in_vertical, vertical_margin, ("top", "bottom")
    geom = judge.geometry()

    pending = domain.boundary_segments(policy.segments)
    counts = {e: policy.segments for e in EDGES}
    accepted = []  # (descriptor, a, b)
    violators = []  # named-edge images failing the guessed orientation for sure
    tubes, tube_elems = [], []
    failures = []
    status = None
    orientation = 0
    rounds = 0
    while pending:
        rounds += 1
        sp = domain.segment_sets(pending)
        results = _push(maps, claim, sp, policy.batch)
        img, ok, errors = _merge(results)
        a_all, b_all = geom.coords_affine(img)
        if orientation == 0:
            orientation = _guess_orientation(claim.mode, np.array([d[0] for d in pending]), a_all, b_all, ok)
        retry = []
        chunk_acc = [[] for _ in results]
        for k, desc in enumerate(pending):
            edge = desc[0]
            if not ok[k]:
                retry.append((desc, errors[k] or "map evaluation failed"))
                continue
            a, b = a_all[k], b_all[k]
            if _boundary_violation(claim.mode, a, b):
                failures.append((desc, "image certainly in a forbidden region"))
                violators.append((desc, a, b))
                status = "false"
                continue
            if edge in named:
                good = bool(_edge_ok(claim.mode, edge, orientation, a, b))
                if not good and _certainly_violates(claim.mode, edge, orientation, a, b):
                    violators.append((desc, a, b))
                    failures.append((desc, "edge image on the wrong side"))
                    continue
            else:
                good = bool(allowed(a, b))
            if good:
                accepted.append((desc, a, b))
                chunk_acc[k // policy.batch].append(k % policy.batch)
            else:
                retry.append((desc, "image not certified inside the allowed region"))
        for r, sel in zip(results, chunk_acc):
            if r.tubes and sel:
                for tb in r.tubes:
                    tubes.append(tb)
                    tube_elems.append(np.array(sel))
        if status == "false":
            break
        pending = []
        for desc, why in retry:
            edge, t0, t1 = desc
            if counts[edge] + 1 > policy.max_segments:
                failures.append((desc, why))
                status = "inconclusive"
                continue
            counts[edge] += 1
            mid = (t0 + t1) / 2
            pending += [(edge, t0, mid), (edge, mid, t1)]
        if status == "inconclusive":
            break
        if log:
            log(f"{claim.label()}: round {rounds}, {len(accepted)} accepted, {len(pending)} to refine")

    margins = {}
    seen = accepted + violators
    if seen:
        A = Interval._make(np.array([x[1].lo for x in seen]), np.array([x[1].hi for x in seen]))
        B = Interval._make(np.array([x[2].lo for x in seen]), np.array([x[2].hi for x in seen]))
        edge_of = np.array([x[0][0] for x in seen])
        margins["boundary"] = float(np.min(bmargin(A, B)))
        for e in named:
            sel = edge_of == e
            if np.any(sel):
                margins[e] = float(np.min(_edge_margin(claim.mode, e, orientation, A[sel], B[sel])))
    if violators and status is None:
        # false only if the other orientation is excluded as well
        other = any(np.any(_certainly_violates(claim.mode, e, -orientation, A[edge_of == e], B[edge_of == e]))
                    for e in named if np.any(edge_of == e))
        status = "false" if other else "inconclusive"
    if status is None:
        status = "true"

    boundary_ok = status == "true"
    tube_report = None
    if status == "true" and policy.tube_check and getattr(maps, "needs_tube_check", False):
        if claim.map == "P":
            failures.append((None, "tube check is only available for half maps"))
            status = "inconclusive"
        else:
            tube_report = _tube_check(claim, maps, domain, tubes, tube_elems, policy)
            if not tube_report.verdict:
                failures.append((None, "well-definedness on the support: " + tube_report.message))
                status = "inconclusive"
    opts = getattr(maps, "options", None)
    params = {}
    if opts is not None:
        params = {"order": opts.order, "dt": opts.policy.dt, "h": maps.h}
    return CoveringVerdict(claim, status == "true", status, counts, margins,
                           orientation if boundary_ok else 0, tube_report, failures[:20], params,
                           time.time() - t_start, boundary_ok)


def _support_hull(t):
    corners = t.corners()
    lo = np.min([c.lo for c in corners], axis=0)
    hi = np.max([c.hi for c in corners], axis=0)
    return Interval._make(lo, hi)


def _lift_box(box, h, branch, params):
    from .model import section_lift

    return section_lift(box[0], box[1], h, branch, params)


def _tube_check(claim, maps, domain, tubes, elems, policy):
    """Well-definedness of the map on the domain support.

    The reference-trajectory boxes are tried first; if they fail, the
    angular-sector boxes built from the tubes themselves.
    """
    from .interval import concatenate
    from .poincare import tube_sector_check

    opts = maps.options
    direction = 1 if claim.mode == "cover" else -1
    pieces, times = tube_pieces(tubes, elems)
    weights = policy.weights.get(domain.name) or domain.weights
    try:
        ref = reference_trajectory(domain.center, domain.branch, maps.h, direction, opts.params)
        rep = tube_welldefined_check(pieces, times, ref, weights, params=opts.params)
    except (IntervalError, ValueError):
        rep = None
    if rep is not None and rep.verdict:
        return rep
    # the lifted start support belongs to the first sector; the image region
    # needs no box: p_y != 0 on the image curve (certified crossing) and every
    # point with p_y = 0 on the section is joined to infinity by a vertical ray
    # of such points, so none lies inside the curve either
    try:
        start = _lift_box(_support_hull(domain), maps.h, domain.branch, opts.params)
    except IntervalError as e:
        return rep if rep is not None else _failed_report(str(e))
    allp = concatenate([pieces, start.reshape(1, 4)])
    sigma = domain.branch * direction
    sec = tube_sector_check(allp, sigma, params=opts.params)
    if sec.verdict:
        return sec
    if policy.support_boxes:
        sup = support_transit_check(domain, maps, direction, policy.support_boxes,
                                    policy.max_support_boxes)
        if sup.verdict:
            return sup
        sec.message += f"; support transit: {sup.message}"
    if rep is None:
        return sec
    rep.message += f"; sector boxes: {sec.message}"
    return rep


def support_transit_check(t, maps, direction=1, n=8, max_boxes=4000):
    """Certify the half map on the whole support by pushing a box cover of it.

    The support is split into ``n x n`` parallelogram cells (affine sets with
    two parameters); cells whose transit fails are split in four, up to
    ``max_boxes`` cells in total.
    """
    from .poincare import TubeCheckReport

    opts = replace(maps.options, keep_tube=False)
    which = ("H1" if t.branch > 0 else "H2") if direction > 0 else ("H2" if t.branch > 0 else "H1")
    fn = half_map if direction > 0 else inverse_half_map
    cells = [(Fraction(-1) + Fraction(2 * i, n), Fraction(-1) + Fraction(2 * (i + 1), n),
              Fraction(-1) + Fraction(2 * j, n), Fraction(-1) + Fraction(2 * (j + 1), n))
             for i in range(n) for j in range(n)]
    used = len(cells)
    times = []
    nan = Interval(np.nan, np.nan)
    msg = ""
    while cells:
        sp = _cell_sets(t, cells)
        res = fn(sp, which, maps.h, opts)
        times.append(res.crossing_time[res.ok])
        bad = [c for c, ok in zip(cells, res.ok) if not ok]
        if not bad:
            break
        if used + 3 * len(bad) > max_boxes:
            msg = f"{len(bad)} cell(s) fail after {used} cells: " + next(e for e in res.errors if e)
            break
        used += 3 * len(bad)
        cells = []
        for s0, s1, t0, t1 in bad:
            sm, tm = (s0 + s1) / 2, (t0 + t1) / 2
            cells += [(s0, sm, t0, tm), (sm, s1, t0, tm), (s0, sm, tm, t1), (sm, s1, tm, t1)]
    ok = msg == ""
    T = float(max(np.max(np.abs(np.concatenate([x.hi for x in times] + [x.lo for x in times])))
                  if times else np.inf, 0.0))
    return TubeCheckReport(nan, nan, used, (), ok, 0, 0, 0.0, T, msg, "support")


def _cell_sets(t, cells):
    c = Interval.point(np.array(t.center, dtype=float))
    u = Interval.point(np.array(t.u))
    v = Interval.point(np.array(t.v))
    centers, gens = [], []
    for s0, s1, t0, t1 in cells:
        sm, sr = Interval.enclose((s0 + s1) / 2), Interval.enclose((s1 - s0) / 2)
        tm, tr = Interval.enclose((t0 + t1) / 2), Interval.enclose((t1 - t0) / 2)
        centers.append(c + u * sm + v * tm)
        gens.append((u * sr, v * tr))
    n = len(cells)
    C = Interval._make(np.array([x.lo for x in centers]), np.array([x.hi for x in centers]))
    G = Interval._make(np.stack([np.stack([g[0].lo, g[1].lo], -1) for g in gens]),
                       np.stack([np.stack([g[0].hi, g[1].hi], -1) for g in gens]))
    param = Interval(-np.ones((n, 2)), np.ones((n, 2)))
    return SectionPoint.from_affine(C, G, Interval.zeros((n, 2)), param, t.branch)


def _failed_report(msg):
    from .poincare import TubeCheckReport

    nan = Interval(np.nan, np.nan)
    return TubeCheckReport(nan, nan, 0, (), False, message=msg)


def check_covering(claim, maps, catalog, policy=None, log=None):
    """Verdict for ``source ->map target``: side edges land beyond the target, the rest stay in its strip."""
    if claim.mode != "cover":
        claim = replace(claim, mode="cover")
    return check_relation(claim, maps, catalog, policy, log)


def check_backcovering(claim, maps, catalog, policy=None, log=None):
    """Verdict for ``source <-map target`` via the inverse map on the target boundary."""
    if claim.mode != "backcover":
        claim = replace(claim, mode="backcover")
    return check_relation(claim, maps, catalog, policy, log)


# -- symmetry and composition ----------------------------------------------------

_OTHER = {"H1": "H2", "H2": "H1", "P": "P"}


def reflected_claim(claim):
    """The relation implied by reflection symmetry.

    ``A ->f B`` gives ``reflect(B) <-g reflect(A)`` with ``g = R f^-1 R``;
    for the half maps ``R H1^-1 R = H2``.  Sets symmetric under reflection
    keep their names.
    """
    mode = "backcover" if claim.mode == "cover" else "cover"
    return CoveringClaim(_mirror_name(claim.target), _mirror_name(claim.source), _OTHER[claim.map], mode)


SYMMETRIC_SETS = ("N0", "N5", "K0", "K1", "K2", "K3", "M0", "M6", "L3", "L4")


def _mirror_name(name):
    if name in SYMMETRIC_SETS:
        return name
    return name[:-1] if name.endswith("~") else name + "~"


def derive_symmetric(verdicts, catalog):
    """Relations that follow from proven ones by reflection.

    Returns ``(claim, from_claim)`` pairs for every proven verdict whose
    source and target are reflection-symmetric sets.
    """
    out = []
    for v in verdicts:
        if not v.verdict:
            continue
        c = v.claim
        if c.source in SYMMETRIC_SETS and c.target in SYMMETRIC_SETS:
            if not all(catalog[n].same_geometry(catalog[n].reflect(), tol=1e-15)
                       for n in (c.source, c.target)):
                continue
            out.append((reflected_claim(c), c))
    return out


# chains of half-map relations giving edges of P (the auxiliary sets in between)
CHAINS = {
    ("N0", "N0"): [("N0", "M0", "H1", "cover"), ("M0", "N0", "H2", "backcover")],
    ("N0", "N1"): [("N0", "M1", "H1", "cover"), ("M1", "N1", "H2", "backcover")],
    ("N1", "N2"): [("N1", "M2", "H1", "cover"), ("M2", "N2", "H2", "backcover")],
    ("N2", "N3"): [("N2", "M3", "H1", "cover"), ("M3", "N3", "H2", "cover")],
    ("N3", "N4"): [("N3", "M4", "H1", "backcover"), ("M4", "N4", "H2", "cover")],
    ("N4", "N5"): [("N4", "M5", "H1", "backcover"), ("M5", "N5", "H2", "cover")],
    ("N5", "N5"): [("N5", "M6", "H1", "backcover"), ("M6", "N5", "H2", "cover")],
    ("K0", "K0"): [("K0", "L3", "H1", "cover"), ("L3", "K0", "H2", "backcover")],
    ("K0", "N3"): [("K0", "L3", "H1", "cover"), ("L3", "N3", "H2", "cover")],
    ("K1", "K2"): [("K1", "L1", "H1", "cover"), ("L1", "K2", "H2", "backcover")],
    ("K2", "N3"): [("K2", "L2", "H1", "cover"), ("L2", "N3", "H2", "cover")],
    ("K3", "K3"): [("K3", "L4", "H1", "backcover"), ("L4", "K3", "H2", "cover")],
    ("K3", "N3"): [("K3", "L5", "H1", "backcover"), ("L5", "N3", "H2", "cover")],
}


def compose_edges(proven):
    """Edges of P backed by proven half-map chains, plus their reflections.

    ``proven`` is a set of ``(source, target, map, mode)`` tuples.  Returns
    ``(edges, missing)`` where ``missing`` maps each unproven edge to the
    links it lacks.
    """
    edges, missing = [], {}
    for edge, chain in CHAINS.items():
        lacking = [link for link in chain if link not in proven]
        if lacking:
            missing[edge] = lacking
            continue
        edges.append(edge)
    mirrored = [(_mirror_name(b), _mirror_name(a)) for a, b in edges]
    for e in mirrored:
        if e not in edges:
            edges.append(e)
    for edge, lacking in list(missing.items()):
        m = (_mirror_name(edge[1]), _mirror_name(edge[0]))
        missing.setdefault(m, lacking)
    return edges, missing


@dataclass
class SuiteResult:
    verdicts: list
    derived: list  # (claim, from_claim)
    edges: list
    missing: dict

    def lines(self, timing=True):
        out = [v.line(timing) for v in self.verdicts]
        out += [f"{c.label():<16} derived from {f.label()} by reflection" for c, f in self.derived]
        out.append("edges: " + " ".join(f"{a}->{b}" for a, b in self.edges))
        for e, lack in self.missing.items():
            out.append(f"missing {e[0]}->{e[1]}: " + ", ".join(f"{s}{'->' if m == 'cover' else '<-'}{f}{t}"
                                                               for s, t, f, m in lack))
        return out


def run_relation_suite(claims, maps, catalog, policy=None, log=None, checkpoint=None):
    """Check a list of claims, derive the symmetric ones and compose P edges.

    ``checkpoint`` (optional dict-like) holds finished verdicts by label and
    is consulted before running a claim, so long runs can resume.
    """
    verdicts = []
    for c in claims:
        key = c.label()
        if checkpoint is not None and key in checkpoint:
            verdicts.append(checkpoint[key])
            continue
        v = check_relation(c, maps, catalog, policy, log)
        verdicts.append(v)
        if checkpoint is not None:
            checkpoint[key] = v
    derived = derive_symmetric(verdicts, catalog)
    proven = {(v.claim.source, v.claim.target, v.claim.map, v.claim.mode) for v in verdicts if v.verdict}
    proven |= {(c.source, c.target, c.map, c.mode) for c, _ in derived}
    edges, missing = compose_edges(proven)
    return SuiteResult(verdicts, derived, edges, missing)


__all__ = [
    "AffineMaps", "CHAINS", "CoveringClaim", "CoveringPolicy", "CoveringVerdict", "EDGES", "Geometry",
    "IdentityMaps", "MapImage", "SuiteResult", "TSet", "TSetError", "ValidatedMaps", "check_backcovering",
    "check_covering", "check_relation", "compose_edges", "derive_symmetric", "load_catalog",
    "load_relations", "reflected_claim", "run_relation_suite",
]
