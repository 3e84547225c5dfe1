"""Existence proofs for symmetric periodic orbits.

A symmetric orbit crosses ``y = 0`` orthogonally (``p_x = 0``) twice.  With
``f(x)`` the ``p_x`` component of ``H1(x, 0)``, a strict sign change of
``f`` between the ends of a probe ``[x - w, x + w]`` on which ``H1`` is
defined and continuous gives a zero of ``f``, hence an orbit through the
probe (the second half of the orbit is the mirror image of the first one
under ``(x, y, t) -> (x, -y, -t)``).  Period-two orbits of ``P`` use
``g(x)``, the ``p_x`` component of ``P(x, 0)``, and additionally need
``P`` of the probe to miss the probe so that no fixed point is counted.

Results assert existence of at least one orbit in the probe, never
uniqueness.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .flow import DtPolicy
from .interval import Interval
from .model import DEFAULT_PARAMS, equilibria_and_h0
from .poincare import MapOptions, SectionPoint, full_map, half_map, tube_pieces

FAMILIES = ("S1", "S2", "L", "D1", "D2", "U1", "U2")
PERIOD_TWO = ("D1", "D2")

# probe centres (energy -> family -> x), kept as decimal strings
PROBE_TABLE = {
    "0": {"S1": "0.3158", "S2": "-0.4399"},
    ".1": {"S1": "0.3028", "S2": "-0.4365", "L": "0.02697"},
    ".2": {"S1": "0.2883", "S2": "-0.4330", "L": "0.03894"},
    ".22": {"S1": "0.2851", "S2": "-0.4323", "L": "0.04102"},
    ".24": {"S1": "0.2818", "S2": "-0.4316", "L": "0.04303", "U1": "0.06963", "U2": "0.1043"},
    ".26": {"S1": "0.2784", "S2": "-0.4309", "L": "0.04497", "D1": "0.04423", "D2": "0.04456",
            "U1": "0.06737", "U2": "0.1205"},
    ".28": {"S1": "0.2749", "S2": "-0.4301", "L": "0.04687", "D1": "0.04600", "D2": "0.04651",
            "U1": "0.06689", "U2": "0.1343"},
    ".3": {"S1": "0.2712", "S2": "-0.4294", "L": "0.04873", "D1": "0.04775", "D2": "0.0484",
           "U1": "0.06712", "U2": "0.1470"},
    ".4": {"S1": "0.2443", "S2": "-0.4257", "L": "0.05751", "D1": "0.05615", "D2": "0.05730",
           "U1": "0.07199", "U2": "0.2085"},
    ".5": {"S2": "-0.4218", "L": "0.06575", "D1": "0.06412", "D2": "0.06550", "U1": "0.07870"},
    ".6": {"S2": "-0.4178", "L": "0.07369", "D1": "0.07185", "D2": "0.07345", "U1": "0.08595"},
    ".8": {"S2": "-0.4093", "L": "0.08922", "D1": "0.08716"},
}

# expected sense of rotation (center, verdict) in this package's labels:
# P1 sits at x = +R1, P2 at x = -R2
WINDING = {"S1": ("P1", "direct"), "S2": ("P2", "retrograde"), "L": ("L1", "retrograde"),
           "U1": ("P1", "direct"), "U2": ("P1", "direct")}


def table_key(h):
    """Row key of ``PROBE_TABLE`` for an energy given as float or string."""
    f = Fraction(str(h))
    for k in PROBE_TABLE:
        if Fraction(k) == f:
            return k
    raise KeyError(f"no probe table row for h = {h}")


@dataclass(frozen=True)
class OrbitClaim:
    family: str
    h: str  # decimal string, kept exact
    x_center: str
    half_width: str = "5e-4"
    branch: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")

    @classmethod
    def from_table(cls, h, family, half_width="5e-4"):
        key = table_key(h)
        row = PROBE_TABLE[key]
        if family not in row:
            raise KeyError(f"the probe table has no {family} entry at h = {key}")
        return cls(family, key, row[family], half_width)

    @property
    def endpoints(self):
        """Probe ends as the floats nearest to the exact decimal values."""
        x, w = Fraction(self.x_center), Fraction(self.half_width)
        return float(x - w), float(x + w)

    def check(self, params=DEFAULT_PARAMS):
        a, b = self.endpoints
        for p in (float(params.R1.mid), -float(params.R2.mid)):
            if a <= p <= b:
                raise ValueError("the probe contains a primary")


@dataclass
class ProofReport:
    claim: OrbitClaim
    verdict: bool
    status: str  # "true", "false" or "inconclusive"
    left_value: Interval | None = None  # p_x component of the image at x - w
    right_value: Interval | None = None
    domain_ok: bool = False
    domain_pieces: int = 0
    separation_ok: bool | None = None
    winding: str | None = None
    winding_center: str | None = None
    single_crossing: bool = False
    crossing_time: Interval | None = None
    runtime: float = 0.0
    parameters: dict = field(default_factory=dict)
    message: str = ""
    tubes: list = field(default_factory=list, repr=False)
    tube_elements: list = field(default_factory=list, repr=False)

    def line(self, timing=True):
        c = self.claim

        def fmt(v):
            if v is None:
                return "n/a"
            return f"[{float(v.lo):+.3e},{float(v.hi):+.3e}]"

        wind = f"{self.winding}@{self.winding_center}" if self.winding else "n/a"
        sep = "n/a" if self.separation_ok is None else ("ok" if self.separation_ok else "FAIL")
        fields = [f"family={c.family}", f"h={c.h}", f"x={c.x_center}", f"w={c.half_width}",
                  f"status={self.status}", f"f_left={fmt(self.left_value)}",
                  f"f_right={fmt(self.right_value)}", f"domain={'ok' if self.domain_ok else 'FAIL'}",
                  f"separation={sep}", f"winding={wind}", f"dt={self.parameters.get('dt')}",
                  f"order={self.parameters.get('order')}"]
        if timing:
            fields.append(f"time={self.runtime:.1f}s")
        if self.message:
            fields.append(f"note={self.message}")
        return " ".join(fields)


def default_options(dt=1e-2, order=12, params=DEFAULT_PARAMS, adaptive=True):
    """Map options for orbit proofs; small fixed steps need a larger step budget."""
    steps = max(20000, int(40.0 / dt))
    policy = DtPolicy(dt=dt, min_dt=min(5e-4, dt / 4), adaptive=adaptive, max_steps=steps)
    return MapOptions(order=order, policy=policy, params=params)


def _strict_sign(v):
    return 1 if v.lo > 0 else (-1 if v.hi < 0 else 0)


def _segments(a, b, n, branch):
    """The float segment [a, b] x {0} cut into n affine pieces."""
    cuts = np.linspace(a, b, n + 1)
    cuts[0], cuts[-1] = a, b
    lo = np.stack([cuts[:-1], np.zeros(n)], -1)
    hi = np.stack([cuts[1:], np.zeros(n)], -1)
    return SectionPoint.segment(lo, hi, branch)


def _domain(claim, h, opts, mapper, n=8, max_pieces=512):
    """Certify the map on the whole probe by transiting it in pieces.

    Failed pieces are halved.  Returns ``(ok, pieces used, results)`` with
    ``results`` a list of ``(bounds, map results, accepted mask)``.
    """
    a, b = claim.endpoints
    cuts = np.linspace(a, b, n + 1)
    cuts[0], cuts[-1] = a, b
    bounds = list(zip(cuts[:-1], cuts[1:]))
    results = []
    used = len(bounds)
    while bounds:
        lo = np.array([[p, 0.0] for p, _ in bounds])
        hi = np.array([[q, 0.0] for _, q in bounds])
        sp = SectionPoint.segment(lo, hi, claim.branch)
        res = mapper(sp, h, opts)
        if res[-1] is None:
            # P stops after a failed first half; keep the pieces that made it
            ok = np.zeros(sp.size, dtype=bool)
            good = np.nonzero(res[0].ok)[0]
            if good.size:
                sub = mapper(sp.take(good), h, opts)
                if sub[-1] is not None:
                    bd = [bounds[i] for i in good]
                    results.append((bd, sub, sub[-1].ok.copy()))
                    ok[good] = sub[-1].ok
        else:
            ok = res[-1].ok.copy()
            results.append((bounds, res, ok))
        bad = [bd for bd, k in zip(bounds, ok) if not k]
        if not bad:
            return True, used, results
        if used + len(bad) > max_pieces:
            return False, used, results
        used += len(bad)
        bounds = []
        for p, q in bad:
            m = 0.5 * (p + q)
            bounds += [(p, m), (m, q)]
    return True, used, results


def _h1(sp, h, opts):
    return (half_map(sp, "H1", h, opts),)


def _p(sp, h, opts):
    r1, r2 = full_map(sp, h, opts)
    return (r1, r2)


def _prove(claim, opts, period_two, center=None, pieces=8, max_pieces=512):
    t0 = time.time()
    claim.check(opts.params)
    h = claim.h
    a, b = claim.endpoints
    mapper = _p if period_two else _h1
    ends = SectionPoint.box(np.array([a, b]), np.zeros(2), claim.branch)
    res = mapper(ends, h, replace(opts, keep_tube=False))
    last = res[-1]
    params = {"dt": opts.policy.dt, "order": opts.order, "adaptive": opts.policy.adaptive}
    rep = ProofReport(claim, False, "inconclusive", parameters=params)
    if last is None or not last.ok.all():
        errs = [e for r in res if r is not None for e in r.errors if e]
        rep.message = "endpoint transit failed: " + (errs[0] if errs else "unknown")
        rep.runtime = time.time() - t0
        return rep
    px = last.image.px
    rep.left_value, rep.right_value = px[0], px[1]
    sl, sr = _strict_sign(px[0]), _strict_sign(px[1])
    signs_ok = sl != 0 and sr != 0 and sl != sr
    ok, used, results = _domain(claim, h, opts, mapper, pieces, max_pieces)
    rep.domain_ok = ok
    rep.domain_pieces = used
    rep.single_crossing = ok
    # tubes and crossing times of the accepted pieces
    times = []
    for bounds, rr, mask in results:
        for r in rr:
            if r is not None and r.tube is not None:
                rep.tubes.append(r.tube)
                rep.tube_elements.append(np.nonzero(mask)[0])
        times.append(sum_times(rr, mask))
    times = [t for t in times if t is not None]
    if times:
        rep.crossing_time = Interval(min(float(t.lo) for t in times), max(float(t.hi) for t in times))
    if period_two and ok:
        rep.separation_ok = _separated(results, a, b)
    if not signs_ok:
        if sl != 0 and sr != 0:
            rep.status = "false"
            rep.message = "same sign at both probe ends"
        else:
            rep.message = "a sign enclosure contains zero (try a smaller dt or higher order)"
    elif not ok:
        rep.message = "map not certified on the whole probe"
    elif period_two and not rep.separation_ok:
        rep.message = "fixed point not excluded (image of the probe meets the probe)"
    else:
        rep.status = "true"
        rep.verdict = True
    if rep.verdict and center is not None:
        rep.winding_center = center
        rep.winding = classify_winding(rep, center, opts.params)
    rep.runtime = time.time() - t0
    return rep


def sum_times(rr, mask):
    """Hull of total transit times over accepted pieces (None if none)."""
    total = None
    for r in rr:
        if r is None:
            return None
        t = r.crossing_time[mask] if np.any(mask) else None
        if t is None:
            return None
        t = Interval(float(t.lo.min()), float(t.hi.max()))
        total = t if total is None else total + t
    return total


def _separated(results, a, b):
    """Every piece's P-image misses the probe segment [a, b] x {0}."""
    for bounds, rr, mask in results:
        img = rr[-1].image.hull()
        x, px = img[..., 0], img[..., 1]
        miss = (px.lo > 0) | (px.hi < 0) | (x.lo > b) | (x.hi < a)
        if not np.all(miss[mask]):
            return False
    return True


def prove_fixed_point(claim, opts=None, winding_center=None, pieces=8, max_pieces=512):
    """Zero of ``f`` in the probe: an orbit crossing the x axis orthogonally twice."""
    if claim.family in PERIOD_TWO:
        raise ValueError(f"{claim.family} orbits are period-two points; use prove_period_two")
    opts = opts or default_options()
    center = winding_center or WINDING.get(claim.family, (None,))[0]
    return _prove(claim, opts, False, center, pieces, max_pieces)


def prove_period_two(claim, opts=None, pieces=256, max_pieces=1024):
    """Zero of ``g`` in the probe and ``P(probe)`` disjoint from the probe."""
    opts = opts or default_options()
    return _prove(claim, opts, True, None, pieces, max_pieces)


def prove(claim, opts=None):
    if claim.family in PERIOD_TWO:
        return prove_period_two(claim, opts)
    return prove_fixed_point(claim, opts)


def _center(name, params):
    if name == "P1":
        return params.R1
    if name == "P2":
        return -params.R2
    if name == "L1":
        eq, _ = equilibria_and_h0(params)
        return eq.L1[0]
    raise ValueError(f"unknown center {name!r}; expected P1, P2 or L1")


def angular_numerator(boxes, cx):
    """``(x - cx) p_y - y p_x`` over boxes ``(…, 4)``; positive is counter-clockwise."""
    return (boxes[..., 0] - cx) * boxes[..., 3] - boxes[..., 2] * boxes[..., 1]


def classify_winding(report, center, params=DEFAULT_PARAMS):
    """Sense of rotation about ``center`` along the proof tubes.

    The frame turns clockwise (Coriolis term ``-2 p_y`` in ``dp_x/dt``), so
    motion in the same sense (clockwise, negative numerator) is direct and
    counter-clockwise motion is retrograde.  The mirror half of a symmetric
    orbit has the same numerator sign, so the validated half suffices.
    """
    if not report.tubes:
        return "inconclusive"
    cx = _center(center, params)
    pieces, _ = tube_pieces(report.tubes, report.tube_elements)
    if pieces.shape[0] == 0:
        return "inconclusive"
    num = angular_numerator(pieces, cx)
    if np.all(num.lo > 0):
        return "retrograde"
    if np.all(num.hi < 0):
        return "direct"
    return "inconclusive"


def run_probe_table(rows=None, families=None, opts=None, log=None, half_width="5e-4"):
    """Proof reports for every populated cell of the selected rows."""
    keys = list(PROBE_TABLE) if rows is None else [table_key(h) for h in rows]
    out = []
    for k in keys:
        for fam in FAMILIES:
            if fam not in PROBE_TABLE[k] or (families and fam not in families):
                continue
            claim = OrbitClaim.from_table(k, fam, half_width)
            rep = prove(claim, opts)
            out.append(rep)
            if log:
                log(rep.line())
    return out


def no_orbit_window(x_lo, x_hi, h, opts=None, branch=1, pieces=16):
    """True when ``f`` is certainly nonzero on ``[x_lo, x_hi]``: no orthogonal crossing there."""
    opts = opts or default_options()
    sp = _segments(x_lo, x_hi, pieces, branch)
    r = half_map(sp, "H1", h, replace(opts, keep_tube=False))
    if not r.ok.all():
        return False
    px = r.image.px
    return bool(np.all(px.lo > 0) or np.all(px.hi < 0))


__all__ = [
    "FAMILIES", "OrbitClaim", "PERIOD_TWO", "ProofReport", "PROBE_TABLE", "WINDING", "angular_numerator",
    "classify_winding", "default_options", "no_orbit_window", "prove", "prove_fixed_point",
    "prove_period_two", "run_probe_table", "table_key",
]
