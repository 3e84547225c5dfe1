"""Fast floating-point exploration (NOT RIGOROUS).

Used to choose probes and t-sets and to produce the data behind pictures:
scans of the half-map second component ``f(x)`` (and of ``P`` for period
two, ``g(x)``), orbit traces, zero-velocity curves and images of t-set
boundaries.  Nothing here is a proof; every file written by this module
starts with a ``# NON-RIGOROUS`` header line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import DEFAULT_PARAMS

HEADER = "# NON-RIGOROUS floating-point exploration data"


def _consts(params):
    return params.m1, params.m2, float(params.R1.mid), float(params.R2.mid), float(params.offset.mid)


def omega_float(x, y, params=DEFAULT_PARAMS):
    m1, m2, r1, r2, c = _consts(params)
    return 0.5 * (x * x + y * y) + m1 / np.hypot(x - r1, y) + m2 / np.hypot(x + r2, y) + c


def rhs_factory(params=DEFAULT_PARAMS):
    m1, m2, r1, r2, _ = _consts(params)

    def rhs(t, s):
        x, px, y, py = s
        q1 = ((x - r1) ** 2 + y * y) ** -1.5
        q2 = ((x + r2) ** 2 + y * y) ** -1.5
        ox = x - m1 * (x - r1) * q1 - m2 * (x + r2) * q2
        oy = y - m1 * y * q1 - m2 * y * q2
        return [px, ox - 2 * py, py, oy + 2 * px]

    return rhs


def py_float(x, px, h, branch=1, params=DEFAULT_PARAMS):
    rad = 2 * omega_float(x, 0.0, params) + h - px * px
    if rad <= 0:
        return math.nan
    return branch * math.sqrt(rad)


class ExplorerError(RuntimeError):
    pass


def transit(x, px, h, branch=1, direction=1, params=DEFAULT_PARAMS, max_time=20.0, dense=False,
            close=1e-3):
    """Next intersection with ``y = 0`` starting on the ``branch`` half of the section.

    Returns ``(state, time, solution)``; raises :class:`ExplorerError` when the
    trajectory does not return or passes within ``close`` of a primary.
    """
    py = py_float(x, px, h, branch, params)
    if math.isnan(py):
        raise ExplorerError("outside the admissible region")
    rhs = rhs_factory(params)
    _, _, r1, r2, _ = _consts(params)
    d = 1 if direction >= 0 else -1

    def cross(t, s):
        return s[2]

    cross.terminal = True

    def hit(t, s):
        return min(math.hypot(s[0] - r1, s[2]), math.hypot(s[0] + r2, s[2])) - close

    hit.terminal = True
    s0 = [x, px, 0.0, py]
    # a short first leg leaves the section before the event is armed
    eps = 1e-4
    first = solve_ivp(rhs, (0, d * eps), s0, method="DOP853", rtol=1e-12, atol=1e-13)
    res = solve_ivp(rhs, (d * eps, d * max_time), first.y[:, -1], method="DOP853", rtol=1e-11,
                    atol=1e-12, events=(cross, hit), dense_output=dense)
    if res.t_events[1].size:
        raise ExplorerError("close approach to a primary")
    if not res.t_events[0].size:
        raise ExplorerError("no return to the section")
    return res.y_events[0][0], float(res.t_events[0][0]), res if dense else None


def f_value(x, h, branch=1, params=DEFAULT_PARAMS):
    """Second component of the half map from ``(x, 0)``."""
    try:
        s, _, _ = transit(x, 0.0, h, branch, 1, params)
    except ExplorerError:
        return math.nan
    return float(s[1])


def g_value(x, h, branch=1, params=DEFAULT_PARAMS):
    """Second component of ``P`` (two half maps) from ``(x, 0)``."""
    try:
        s, _, _ = transit(x, 0.0, h, branch, 1, params)
        s2, _, _ = transit(s[0], s[1], h, -branch, 1, params)
    except ExplorerError:
        return math.nan
    return float(s2[1])


@dataclass
class SignChange:
    left: float
    right: float
    kind: str  # "root" or "pole"
    x: float  # refined location


def _refine(fun, a, b, fa, fb, iters=40):
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = fun(m)
        if math.isnan(fm):
            break
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return a, b, fa, fb


def scan(fun, xs):
    """Values of ``fun`` on ``xs`` and the sign changes between neighbours.

    Each sign change is refined by bisection; it is a root when the values
    at the final bracket shrink towards zero, a pole (the map is
    discontinuous, typically a collision orbit) when they stay large.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.array([fun(x) for x in xs])
    changes = []
    for k in range(len(xs) - 1):
        fa, fb = ys[k], ys[k + 1]
        if math.isnan(fa) or math.isnan(fb) or fa == 0 or (fa > 0) == (fb > 0):
            continue
        a, b, ra, rb = _refine(fun, xs[k], xs[k + 1], fa, fb)
        scale = max(abs(fa), abs(fb), 1e-12)
        kind = "root" if max(abs(ra), abs(rb)) < 1e-3 * scale + 1e-9 else "pole"
        changes.append(SignChange(xs[k], xs[k + 1], kind, 0.5 * (a + b)))
    return ys, changes


def f_scan(h, lo=-0.62, hi=0.62, n=400, branch=1, params=DEFAULT_PARAMS):
    xs = np.linspace(lo, hi, n + 1)[1:-1]
    ys, ch = scan(lambda x: f_value(x, h, branch, params), xs)
    return xs, ys, ch


def g_scan(h, lo, hi, n=200, branch=1, params=DEFAULT_PARAMS):
    xs = np.linspace(lo, hi, n + 1)[1:-1]
    ys, ch = scan(lambda x: g_value(x, h, branch, params), xs)
    return xs, ys, ch


def orbit_trace(x, h, branch=1, halves=2, samples=400, params=DEFAULT_PARAMS):
    """Points ``(t, x, p_x, y, p_y)`` along ``halves`` successive half transits."""
    rows = []
    px, b, t0 = 0.0, branch, 0.0
    for _ in range(halves):
        s, T, res = transit(x, px, h, b, 1, params, dense=True)
        ts = np.linspace(0, T, samples)
        ts[0] = 1e-4 if T > 1e-4 else ts[0]
        pts = res.sol(ts).T
        rows += [(t0 + t, *p) for t, p in zip(ts, pts)]
        t0 += T
        x, px, b = float(s[0]), float(s[1]), -b
    return np.array(rows)


def zero_velocity_curve(h, xlim=(-2.0, 2.0), ylim=(-2.0, 2.0), n=401, params=DEFAULT_PARAMS):
    """Points of ``2 Omega(x, y) + h = 0`` found on horizontal and vertical grid lines."""
    from scipy.optimize import brentq

    def F(x, y):
        return 2 * omega_float(x, y, params) + h

    pts = []
    xs = np.linspace(*xlim, n)
    ys = np.linspace(*ylim, n)
    for x in xs:
        v = F(x, ys)
        for k in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            pts.append((x, brentq(lambda y: F(x, y), ys[k], ys[k + 1])))
    for y in ys:
        v = F(xs, y)
        for k in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
            pts.append((brentq(lambda x: F(x, y), xs[k], xs[k + 1]), y))
    return np.array(pts)


def tset_outline(t, per_edge=10):
    """Closed polygon of the support, ``4 * per_edge + 1`` points."""
    c = np.array(t.center)
    u, v = np.array(t.u), np.array(t.v)
    corners = [c + u + v, c - u + v, c - u - v, c + u - v, c + u + v]
    pts = []
    for a, b in zip(corners, corners[1:]):
        for s in np.linspace(0, 1, per_edge, endpoint=False):
            pts.append(a + s * (b - a))
    pts.append(corners[0])
    return np.array(pts)


def tset_image(t, h, direction=1, per_edge=50, params=DEFAULT_PARAMS):
    """Images of boundary points under the half map (``direction=-1``: inverse)."""
    out = []
    for p in tset_outline(t, per_edge):
        try:
            s, _, _ = transit(p[0], p[1], h, t.branch, direction, params)
            out.append((p[0], p[1], s[0], s[1]))
        except ExplorerError:
            out.append((p[0], p[1], math.nan, math.nan))
    return np.array(out)


def write_series(path, columns, rows, comment=""):
    """Comma-separated table with the NON-RIGOROUS header."""
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join("nan" if (isinstance(v, float) and math.isnan(v)) else f"{v:.12g}" for v in r)
                     + "\n")


__all__ = [
    "ExplorerError", "HEADER", "SignChange", "f_scan", "f_value", "g_scan", "g_value", "omega_float",
    "orbit_trace", "py_float", "rhs_factory", "scan", "transit", "tset_image", "tset_outline",
    "write_series", "zero_velocity_curve",
]
