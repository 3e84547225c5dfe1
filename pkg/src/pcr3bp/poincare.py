"""Validated half maps H1, H2 and the return map P on the section ``y = 0``.

H1 takes a point of the section with ``p_y > 0`` to the next intersection
with ``y = 0`` (where ``p_y < 0``); H2 does the opposite, and ``P = H2 ∘ H1``.

Sets on the section are affine: ``center + gen @ u + err`` with ``u`` in a
parameter box, so a whole boundary segment can be pushed through the map as
one object, and composition keeps the parametrisation.

The transit of a set is certified in three phases:

* first step: ``p_y`` has the sign of the branch on the rough enclosure, so
  ``y`` leaves zero monotonically;
* flight: every tube piece has ``y`` strictly on the flight side;
* crossing window ``[t, t + H]``: ``p_y`` has the returning sign on the rough
  enclosure (``y`` is monotone) and ``y`` is strictly on the other side at
  ``t + H``.  The crossing is then unique; a bisection in time brackets it
  and the image is obtained from the state at the middle of the bracket by a
  mean-value correction along the flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import (DEFAULT_FLOOR, DEFAULT_ORDER, DtPolicy, LohnerSet, StepExpansion, StepSizeError,
                   Tube, _store, lohner_step)
from .interval import Interval, IntervalError, as_interval, matvec, stack
from .model import DEFAULT_PARAMS, SingularityError, grad_omega, py_on_section, vector_field


class TransversalityError(IntervalError):
    """The flow is not certified transversal to the section at a crossing."""


class CrossingError(IntervalError):
    """The return to the section could not be isolated."""


@dataclass
class SectionPoint:
    """Batched affine sets ``center + gen @ u + err`` in the ``(x, p_x)`` plane.

    ``branch`` is the sign of ``p_y`` (``+1`` or ``-1``).
    """

    center: np.ndarray  # (B, 2)
    gen: np.ndarray  # (B, 2, m)
    param: Interval  # (B, m)
    err: Interval  # (B, 2)
    branch: int = 1

    @classmethod
    def box(cls, x, px, branch=1):
        """Boxes ``x × p_x`` (scalars or arrays of equal length)."""
        b = stack([as_interval(x), as_interval(px)], axis=-1)
        if b.ndim == 1:
            b = b.reshape(1, 2)
        c = b.mid
        n = c.shape[0]
        return cls(c, np.zeros((n, 2, 1)), Interval(-np.ones((n, 1)), np.ones((n, 1))), b - c, branch)

    @classmethod
    def segment(cls, a, b, branch=1):
        """Straight segments from ``a`` to ``b`` (arrays ``(B, 2)``), ``u`` in [-1, 1].

        The endpoints are rounded to floats; the stored set is the segment
        between the float endpoints, enlarged by the rounding of the midpoint.
        """
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        A, Bv = Interval.point(a), Interval.point(b)
        c = (A + Bv) * 0.5
        g = (Bv - A) * 0.5
        cm, gm = c.mid, g.mid
        n = a.shape[0]
        param = Interval(-np.ones((n, 1)), np.ones((n, 1)))
        err = (c - cm) + (g - gm) * Interval(-1.0, 1.0)
        return cls(cm, gm[..., None], param, err, branch)

    @classmethod
    def from_affine(cls, center, gen, err, param, branch):
        center = as_interval(center)
        gen = as_interval(gen)
        c = center.mid
        g = gen.mid
        err = as_interval(err) + (center - c) + matvec(gen - g, param)
        return cls(c, g, param, err, branch)

    @property
    def size(self):
        return self.center.shape[0]

    def hull(self):
        return matvec(self.gen, self.param) + self.err + self.center

    @property
    def x(self):
        return self.hull()[..., 0]

    @property
    def px(self):
        return self.hull()[..., 1]

    def take(self, idx):
        return SectionPoint(self.center[idx], self.gen[idx], self.param[idx], self.err[idx], self.branch)

    def with_param(self, param):
        return SectionPoint(self.center, self.gen, as_interval(param), self.err, self.branch)

    def reflect(self):
        """Image under ``(x, p_x) -> (x, -p_x)``; the branch is kept."""
        flip = np.array([1.0, -1.0])
        e = self.err
        err = Interval._make(np.stack([e.lo[..., 0], -e.hi[..., 1]], -1),
                             np.stack([e.hi[..., 0], -e.lo[..., 1]], -1))
        return SectionPoint(self.center * flip, self.gen * flip[:, None], self.param, err, self.branch)


@dataclass
class MapOptions:
    order: int = DEFAULT_ORDER
    policy: DtPolicy = field(default_factory=DtPolicy)
    floor: float = DEFAULT_FLOOR
    time_tol: float = 1e-6
    max_time: float = 20.0
    max_window: float = 0.25
    params: object = DEFAULT_PARAMS
    keep_tube: bool = True


@dataclass
class HalfMapResult:
    image: SectionPoint
    crossing_time: Interval  # (B,), signed elapsed time
    tube: Tube | None
    window: Interval  # (B, 4) hull of all crossing states
    ok: np.ndarray  # (B,) bool
    errors: list  # per element message or None

    def require(self):
        if not self.ok.all():
            bad = [e for e in self.errors if e]
            raise CrossingError(f"{int((~self.ok).sum())} set(s) failed: {bad[0]}")
        return self


def lift(sp, h, params=DEFAULT_PARAMS):
    """Lohner set in phase space over the section set ``sp`` at energy ``h``.

    ``p_y`` is linearised by the mean-value form over the hull, with
    ``grad p_y = (Omega_x / p_y, -p_x / p_y)``.
    """
    Z = sp.hull()
    x, px = Z[..., 0], Z[..., 1]
    py_hull = py_on_section(x, px, h, sp.branch, params)
    c = Interval.point(sp.center)
    py_c = py_on_section(c[..., 0], c[..., 1], h, sp.branch, params)
    gx = grad_omega(stack([x, Interval.zeros(x.shape)], axis=-1), params)[..., 0]
    dpy = stack([gx / py_hull, -(px / py_hull)], axis=-1)  # (B, 2)
    n, _, m = sp.gen.shape
    zero_m = Interval.zeros((n, m))
    gpy = matvec(Interval.point(np.swapaxes(sp.gen, -1, -2)), dpy)  # (B, m)
    gen4 = stack([Interval.point(sp.gen[:, 0, :]), Interval.point(sp.gen[:, 1, :]), zero_m, gpy], axis=1)
    epy = (dpy * sp.err).sum(axis=-1)
    err4 = stack([sp.err[..., 0], sp.err[..., 1], Interval.zeros((n,)), epy], axis=-1)
    center4 = stack([c[..., 0], c[..., 1], Interval.zeros((n,)), py_c], axis=-1)
    s = LohnerSet.from_affine(center4, gen4, err4, sp.param)
    # the linearised p_y can be wider than the direct enclosure; keep the better one
    return s, py_hull


def crossing_locate(y_range, H, sigma, tol=1e-6, max_iter=60):
    """Bracket the time where ``sigma * y`` changes from positive to negative.

    ``y_range(t)`` returns the enclosure of ``y`` over the set at times ``t``
    (arrays of shape (B,)).  At time 0 the set must be strictly on the
    ``sigma`` side and at time ``H`` strictly on the other one; ``y`` is
    assumed monotone on ``[0, H]`` (checked by the caller).  Returns
    ``(s_lo, s_hi)``: the set is on the ``sigma`` side at ``s_lo`` and past
    the section at ``s_hi``.
    """
    H = np.asarray(H, dtype=float)
    a = np.zeros_like(H)  # certified before
    b = H.copy()
    c = np.zeros_like(H)
    d = H.copy()  # certified after
    for _ in range(max_iter):
        if np.all((b - a <= tol * 0.5) & (d - c <= tol * 0.5)):
            break
        m1 = 0.5 * (a + b)
        m2 = 0.5 * (c + d)
        y1 = y_range(m1) * sigma
        y2 = y_range(m2) * sigma
        before = y1.lo > 0
        a = np.where(before, m1, a)
        b = np.where(before, b, m1)
        after = y2.hi < 0
        d = np.where(after, m2, d)
        c = np.where(after, c, m2)
    return a, d


def _time_interval(lo, hi):
    return Interval._make(np.minimum(lo, hi), np.maximum(lo, hi))


def _transit(sp, h, direction=1, opts=None):
    """Push the section set ``sp`` to its next intersection with ``y = 0``.

    Forward (``direction=1``) this is H1 for ``branch=+1`` and H2 for
    ``branch=-1``; backward it gives the inverses.
    """
    opts = opts or MapOptions()
    params = opts.params
    policy = opts.policy
    d = 1.0 if direction >= 0 else -1.0
    b = sp.branch
    sigma = b * d  # side of y during flight
    n = sp.size
    errors = [None] * n
    ok = np.zeros(n, dtype=bool)
    out_c = np.zeros((n, 2))
    out_g = np.zeros((n, 2) + sp.gen.shape[2:])
    out_e = Interval.zeros((n, 2))
    window = Interval.zeros((n, 4))
    ctime = Interval.zeros((n,))

    try:
        s0, _ = lift(sp, h, params)
    except IntervalError as e:
        good = _liftable(sp, h, params)
        if good.all() or not good.any():
            return HalfMapResult(sp, ctime, None, window, ok, [str(e)] * n)
        return _scatter(_transit(sp.take(good), h, direction, opts), good, sp, str(e))
    tube = Tube(initial=s0) if opts.keep_tube else None
    cur = s0.take(np.arange(n))
    elapsed = Interval.zeros((n,))
    nominal = np.zeros(n)
    dt = np.full(n, policy.dt)
    first = np.ones(n, dtype=bool)
    active = np.arange(n)

    def fail(idx, msg):
        for i in np.atleast_1d(idx):
            errors[int(i)] = msg

    steps = 0
    while active.size:
        steps += 1
        if steps > policy.max_steps:
            fail(active, "maximum number of steps exceeded")
            break
        too_long = nominal[active] > opts.max_time
        if np.any(too_long):
            fail(active[too_long], "no return to the section before max_time")
            active = active[~too_long]
            continue
        S = cur.take(active)
        hstep = dt[active].copy()
        try:
            res = lohner_step(S, d * hstep, opts.order, params, opts.floor)
        except StepSizeError as e:
            bad = active[e.failed]
            dt[bad] *= 0.5
            low = bad[dt[bad] < policy.min_dt]
            if low.size:
                fail(low, "step size below the floor")
                active = np.setdiff1d(active, low)
            continue
        except SingularityError as e:
            mask = getattr(e, "failed", np.ones(active.size, dtype=bool))
            fail(active[mask], "trajectory reaches the distance floor of a primary")
            active = active[~mask]
            continue

        D = res.rough
        py = D[..., 3] * b  # branch sign
        ys = res.tube[..., 2] * sigma
        accept = np.zeros(active.size, dtype=bool)
        retry = np.zeros(active.size, dtype=bool)
        cross = np.zeros(active.size, dtype=bool)
        isfirst = first[active]
        accept |= isfirst & (py.lo > 0)
        retry |= isfirst & ~(py.lo > 0)
        fly = ~isfirst
        accept |= fly & (ys.lo > 0)
        cross |= fly & ~(ys.lo > 0)

        # crossing candidates
        if np.any(cross):
            ci = np.nonzero(cross)[0]
            done_c, acc_c = _try_cross(S.take(ci), hstep[ci], d, sigma, opts)
            for j, info in zip(ci, done_c):
                g = active[j]
                if info is None:
                    continue
                if isinstance(info, str):
                    fail(g, info)
                    continue
                (c2, g2, e2, win, s_lo, s_hi, piece) = info
                out_c[g] = c2
                out_g[g] = g2
                out_e.lo[g] = e2.lo
                out_e.hi[g] = e2.hi
                window.lo[g] = win.lo
                window.hi[g] = win.hi
                t0 = elapsed[g]
                ctime.lo[g] = np.nextafter(t0.lo + min(s_lo, s_hi), -np.inf)
                ctime.hi[g] = np.nextafter(t0.hi + max(s_lo, s_hi), np.inf)
                ok[g] = True
                if tube is not None:
                    tube.append(np.array([g]), t0.reshape(1), np.array([s_hi]), piece.reshape(1, 4))
            for j, a in zip(ci, acc_c):
                if a:
                    accept[j] = True
            resolved = np.array([done_c[k] is not None for k in range(len(ci))], dtype=bool)
            retry[ci[~resolved & ~acc_c]] = True

        # accepted steps
        ai = np.nonzero(accept)[0]
        if ai.size:
            g = active[ai]
            if tube is not None:
                tube.append(g, elapsed[g], d * hstep[ai], res.tube[ai])
            t0 = elapsed[g]
            elapsed.lo[g] = np.nextafter(t0.lo + d * hstep[ai], -np.inf)
            elapsed.hi[g] = np.nextafter(t0.hi + d * hstep[ai], np.inf)
            nominal[g] += hstep[ai]
            _store(cur, g, res.end_set.take(ai))
            first[g] = False
            cc = getattr(res, "center_coeffs", None)
            if cc is not None:
                dt[g] = policy.suggest(cc[:, ai], hstep[ai])
        ri = np.nonzero(retry)[0]
        if ri.size:
            g = active[ri]
            dt[g] *= 0.5
            low = g[dt[g] < policy.min_dt]
            if low.size:
                fail(low, "crossing not isolated (transversality not certified)")
        finished = ok[active] | np.array([errors[int(i)] is not None for i in active], dtype=bool)
        active = active[~finished]

    err_box = out_e
    image = SectionPoint.from_affine(Interval.point(out_c), Interval.point(out_g), err_box,
                                     sp.param, -b)
    return HalfMapResult(image, ctime, tube, window, ok, errors)


def _liftable(sp, h, params):
    """Elements whose p_y is certainly defined (individually)."""
    good = np.zeros(sp.size, dtype=bool)
    for i in range(sp.size):
        try:
            lift(sp.take([i]), h, params)
            good[i] = True
        except IntervalError:
            pass
    return good


def _scatter(sub, good, sp, msg):
    """Spread a result computed on the elements ``good`` back over the full batch."""
    n = sp.size
    idx = np.nonzero(good)[0]
    ok = np.zeros(n, dtype=bool)
    ok[idx] = sub.ok
    errors = [msg] * n
    for j, i in enumerate(idx):
        errors[i] = sub.errors[j]
    ctime = Interval.zeros((n,))
    ctime.lo[idx], ctime.hi[idx] = sub.crossing_time.lo, sub.crossing_time.hi
    window = Interval.zeros((n, 4))
    window.lo[idx], window.hi[idx] = sub.window.lo, sub.window.hi
    # failed elements keep their start set as a placeholder image
    c, g, e = sp.center.copy(), sp.gen.copy(), sp.err.copy()
    c[idx], g[idx] = sub.image.center, sub.image.gen
    e.lo[idx], e.hi[idx] = sub.image.err.lo, sub.image.err.hi
    param = sp.param.copy()
    param.lo[idx], param.hi[idx] = sub.image.param.lo, sub.image.param.hi
    image = SectionPoint(c, g, param, e, sub.image.branch)
    tube = sub.tube
    if tube is not None:
        tube.steps = [(idx[i], t0, dt, piece) for i, t0, dt, piece in tube.steps]
    return HalfMapResult(image, ctime, tube, window, ok, errors)


def _try_cross(S, h, d, sigma, opts):
    """Attempt to certify and locate the crossing from the sets ``S``.

    Returns ``(results, accept)``: ``results[j]`` is ``None`` (undecided),
    an error string, or the located crossing data; ``accept[j]`` means the
    window proved that no crossing happens within ``h`` and the plain step
    may be accepted.
    """
    params = opts.params
    m = S.size
    results = [None] * m
    accept = np.zeros(m, dtype=bool)
    hull = S.hull()
    start_y = hull[..., 2] * sigma
    pending = np.nonzero(start_y.lo > 0)[0]
    # time needed to sweep the whole set through the section at the current speed
    speed = hull[..., 3].mig
    with np.errstate(divide="ignore"):
        sweep = np.where(speed > 0, 1.25 * start_y.hi / speed, np.inf)
    base = np.minimum(np.maximum(h, sweep), opts.max_window)
    for k, factor in enumerate((None, 1.0, 1.5, 2.25)):
        if pending.size == 0:
            break
        Sp = S.take(pending)
        H = d * (h[pending] if factor is None else base[pending] * factor)
        try:
            ex = StepExpansion(Sp, H, opts.order, params, opts.floor)
        except (StepSizeError, SingularityError):
            break
        mono = (ex.D[..., 3] * (sigma * d)).hi < 0  # y moves towards the section
        yend = ex.y_range(H) * sigma
        after = yend.hi < 0
        still = yend.lo > 0
        if factor is None:
            accept[pending[mono & still]] = True
        hit = mono & after
        if np.any(hit):
            hi_idx = np.nonzero(hit)[0]
            sub = S.take(pending[hi_idx])
            exs = StepExpansion(sub, H[hi_idx], opts.order, params, opts.floor)
            located = _locate(exs, H[hi_idx], sigma, d, opts)
            for j, res in zip(pending[hi_idx], located):
                results[j] = res
        keep = mono & ~after & ~still if factor is None else mono & ~after
        # non-monotone sets must retry with a shorter step
        pending = pending[keep]
    return results, accept


def _locate(ex, H, sigma, d, opts):
    """Bracket the crossing times of the expansion ``ex`` and build images."""
    absH = np.abs(H)

    def yr(t):
        return ex.y_range(d * t)

    s_lo, s_hi = crossing_locate(yr, absH, sigma, opts.time_tol)
    s_lo, s_hi = d * s_lo, d * s_hi
    T = _time_interval(s_lo, s_hi)
    W = ex.hull_at(T).intersect(ex.D)
    out = []
    bad = np.any(np.isnan(W.lo), axis=-1)
    F = vector_field(Interval._make(np.where(bad[:, None], ex.D.lo, W.lo),
                                    np.where(bad[:, None], ex.D.hi, W.hi)), opts.params)
    fy = F[..., 2]
    if np.any(fy.contains_zero()):
        raise TransversalityError("p_y encloses zero on the crossing window")
    K = F[..., :2] / fy[..., None]  # (B, 2)
    tc = 0.5 * (s_lo + s_hi)
    y4, JC, err = ex.at(Interval.point(tc))
    c2 = y4[..., :2] - K * y4[..., 2:3]
    g2 = JC[..., :2, :] - K[..., None] * JC[..., 2:3, :]
    e2 = err[..., :2] - K * err[..., 2:3]
    piece = ex.hull_at(_time_interval(np.zeros_like(s_hi), s_hi)).intersect(ex.D)
    for k in range(len(H)):
        if bad[k]:
            out.append("empty crossing window")
            continue
        out.append((c2[k].mid, g2[k].mid, (c2[k] - c2[k].mid) + matvec(g2[k] - g2[k].mid, ex.s.param[k])
                    + e2[k], W[k], s_lo[k], s_hi[k], piece[k]))
    return out


# -- public maps -----------------------------------------------------------------


def half_map(sp, which, h, opts=None):
    """Validated H1 or H2 of the section set ``sp``.

    ``which`` is ``"H1"`` (start branch ``p_y > 0``) or ``"H2"``.
    """
    want = 1 if which.upper() == "H1" else -1
    if sp.branch != want:
        raise ValueError(f"{which} starts on the p_y {'>' if want > 0 else '<'} 0 branch")
    return _transit(sp, h, 1, opts)


def inverse_half_map(sp, which, h, opts=None):
    """Validated inverse of H1 or H2 by backward integration.

    ``sp`` lies on the image branch of ``which`` (``p_y < 0`` for H1).
    """
    want = -1 if which.upper() == "H1" else 1
    if sp.branch != want:
        raise ValueError(f"the inverse of {which} starts on the p_y {'>' if want > 0 else '<'} 0 branch")
    return _transit(sp, h, -1, opts)


def inverse_half_map_by_reflection(sp, which, h, opts=None):
    """Inverse of H1 (H2) computed as ``R ∘ H2 ∘ R`` (``R ∘ H1 ∘ R``), ``R(x, p) = (x, -p)``."""
    other = "H2" if which.upper() == "H1" else "H1"
    res = half_map(sp.reflect(), other, h, opts)
    res.image = res.image.reflect()
    return res


def full_map(sp, h, opts=None):
    """``P = H2 ∘ H1`` on the ``p_y > 0`` branch; returns ``(first, second)`` results."""
    r1 = half_map(sp, "H1", h, opts)
    if not r1.ok.all():
        return r1, None
    r2 = half_map(r1.image, "H2", h, opts)
    return r1, r2


# -- well-definedness of a half map on a whole support ------------------------------


@dataclass
class ReferenceTrajectory:
    """Approximate (non-validated) trajectory used to place the boxes of the tube check."""

    sol: object  # dense output, callable on times
    T: float  # approximate signed transit time to the section
    direction: int

    def __call__(self, t):
        return self.sol(np.asarray(t, dtype=float)).T


def reference_trajectory(point, branch, h, direction=1, params=DEFAULT_PARAMS, extra=0.5):
    """Floating-point transit of the section point ``point = (x, p_x)``.

    Integration continues ``extra`` time units past the return, so tube
    pieces that overshoot the section are still covered.
    """
    from scipy.integrate import solve_ivp

    m1, m2 = params.m1, params.m2
    r1, r2 = float(params.R1.mid), float(params.R2.mid)
    c = float(params.offset.mid)
    x, px = map(float, point)
    py = branch * np.sqrt(2 * (0.5 * x * x + m1 / abs(x - r1) + m2 / abs(x + r2) + c) + float(h) - px * px)

    def rhs(t, s):
        x, px, y, py = s
        q1 = ((x - r1) ** 2 + y * y) ** -1.5
        q2 = ((x + r2) ** 2 + y * y) ** -1.5
        ox = x - m1 * (x - r1) * q1 - m2 * (x + r2) * q2
        oy = y - m1 * y * q1 - m2 * y * q2
        return [px, ox - 2 * py, py, oy + 2 * px]

    def event(t, s):
        return s[2]

    event.terminal = True
    event.direction = 0
    d = 1 if direction >= 0 else -1
    # leave the section first, then watch for the return
    s0 = [x, px, 0.0, py]
    kick = solve_ivp(rhs, (0.0, d * 1e-3), s0, method="DOP853", rtol=1e-12, atol=1e-14)
    first = kick.y[:, -1]
    res = solve_ivp(rhs, (d * 1e-3, d * 50.0), first, method="DOP853", rtol=1e-12, atol=1e-14,
                    events=event)
    if not res.t_events[0].size:
        raise CrossingError("reference trajectory does not return to the section")
    T = float(res.t_events[0][0])
    full = solve_ivp(rhs, (0.0, T + d * extra), s0, method="DOP853", rtol=1e-12, atol=1e-14,
                     dense_output=True)
    return ReferenceTrajectory(full.sol, T, d)


def tube_pieces(tubes, elements=None):
    """Collect the tube boxes of the given elements.

    ``tubes`` is a list of :class:`Tube`; ``elements`` an optional list of
    index arrays (one per tube).  Returns ``(boxes (P, 4), t_mid (P,))``.
    """
    boxes_lo, boxes_hi, times = [], [], []
    for k, tube in enumerate(tubes):
        sel = None if elements is None else np.asarray(elements[k])
        for idx, t0, dt, piece in tube.steps:
            keep = np.ones(len(idx), dtype=bool) if sel is None else np.isin(idx, sel)
            if not np.any(keep):
                continue
            boxes_lo.append(piece.lo[keep])
            boxes_hi.append(piece.hi[keep])
            times.append(t0.mid[keep] + 0.5 * np.asarray(dt)[keep])
    if not boxes_lo:
        return Interval.zeros((0, 4)), np.zeros(0)
    return (Interval._make(np.concatenate(boxes_lo), np.concatenate(boxes_hi)), np.concatenate(times))


def suggest_weights(pieces, times, reference, slack=1.5):
    """Metric weights ``a_k`` whose boxes comfortably hold the tube pieces.

    The radius in each coordinate is ``slack`` times the largest distance of a
    piece from the reference state at the piece's mid time.
    """
    ref = reference(times)
    dev = np.maximum(np.abs(pieces.hi - ref), np.abs(pieces.lo - ref)).max(axis=0)
    radius = slack * np.maximum(dev, 1e-9)
    return tuple(float(1.0 / r) for r in radius)


@dataclass
class TubeCheckReport:
    """Outcome of the angular-velocity argument for one family of tubes.

    ``delta_max`` encloses the largest value of
    ``beta = (2 p_x + Omega_y) y - p_y^2`` over the union of the boxes (and
    ``delta_min`` the smallest one).  ``rate`` is a lower bound on the
    angular speed in the ``(y, p_y)`` plane, so every trajectory staying in
    the boxes returns within ``time_bound = pi / rate``.
    """

    delta_max: Interval
    delta_min: Interval
    pieces: int
    metric_weights: tuple
    verdict: bool
    escaped: int = 0
    tube_pieces: int = 0
    rate: float = 0.0
    time_bound: float = float("inf")
    message: str = ""
    method: str = "reference"


def xi_boxes(reference, weights, times):
    """Boxes ``{d(z, ref(t_i)) <= 1}`` of the weighted max metric, outward rounded.

    ``weights`` is one 4-vector for all boxes or one per box, shape (N, 4).
    """
    ref = reference(times)
    r = 1.0 / np.asarray(weights, dtype=float)
    lo = np.nextafter(ref - r, -np.inf)
    hi = np.nextafter(ref + r, np.inf)
    return Interval._make(lo, hi)


def local_weights(pieces, times, reference, grid, slack=1.25, floor=1e-9):
    """Per-box weights: box ``i`` holds every piece whose mid time is nearest ``t_i``."""
    near = np.abs(times[:, None] - grid[None, :]).argmin(axis=1)
    ref = reference(grid)
    dev = np.maximum(np.abs(pieces.hi - ref[near]), np.abs(pieces.lo - ref[near]))
    radius = np.full((len(grid), 4), floor)
    np.maximum.at(radius, near, dev)
    # neighbours share their radius, so a piece near a cell boundary still fits
    radius = np.maximum(radius, np.vstack([radius[1:], radius[-1:]]))
    radius = np.maximum(radius, np.vstack([radius[:1], radius[:-1]]))
    return 1.0 / (slack * radius)


def _contained_in_union(pieces, boxes, chunk=4000):
    """Mask of pieces lying inside at least one of ``boxes`` (all Intervals (·, 4))."""
    out = np.zeros(pieces.shape[0], dtype=bool)
    for a in range(0, pieces.shape[0], chunk):
        plo = pieces.lo[a:a + chunk, None, :]
        phi = pieces.hi[a:a + chunk, None, :]
        inside = np.all((boxes.lo[None] <= plo) & (phi <= boxes.hi[None]), axis=-1)
        out[a:a + chunk] = inside.any(axis=1)
    return out


def _beta(boxes, params):
    x, px, y, py = (boxes[..., k] for k in range(4))
    oy = grad_omega(stack([x, y], axis=-1), params)[..., 1]
    return (px * 2.0 + oy) * y - py.sqr()


def tube_welldefined_check(pieces, times, reference, weights=None, N=None, params=DEFAULT_PARAMS):
    """Certify that a half map is defined on the region swept by the tubes.

    ``pieces`` (Interval (P, 4)) enclose the boundary trajectories and
    ``times`` their mid times.  The boxes ``Xi_i`` are centred on the
    reference trajectory at ``N + 1`` equally spaced times covering the
    pieces.  ``weights`` is a fixed 4-vector (then ``N=None`` picks a
    spacing of a fifth of the box size) or ``None`` for per-box weights
    fitted to the pieces (``N`` defaults to 400).  The verdict is true when
    every piece lies in some ``Xi_i``, no ``Xi_i`` meets ``y = p_y = 0`` or
    a primary, and ``beta`` has one strict sign on all of them.
    """
    t_lo = min(0.0, float(np.min(times))) if len(times) else 0.0
    t_hi = max(0.0, float(np.max(times))) if len(times) else reference.T
    t_lo = min(t_lo, reference.T)
    t_hi = max(t_hi, reference.T)
    if weights is None:
        N = N or 400
        ti = np.linspace(t_lo, t_hi, N + 1)
        w = local_weights(pieces, times, reference, ti)
        reported = tuple(float(x) for x in w.min(axis=0))
    else:
        w = np.asarray(weights, dtype=float)
        reported = tuple(float(a) for a in w)
        if N is None:
            grid = np.linspace(t_lo, t_hi, 2001)
            ref = reference(grid)
            speed = np.abs(np.diff(ref, axis=0)).max(axis=0) / (grid[1] - grid[0])
            dt_max = np.min(0.2 / w / np.maximum(speed, 1e-12))
            N = max(int(np.ceil((t_hi - t_lo) / dt_max)), 1)
        ti = np.linspace(t_lo, t_hi, N + 1)
    boxes = xi_boxes(reference, w, ti)
    escaped = int((~_contained_in_union(pieces, boxes)).sum())
    return _beta_report(boxes, pieces.shape[0], escaped, reported, N + 1, params, "reference")


def _angle_ranges(boxes, sigma):
    """Range of ``atan2(sigma p_y, sigma y)`` over each box (NaN if undefined).

    The branch cut sits on the far side of the flight half plane; boxes
    touching it, or containing ``y = p_y = 0``, get NaN.
    """
    y = boxes[..., 2] * sigma
    py = boxes[..., 3] * sigma
    bad = (y.contains_zero() & py.contains_zero()) | ((y.lo < 0) & py.contains_zero())
    ys = np.stack([y.lo, y.lo, y.hi, y.hi], axis=-1)
    ps = np.stack([py.lo, py.hi, py.lo, py.hi], axis=-1)
    ang = np.arctan2(ps, ys)
    lo = np.nextafter(ang.min(axis=-1), -np.inf) - 1e-12
    hi = np.nextafter(ang.max(axis=-1), np.inf) + 1e-12
    lo[bad] = np.nan
    hi[bad] = np.nan
    return lo, hi


def tube_sector_check(pieces, sigma, N=400, params=DEFAULT_PARAMS):
    """Angular-sector variant of the well-definedness check.

    The region enclosed by the boundary tubes meets each half plane
    ``{angle(y, p_y) = theta}`` in a set bounded by the tube's trace, hence
    inside the box hull of the pieces whose angle range contains ``theta``.
    The boxes ``Xi_i`` are those hulls over ``N`` sectors; ``beta`` is
    checked on them exactly as in :func:`tube_welldefined_check`.
    ``pieces`` must include the lifts of the start set and of the image hull.
    """
    nan = Interval(np.nan, np.nan)
    lo, hi = _angle_ranges(pieces, sigma)
    if np.any(np.isnan(lo)):
        return TubeCheckReport(nan, nan, 0, (), False, int(np.isnan(lo).sum()), pieces.shape[0],
                               message="a tube piece meets y = p_y = 0 or the angle cut", method="sectors")
    edges = np.linspace(lo.min(), hi.max(), N + 1)
    blo = np.full((N, 4), np.inf)
    bhi = np.full((N, 4), -np.inf)
    first = np.clip(np.searchsorted(edges, lo, side="right") - 1, 0, N - 1)
    last = np.clip(np.searchsorted(edges, hi, side="left") - 1, 0, N - 1)
    for k in range(int((last - first).max()) + 1):
        idx = first + k
        sel = idx <= last
        np.minimum.at(blo, idx[sel], pieces.lo[sel])
        np.maximum.at(bhi, idx[sel], pieces.hi[sel])
    boxes = Interval._make(blo, bhi)
    return _beta_report(boxes, pieces.shape[0], 0, (), N, params, "sectors")


def _beta_report(boxes, npieces, escaped, reported, N, params, method):
    nan = Interval(np.nan, np.nan)

    def report(verdict, msg, dmax=nan, dmin=nan, rate=0.0):
        tb = float(np.pi / rate) if rate > 0 else float("inf")
        return TubeCheckReport(dmax, dmin, N, reported, verdict, escaped, npieces, rate, tb, msg, method)

    r1, r2 = params.R1, params.R2
    x, y = boxes[..., 0], boxes[..., 2]
    hits = ((x.lo <= r1.hi) & (x.hi >= r1.lo) & (y.lo <= 0) & (y.hi >= 0)) | \
           ((x.lo <= -r2.lo) & (x.hi >= -r2.hi) & (y.lo <= 0) & (y.hi >= 0))
    if np.any(hits):
        return report(False, "a box contains a primary")
    origin = y.contains_zero() & boxes[..., 3].contains_zero()
    if np.any(origin):
        return report(False, "a box meets y = p_y = 0")
    beta = _beta(boxes, params)
    dmax = Interval(float(beta.lo.max()), float(beta.hi.max()))
    dmin = Interval(float(beta.lo.min()), float(beta.hi.min()))
    rad2 = y.sqr() + boxes[..., 3].sqr()
    if dmax.hi < 0:
        rate = float(np.min(-beta.hi / rad2.hi))
    elif dmin.lo > 0:
        rate = float(np.min(beta.lo / rad2.hi))
    else:
        return report(False, "beta changes sign on the boxes", dmax, dmin)
    if escaped:
        return report(False, f"{escaped} tube piece(s) leave the boxes", dmax, dmin, rate)
    return report(True, "", dmax, dmin, rate)


__all__ = [
    "CrossingError", "HalfMapResult", "MapOptions", "ReferenceTrajectory", "SectionPoint",
    "TransversalityError", "TubeCheckReport", "crossing_locate", "full_map", "half_map",
    "inverse_half_map", "inverse_half_map_by_reflection", "lift", "local_weights", "reference_trajectory",
    "suggest_weights", "tube_pieces", "tube_sector_check", "tube_welldefined_check", "xi_boxes",
]
