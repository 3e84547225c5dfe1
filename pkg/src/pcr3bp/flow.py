"""Validated integration: rough enclosures, Taylor steps and Lohner sets.

A :class:`LohnerSet` represents the set::

    { center + gen @ u + frame @ r  :  u in param,  r in offset }

``center`` is a point, ``gen`` and ``frame`` are point matrices, ``param``
and ``offset`` are interval vectors.  ``gen``/``param`` carry the initial
parametrisation (for instance the position along a boundary segment) without
ever being wrapped, while ``frame``/``offset`` absorb all rounding and
truncation errors.  The frame is re-orthogonalised by a QR factorisation
after every step, which is what keeps the wrapping effect in check.

All sets are batched along a leading axis so that many independent
trajectories (segments of a t-set boundary, probe endpoints...) advance in
the same numpy calls.  Each batch element may use its own step size.

A step of size ``h`` from the set with hull ``X`` does:

1. find a box ``D`` with ``X + [0, h] f(D)`` inside ``D`` (Picard test);
   the flow of ``X`` then stays in ``D`` on ``[0, h]``;
2. Taylor expand the center to order ``k`` and bound the Lagrange
   remainder with the order ``k+1`` coefficient over ``D``;
3. bound the derivative of the Taylor polynomial over ``X`` with the
   variational (dual number) recurrences and push the set through it.

Negative ``h`` integrates backwards in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interval import Interval, IntervalError, as_interval, matmul, matvec, stack
from .model import DEFAULT_PARAMS, SingularityError, grad_omega, jacobi
from .taylor import evaluate, series

DEFAULT_ORDER = 12
DEFAULT_FLOOR = 1e-3


class StepSizeError(IntervalError):
    """The rough enclosure could not be validated.

    ``failed`` is a boolean mask over the batch marking the offending sets.
    """

    def __init__(self, msg, failed=None):
        super().__init__(msg)
        self.failed = failed


class MaxStepsError(IntervalError):
    """Integration did not reach its goal within the allowed number of steps."""


@dataclass
class LohnerSet:
    center: np.ndarray  # (B, 4)
    gen: np.ndarray  # (B, 4, m)
    param: Interval  # (B, m)
    frame: np.ndarray  # (B, 4, 4)
    offset: Interval  # (B, 4)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.gen = np.asarray(self.gen, dtype=float)
        self.frame = np.asarray(self.frame, dtype=float)

    @property
    def size(self):
        return self.center.shape[0]

    @classmethod
    def from_box(cls, box):
        """Set equal to the box ``box`` (shape ``(4,)`` or ``(B, 4)``)."""
        box = as_interval(box)
        if box.ndim == 1:
            box = box.reshape(1, 4)
        c = box.mid
        n = c.shape[0]
        eye = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
        return cls(c, np.zeros((n, 4, 1)), Interval(-np.ones((n, 1)), np.ones((n, 1))),
                   eye, box - c)

    @classmethod
    def from_affine(cls, center, gen, err, param=None):
        """Set ``center + gen @ u + err`` with ``u`` in ``param`` (default [-1, 1]^m).

        ``center`` may be an Interval; its width is moved into the error box.
        ``gen`` may be an Interval matrix; its width times ``|param|`` is moved
        into the error box as well.
        """
        center = as_interval(center)
        gen = as_interval(gen)
        if center.ndim == 1:
            center = center.reshape(1, 4)
            gen = gen.reshape((1,) + gen.shape)
            err = as_interval(err).reshape(1, 4)
        n, _, m = gen.shape
        if param is None:
            param = Interval(-np.ones((n, m)), np.ones((n, m)))
        c = center.mid
        g = gen.mid
        err = as_interval(err) + (center - c) + matvec(gen - g, param)
        eye = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
        return cls(c, g, param, eye, err)

    def hull(self):
        """Interval hull of the represented set, shape ``(B, 4)``."""
        return matvec(self.gen, self.param) + matvec(self.frame, self.offset) + self.center

    def take(self, idx):
        return LohnerSet(self.center[idx], self.gen[idx], self.param[idx], self.frame[idx],
                         self.offset[idx])

    def with_param(self, param):
        """Restriction to a sub-box of the parameter domain."""
        return LohnerSet(self.center, self.gen, as_interval(param), self.frame, self.offset)

    def affine(self):
        """``(center, gen, err)`` with the frame part collapsed into a box."""
        return self.center, self.gen, matvec(self.frame, self.offset)


@dataclass
class StepResult:
    end_set: LohnerSet
    tube: Interval  # (B, 4), encloses the trajectories over the step
    dt: np.ndarray  # (B,)
    rough: Interval | None = None


@dataclass
class Tube:
    """Chain of validated steps for a batch of sets.

    Steps are stored with the batch indices they apply to, so elements that
    stop early simply stop appearing.
    """

    initial: LohnerSet
    steps: list = field(default_factory=list)  # (indices, t0 Interval, dt, piece Interval)
    final: LohnerSet | None = None
    time: Interval | None = None  # (B,) elapsed time per element

    def append(self, idx, t0, dt, piece):
        self.steps.append((np.asarray(idx), t0, np.asarray(dt, dtype=float), piece))

    def pieces(self, i):
        """All tube boxes of element ``i`` as an Interval of shape (S, 4)."""
        out = [st[3][st[0] == i] for st in self.steps]
        out = [p for p in out if p.shape[0]]
        if not out:
            return Interval.zeros((0, 4))
        return Interval._make(np.concatenate([p.lo for p in out]), np.concatenate([p.hi for p in out]))

    def times(self, i):
        """Start times (intervals) and step sizes of element ``i``."""
        t0s, dts = [], []
        for idx, t0, dt, _ in self.steps:
            sel = idx == i
            if np.any(sel):
                t0s.append(t0[sel])
                dts.append(dt[sel])
        if not t0s:
            return Interval.zeros((0,)), np.zeros(0)
        return (Interval._make(np.concatenate([t.lo for t in t0s]), np.concatenate([t.hi for t in t0s])),
                np.concatenate(dts))

    def dump(self, fh, i=None):
        """Write the tube as text: ``elem step t0_lo t0_hi dt lo1 hi1 ... lo4 hi4``."""
        fh.write("# elem step t0_lo t0_hi dt x_lo x_hi px_lo px_hi y_lo y_hi py_lo py_hi\n")
        counter = {}
        for idx, t0, dt, piece in self.steps:
            for j, e in enumerate(idx):
                if i is not None and e != i:
                    continue
                k = counter.get(int(e), 0)
                counter[int(e)] = k + 1
                vals = " ".join(f"{piece.lo[j, c]:.17g} {piece.hi[j, c]:.17g}" for c in range(4))
                fh.write(f"{int(e)} {k} {t0.lo[j]:.17g} {t0.hi[j]:.17g} {dt[j]:.17g} {vals}\n")


@dataclass
class DtPolicy:
    """Step-size control.

    ``dt`` is the nominal (maximal) step, ``min_dt`` the floor below which a
    failed step is an error.  With ``adaptive`` the step is additionally
    limited by ``safety * |c_k|**(-1/k)`` from the Taylor coefficients of the
    previous step, which shortens steps close to the primaries.  A step
    whose Taylor remainder is wider than ``max_remainder * (1 + width)`` of
    the set is redone with half the step, down to ``min_dt``.
    """

    dt: float = 1e-2
    min_dt: float = 5e-4
    adaptive: bool = True
    safety: float = 0.25
    max_steps: int = 20000
    max_remainder: float = 1e-10

    def suggest(self, coeffs, previous):
        """Next step sizes from center coefficients ``coeffs`` (k+1, B, 4)."""
        dt = np.full(previous.shape, self.dt)
        if self.adaptive and coeffs is not None:
            k = coeffs.shape[0] - 1
            est = np.full(previous.shape, np.inf)
            for j in (k - 1, k):
                mag = np.max(coeffs[j].mag, axis=-1)
                with np.errstate(divide="ignore"):
                    est = np.minimum(est, np.where(mag > 0, mag ** (-1.0 / j), np.inf))
            dt = np.minimum(dt, self.safety * est)
            # grow at most by 2 per step
            dt = np.minimum(dt, 2.0 * np.abs(previous))
        return np.maximum(dt, self.min_dt)


# -- rough enclosure -------------------------------------------------------------


def _field_masked(D, params, floor):
    """Vector field over the boxes ``D`` (B, 4) plus a mask of safe boxes.

    Boxes within ``floor`` of a primary get an unbounded field.
    """
    x, y = D[..., 0], D[..., 2]
    y2 = y.sqr()
    r1 = (x - params.R1).sqr() + y2
    r2 = (x + params.R2).sqr() + y2
    f2 = floor * floor
    ok = (r1.lo > f2) & (r2.lo > f2) & np.all(np.isfinite(D.lo) & np.isfinite(D.hi), axis=-1)
    safe = Interval._make(np.where(ok[..., None], D.lo, 10.0), np.where(ok[..., None], D.hi, 10.0))
    from .model import vector_field

    F = vector_field(safe, params)
    lo = np.where(ok[..., None], F.lo, -np.inf)
    hi = np.where(ok[..., None], F.hi, np.inf)
    return Interval._make(lo, hi), ok


def _time_range(h):
    h = np.asarray(h, dtype=float)
    return Interval._make(np.minimum(h, 0.0), np.maximum(h, 0.0))


def _rough(X, h, params, floor, retries=20):
    """Batched Picard validation; returns ``(D, ok)``.

    The first candidate is ``X + [0, h] f(X)``; on failure it is replaced by
    its hull with the Picard image; components that leaked are inflated by
    a margin that doubles on each retry plus a tenth of the image radius.
    """
    T = _time_range(h)[..., None]
    done = np.zeros(X.shape[0], dtype=bool)
    result = X.copy()
    with np.errstate(invalid="ignore"):
        F, _ = _field_masked(X, params, floor)
        D = X + T * F
        bad = ~np.all(np.isfinite(D.lo) & np.isfinite(D.hi), axis=-1)
        D.lo[bad] = X.lo[bad]
        D.hi[bad] = X.hi[bad]
        rad = D.rad
        margin = 0.1 * rad + 0.01 * np.max(rad, axis=-1, keepdims=True) + 1e-14 * (1.0 + D.mag)
        D = D.widen(margin)
        for _ in range(retries + 1):
            F, okf = _field_masked(D, params, floor)
            Dn = X + T * F
            good = okf & np.all(D.contains(Dn), axis=-1) & ~done
            result.lo[good] = Dn.lo[good]
            result.hi[good] = Dn.hi[good]
            done |= good
            if done.all():
                break
            todo = ~done & okf
            # only the components that leaked are inflated, by their margin and
            # a tenth of the image radius; inflating everything feeds back into
            # the field and can run away
            leak = ~D.contains(Dn)
            margin = np.where(leak, margin * 2.0, margin)
            slack = np.where(leak, margin + 0.1 * np.where(np.isfinite(Dn.rad), Dn.rad, 0.0), 0.0)
            grown = D.hull(Dn).widen(slack)
            D.lo[todo] = grown.lo[todo]
            D.hi[todo] = grown.hi[todo]
    return result, done


def rough_enclosure(x0, dt, params=DEFAULT_PARAMS, floor=DEFAULT_FLOOR, retries=20):
    """Box ``D`` containing every trajectory from ``x0`` over ``[0, dt]``.

    Validates ``x0 + [0, dt] f(D) ⊆ D``; the candidate margin is doubled on
    each of at most ``retries`` failures before :class:`StepSizeError`.
    """
    x0 = as_interval(x0)
    single = x0.ndim == 1
    X = x0.reshape(1, 4) if single else x0
    h = np.broadcast_to(np.asarray(dt, dtype=float), X.shape[:1])
    _check_floor(X, params, floor)
    D, ok = _rough(X, h, params, floor, retries)
    if not ok.all():
        raise StepSizeError("rough enclosure not validated; decrease dt", ~ok)
    return D[0] if single else D


def _check_floor(X, params, floor):
    _, ok = _field_masked(X, params, floor)
    if not ok.all():
        err = SingularityError("set within the distance floor of a primary")
        err.failed = ~ok
        raise err


# -- steps -------------------------------------------------------------------------


def _as_time(h):
    """Exact float ``h`` as a point interval with a trailing unit axis."""
    return Interval.point(np.asarray(h, dtype=float))[..., None]


def taylor_step(x0, dt, order=DEFAULT_ORDER, params=DEFAULT_PARAMS, floor=DEFAULT_FLOOR):
    """Plain interval Taylor step of the box ``x0`` (no wrapping control).

    Returns a :class:`StepResult` whose ``end_set`` is the box result.
    """
    x0 = as_interval(x0)
    single = x0.ndim == 1
    X = x0.reshape(1, 4) if single else x0
    h = np.broadcast_to(np.asarray(dt, dtype=float), X.shape[:1]).copy()
    _check_floor(X, params, floor)
    D, ok = _rough(X, h, params, floor)
    if not ok.all():
        raise StepSizeError("rough enclosure not validated; decrease dt", ~ok)
    cX = series(X, order, params, floor=floor)
    cD = series(D, order + 1, params, floor=floor)
    t = _as_time(h)
    rem = cD[order + 1] * t.pow_int(order + 1)
    end = evaluate(cX, t) + rem
    T = _time_range(h)[..., None]
    tube = (evaluate(cX, T) + cD[order + 1] * T.pow_int(order + 1)).intersect(D).hull(end)
    res = StepResult(LohnerSet.from_box(end), tube, h, D)
    return res


def _qr_sorted(A, weights):
    """Q factor of ``A`` with columns ordered by decreasing ``|A_j| * w_j``."""
    norms = np.linalg.norm(A, axis=-2) * weights
    order = np.argsort(-norms, axis=-1)
    Ap = np.take_along_axis(A, order[..., None, :], axis=-1)
    Q, R = np.linalg.qr(Ap)
    # guard against rank deficiency: QR of a singular matrix is still orthogonal
    return Q


def _rigorous_inverse_orthogonal(Q):
    """Interval enclosure of ``Q^-1`` for a numerically orthogonal ``Q``."""
    QT = np.swapaxes(Q, -1, -2)
    E = matmul(QT, Q) - np.eye(Q.shape[-1])
    nE = np.max(np.sum(E.mag, axis=-1), axis=-1)
    if np.any(nE >= 0.5):
        raise IntervalError("frame is not numerically orthogonal")
    delta = np.nextafter(nE / np.nextafter(1.0 - nE, 0.0), np.inf)
    M = Interval(-delta, delta)[..., None, None] + np.eye(Q.shape[-1])
    return matmul(M, QT)


def _lohner_core(s, h, order, params, floor):
    X = s.hull()
    X = X.hull(Interval.point(s.center))
    _check_floor(X, params, floor)
    D, ok = _rough(X, h, params, floor)
    if not ok.all():
        raise StepSizeError("rough enclosure not validated; decrease dt", ~ok)
    cD = series(D, order + 1, params, floor=floor)
    cc = series(Interval.point(s.center), order, params, floor=floor)
    cj = series(X, order, params, jacobian=True, floor=floor)
    t = _as_time(h)
    rem = cD[order + 1] * t.pow_int(order + 1)
    y = evaluate(cc, t) + rem
    J = evaluate(cj[..., 1:], t[..., None])  # (B, 4, 4)
    return X, D, cD, cc, cj, y, J


def _transport(s, y, J):
    JC = matmul(J, s.gen)
    C_new = JC.mid
    JB = matmul(J, s.frame)
    A = JB.mid
    w = s.offset.rad
    Q = _qr_sorted(A, w)
    Qinv = _rigorous_inverse_orthogonal(Q)
    c_new = y.mid
    rest = matvec(JC - C_new, s.param) + (y - c_new)
    r_new = matvec(matmul(Qinv, JB), s.offset) + matvec(Qinv, rest)
    return LohnerSet(c_new, C_new, s.param, Q, r_new)


def lohner_step(s, dt, order=DEFAULT_ORDER, params=DEFAULT_PARAMS, floor=DEFAULT_FLOOR):
    """One validated step of the Lohner set ``s`` with step(s) ``dt``."""
    h = np.broadcast_to(np.asarray(dt, dtype=float), (s.size,)).copy()
    if np.all(h == 0.0):
        return StepResult(s, s.hull(), h, s.hull())
    X, D, cD, cc, cj, y, J = _lohner_core(s, h, order, params, floor)
    new = _transport(s, y, J)
    T = _time_range(h)[..., None]
    piece = evaluate(cj[..., 0], T) + cD[order + 1] * T.pow_int(order + 1)
    tube = piece.intersect(D)
    tube = _fix_empty(tube, D).hull(new.hull())
    res = StepResult(new, tube, h, D)
    res.center_coeffs = cc
    res.remainder = np.max((cD[order + 1] * _as_time(h).pow_int(order + 1)).width, axis=-1)
    return res


def _fix_empty(a, fallback):
    bad = np.isnan(a.lo)
    if np.any(bad):
        return Interval._make(np.where(bad, fallback.lo, a.lo), np.where(bad, fallback.hi, a.hi))
    return a


class StepExpansion:
    """Everything needed to evaluate one step at any time in ``[0, H]``.

    Used for crossing localisation: the same rough enclosure and Taylor data
    serve all sub-times, so bisection in time is just polynomial evaluation.
    """

    def __init__(self, s, H, order=DEFAULT_ORDER, params=DEFAULT_PARAMS, floor=DEFAULT_FLOOR):
        self.s = s
        self.H = np.asarray(H, dtype=float)
        self.order = order
        X, D, cD, cc, cj, y, J = _lohner_core(s, self.H, order, params, floor)
        self.X, self.D, self.cD, self.cc, self.cj = X, D, cD, cc, cj

    def at(self, t):
        """Affine enclosure ``(center box, gen, err box)`` at time(s) ``t``.

        ``t`` is an Interval or float array of shape (B,) inside ``[0, H]``
        (or ``[H, 0]``).  The result is valid for all times in ``t``.
        """
        t = as_interval(t)[..., None]
        k = self.order
        y = evaluate(self.cc, t) + self.cD[k + 1] * t.pow_int(k + 1)
        J = evaluate(self.cj[..., 1:], t[..., None])
        s = self.s
        JC = matmul(J, s.gen)
        err = matvec(matmul(J, s.frame), s.offset)
        return y, JC, err

    def hull_at(self, t):
        y, JC, err = self.at(t)
        return y + matvec(JC, self.s.param) + err

    def y_range(self, t, param=None):
        """Enclosure of the ``y`` coordinate at time(s) ``t``."""
        y, JC, err = self.at(t)
        p = self.s.param if param is None else param
        return (y + matvec(JC, p) + err)[..., 2]


# -- integration -----------------------------------------------------------------


def integrate(x0, t_end=None, stop=None, direction=1, policy=None, order=DEFAULT_ORDER,
              params=DEFAULT_PARAMS, floor=DEFAULT_FLOOR):
    """Chain validated Lohner steps.

    ``x0`` is a :class:`LohnerSet` or a box.  Integration of an element ends
    when its elapsed time reaches ``t_end`` (exactly, the last step is
    shortened) or when ``stop(result, idx)`` returns true for it; ``stop``
    receives the :class:`StepResult` of the active elements and their batch
    indices and returns a boolean mask.  ``direction=-1`` integrates backwards.

    Returns a :class:`Tube` whose ``final`` holds the end sets and ``time``
    the elapsed (signed) times.
    """
    policy = policy or DtPolicy()
    s = x0 if isinstance(x0, LohnerSet) else LohnerSet.from_box(x0)
    n = s.size
    tube = Tube(initial=s)
    sign = 1.0 if direction >= 0 else -1.0
    elapsed = Interval.zeros((n,))
    final = s.take(np.arange(n))
    active = np.arange(n)
    dt = np.full(n, policy.dt)
    if policy.adaptive:
        # the first step gets the same coefficient-based limit as the others
        dt = policy.suggest(series(Interval.point(s.center), order, params, floor=floor), dt)
    nominal = np.zeros(n)
    for _ in range(policy.max_steps):
        if active.size == 0:
            break
        cur = final.take(active)
        h = dt[active].copy()
        if t_end is not None:
            h = np.minimum(h, abs(t_end) - nominal[active])
        try:
            res = lohner_step(cur, sign * h, order, params, floor)
        except StepSizeError as e:
            bad = active[e.failed]
            dt[bad] *= 0.5
            if np.any(dt[bad] < policy.min_dt):
                raise StepSizeError("step size fell below the floor", np.isin(np.arange(n), bad))
            continue
        if policy.adaptive:
            tol = policy.max_remainder * (1.0 + np.max(cur.hull().width, axis=-1))
            redo = (res.remainder > tol) & (h > policy.min_dt)
            if redo.any():
                # redo the step for everyone; only the offenders shrink
                dt[active[redo]] = np.maximum(0.5 * h[redo], policy.min_dt)
                continue
        t0 = elapsed[active]
        tube.append(active, t0, sign * h, res.tube)
        elapsed.lo[active] = np.nextafter(t0.lo + sign * h, -np.inf)
        elapsed.hi[active] = np.nextafter(t0.hi + sign * h, np.inf)
        nominal[active] += h
        _store(final, active, res.end_set)
        done = np.zeros(active.size, dtype=bool)
        if t_end is not None:
            done |= nominal[active] >= abs(t_end)
        if stop is not None:
            done |= np.asarray(stop(res, active), dtype=bool)
        coeffs = getattr(res, "center_coeffs", None)
        newdt = policy.suggest(coeffs, h)
        dt[active] = newdt
        active = active[~done]
    else:
        raise MaxStepsError(f"not finished after {policy.max_steps} steps")
    tube.final = final
    tube.time = elapsed
    return tube


def _store(target, idx, src):
    target.center[idx] = src.center
    target.gen[idx] = src.gen
    target.param.lo[idx] = src.param.lo
    target.param.hi[idx] = src.param.hi
    target.frame[idx] = src.frame
    target.offset.lo[idx] = src.offset.lo
    target.offset.hi[idx] = src.offset.hi


def jacobi_enclosure(s, params=DEFAULT_PARAMS):
    """Enclosure of the Jacobi integral over the set ``s``, shape ``(B,)``.

    The plain evaluation over the hull is intersected with the mean value
    form ``J(c) + grad J(hull) . (gen u + frame r)``.  A set sheared along
    an energy level is wide but nearly tangent to it, and the mean value
    form sees that while the hull does not.
    """
    X = s.hull()
    plain = jacobi(X, params)
    g = grad_omega(stack([X[..., 0], X[..., 2]], axis=-1), params)
    grad = stack([g[..., 0] * -2.0, X[..., 1] * 2.0, g[..., 1] * -2.0, X[..., 3] * 2.0], axis=-1)
    row = grad.reshape(grad.shape + (1,))
    along_gen = (row * Interval.point(s.gen)).sum(axis=-2)
    along_frame = (row * Interval.point(s.frame)).sum(axis=-2)
    mvf = (jacobi(Interval.point(s.center), params) + (along_gen * s.param).sum(axis=-1)
           + (along_frame * s.offset).sum(axis=-1))
    return plain.intersect(mvf)


def jacobi_width(s, params=DEFAULT_PARAMS):
    """Width of :func:`jacobi_enclosure`."""
    return jacobi_enclosure(s, params).width


__all__ = [
    "DEFAULT_FLOOR", "DEFAULT_ORDER", "DtPolicy", "LohnerSet", "MaxStepsError", "StepExpansion",
    "StepResult", "StepSizeError", "Tube", "integrate", "jacobi_enclosure", "jacobi_width", "lohner_step",
    "rough_enclosure", "taylor_step",
]
