"""Interval arithmetic on numpy arrays with outward rounding.

An :class:`Interval` holds two float64 arrays ``lo`` and ``hi`` of the same
shape, so a single object can stand for a scalar interval, an interval
vector (a box) or an interval matrix, and whole batches of them at once.

Outward rounding is done post hoc: every IEEE operation used here (``+``,
``-``, ``*``, ``/``, ``sqrt``) is correctly rounded to nearest, so moving the
computed endpoint one ulp outwards with ``np.nextafter`` always encloses the
exact result.  No rounding-mode switches are involved, which keeps the module
thread safe and independent of the FPU state.

Empty results of :meth:`Interval.intersect` are encoded as NaN endpoints; a
scalar empty intersection returns the module-level :data:`EMPTY` sentinel.
"""

from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction

import numpy as np

_INF = np.inf
_U = 2.0**-53  # unit roundoff
_TINY = 5e-324  # smallest subnormal


class IntervalError(ArithmeticError):
    """Raised when an interval operation leaves its domain."""


class IntervalDivisionError(IntervalError, ZeroDivisionError):
    """Division by an interval that contains zero."""


def _down(x):
    return np.nextafter(x, -_INF)


def _up(x):
    return np.nextafter(x, _INF)


class Interval:
    """Closed interval ``[lo, hi]`` (elementwise over arrays)."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000  # make ndarray defer to our reflected operators

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo if hi is None else np.asarray(hi, dtype=np.float64)
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
        bad = lo > hi
        if np.any(bad):
            raise ValueError(f"interval with lo > hi: [{lo[bad]}, {hi[bad]}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _make(cls, lo, hi):
        obj = object.__new__(cls)
        obj.lo = lo
        obj.hi = hi
        return obj

    # -- construction ---------------------------------------------------------

    @classmethod
    def point(cls, x):
        x = np.asarray(x, dtype=np.float64)
        return cls._make(x, x)

    @classmethod
    def from_mid_rad(cls, mid, rad):
        mid = np.asarray(mid, dtype=np.float64)
        rad = np.asarray(rad, dtype=np.float64)
        return cls._make(_down(mid - rad), _up(mid + rad))

    @classmethod
    def enclose(cls, x):
        """Smallest float interval certainly containing the real ``x``.

        ``x`` may be a float, an int, a ``fractions.Fraction`` or a decimal
        string; the last two are converted with one ulp of slack.
        """
        if isinstance(x, (float, np.floating)) or (isinstance(x, int) and abs(x) <= 2**53):
            return cls.point(float(x))
        f = float(x)  # correctly rounded for int, Fraction and str
        if not isinstance(x, str) and Fraction(f) == x:
            return cls.point(f)
        return cls._make(np.asarray(_down(f)), np.asarray(_up(f)))

    @classmethod
    def zeros(cls, shape):
        z = np.zeros(shape)
        return cls._make(z, z.copy())

    # -- array protocol -------------------------------------------------------

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx):
        return Interval._make(self.lo[idx], self.hi[idx])

    def __setitem__(self, idx, value):
        if isinstance(value, Interval):
            self.lo[idx] = value.lo
            self.hi[idx] = value.hi
        else:
            self.lo[idx] = value
            self.hi[idx] = value

    def copy(self):
        return Interval._make(self.lo.copy(), self.hi.copy())

    def reshape(self, *shape):
        return Interval._make(self.lo.reshape(*shape), self.hi.reshape(*shape))

    def swapaxes(self, a, b):
        return Interval._make(self.lo.swapaxes(a, b), self.hi.swapaxes(a, b))

    @property
    def T(self):
        return self.swapaxes(-1, -2)

    def broadcast_to(self, shape):
        return Interval._make(np.broadcast_to(self.lo, shape), np.broadcast_to(self.hi, shape))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __repr__(self):
        if self.lo.ndim == 0:
            if self.is_empty():
                return "Interval(empty)"
            return f"Interval([{self.lo!r}, {self.hi!r}])"
        return f"Interval(lo={self.lo!r}, hi={self.hi!r})"

    # -- geometry ---------------------------------------------------------------

    @property
    def mid(self):
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, 0.5 * (self.lo + self.hi))

    @property
    def rad(self):
        """Upper bound for the radius about :attr:`mid`."""
        m = self.mid
        return _up(np.maximum(self.hi - m, m - self.lo))

    @property
    def width(self):
        return _up(self.hi - self.lo)

    @property
    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    @property
    def mig(self):
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0,
                        np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def is_empty(self):
        e = np.isnan(self.lo)
        return bool(e) if e.ndim == 0 else e

    def contains(self, other):
        """Elementwise ``other ⊆ self`` (``other`` an Interval or a point)."""
        if isinstance(other, Interval):
            return (self.lo <= other.lo) & (other.hi <= self.hi)
        other = np.asarray(other)
        return (self.lo <= other) & (other <= self.hi)

    def interior_contains(self, other):
        if isinstance(other, Interval):
            return (self.lo < other.lo) & (other.hi < self.hi)
        other = np.asarray(other)
        return (self.lo < other) & (other < self.hi)

    def contains_zero(self):
        return (self.lo <= 0.0) & (self.hi >= 0.0)

    def positive(self):
        """Elementwise: every element is strictly positive."""
        return self.lo > 0.0

    def negative(self):
        return self.hi < 0.0

    def hull(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return Interval._make(np.fmin(self.lo, other.lo), np.fmax(self.hi, other.hi))

    def intersect(self, other):
        """Elementwise intersection; empty parts get NaN endpoints.

        A 0-d empty intersection returns :data:`EMPTY`.
        """
        if not isinstance(other, Interval):
            other = Interval.point(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        empty = lo > hi
        if lo.ndim == 0:
            return EMPTY if empty else Interval._make(lo, hi)
        lo = np.where(empty, np.nan, lo)
        hi = np.where(empty, np.nan, hi)
        return Interval._make(lo, hi)

    def overlaps(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        return (self.lo <= other.hi) & (other.lo <= self.hi)

    def split(self, n):
        """Split into ``n`` consecutive pieces along a new leading axis."""
        t = np.linspace(0.0, 1.0, n + 1).reshape((n + 1,) + (1,) * self.ndim)
        edges = self.lo + t * (self.hi - self.lo)
        edges[0] = self.lo
        edges[-1] = self.hi
        edges = np.maximum.accumulate(edges, axis=0)
        return Interval._make(edges[:-1].copy(), edges[1:].copy())

    def widen(self, eps):
        return Interval._make(_down(self.lo - eps), _up(self.hi + eps))

    # -- arithmetic -------------------------------------------------------------

    def __neg__(self):
        return Interval._make(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval._make(_down(self.lo + other.lo), _up(self.hi + other.hi))
        other = np.asarray(other, dtype=np.float64)
        return Interval._make(_down(self.lo + other), _up(self.hi + other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Interval):
            return Interval._make(_down(self.lo - other.hi), _up(self.hi - other.lo))
        other = np.asarray(other, dtype=np.float64)
        return Interval._make(_down(self.lo - other), _up(self.hi - other))

    def __rsub__(self, other):
        other = np.asarray(other, dtype=np.float64)
        return Interval._make(_down(other - self.hi), _up(other - self.lo))

    def __mul__(self, other):
        if isinstance(other, Interval):
            a, b, c, d = self.lo, self.hi, other.lo, other.hi
            p1 = a * c
            p2 = a * d
            p3 = b * c
            p4 = b * d
            lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
            hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
            return Interval._make(_down(lo), _up(hi))
        other = np.asarray(other, dtype=np.float64)
        p1 = self.lo * other
        p2 = self.hi * other
        return Interval._make(_down(np.minimum(p1, p2)), _up(np.maximum(p1, p2)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Interval):
            other = Interval.point(other)
        if np.any(other.contains_zero()):
            raise IntervalDivisionError("division by an interval containing 0")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        q1 = a / c
        q2 = a / d
        q3 = b / c
        q4 = b / d
        lo = np.minimum(np.minimum(q1, q2), np.minimum(q3, q4))
        hi = np.maximum(np.maximum(q1, q2), np.maximum(q3, q4))
        return Interval._make(_down(lo), _up(hi))

    def __rtruediv__(self, other):
        return Interval.point(other) / self

    def sqr(self):
        lo2 = self.mig
        hi2 = self.mag
        return Interval._make(np.maximum(_down(lo2 * lo2), 0.0), _up(hi2 * hi2))

    def __pow__(self, n):
        return self.pow_int(n)

    def pow_int(self, n):
        """Integer power with exact monotonicity case analysis."""
        n = int(n)
        if n < 0:
            return 1.0 / self.pow_int(-n)
        if n == 0:
            return Interval._make(np.ones(self.shape), np.ones(self.shape))
        if n % 2 == 0:
            lo, hi = self.mig, self.mag
            plo, phi = _pow_nonneg(lo, hi, n)
            return Interval._make(np.maximum(plo, 0.0), phi)
        # odd power is monotone increasing
        neg_lo = self.lo < 0
        neg_hi = self.hi < 0
        alo, ahi = _pow_nonneg(np.abs(self.lo), np.abs(self.lo), n)
        blo, bhi = _pow_nonneg(np.abs(self.hi), np.abs(self.hi), n)
        lo = np.where(neg_lo, -ahi, alo)
        hi = np.where(neg_hi, -blo, bhi)
        return Interval._make(lo, hi)

    def sqrt(self):
        if np.any(self.lo < 0.0):
            raise IntervalError("sqrt of an interval with negative part")
        return Interval._make(np.maximum(_down(np.sqrt(self.lo)), 0.0), _up(np.sqrt(self.hi)))

    def inv_sqrt_cubed(self):
        """Enclosure of ``x**(-3/2)`` for strictly positive ``x``."""
        if np.any(self.lo <= 0.0):
            raise IntervalError("x^(-3/2) needs a strictly positive interval")
        s = _up(np.sqrt(self.hi))
        lo = _down(1.0 / _up(s * self.hi))
        s = _down(np.sqrt(self.lo))
        hi = _up(1.0 / _down(s * self.lo))
        return Interval._make(lo, hi)

    def abs(self):
        return Interval._make(self.mig, self.mag)

    # -- reductions -------------------------------------------------------------

    def sum(self, axis=0):
        """Rigorous sum along ``axis``.

        Uses the a priori bound ``|fl(sum) - sum| <= gamma_(n-1) * sum|a_i|``,
        valid for any summation order.
        """
        n = self.lo.shape[axis]
        if n == 0:
            shape = np.delete(np.array(self.shape), axis)
            return Interval.zeros(tuple(shape))
        if n == 1:
            return Interval._make(np.take(self.lo, 0, axis=axis), np.take(self.hi, 0, axis=axis))
        slo = np.sum(self.lo, axis=axis)
        shi = np.sum(self.hi, axis=axis)
        g = 2.1 * n * _U
        elo = np.sum(np.abs(self.lo), axis=axis) * g + n * _TINY
        ehi = np.sum(np.abs(self.hi), axis=axis) * g + n * _TINY
        return Interval._make(_down(slo - elo), _up(shi + ehi))


EMPTY = Interval._make(np.asarray(np.nan), np.asarray(np.nan))
"""Sentinel for an empty scalar intersection."""


def _pow_nonneg(lo, hi, n):
    """Lower bound of lo**n and upper bound of hi**n for lo, hi >= 0."""
    rlo = np.ones_like(lo)
    rhi = np.ones_like(hi)
    blo = lo.copy()
    bhi = hi.copy()
    while n:
        if n & 1:
            rlo = _down(rlo * blo)
            rhi = _up(rhi * bhi)
        n >>= 1
        if n:
            blo = _down(blo * blo)
            bhi = _up(bhi * bhi)
    return np.maximum(rlo, 0.0), rhi


# -- array helpers --------------------------------------------------------------


def as_interval(x):
    return x if isinstance(x, Interval) else Interval.point(x)


def stack(items, axis=0):
    items = [as_interval(i) for i in items]
    return Interval._make(np.stack([i.lo for i in items], axis=axis),
                          np.stack([i.hi for i in items], axis=axis))


def concatenate(items, axis=0):
    items = [as_interval(i) for i in items]
    return Interval._make(np.concatenate([i.lo for i in items], axis=axis),
                          np.concatenate([i.hi for i in items], axis=axis))


def where(mask, a, b):
    a, b = as_interval(a), as_interval(b)
    return Interval._make(np.where(mask, a.lo, b.lo), np.where(mask, a.hi, b.hi))


def matmul(a, b):
    """Interval (or mixed) matrix product over the last two axes."""
    if isinstance(a, Interval) or isinstance(b, Interval):
        a = as_interval(a)
        b = as_interval(b)
        prod = Interval._make(a.lo[..., :, :, None], a.hi[..., :, :, None]) * \
            Interval._make(b.lo[..., None, :, :], b.hi[..., None, :, :])
        return prod.sum(axis=-2)
    # two point matrices: enclose the float product
    prod = Interval.point(np.asarray(a)[..., :, :, None] * np.asarray(b)[..., None, :, :])
    prod = Interval._make(_down(prod.lo), _up(prod.hi))
    return prod.sum(axis=-2)


def matvec(a, v):
    """Product of matrix ``a`` (..., n, m) with vector ``v`` (..., m)."""
    if isinstance(a, Interval) or isinstance(v, Interval):
        a = as_interval(a)
        v = as_interval(v)
        prod = a * Interval._make(v.lo[..., None, :], v.hi[..., None, :])
        return prod.sum(axis=-1)
    p = np.asarray(a) * np.asarray(v)[..., None, :]
    return Interval._make(_down(p), _up(p)).sum(axis=-1)


def identity_like(batch_shape, n):
    eye = np.broadcast_to(np.eye(n), tuple(batch_shape) + (n, n)).copy()
    return Interval._make(eye, eye.copy())


# -- boxes ----------------------------------------------------------------------
# A box is an Interval whose last axis indexes the coordinates.


def box(*components):
    """Build a box from per-coordinate ``(lo, hi)`` pairs or Intervals."""
    parts = [c if isinstance(c, Interval) else Interval(*c) for c in components]
    return stack(parts, axis=-1)


def box_width(b):
    return np.max(b.width, axis=-1)


def box_contains(outer, inner):
    return np.all(outer.contains(inner), axis=-1)


def box_intersect(a, b):
    """Intersection of two boxes; returns :data:`EMPTY` for a single empty box."""
    r = a.intersect(b)
    empty = np.any(np.isnan(r.lo), axis=-1)
    if np.ndim(empty) == 0 and empty:
        return EMPTY
    return r


def split_box(b, n):
    """Split a box into ``n`` pieces per axis, returned along a new leading axis."""
    d = b.shape[-1]
    pieces = [b[..., k].split(n) for k in range(d)]
    grids = np.meshgrid(*[np.arange(n)] * d, indexing="ij")
    idx = [g.ravel() for g in grids]
    return stack([pieces[k][idx[k]] for k in range(d)], axis=-1)


@contextmanager
def iv_precision(bits):
    """Temporarily raise the working precision of ``mpmath.iv``."""
    from mpmath import iv

    old = iv.prec
    iv.prec = bits
    try:
        yield iv
    finally:
        iv.prec = old


def ilog(x):
    """Rigorous natural log of a positive scalar interval (via mpmath.iv)."""
    x = as_interval(x)
    if float(x.lo) <= 0:
        raise IntervalError("log of a non-positive interval")
    with iv_precision(120) as iv:
        r = iv.log(iv.mpf([float(x.lo), float(x.hi)]))
        lo = float(r.a)
        hi = float(r.b)
    return Interval._make(np.asarray(_down(lo)), np.asarray(_up(hi)))


__all__ = [
    "EMPTY", "Interval", "IntervalError", "IntervalDivisionError", "as_interval", "box",
    "box_contains", "box_intersect", "box_width", "concatenate", "identity_like", "ilog", "iv_precision",
    "matmul", "matvec", "split_box", "stack", "where",
]
