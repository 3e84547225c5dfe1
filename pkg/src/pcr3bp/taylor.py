"""Taylor coefficients of solutions by automatic differentiation recurrences.

Coefficients are normalised, ``c_j = x^(j)(0)/j!``.  The inverse-distance
terms ``q = s^(-3/2)`` with ``s = (x - R)^2 + y^2`` use the power rule
recurrence obtained from ``q' s = -3/2 s' q``::

    q_k = 1/(k s_0) * sum_{j<k} (-3/2 (k - j) - j) s_(k-j) q_j

so one order costs O(k) interval products per series and a whole expansion
of order K costs O(K^2).

:func:`series` works on batches: ``state`` has shape ``(*batch, 4)`` and the
result has shape ``(order + 1, *batch, 4)``.  With ``jacobian=True`` every
coefficient also carries its derivatives with respect to the initial state
(forward-mode AD on top of the recurrence), shape ``(order + 1, *batch, 4, 5)``
where index 0 of the last axis is the value.
"""

from __future__ import annotations

import numpy as np

from .interval import Interval, as_interval, concatenate, stack
from .model import DEFAULT_PARAMS, SingularityError

ALPHA = -1.5


class _Series:
    """Preallocated coefficient storage for one scalar series."""

    __slots__ = ("lo", "hi")

    def __init__(self, n, shape):
        self.lo = np.zeros((n,) + shape)
        self.hi = np.zeros((n,) + shape)

    def __getitem__(self, idx):
        return Interval._make(self.lo[idx], self.hi[idx])

    def set(self, k, v):
        self.lo[k] = v.lo
        self.hi[k] = v.hi


def _conv(a, b, k):
    """``sum_{j=0..k} a_j b_(k-j)`` for plain series."""
    return (a[: k + 1] * b[k::-1]).sum(axis=0)


def _conv_sq(a, k):
    """``sum_{j=0..k} a_j a_(k-j)`` exploiting symmetry (tighter than _conv)."""
    half = (k + 1) // 2
    total = None
    if half:
        total = (a[:half] * a[k:k - half:-1]).sum(axis=0) * 2.0
    if k % 2 == 0:
        sq = a[k // 2].sqr()
        total = sq if total is None else total + sq
    return total


def _wconv(a, b, k, w):
    """``sum_{j=0..k-1} w_j a_(k-j) b_j`` with exact float weights ``w``."""
    prod = a[k:0:-1] * b[:k]
    w = w.reshape((k,) + (1,) * (prod.ndim - 1))
    return (prod * w).sum(axis=0)


# dual versions: trailing axis holds (value, d/ds_1, ..., d/ds_n)


def _dconv(a, b, k):
    x = a[: k + 1]
    y = b[k::-1]
    val = x[..., :1] * y[..., :1]
    d1 = x[..., 1:] * y[..., :1]
    d2 = x[..., :1] * y[..., 1:]
    v = val.sum(axis=0)
    d = concatenate([d1, d2], axis=0).sum(axis=0)
    return concatenate([v, d], axis=-1)


def _dconv_sq(a, k):
    x = a[: k + 1]
    y = a[k::-1]
    val = x[..., :1] * y[..., :1]
    d = x[..., 1:] * y[..., :1]
    return concatenate([val.sum(axis=0), d.sum(axis=0) * 2.0], axis=-1)


def _dwconv(a, b, k, w):
    x = a[k:0:-1]
    y = b[:k]
    w = w.reshape((k,) + (1,) * (x.ndim - 1))
    val = x[..., :1] * y[..., :1] * w
    d1 = x[..., 1:] * y[..., :1] * w
    d2 = x[..., :1] * y[..., 1:] * w
    return concatenate([val.sum(axis=0), concatenate([d1, d2], axis=0).sum(axis=0)], axis=-1)


def _ddiv(a, b):
    q = a[..., :1] / b[..., :1]
    der = (a[..., 1:] - q * b[..., 1:]) / b[..., :1]
    return concatenate([q, der], axis=-1)


def _check_distance(s0, floor2):
    if np.any(s0.lo <= floor2):
        raise SingularityError("enclosure comes closer to a primary than the allowed floor")


def series(state, order, params=DEFAULT_PARAMS, jacobian=False, floor=0.0):
    """Taylor coefficients ``0..order`` of solutions starting in ``state``.

    ``floor`` is a lower bound on the distance to either primary; an enclosure
    reaching closer raises :class:`SingularityError`.
    """
    state = as_interval(state)
    batch = state.shape[:-1]
    n = order + 1
    floor2 = floor * floor
    m1, m2 = params.m1, params.m2
    if jacobian:
        shape = batch + (5,)
        conv, conv_sq, wconv = _dconv, _dconv_sq, _dwconv
    else:
        shape = batch
        conv, conv_sq, wconv = _conv, _conv_sq, _wconv

    X, PX, Y, PY = (_Series(n, shape) for _ in range(4))
    U1, U2, S1, S2, Q1, Q2 = (_Series(n, shape) for _ in range(6))

    for comp, ser in enumerate((X, PX, Y, PY)):
        v = state[..., comp]
        if jacobian:
            d = np.zeros(batch + (4,))
            d[..., comp] = 1.0
            v = concatenate([v[..., None], Interval.point(d)], axis=-1)
        ser.set(0, v)

    def lift0(v, shift):
        if jacobian:
            return concatenate([v[..., :1] + shift, v[..., 1:]], axis=-1)
        return v + shift

    U1.set(0, lift0(X[0], -params.R1))
    U2.set(0, lift0(X[0], params.R2))

    for k in range(n):
        if k > 0:
            U1.set(k, X[k])
            U2.set(k, X[k])
        yy = conv_sq(Y, k)
        S1.set(k, conv_sq(U1, k) + yy)
        S2.set(k, conv_sq(U2, k) + yy)
        if k == 0:
            for S, Q in ((S1, Q1), (S2, Q2)):
                s0 = S[0]
                sval = s0[..., 0] if jacobian else s0
                _check_distance(sval, floor2)
                if sval.lo.size and np.any(sval.lo <= 0.0):
                    raise SingularityError("enclosure contains a primary")
                q0 = sval.inv_sqrt_cubed()
                if jacobian:
                    # dq = -3/2 q/s ds
                    dq = (q0 * ALPHA / sval)[..., None] * s0[..., 1:]
                    Q.set(0, concatenate([q0[..., None], dq], axis=-1))
                else:
                    Q.set(0, q0)
        else:
            j = np.arange(k, dtype=np.float64)
            w = ALPHA * (k - j) - j
            for S, Q in ((S1, Q1), (S2, Q2)):
                num = wconv(S, Q, k, w)
                den = S[0] * float(k)
                Q.set(k, _ddiv(num, den) if jacobian else num / den)
        if k == n - 1:
            break
        w1 = conv(U1, Q1, k)
        w2 = conv(U2, Q2, k)
        v1 = conv(Y, Q1, k)
        v2 = conv(Y, Q2, k)
        ox = X[k] - w1 * m1 - w2 * m2
        oy = Y[k] - v1 * m1 - v2 * m2
        inv = 1.0 / (k + 1)
        px_k, py_k = PX[k], PY[k]
        X.set(k + 1, px_k * inv)
        Y.set(k + 1, py_k * inv)
        PX.set(k + 1, (ox - py_k * 2.0) * inv)
        PY.set(k + 1, (oy + px_k * 2.0) * inv)

    return stack([X[:], PX[:], Y[:], PY[:]], axis=-1 if not jacobian else -2)


def evaluate(coeffs, t):
    """Horner evaluation of ``sum_j c_j t^j`` along the leading axis.

    ``t`` may be a float, an array broadcasting against one coefficient, or
    an Interval (time ranges for tube enclosures).
    """
    t = as_interval(t)
    acc = coeffs[-1]
    for j in range(len(coeffs.lo) - 2, -1, -1):
        acc = acc * t + coeffs[j]
    return acc

