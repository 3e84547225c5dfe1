"""Extended-precision reference integrator (test-only, non-rigorous).

Plain Taylor series method on gmpy2 ``mpfr`` numbers at 256 bits, i.e.
well above four times double precision.  Used to check that validated
enclosures contain the true solution.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpfr

PREC = 256
TOL_BITS = 100  # local truncation target, far below double precision
_CTX = gmpy2.context(precision=PREC)


def _consts(m1=1, m2=1):
    with gmpy2.context(_CTX):
        tot = (mpfr(m1) + mpfr(m2)) ** (mpfr(2) / 3)
        return mpfr(m1), mpfr(m2), mpfr(m2) / tot, mpfr(m1) / tot


def _conv(a, b, k):
    return sum(a[j] * b[k - j] for j in range(k + 1))


def coefficients(state, order, m1=1, m2=1):
    """Taylor coefficients of the solution through ``state`` (list of mpfr)."""
    M1, M2, R1, R2 = _consts(m1, m2)
    with gmpy2.context(_CTX):
        X, PX, Y, PY = ([mpfr(v)] for v in state)
        U1 = [X[0] - R1]
        U2 = [X[0] + R2]
        S1, S2, Q1, Q2 = [], [], [], []
        for k in range(order + 1):
            if k:
                U1.append(X[k])
                U2.append(X[k])
            yy = _conv(Y, Y, k)
            S1.append(_conv(U1, U1, k) + yy)
            S2.append(_conv(U2, U2, k) + yy)
            for S, Q in ((S1, Q1), (S2, Q2)):
                if k == 0:
                    Q.append(S[0] ** mpfr(-1.5))
                else:
                    acc = sum((mpfr(-1.5) * (k - j) - j) * S[k - j] * Q[j] for j in range(k))
                    Q.append(acc / (k * S[0]))
            if k == order:
                break
            ox = X[k] - M1 * _conv(U1, Q1, k) - M2 * _conv(U2, Q2, k)
            oy = Y[k] - M1 * _conv(Y, Q1, k) - M2 * _conv(Y, Q2, k)
            X.append(PX[k] / (k + 1))
            Y.append(PY[k] / (k + 1))
            PX.append((ox - 2 * PY[k]) / (k + 1))
            PY.append((oy + 2 * PX[k]) / (k + 1))
        return [X, PX, Y, PY]


def flow(state, t, order=40, max_step=0.25, m1=1, m2=1):
    """Solution at time ``t`` (may be negative) from ``state`` (floats or mpfr).

    Steps are half the estimated radius of convergence scaled by
    ``2**(-TOL_BITS / order)``, so the local truncation error stays near
    ``2**-TOL_BITS``, some fourteen orders of magnitude below double precision.
    Returns a list of four mpfr values.
    """
    with gmpy2.context(_CTX):
        z = [mpfr(v) for v in state]
        t = mpfr(t)
        sign = 1 if t >= 0 else -1
        left = abs(t)
        eps = mpfr(2) ** -TOL_BITS
        while left > 0:
            c = coefficients(z, order, m1, m2)
            mag = max(abs(c[i][order]) for i in range(4)) + mpfr(2) ** -300
            mag1 = max(abs(c[i][order - 1]) for i in range(4)) + mpfr(2) ** -300
            rho = min(mag ** (mpfr(-1) / order), mag1 ** (mpfr(-1) / (order - 1)))
            h = min(mpfr(max_step), rho * eps ** (mpfr(1) / order) / 2, left)
            hs = h * sign
            z = [_horner(c[i], hs) for i in range(4)]
            left -= h
        return z


def _horner(c, t):
    acc = c[-1]
    for v in reversed(c[:-1]):
        acc = acc * t + v
    return acc


def flow_float(state, t, **kw):
    return [float(v) for v in flow(state, t, **kw)]
