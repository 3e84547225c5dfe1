"""The planar circular restricted three-body problem in synodical coordinates.

Phase states are ordered ``(x, p_x, y, p_y)`` with ``p_x = dx/dt`` and
``p_y = dy/dt``.  The equations of motion are::

    dx/dt = p_x          dp_x/dt = Omega_x - 2 p_y
    dy/dt = p_y          dp_y/dt = Omega_y + 2 p_x

with effective potential::

    Omega(x, y) = (x^2 + y^2)/2 + m1/|v - (R1, 0)| + m2/|v + (R2, 0)| + C

Primary P1 (mass ``m1``) sits at ``(R1, 0)`` and P2 at ``(-R2, 0)``.  The
offset ``C`` is added, so that for equal masses ``C = -2**(5/3)`` puts
``Omega(L1) = Omega(0, 0) = 0``.

The masses are never stated numerically for the equal-mass case, but
``R1 = m2/(m1+m2)**(2/3) = 2**(-2/3)`` forces ``m1 = m2 = 1``.

Every function accepts boxes as :class:`~pcr3bp.interval.Interval` arrays
whose last axis indexes coordinates, so batches of boxes evaluate together.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from .interval import Interval, IntervalError, as_interval, iv_precision, stack


class SingularityError(IntervalError):
    """A box touches (or gets too close to) one of the primaries."""


class DomainError(IntervalError):
    """A section point lies outside the admissible region (p_y undefined)."""


@dataclass(frozen=True)
class ModelParams:
    """Masses of the primaries plus derived positions and potential offset.

    ``C=None`` selects the Copenhagen offset ``-2**(5/3)``.
    """

    m1: float = 1.0
    m2: float = 1.0
    C: float | None = None
    R1: Interval = field(init=False, repr=False, compare=False)
    R2: Interval = field(init=False, repr=False, compare=False)
    offset: Interval = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        with iv_precision(128) as iv:
            m1 = iv.mpf(float(self.m1))
            m2 = iv.mpf(float(self.m2))
            total = (m1 + m2) ** (iv.mpf(2) / 3)
            r1 = m2 / total
            r2 = m1 / total
            c = -(iv.mpf(2) ** (iv.mpf(5) / 3)) if self.C is None else iv.mpf(float(self.C))
            # outward conversion to double
            object.__setattr__(self, "R1", _outward(r1))
            object.__setattr__(self, "R2", _outward(r2))
            object.__setattr__(self, "offset", _outward(c))

    @classmethod
    def copenhagen(cls):
        return cls()

    @property
    def primaries(self):
        """Midpoint abscissae of P1 and P2."""
        return float(self.R1.mid), -float(self.R2.mid)


def _outward(x):
    lo = float(x.a)
    hi = float(x.b)
    return Interval(np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf))


DEFAULT_PARAMS = ModelParams()


def energy(h):
    """Interval enclosing the energy level ``h`` read as a decimal number."""
    if isinstance(h, Interval):
        return h
    if isinstance(h, float):
        h = repr(h)
    return Interval.enclose(Fraction(h))


@dataclass(frozen=True)
class Equilibria:
    """Interval enclosures of the five libration points (as 2-boxes)."""

    L1: Interval
    L2: Interval
    L3: Interval
    L4: Interval
    L5: Interval

    def as_dict(self):
        return {"L1": self.L1, "L2": self.L2, "L3": self.L3, "L4": self.L4, "L5": self.L5}


# -- potential and vector field ---------------------------------------------------


def _dist2(v, params):
    x, y = v[..., 0], v[..., 1]
    y2 = y.sqr()
    r1 = (x - params.R1).sqr() + y2
    r2 = (x + params.R2).sqr() + y2
    if np.any(r1.lo <= 0.0) or np.any(r2.lo <= 0.0):
        raise SingularityError("box contains a primary")
    return x, y, r1, r2


def omega(v, params=DEFAULT_PARAMS):
    """Enclosure of the effective potential over the 2-box ``v``."""
    v = as_interval(v)
    x, y, r1, r2 = _dist2(v, params)
    return (x.sqr() + y.sqr()) * 0.5 + params.m1 / r1.sqrt() + params.m2 / r2.sqrt() + params.offset


def grad_omega(v, params=DEFAULT_PARAMS):
    """Enclosure of ``(Omega_x, Omega_y)`` over ``v``."""
    v = as_interval(v)
    x, y, r1, r2 = _dist2(v, params)
    q1 = r1.inv_sqrt_cubed() * params.m1
    q2 = r2.inv_sqrt_cubed() * params.m2
    ox = x - (x - params.R1) * q1 - (x + params.R2) * q2
    oy = y - y * (q1 + q2)
    return stack([ox, oy], axis=-1)


def vector_field(s, params=DEFAULT_PARAMS):
    """Enclosure of the right-hand side over the 4-box ``s``."""
    s = as_interval(s)
    g = grad_omega(stack([s[..., 0], s[..., 2]], axis=-1), params)
    px, py = s[..., 1], s[..., 3]
    return stack([px, g[..., 0] - py * 2.0, py, g[..., 1] + px * 2.0], axis=-1)


def jacobi(s, params=DEFAULT_PARAMS):
    """Jacobi integral ``p_x^2 + p_y^2 - 2 Omega``."""
    s = as_interval(s)
    om = omega(stack([s[..., 0], s[..., 2]], axis=-1), params)
    return s[..., 1].sqr() + s[..., 3].sqr() - om * 2.0


def section_radicand(x, px, h, params=DEFAULT_PARAMS):
    x = as_interval(x)
    px = as_interval(px)
    v = stack([x, Interval.zeros(x.shape)], axis=-1)
    return omega(v, params) * 2.0 + energy(h) - px.sqr()


def py_on_section(x, px, h, sign=1, params=DEFAULT_PARAMS):
    """``p_y = sign * sqrt(2 Omega(x, 0) + h - p_x^2)`` on the section ``y = 0``.

    Raises :class:`DomainError` unless the radicand is certainly positive.
    """
    rad = section_radicand(x, px, h, params)
    if np.any(rad.lo <= 0.0):
        raise DomainError("2*Omega(x,0) + h - p_x^2 is not certainly positive")
    r = rad.sqrt()
    return r if sign > 0 else -r


def section_lift(x, px, h, sign=1, params=DEFAULT_PARAMS):
    """4-box ``(x, p_x, 0, p_y)`` on the energy level ``h``."""
    x = as_interval(x)
    px = as_interval(px)
    py = py_on_section(x, px, h, sign, params)
    return stack([x, px, Interval.zeros(x.shape), py], axis=-1)


# -- libration points ---------------------------------------------------------------


def _omega_x_axis(x, params):
    """``Omega_x(x, 0)`` and ``Omega_xx(x, 0)`` for an interval ``x`` off the primaries."""
    x = as_interval(x)
    d1 = x - params.R1
    d2 = x + params.R2
    if np.any(d1.contains_zero()) or np.any(d2.contains_zero()):
        raise SingularityError("interval contains a primary")
    a1 = d1.abs()
    a2 = d2.abs()
    # (x - R1)/|x - R1|^3 = sign/(x - R1)^2
    f = x - params.m1 * (np.sign(d1.mid) / d1.sqr()) - params.m2 * (np.sign(d2.mid) / d2.sqr())
    df = 1.0 + 2.0 * params.m1 / a1.pow_int(3) + 2.0 * params.m2 / a2.pow_int(3)
    return f, df


def _bisect_root(f, a, b, tol=1e-15, max_iter=200):
    """Shrink a bracket ``[a, b]`` with ``f(a)``, ``f(b)`` of certified opposite sign.

    Midpoints whose sign can not be decided split the search into two one-sided
    searches, so the result is the tightest bracket the arithmetic can certify.
    """
    fa = f(a)
    fb = f(b)
    sa = 1 if fa.lo > 0 else (-1 if fa.hi < 0 else 0)
    sb = 1 if fb.lo > 0 else (-1 if fb.hi < 0 else 0)
    if sa == 0 or sb == 0 or sa == sb:
        raise IntervalError(f"no certified sign change on [{a}, {b}]")

    def side(lo, hi, keep_sign, move_lo):
        # moves the endpoint that has sign keep_sign towards the root
        for _ in range(max_iter):
            m = 0.5 * (lo + hi)
            if m in (lo, hi) or hi - lo <= tol * max(1.0, abs(m)):
                break
            fm = f(m)
            sm = 1 if fm.lo > 0 else (-1 if fm.hi < 0 else 0)
            if sm == keep_sign:
                if move_lo:
                    lo = m
                else:
                    hi = m
            else:
                if move_lo:
                    hi = m
                else:
                    lo = m
        return lo if move_lo else hi

    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if m in (a, b) or b - a <= tol * max(1.0, abs(m)):
            break
        fm = f(m)
        sm = 1 if fm.lo > 0 else (-1 if fm.hi < 0 else 0)
        if sm == sa:
            a = m
        elif sm == sb:
            b = m
        else:
            a = side(a, m, sa, True)
            b = side(m, b, sb, False)
            break
    return Interval(a, b)


def _seed_collinear(params):
    from scipy.optimize import brentq

    r1 = float(params.R1.mid)
    r2 = float(params.R2.mid)
    m1, m2 = params.m1, params.m2

    def fx(x):
        return x - m1 * (x - r1) / abs(x - r1) ** 3 - m2 * (x + r2) / abs(x + r2) ** 3

    eps = 1e-9
    return (brentq(fx, -r2 + eps, r1 - eps, xtol=1e-15),
            brentq(fx, r1 + eps, r1 + 3.0, xtol=1e-15),
            brentq(fx, -r2 - 3.0, -r2 - eps, xtol=1e-15))


def equilibria_and_h0(params=DEFAULT_PARAMS):
    """Enclose L1..L5 and the critical energy ``h0 = -2 Omega(L2)``.

    Collinear points come from non-rigorous seeds refined by certified
    bisection on ``Omega_x(x, 0)``; uniqueness inside each bracket follows from
    ``Omega_xx > 0`` (checked on the bracket).  L4/L5 are the equilateral
    vertices built in interval arithmetic.
    """
    seeds = _seed_collinear(params)
    boxes = []
    for s in seeds:
        def f(x):
            return _omega_x_axis(Interval.point(x), params)[0]
        a, b = s - 1e-9 * max(1.0, abs(s)), s + 1e-9 * max(1.0, abs(s))
        root = _bisect_root(f, a, b)
        slope = _omega_x_axis(root, params)[1]
        if not slope.lo > 0:
            raise IntervalError("could not certify uniqueness of a collinear point")
        boxes.append(stack([root, Interval.point(0.0)], axis=-1))
    L1, L2, L3 = boxes
    half = Interval.point(0.5)
    xm = (params.R1 - params.R2) * half
    ym = (params.R1 + params.R2) * (Interval.point(3.0).sqrt() * half)
    L4 = stack([xm, ym], axis=-1)
    L5 = stack([xm, -ym], axis=-1)
    h0 = omega(L2, params) * (-2.0)
    return Equilibria(L1, L2, L3, L4, L5), h0


def taylor_coefficients(s, order, params=DEFAULT_PARAMS):
    """Enclosures of the normalised Taylor coefficients ``x^(j)/j!``, ``j = 0..order``.

    Returns a list of 4-boxes; entry ``j`` encloses the ``j``-th coefficient of
    every solution starting in ``s``.
    """
    from .taylor import series

    coeffs = series(as_interval(s), order, params)
    return [coeffs[j] for j in range(order + 1)]


__all__ = [
    "DEFAULT_PARAMS", "DomainError", "Equilibria", "ModelParams", "SingularityError", "energy",
    "equilibria_and_h0", "grad_omega", "jacobi", "omega", "py_on_section", "section_lift",
    "section_radicand", "taylor_coefficients", "vector_field",
]
