"""Transition matrices, admissible words and entropy bounds.

Everything here is exact: matrices hold Python ints, the characteristic
polynomial comes from the Faddeev-LeVerrier recurrence over ``Fraction``
and the dominant root is isolated with a Sturm sequence and bisection on
rationals.  Floats appear only when the final root bracket is rounded
outward for reporting.

Convention: ``T[j][i] = 1`` iff symbol ``i`` covers symbol ``j`` (column =
source, row = target), so ``(T^k)[j][i]`` counts admissible words of
length ``k + 1`` from ``i`` to ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

import numpy as np

from .interval import Interval, ilog

SYMBOLS = ("N0", "N1", "N2", "N3", "N4", "N5", "N1~", "N2~", "N3~", "N4~", "K0", "K1", "K2", "K3")

# characteristic polynomial commonly quoted for this graph, coefficients of x^0 .. x^14
REFERENCE_POLY = (1, -2, 0, 2, 1, -3, -3, 7, -4, 4, -5, 0, 5, -4, 1)


class SymbolError(KeyError):
    """A word or edge uses a symbol outside the alphabet."""


@dataclass
class CoveringGraph:
    nodes: tuple
    edges: set  # {(source, target)}

    def __post_init__(self):
        self.nodes = tuple(self.nodes)
        self.edges = set(self.edges)
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise SymbolError(f"edge {a}->{b} uses an unknown symbol")

    @classmethod
    def from_text(cls, text, nodes=SYMBOLS):
        edges = set()
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                a, b = line.split()
                edges.add((a, b))
        return cls(nodes, edges)

    @classmethod
    def load(cls, path=None, nodes=SYMBOLS):
        """Edge list file, one ``source target`` pair per line (default: packaged list)."""
        if path is None:
            text = resources.files("pcr3bp").joinpath("data/edges.txt").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return cls.from_text(text, nodes)

    def to_text(self):
        lines = ["# source target"]
        order = {s: k for k, s in enumerate(self.nodes)}
        for a, b in sorted(self.edges, key=lambda e: (order[e[0]], order[e[1]])):
            lines.append(f"{a} {b}")
        return "\n".join(lines) + "\n"


@dataclass
class TransitionMatrix:
    nodes: tuple
    entries: list  # list of rows of ints

    @property
    def n(self):
        return len(self.nodes)

    def index(self, s):
        try:
            return self.nodes.index(s)
        except ValueError:
            raise SymbolError(f"unknown symbol {s!r}") from None

    def __getitem__(self, ji):
        j, i = ji
        return self.entries[j][i]

    def as_array(self):
        return np.array(self.entries, dtype=object)

    def transpose(self):
        return TransitionMatrix(self.nodes, [list(r) for r in zip(*self.entries)])

    def to_text(self):
        """Rows are targets, columns sources."""
        w = max(len(s) for s in self.nodes)
        head = " " * (w + 1) + " ".join(s.rjust(w) for s in self.nodes)
        rows = [s.ljust(w) + " " + " ".join(str(v).rjust(w) for v in r)
                for s, r in zip(self.nodes, self.entries)]
        return "\n".join([head] + rows) + "\n"


def build_matrix(g):
    n = len(g.nodes)
    idx = {s: k for k, s in enumerate(g.nodes)}
    T = [[0] * n for _ in range(n)]
    for a, b in g.edges:
        T[idx[b]][idx[a]] = 1
    return TransitionMatrix(g.nodes, T)


def matrix_from_rows(rows, nodes=None):
    rows = [list(map(int, r)) for r in rows]
    nodes = tuple(nodes) if nodes is not None else tuple(str(k) for k in range(len(rows)))
    return TransitionMatrix(nodes, rows)


def is_admissible(word, T, periodic=False):
    """Every consecutive pair (and the wrap-around pair if ``periodic``) is an edge."""
    idx = [T.index(s) for s in word]
    pairs = list(zip(idx, idx[1:]))
    if periodic and idx:
        pairs.append((idx[-1], idx[0]))
    return all(T.entries[b][a] == 1 for a, b in pairs)


def _matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return [[sum(A[i][k] * B[k][j] for k in range(m)) for j in range(p)] for i in range(n)]


def matrix_power(T, k):
    """Exact ``T^k`` by repeated squaring (Python big ints)."""
    M = T.entries if isinstance(T, TransitionMatrix) else T
    n = len(M)
    R = [[int(i == j) for j in range(n)] for i in range(n)]
    B = [list(r) for r in M]
    while k:
        if k & 1:
            R = _matmul(R, B)
        B = _matmul(B, B)
        k >>= 1
    return R


def char_poly(T):
    """Integer coefficients ``[c_0, ..., c_n]`` of ``det(x I - T)`` (ascending powers).

    Faddeev-LeVerrier: ``M_1 = I, c_n = 1``; ``c_(n-k) = -tr(T M_k) / k`` and
    ``M_(k+1) = T M_k + c_(n-k) I``.  For an integer matrix every ``M_k`` is
    an integer matrix and the divisions are exact, so plain ints suffice.
    """
    A = T.entries if isinstance(T, TransitionMatrix) else T
    n = len(A)
    A = [[int(v) for v in r] for r in A]
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        AM = _matmul(A, M)
        tr = sum(AM[i][i] for i in range(n))
        if tr % k:
            raise ArithmeticError("non-integer characteristic polynomial coefficient")
        coeffs[n - k] = -tr // k
        M = AM
        for i in range(n):
            M[i][i] += coeffs[n - k]
    return coeffs


def poly_eval(poly, x):
    """Exact value at a rational (``x`` given as Fraction, int or decimal string)."""
    x = Fraction(x)
    acc = Fraction(0)
    for c in reversed(poly):
        acc = acc * x + c
    return acc


def poly_sign(poly, x):
    v = poly_eval(poly, x)
    return (v > 0) - (v < 0)


def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _polyrem(a, b):
    a = [Fraction(c) for c in a]
    b = [Fraction(c) for c in _trim(b)]
    while len(_trim(a)) >= len(b) and any(a):
        a = _trim(a)
        q = a[-1] / b[-1]
        shift = len(a) - len(b)
        for k, c in enumerate(b):
            a[k + shift] -= q * c
        a.pop()
    return _trim(a) if a else [Fraction(0)]


def sturm_sequence(poly):
    p0 = [Fraction(c) for c in _trim(poly)]
    p1 = [Fraction(k * c) for k, c in enumerate(p0)][1:]
    seq = [p0, p1]
    while len(seq[-1]) > 1 or seq[-1][0] != 0:
        r = _polyrem(seq[-2], seq[-1])
        if len(r) == 1 and r[0] == 0:
            break
        seq.append([-c for c in r])
    return seq


def _variations(seq, x):
    signs = [poly_sign(p, x) for p in seq]
    signs = [s for s in signs if s]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_roots(poly, a, b):
    """Number of distinct real roots in ``(a, b]`` (Sturm)."""
    seq = sturm_sequence(poly)
    return _variations(seq, Fraction(a)) - _variations(seq, Fraction(b))


def spectral_bound(poly, tol=Fraction(1, 10**6), lower=1):
    """Interval containing the largest real root of ``poly``, which must exceed ``lower``.

    The bracket ``[a, b]`` has ``poly(a)``, ``poly(b)`` of opposite strict
    sign, no root in ``(b, inf)`` and width at most ``tol``; it is returned
    rounded outward to floats together with the exact bracket.
    """
    poly = _trim(poly)
    lead = Fraction(poly[-1])
    cauchy = 1 + max(abs(Fraction(c) / lead) for c in poly[:-1])
    a, b = Fraction(lower), Fraction(cauchy).limit_denominator(1) + 1
    seq = sturm_sequence(poly)
    vb = _variations(seq, b)
    if _variations(seq, a) - vb == 0:
        raise ValueError(f"no real root above {lower}")
    # shrink from the left while keeping the largest root inside (a, b]
    while b - a > tol:
        m = (a + b) / 2
        vm = _variations(seq, m)
        if vm - vb > 0:
            a = m
        else:
            b, vb = m, vm
    if poly_sign(poly, b) == 0:
        # b is the root itself; widen a touch so both ends are strict
        b += tol / 4
    sa, sb = poly_sign(poly, a), poly_sign(poly, b)
    if sa == 0 or sb == 0 or sa == sb:
        raise ArithmeticError("root bracket lost its sign change")
    lo = np.nextafter(float(a), -np.inf)
    hi = np.nextafter(float(b), np.inf)
    return RootBracket(Interval(lo, hi), a, b, sa, sb)


@dataclass
class RootBracket:
    interval: Interval
    a: Fraction
    b: Fraction
    sign_a: int
    sign_b: int


@dataclass
class EntropyReport:
    poly: list
    reference_match: bool
    mismatches: list  # (power, derived, reference)
    root: RootBracket
    spectral_radius_bound: Interval
    log_bound: Interval
    checks: dict  # decimal point -> sign
    note: str

    def lines(self):
        terms = " ".join(f"{c:+d}x^{k}" for k, c in enumerate(self.poly) if c)
        r = self.spectral_radius_bound
        lg = self.log_bound
        out = [
            f"char_poly: {terms}",
            f"matches reference polynomial: {'yes' if self.reference_match else 'no'}",
        ]
        for k, d, p in self.mismatches:
            out.append(f"  coefficient x^{k}: derived {d}, reference {p}")
        for x, s in self.checks.items():
            out.append(f"sign p({x}) = {'+' if s > 0 else '-' if s < 0 else '0'}")
        out += [
            f"largest root in [{r.lo:.10f}, {r.hi:.10f}]",
            f"spectral radius lower bound: {float(self.root.a):.10f}",
            f"ln of the root in [{lg.lo:.10f}, {lg.hi:.10f}]",
            f"note: {self.note}",
        ]
        return out


ENTROPY_NOTE = ("topological entropy is at least ln of the spectral radius; the radius itself is "
                "also listed since it is the number usually quoted")


def entropy_report(T, tol=Fraction(1, 10**6), points=("1.62746", "1.62747")):
    poly = char_poly(T)
    root = spectral_bound(poly, tol)
    # for a nonnegative matrix the spectral radius is the largest real root
    lam = root.interval
    ref = list(REFERENCE_POLY)
    mism = []
    if len(poly) == len(ref):
        mism = [(k, d, p) for k, (d, p) in enumerate(zip(poly, ref)) if d != p]
        match = not mism
    else:
        match = False
    checks = {x: poly_sign(poly, x) for x in points}
    return EntropyReport(poly, match, mism, root, lam, ilog(lam), checks, ENTROPY_NOTE)


def power_full_shift(T, symbols, k):
    """True iff every entry of ``T^k`` between the given symbols is positive."""
    idx = [T.index(s) for s in symbols]
    P = matrix_power(T, k)
    return all(P[j][i] > 0 for i in idx for j in idx)


def count_paths(T, i, j, k):
    """Admissible words of length ``k + 1`` from ``i`` to ``j`` by enumeration."""
    n = T.n
    ii, jj = T.index(i) if isinstance(i, str) else i, T.index(j) if isinstance(j, str) else j
    frontier = {ii: 1}
    for _ in range(k):
        nxt = {}
        for s, c in frontier.items():
            for t in range(n):
                if T.entries[t][s]:
                    nxt[t] = nxt.get(t, 0) + c
        frontier = nxt
    return frontier.get(jj, 0)


def enumerate_words(T, i, j, k):
    """All admissible words ``i ... j`` with ``k`` transitions (explicit list)."""
    ii = T.index(i)
    jj = T.index(j)
    out = []

    def rec(word):
        if len(word) == k + 1:
            if word[-1] == jj:
                out.append(tuple(T.nodes[w] for w in word))
            return
        s = word[-1]
        for t in range(T.n):
            if T.entries[t][s]:
                rec(word + [t])

    rec([ii])
    return out


def supports_disjoint(catalog, symbols=SYMBOLS):
    """Pairwise disjointness of the t-set supports (separating-axis test in floats
    with a safety margin; adequate for the well separated catalogue)."""
    def poly(t):
        c = np.array(t.center)
        u = np.array(t.u)
        v = np.array(t.v)
        return np.array([c + u + v, c - u + v, c - u - v, c + u - v])

    def separated(P, Q):
        for R in (P, Q):
            for k in range(4):
                e = R[(k + 1) % 4] - R[k]
                nrm = np.array([-e[1], e[0]])
                a = P @ nrm
                b = Q @ nrm
                pad = 1e-12 * (np.abs(a).max() + np.abs(b).max() + 1)
                if a.max() + pad < b.min() or b.max() + pad < a.min():
                    return True
        return False

    bad = []
    for x in range(len(symbols)):
        for y in range(x + 1, len(symbols)):
            if not separated(poly(catalog[symbols[x]]), poly(catalog[symbols[y]])):
                bad.append((symbols[x], symbols[y]))
    return bad


__all__ = [
    "CoveringGraph", "ENTROPY_NOTE", "EntropyReport", "REFERENCE_POLY", "RootBracket", "SYMBOLS", "SymbolError",
    "TransitionMatrix", "build_matrix", "char_poly", "count_paths", "count_roots", "entropy_report",
    "enumerate_words", "is_admissible", "matrix_from_rows", "matrix_power", "poly_eval", "poly_sign",
    "power_full_shift", "spectral_bound", "sturm_sequence", "supports_disjoint",
]
