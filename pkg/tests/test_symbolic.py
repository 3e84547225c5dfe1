"""Exact transition-matrix algebra: char polys, Sturm counts, path counts, entropy."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcr3bp.symbolic import (SYMBOLS, CoveringGraph, SymbolError, build_matrix, char_poly, count_paths,
                             count_roots, entropy_report, enumerate_words, is_admissible,
                             matrix_from_rows, matrix_power, poly_eval, power_full_shift,
                             spectral_bound, sturm_sequence, supports_disjoint)
from pcr3bp.tsets import load_catalog

GOLDEN = matrix_from_rows([[1, 1], [1, 0]], ("a", "b"))


def _zero_one(n):
    return st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n)


@st.composite
def matrices(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    return matrix_from_rows(draw(_zero_one(n)))


def test_golden_mean_shift():
    assert char_poly(GOLDEN) == [-1, -1, 1]
    b = spectral_bound(char_poly(GOLDEN), Fraction(1, 10**9))
    phi = (1 + 5 ** 0.5) / 2
    assert b.interval.contains(phi)
    assert float(b.b - b.a) <= 1e-9
    assert b.sign_a < 0 < b.sign_b


def test_full_two_shift_has_root_two():
    T = matrix_from_rows([[1, 1], [1, 1]])
    assert char_poly(T) == [0, -2, 1]
    b = spectral_bound(char_poly(T), Fraction(1, 2**20))
    assert b.interval.contains(2.0)


def test_no_root_above_one_is_an_error():
    with pytest.raises(ValueError):
        spectral_bound(char_poly(matrix_from_rows([[0, 1], [0, 0]])))


@settings(max_examples=80)
@given(matrices())
def test_char_poly_matches_numpy(T):
    ref = np.poly(np.array(T.entries, dtype=float))[::-1]
    assert np.allclose(char_poly(T), ref, atol=1e-6)


@settings(max_examples=80)
@given(matrices())
def test_char_poly_is_monic_with_trace(T):
    p = char_poly(T)
    n = T.n
    assert p[n] == 1
    assert p[n - 1] == -sum(T.entries[i][i] for i in range(n))


@settings(max_examples=60)
@given(st.lists(st.integers(-4, 4), min_size=1, max_size=5, unique=True))
def test_sturm_counts_distinct_roots(roots):
    poly = [1]
    for r in roots:
        # multiply by (x - r)
        poly = [(poly[k - 1] if k else 0) - r * (poly[k] if k < len(poly) else 0) for k in range(len(poly) + 1)]
    assert count_roots(poly, Fraction(-9, 2), Fraction(9, 2)) == len(roots)
    assert count_roots(poly, Fraction(1, 2), 5) == sum(1 for r in roots if r >= 1)
    assert all(poly_eval(poly, r) == 0 for r in roots)


def test_sturm_sequence_ends_in_constant_for_squarefree():
    seq = sturm_sequence([-1, -1, 1])
    assert len(seq[-1]) == 1 and seq[-1][0] != 0


@settings(max_examples=50)
@given(matrices(5), st.integers(0, 6), st.data())
def test_path_counts_three_ways(T, k, data):
    i = data.draw(st.integers(0, T.n - 1))
    j = data.draw(st.integers(0, T.n - 1))
    P = matrix_power(T, k)
    words = enumerate_words(T, T.nodes[i], T.nodes[j], k)
    assert P[j][i] == count_paths(T, i, j, k) == len(words)
    assert all(is_admissible(w, T) for w in words)


def test_packaged_graph():
    g = CoveringGraph.load()
    assert len(g.edges) == 22 and g.nodes == SYMBOLS
    T = build_matrix(g)
    assert T[T.index("N1"), T.index("N0")] == 1
    assert T[T.index("N0"), T.index("N1")] == 0
    assert CoveringGraph.from_text(g.to_text()).edges == g.edges
    assert is_admissible(["K0", "K0", "N3", "N4", "N5", "N4~"], T)
    assert not is_admissible(["N0", "N2"], T)
    assert is_admissible(["K0"], T, periodic=True)


def test_unknown_symbols_are_rejected():
    with pytest.raises(SymbolError):
        CoveringGraph(SYMBOLS, {("N0", "Q7")})
    with pytest.raises(SymbolError):
        build_matrix(CoveringGraph.load()).index("Q7")


def test_entropy_report_on_packaged_graph():
    T = build_matrix(CoveringGraph.load())
    rep = entropy_report(T)
    assert len(rep.poly) == 15 and rep.poly[-1] == 1
    assert rep.checks == {"1.62746": -1, "1.62747": 1}
    assert rep.spectral_radius_bound.lo > 1.62746 - 1e-6
    assert rep.spectral_radius_bound.hi < 1.62747
    assert rep.log_bound.contains(float(np.log(1.627461)))
    assert abs(float(rep.log_bound.mid) - 0.487) < 5e-4
    # the largest real root is the spectral radius of this nonnegative matrix
    eig = max(abs(np.linalg.eigvals(np.array(T.entries, dtype=float))))
    assert rep.spectral_radius_bound.contains(eig)
    text = "\n".join(rep.lines())
    assert "ln of the root" in text and "reference polynomial" in text


def test_full_shift_power():
    T = build_matrix(CoveringGraph.load())
    assert power_full_shift(T, ["N0", "N5", "K0", "K2", "K3"], 30)
    # one step is far from a full shift
    assert not power_full_shift(T, ["N0", "N5", "K0", "K2", "K3"], 1)


def test_supports_are_disjoint():
    assert supports_disjoint(load_catalog()) == []
