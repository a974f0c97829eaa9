from fractions import Fraction

import pytest
from flint import fmpq, fmpq_mat
from hypothesis import given, settings, strategies as st

from fects import linalg as la
from oracles import bareiss_rank, fraction_det, fraction_nullspace, fraction_rref

small = st.integers(-4, 4)


@st.composite
def matrices(draw, max_rows=5, max_cols=5):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    rows = draw(st.lists(st.lists(small, min_size=c, max_size=c), min_size=r, max_size=r))
    return rows


def to_fmpq(rows):
    return la.mat([[fmpq(v) for v in r] for r in rows])


def as_fractions(M):
    return [[Fraction(int(v.p), int(v.q)) for v in row] for row in la.to_rows(M)]


def test_rank_examples():
    assert la.rank(la.eye(5)) == 5
    assert la.rank(la.zeros(3, 4)) == 0
    vander = la.mat([[x ** j for j in range(4)] for x in range(4)])
    assert la.rank(vander) == 4


def test_nullspace_of_row_of_ones():
    N = la.nullspace(la.mat([[1, 1]]))
    assert N.ncols() == 1
    a, b = la.col_list(N)
    assert a == -b and a != 0


def test_solve_identity():
    b = la.column([1, fmpq(2, 3), -5])
    assert la.solve(la.eye(3), b) == b


def test_solve_inconsistent():
    with pytest.raises(la.NoSolution):
        la.solve(la.mat([[1, 1], [1, 1]]), la.column([1, 2]))


def test_intersection_of_axes():
    e1 = la.Subspace(3, la.column([1, 0, 0]))
    e2 = la.Subspace(3, la.column([0, 1, 0]))
    assert la.intersect(e1, e2).dim == 0
    assert la.contains(e1, e1)
    assert not la.contains(e1, e2)


def test_ambient_mismatch():
    with pytest.raises(la.AmbientMismatch):
        la.contains(la.Subspace.whole(2), la.Subspace.whole(3))


def test_gram_schmidt_two_vectors_by_hand():
    # (1,1) and (1,0): second becomes (1,0) - 1/2 (1,1) = (1/2,-1/2)
    V = la.mat([[1, 1], [1, 0]])
    out = la.gram_orthogonalize(V, la.eye(2))
    assert la.col_list(out, 0) == [1, 1]
    assert la.col_list(out, 1) == [fmpq(1, 2), fmpq(-1, 2)]


def test_gram_schmidt_keeps_orthogonal_input():
    V = la.mat([[2, 0], [0, 3]])
    assert la.gram_orthogonalize(V, la.eye(2)) == V


def test_gram_schmidt_singular():
    V = la.mat([[1, 2], [1, 2]])
    with pytest.raises(la.SingularGram):
        la.gram_orthogonalize(V, la.eye(2))


@given(matrices())
def test_rank_matches_bareiss_oracle(rows):
    assert la.rank(to_fmpq(rows)) == bareiss_rank(rows)


@given(matrices())
def test_rref_matches_oracle(rows):
    R, pivots, r = la.rref(to_fmpq(rows))
    want, want_piv = fraction_rref(rows)
    assert as_fractions(la.submatrix(R, range(r), None)) == want[:r]
    assert pivots == want_piv


@given(matrices(4, 4).filter(lambda m: len(m) == len(m[0])))
def test_det_matches_oracle(rows):
    assert Fraction(str(to_fmpq(rows).det())) == fraction_det(rows)


@given(matrices())
def test_rank_nullity_and_transpose(rows):
    M = to_fmpq(rows)
    N = la.nullspace(M)
    assert la.is_zero(M * N) if N.ncols() else True
    assert la.image(M).dim + N.ncols() == M.ncols()
    assert la.rank(M.transpose()) == la.rank(M)
    assert N.ncols() == len(fraction_nullspace(rows, len(rows[0])))


@given(matrices(), st.lists(small, min_size=5, max_size=5))
def test_solve_returns_exact_solution(rows, x):
    M = to_fmpq(rows)
    xs = la.column(x[:M.ncols()])
    b = M * xs
    assert M * la.solve(M, b) == b


@given(matrices(5, 3), matrices(5, 3))
def test_grassmann_identity(a, b):
    n = 5
    A = to_fmpq((a + [[0] * len(a[0])] * n)[:n])
    B = to_fmpq((b + [[0] * len(b[0])] * n)[:n])
    S, T = la.image(A), la.image(B)
    assert la.intersect(S, T).dim == S.dim + T.dim - la.span_sum(S, T).dim
    assert la.contains(la.span_sum(S, T), S)
    assert la.contains(S, la.intersect(S, T))


@given(st.integers(1, 5), st.integers(0, 2**31))
def test_gram_orthogonalize_gives_diagonal_gram(m, seed):
    import random
    rng = random.Random(seed)
    n = 6
    while True:
        V = la.mat([[rng.randint(-3, 3) for _ in range(m)] for _ in range(n)])
        if la.rank(V) == m:
            break
    Lw = la.mat([[rng.randint(-2, 2) for _ in range(n)] for _ in range(n)]) + la.eye(n) * 7
    G = Lw.transpose() * Lw
    out = la.gram_orthogonalize(V, G)
    H = out.transpose() * G * out
    for i in range(m):
        for j in range(m):
            if i == j:
                assert H[i, i] > 0
            else:
                assert H[i, j] == 0
    assert la.image(out).basis == la.image(V).basis


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_modular_rank_bounds_exact_rank(nr, nc, data):
    vals = data.draw(st.lists(st.fractions(min_value=-5, max_value=5, max_denominator=7),
                              min_size=nr * nc, max_size=nr * nc))
    M = fmpq_mat(nr, nc, [fmpq(v.numerator, v.denominator) for v in vals])
    r = la.modular_rank(M)
    assert r is None or r <= la.rank(M)
    assert la.has_full_rank(M) == (la.rank(M) == min(nr, nc))


def test_modular_rank_can_drop_below_exact_rank():
    p = 2305843009213693951
    M = fmpq_mat([[1, 0], [0, p]])
    assert la.rank(M) == 2
    assert la.modular_rank(M) == 1
    assert la.has_full_rank(M)
    assert la.modular_rank(fmpq_mat([[fmpq(1, p)]])) is None


def test_primitive_columns():
    M = fmpq_mat([[fmpq(1, 2), 0, 0], [fmpq(3, 4), 0, fmpq(-6)], [0, 0, fmpq(9)]])
    P = la.primitive_columns(M)
    assert la.col_list(P, 0) == [2, 3, 0]
    assert la.col_list(P, 1) == [0, 0, 0]
    assert la.col_list(P, 2) == [0, -2, 3]


@settings(max_examples=30)
@given(st.integers(1, 5), st.data())
def test_primitive_columns_keep_gram_orthogonality(m, data):
    vals = data.draw(st.lists(st.fractions(min_value=-4, max_value=4, max_denominator=5),
                              min_size=(m + 1) * m, max_size=(m + 1) * m))
    A = fmpq_mat(m + 1, m, [fmpq(v.numerator, v.denominator) for v in vals])
    if la.rank(A) < m:
        return
    G = la.eye(m + 1)
    Q = la.primitive_columns(la.gram_orthogonalize(A, G))
    H = Q.transpose() * G * Q
    assert all(H[i, j] == 0 for i in range(m) for j in range(m) if i != j)
    assert all(H[i, i] > 0 for i in range(m))
    assert la.rank(la.hstack([A, Q], rows=m + 1)) == m
    assert all(v.q == 1 for v in Q.entries())
