import random
from fractions import Fraction
from itertools import product
from math import factorial

import pytest
from flint import fmpq
from hypothesis import given, strategies as st

from fects import linalg as la
from fects import poly as P
from oracles import simplex_integral

TRI = [(fmpq(0), fmpq(0)), (fmpq(1), fmpq(0)), (fmpq(0), fmpq(1))]
TET = [(fmpq(0), fmpq(0), fmpq(0)), (fmpq(1), fmpq(0), fmpq(0)),
       (fmpq(0), fmpq(1), fmpq(0)), (fmpq(0), fmpq(0), fmpq(1))]


def rand_cell(rng, n):
    while True:
        pts = [tuple(fmpq(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(n)) for _ in range(n + 1)]
        if P.measure_factor(pts, "euclidean") != 0:
            return pts


def cart(points, k, terms, value=None):
    """TensorPoly from {Cartesian exponent: coeff} (scalar)."""
    value = value or P.scalar(len(points[0]))
    return P.TensorPoly(tuple(points), value, k, P.cartesian_to_bary(points, terms, k))


def unit(d, k, alpha):
    return [fmpq(int(a == alpha)) for a in P.monomials(d, k)]


def rand_poly(rng, pts, vs, k):
    d = len(pts) - 1
    return P.TensorPoly(tuple(pts), vs, k,
                        [fmpq(rng.randint(-9, 9)) for _ in range(vs.ncomp * P.dim_poly(d, k))])


def test_basis_sizes():
    assert len(P.poly_basis(5, TRI, P.scalar(2))) == 21
    assert len(P.poly_basis(2, TRI, P.sym(2))) == 18
    assert P.sym(3).ncomp * P.dim_poly(3, 9) == 1320
    assert {P.scalar(3).ncomp, P.vec(3).ncomp, P.matsp(3).ncomp, P.sym(3).ncomp, P.trc(3).ncomp} == {1, 3, 9, 6, 8}


@pytest.mark.parametrize("vs", [P.scalar(2), P.vec(3), P.sym(2), P.sym(3), P.trc(2), P.trc(3), P.matsp(3)])
def test_embed_extract_roundtrip(vs):
    assert vs.extract() * vs.embed() == la.eye(vs.ncomp)


def test_integral_lambda0_lambda1():
    alpha = (1, 1, 0)
    c = [fmpq(int(a == alpha)) for a in P.monomials(2, 2)]
    assert P.integrate(c, TRI, 2, "euclidean") == fmpq(1, 24)
    assert simplex_integral(TRI, [(alpha, 1)]) == Fraction(1, 24)


def test_integral_reference_edge_parametric():
    edge = [(fmpq(0), fmpq(0)), (fmpq(3), fmpq(4))]
    assert P.integrate([fmpq(1)], edge, 0, "parametric") == 1


def test_integral_tet_factorial():
    alpha = (2, 1, 1, 0)
    c = [fmpq(int(a == alpha)) for a in P.monomials(3, 4)]
    vol = fmpq(1, 6)
    got = P.integrate(c, TET, 4, "euclidean")
    assert got == fmpq(factorial(3) * factorial(2), factorial(7)) * vol
    assert got == fmpq(1, 2520)
    assert simplex_integral(TET, [(alpha, 1)]) == Fraction(1, 2520)


def test_euclidean_measure_needs_top_cell():
    with pytest.raises(P.UnsupportedMeasure):
        P.integrate([fmpq(1)], TRI[:2], 0, "euclidean")


@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.integers(0, 3))
def test_integration_matches_oracle(seed, n, k):
    rng = random.Random(seed)
    pts = rand_cell(rng, n)
    monos = P.monomials(n, k)
    c = [fmpq(rng.randint(-5, 5)) for _ in monos]
    got = P.integrate(c, pts, k, "euclidean")
    want = simplex_integral(pts, list(zip(monos, c)))
    assert abs(Fraction(str(got))) == abs(want)
    # linearity
    c2 = [fmpq(rng.randint(-5, 5)) for _ in monos]
    assert P.integrate([a + 2 * b for a, b in zip(c, c2)], pts, k, "euclidean") == \
        got + 2 * P.integrate(c2, pts, k, "euclidean")


def test_grad_of_lambda0():
    lam0 = P.TensorPoly(tuple(TRI), P.scalar(2), 1, unit(2, 1, (1, 0, 0)))
    g = lam0.differentiate(P.grad(P.scalar(2)))
    assert g.point_eval((fmpq(1, 3), fmpq(1, 5))) == [-1, -1]


def test_hess_of_x_squared():
    rng = random.Random(3)
    pts = rand_cell(rng, 2)
    u = cart(pts, 2, {(2, 0): 1})
    h = u.differentiate(P.hess(P.scalar(2)))
    # sym(2) parameters are (0,0), (0,1), (1,1)
    for x in pts + [(fmpq(1, 7), fmpq(-2, 3))]:
        assert h.point_eval(x) == [2, 0, 0]


@pytest.mark.parametrize("outer,inner", [
    (P.rot(P.vec(2)), P.grad(P.scalar(2))),
    (P.div_div(P.sym(2)), P.sym_curl(P.vec(2))),
    (P.rot(P.sym(2)), P.hess(P.scalar(2))),
    (P.curl(P.vec(3)), P.grad(P.scalar(3))),
    (P.div(P.vec(3)), P.curl(P.vec(3))),
    (P.curl(P.sym(3), out=P.trc(3)), P.hess(P.scalar(3))),
    (P.div(P.trc(3)), P.curl(P.sym(3), out=P.trc(3))),
    (P.sym_curl(P.trc(3)), P.dev_grad(P.vec(3))),
    (P.div_div(P.sym(3)), P.sym_curl(P.trc(3))),
    (P.inc(P.sym(3)), P.sym_grad(P.vec(3))),
    (P.div(P.sym(3)), P.inc(P.sym(3))),
])
def test_consecutive_operators_compose_to_zero(outer, inner):
    rng = random.Random(11)
    for _ in range(3):
        pts = rand_cell(rng, outer.vin.n)
        K = 4
        A = P.op_matrix(inner, pts, K)
        B = P.op_matrix(outer, pts, K - inner.order)
        assert la.is_zero(B * A)
        assert not la.is_zero(A)


def test_incompatible_operator():
    u = rand_poly(random.Random(0), TRI, P.scalar(2), 3)
    with pytest.raises(P.IncompatibleOp):
        u.differentiate(P.div(P.vec(2)))


def test_restrict_examples():
    one = P.TensorPoly(tuple(TRI), P.scalar(2), 0, [fmpq(5)])
    assert one.restrict([TRI[1], TRI[2]]).coeffs == [5]
    lam1 = P.TensorPoly(tuple(TRI), P.scalar(2), 1, unit(2, 1, (0, 1, 0)))
    r = lam1.restrict([TRI[1], TRI[2]])
    # on the edge (v1, v2), lambda_1 is the first edge barycentric
    assert r.coeffs == unit(1, 1, (1, 0))
    with pytest.raises(P.NotAFace):
        lam1.restrict([(fmpq(5), fmpq(5)), TRI[0]])


@given(st.integers(0, 10**6))
def test_restriction_agrees_pointwise(seed):
    rng = random.Random(seed)
    pts = rand_cell(rng, 3)
    p = rand_poly(rng, pts, P.vec(3), 3)
    face = [pts[i] for i in sorted(rng.sample(range(4), rng.randint(1, 3)))]
    q = p.restrict(face)
    for _ in range(10):
        w = [fmpq(rng.randint(0, 5)) for _ in face]
        tot = sum(w, fmpq(0)) or fmpq(1)
        w = [x / tot for x in w] if sum(w, fmpq(0)) else [fmpq(1)] + [fmpq(0)] * (len(face) - 1)
        x = tuple(sum((wi * f[c] for wi, f in zip(w, face)), fmpq(0)) for c in range(3))
        assert q.point_eval(x) == p.point_eval(x)


def test_point_eval_constant():
    c = P.TensorPoly(tuple(TRI), P.vec(2), 0, [fmpq(2), fmpq(-3)])
    assert c.point_eval((fmpq(7), fmpq(1, 3))) == [2, -3]


def test_jet_of_x_squared():
    u = cart(TRI, 2, {(2, 0): 1})
    jet = u.jet_eval(0, 2)
    lay = P.JetLayout(2, 2, 1)
    want = {b: 0 for b in lay.blocks}
    want[(2, 0, (0, 0))] = 2
    assert dict(zip(lay.blocks, jet)) == want


def _taylor_value(jet, lay, x0, x):
    total = fmpq(0)
    for (j, c, e), v in zip(lay.blocks, jet):
        term = v / factorial(j)
        for a in e:
            term *= x[a] - x0[a]
        total += term
    return total


@given(st.integers(0, 10**6), st.sampled_from([2, 3]), st.integers(0, 4))
def test_taylor_reconstruction_from_vertex_jet(seed, n, k):
    rng = random.Random(seed)
    pts = rand_cell(rng, n)
    p = rand_poly(rng, pts, P.scalar(n), k)
    v = rng.randrange(n + 1)
    jet = p.jet_eval(v, k)
    lay = P.JetLayout(n, k, 1)
    for _ in range(3):
        x = tuple(fmpq(rng.randint(-4, 4), rng.randint(1, 4)) for _ in range(n))
        assert _taylor_value(jet, lay, pts[v], x) == p.point_eval(x)[0]


def test_divergence_of_vector_one_jet():
    lay = P.JetLayout(2, 1, 2)
    vals = {b: fmpq(0) for b in lay.blocks}
    vals[(0, 0, ())], vals[(0, 1, ())] = fmpq(4), fmpq(5)
    grads = {(0, 0): 2, (0, 1): 3, (1, 0): 7, (1, 1): 11}  # d_e v^c
    for (c, e), g in grads.items():
        vals[(1, c, (e,))] = fmpq(g)
    out = P.jet_differentiate([vals[b] for b in lay.blocks], P.div(P.vec(2)), 2, 1)
    assert out == [2 + 11]


def test_gradient_of_two_jet_drops_value():
    rng = random.Random(5)
    p = rand_poly(rng, TRI, P.scalar(2), 3)
    jet = p.jet_eval(0, 2)
    lay_in = dict(zip(P.JetLayout(2, 2, 1).blocks, jet))
    out = P.jet_differentiate(jet, P.grad(P.scalar(2)), 2, 2)
    lay_out = P.JetLayout(2, 1, 2).blocks
    for (j, c, e), v in zip(lay_out, out):
        assert v == lay_in[(j + 1, 0, (c,) + e)]


JET_OPS = [P.grad(P.scalar(2)), P.hess(P.scalar(2)), P.rot(P.vec(2)), P.sym_curl(P.vec(2)),
           P.div_div(P.sym(2)), P.rot(P.sym(2)), P.hess(P.scalar(3)), P.curl(P.vec(3)),
           P.div(P.trc(3)), P.inc(P.sym(3))]


@given(st.integers(0, 10**6), st.sampled_from(range(len(JET_OPS))))
def test_jet_differentiation_commutes_with_evaluation(seed, which):
    op = JET_OPS[which]
    rng = random.Random(seed)
    n = op.vin.n
    pts = rand_cell(rng, n)
    p = rand_poly(rng, pts, op.vin, 4)
    m = op.order + 1
    v = rng.randrange(n + 1)
    left = P.jet_differentiate(p.jet_eval(v, m), op, n, m)
    right = p.differentiate(op).jet_eval(v, m - op.order)
    assert left == right


def test_frames_examples():
    f = P.frame([(fmpq(0), fmpq(0)), (fmpq(1), fmpq(0))])
    assert f["T"] == (1, 0) and f["N"] == (0, 1)
    g = P.frame([TET[0], TET[1], TET[2]])
    assert g["N"] == (0, 0, 1)


@given(st.tuples(*[st.integers(-9, 9)] * 6).filter(lambda t: t[:3] != t[3:]))
def test_edge_normals_orthogonal(t):
    a = tuple(fmpq(x) for x in t[:3])
    b = tuple(fmpq(x) for x in t[3:])
    f = P.frame([a, b])
    T, n1, n2 = f["T"], f["n1"], f["n2"]
    assert P.vdot(n1, T) == 0 and P.vdot(n2, T) == 0 and P.vdot(n1, n2) == 0
    assert any(n1) and any(n2)


def test_dump_format():
    c = [fmpq(0)] * 3
    c[P.mono_index(2, 1)[(1, 0, 0)]] = fmpq(1, 2)
    c[P.mono_index(2, 1)[(0, 0, 1)]] = fmpq(-3)
    u = P.TensorPoly(tuple(TRI), P.scalar(2), 1, c)
    assert sorted(u.dump().splitlines()) == ["0 (0, 0, 1) -> -3", "0 (1, 0, 0) -> 1/2"]
