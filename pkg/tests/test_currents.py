import random

import pytest
from flint import fmpq
from hypothesis import given, strategies as st

from fects import currents as C
from fects import linalg as la
from fects import poly as P

TRI = [(fmpq(0), fmpq(0)), (fmpq(1), fmpq(0)), (fmpq(0), fmpq(1))]


def cart(points, k, terms, vs=None):
    vs = vs or P.scalar(len(points[0]))
    return [c for comp in terms for c in P.cartesian_to_bary(points, comp, k)] if vs.ncomp > 1 else \
        P.cartesian_to_bary(points, terms, k)


def test_aux_space_dimensions():
    dims = {name: C.get_currents(name).dim_z for name in C.CURRENTS_NAMES}
    assert dims == {"derham_2d": 1, "derham_3d": 1, "hessian_2d": 3, "hessian_3d": 4,
                    "divdiv_2d": 3, "divdiv_3d": 4, "elasticity_3d": 6}


@pytest.mark.parametrize("space,n", [("P1", 2), ("P1", 3), ("RT", 2), ("RT", 3), ("RM", 3)])
def test_z_basis_is_box_orthogonal(space, n):
    zs = C.z_basis(space, n)
    for i, a in enumerate(zs):
        for j, b in enumerate(zs):
            v = C.box_inner(a, b)
            assert (v > 0) if i == j else (v == 0)


def test_derham_edge_example():
    cur = C.get_currents("derham_2d")
    u = la.column(cart(TRI, 1, {(1, 0): 1}))
    grad_u = P.op_matrix(cur.ops[0], TRI, 1) * u
    assert la.col_list(cur.upsilon_matrix(TRI, (0, 1), 0) * grad_u) == [1]
    at = [la.col_list(cur.upsilon_matrix(TRI, (v,), 1) * u)[0] for v in (0, 1)]
    assert at[1] - at[0] == 1


def test_hessian_vertex_current_vanishes_on_flat_data():
    cur = C.get_currents("hessian_2d")
    x0 = TRI[2]
    # u = (x - x0)^2 + (x - x0)(y - y0): value and gradient vanish at x0
    terms = {(2, 0): 1, (1, 1): 1, (1, 0): -x0[1]}
    u = la.column(cart(TRI, 2, terms))
    assert la.col_list(cur.upsilon_matrix(TRI, (2,), 2) * u) == [0, 0, 0]


@pytest.mark.parametrize("name", C.CURRENTS_NAMES)
def test_zero_input_gives_zero(name):
    cur = C.get_currents(name)
    n = cur.n
    pts = C.random_cell(random.Random(1), n)
    for level in range(n + 1):
        w = [fmpq(0)] * (cur.spaces[level].ncomp * P.dim_poly(n, 3))
        tau = tuple(range(level + 1))
        assert la.col_list(cur.upsilon_matrix(pts, tau, 3) * la.column(w)) == [0] * cur.dim_z
        if level:
            assert C.check_stokes(cur, pts, tau, [fmpq(0)] * (cur.spaces[level - 1].ncomp * P.dim_poly(n, 3)), 3)[0]


@pytest.mark.parametrize("name", C.CURRENTS_NAMES)
def test_surjectivity(name):
    cur = C.get_currents(name)
    pts = C.random_cell(random.Random(2), cur.n)
    for level in range(cur.n + 1):
        assert C.surjectivity_rank(cur, pts, level, 4) == cur.dim_z


def test_derham_exponents():
    assert C.get_currents("derham_2d").exponents() == [0, 1, 2]


@pytest.mark.parametrize("name", C.CURRENTS_NAMES)
def test_exponent_recursion(name):
    cur = C.get_currents(name)
    ex = cur.exponents()
    assert all(ex[i + 1] - ex[i] == cur.ops[i].order for i in range(cur.n))


@pytest.mark.parametrize("name", C.CURRENTS_NAMES)
def test_unit_scale_is_trivial(name):
    cur = C.get_currents(name)
    rng = random.Random(4)
    pts = C.random_cell(rng, cur.n)
    for level in range(cur.n + 1):
        w = C.random_coeffs(rng, cur.spaces[level], cur.n, 3)
        assert C.check_homogeneity(cur, pts, tuple(range(level + 1)), w, 3, 1)


def test_slot_mismatch():
    cur = C.get_currents("hessian_2d")
    w = P.TensorPoly(tuple(TRI), P.scalar(2), 2, [fmpq(0)] * 6)
    with pytest.raises(C.SlotMismatch):
        cur.upsilon(TRI, (0, 1), w)


@given(st.sampled_from(C.CURRENTS_NAMES), st.integers(0, 10**6))
def test_stokes_property(name, seed):
    cur = C.get_currents(name)
    out = C.stokes_trials(cur, 2, random.Random(seed), K=3)
    assert all(v == 2 for v in out.values())


@given(st.sampled_from(C.CURRENTS_NAMES), st.integers(0, 10**6),
       st.fractions(min_value=fmpq(1, 9).__float__(), max_value=9).filter(lambda f: f > 0))
def test_homogeneity_property(name, seed, a):
    cur = C.get_currents(name)
    out, recursion = C.homogeneity_trials(cur, [fmpq(a.numerator, a.denominator)], random.Random(seed), K=3)
    assert recursion and all(v == 1 for v in out.values())


def test_stokes_boundary_terms_are_not_trivial():
    cur = C.get_currents("elasticity_3d")
    rng = random.Random(0)
    pts = C.random_cell(rng, 3)
    w = C.random_coeffs(rng, cur.spaces[1], 3, 4)
    ok, res = C.check_stokes(cur, pts, (0, 1, 2), w, 4)
    assert ok and res == [0] * 6
    # every face term carries information: dropping one breaks the identity
    face = la.col_list(cur.upsilon_matrix(pts, (0, 1), 4) * la.column(w))
    assert any(v != 0 for v in face)


@pytest.mark.parametrize("name", C.CURRENTS_NAMES)
def test_complex_property(name):
    out = C.complex_trials(name, 5, random.Random(0), K=4)
    assert all(v == 5 for v in out.values())
