import random

import pytest
from flint import fmpq

from fects import catalog as CAT
from fects import linalg as la
from fects import poly as P
from fects import traces as TR

CTX2 = TR.generic_context(2)
PTS = CTX2.cell_pts


def fam(name, k=None):
    return CAT.get_family(name, k)


def test_hermite_face_to_vertex_is_value_and_gradient():
    f = fam("hermite_stenberg_2d")
    T = f.cell_trace(0, PTS, (1,), 3).dense()
    assert (T.nrows(), T.ncols()) == (3, 10)
    rng = random.Random(0)
    c = [fmpq(rng.randint(-9, 9)) for _ in range(10)]
    u = P.TensorPoly(tuple(PTS), P.scalar(2), 3, c)
    g = u.differentiate(P.grad(P.scalar(2)))
    got = la.col_list(T * la.column(c))
    assert got == u.point_eval(PTS[1]) + g.point_eval(PTS[1])


@pytest.mark.parametrize("name", CAT.FAMILIES_2D)
def test_trace_to_itself_is_identity(name):
    f = fam(name)
    for s in range(3):
        p = f.slot_degree(s)
        assert f.cell_trace(s, PTS, (0, 1, 2), p).dense() == la.eye(f.cell_space_size(s, p))


def test_trace_inclusion_examples():
    f = fam("hermite_stenberg_2d")
    # vertex data through an edge sits inside the full vertex jet
    assert TR.check_trace_inclusion(f, 0, PTS, (0, 1), (0,))
    assert TR.check_trace_inclusion(f, 0, PTS, (0, 1), (1,))
    assert TR.check_trace_inclusion(f, 0, PTS, (0, 1, 2), (0, 2))


class _BrokenHermite(CAT.HermiteStenberg2D):
    """Edge-to-vertex map that leaks a second derivative into the gradient entry."""

    def edge_to_vertex(self, s, T, N, j, c, e):
        rows = super().edge_to_vertex(s, T, N, j, c, e)
        if s == 0 and j == 1:
            return rows + [TR.term(0, 0, (T, T), 1)]
        return rows


def test_trace_inclusion_rejects_broken_family():
    f = _BrokenHermite(3)
    assert not TR.check_trace_inclusion(f, 0, PTS, (0, 1), (0,))


@pytest.mark.parametrize("k,dims", [(3, [3, 0, 1]), (4, [3, 1, 3]), (5, [3, 2, 6])])
def test_hermite_bubble_dimensions(k, dims):
    f = fam("hermite_stenberg_2d", k)
    got = [TR.bubble_space(f, 0, PTS, t).dim for t in [(0,), (0, 1), (0, 1, 2)]]
    assert got == dims
    assert got[1] == k - 3


def test_argyris_bubble_dimensions():
    f = fam("falk_neilan_2d")
    assert TR.bubble_space(f, 0, PTS, (2,)).dim == 6
    assert TR.bubble_space(f, 0, PTS, (0, 2)).dim == 1
    assert TR.bubble_space(f, 0, PTS, (0, 1, 2)).dim == 0


@pytest.mark.parametrize("name,slot,by_dim", [
    ("hermite_stenberg_2d", 0, [9, 0, 1]),
    ("falk_neilan_2d", 0, [18, 3, 0]),
    ("hu_zhang_hessian_2d", 1, [9, 12, 9]),
])
def test_geometric_decomposition_counts(name, slot, by_dim):
    f = fam(name)
    r = TR.geometric_decomposition(f, slot, PTS)
    assert r["ok"] and r["by_dim"] == by_dim
    assert r["rhs"] == {"hermite_stenberg_2d": 10, "falk_neilan_2d": 21, "hu_zhang_hessian_2d": 30}[name]


@pytest.mark.parametrize("name,slot,size", [
    ("hermite_stenberg_2d", 0, 10), ("falk_neilan_2d", 0, 21), ("hu_ma_zhang_divdiv_2d", 1, 30),
])
def test_unisolvence_examples(name, slot, size):
    f = fam(name)
    dofs = TR.local_dofs(f, slot, PTS, CAT.reference_chains(f))
    assert (dofs.matrix.nrows(), dofs.matrix.ncols()) == (size, size)
    assert TR.unisolvent(dofs)
    assert dofs.matrix.det() != 0


@pytest.mark.parametrize("name", CAT.FAMILIES_2D)
def test_bubble_chains_exact_and_closed(name):
    f = fam(name)
    for tau in TR.all_subsimplices(2):
        ch = TR.bubble_chain(f, PTS, tau)
        assert ch.defects() == [0, 0, 0]
        assert ch.closed()


def test_chain_dimensions_from_examples():
    # Hermite vertex chain: P1 / R -> P0 x R^2
    assert TR.bubble_chain(fam("hermite_stenberg_2d"), PTS, (0,)).dims()[:2] == [2, 2]
    # Argyris edge chain at k = 5: (2k - 9, 2k - 9)
    assert TR.bubble_chain(fam("falk_neilan_2d"), PTS, (0, 1)).dims()[:2] == [1, 1]
    # divdiv face chain is nonzero one degree above the minimum
    ch = TR.bubble_chain(fam("hu_ma_zhang_divdiv_2d", 5), PTS, (0, 1, 2))
    assert ch.dims() == [3, 6, 3] and ch.defects() == [0, 0, 0]


def _brute_harmonic_gram(ch, s, basis):
    G = ch.metrics[s]
    part = la.zeros(basis.ncols(), basis.ncols())
    if s > 0 and ch.bases[s - 1].ncols():
        img = la.image(ch.dmats[s - 1] * ch.bases[s - 1]).basis
        if img.ncols():
            proj = img * (img.transpose() * G * img).inv() * img.transpose() * G
            Pb = proj * basis
            part = Pb.transpose() * G * Pb
    if s < len(ch.dmats):
        Db = ch.dmats[s] * basis
        part = part + Db.transpose() * ch.metrics[s + 1] * Db
    return part


@pytest.mark.parametrize("name", CAT.FAMILIES_2D)
def test_orthogonal_bases_and_harmonic_gram(name):
    f = fam(name)
    for tau in TR.all_subsimplices(2):
        ch = TR.bubble_chain(f, PTS, tau)
        TR.orthogonal_bubble_basis(ch)
        for s in range(3):
            n_dphi, n_phi = ch.dphi[s].ncols(), ch.phi[s].ncols()
            assert n_dphi + n_phi == ch.bases[s].ncols()
            if not n_dphi + n_phi:
                continue
            H = TR.harmonic_gram(ch, s)
            for i in range(H.nrows()):
                for j in range(H.ncols()):
                    assert (H[i, j] > 0) if i == j else (H[i, j] == 0)
            basis = la.hstack([ch.dphi[s], ch.phi[s]], rows=ch.bases[s].nrows())
            assert H == _brute_harmonic_gram(ch, s, basis)
            if s == 0:
                Db = ch.dmats[0] * basis
                assert H == Db.transpose() * ch.metrics[1] * Db


def test_divdiv_edge_operator_commutes():
    f = fam("hu_ma_zhang_divdiv_2d")
    for tau in [(0, 1), (0, 2), (1, 2)]:
        for s in range(2):
            assert TR.check_d_trace_commute(f, s, PTS, tau)


def test_localization_hermite_vertex():
    f = fam("hermite_stenberg_2d")
    U = f.utilde([PTS[0]], 3)
    assert la.col_list(U.transpose()) == [1, 0, 0]
    for tau in TR.all_subsimplices(2):
        assert TR.check_localization(f, PTS, tau)


def test_localization_hessian_vertex_formula():
    f = fam("hu_zhang_hessian_2d")
    from fects.currents import psi_basis
    x = PTS[1]
    U = f.utilde([x], 5)
    lay = P.JetLayout(2, 2, 1)
    idx = lay.index()
    for i, psi in enumerate(psi_basis("RT", 2)):
        row = la.to_rows(U)[i]
        assert row[idx[(0, 0, ())]] == -psi.div() / 2
        assert [row[idx[(1, 0, (a,))]] for a in range(2)] == list(psi(x))
