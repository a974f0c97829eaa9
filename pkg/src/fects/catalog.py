"""Concrete families of finite element complexes with trace structure.

Each family lists, per slot and simplex dimension, its local blocks and the
row specifications of its trace maps, local derivatives and localized
currents. Frames are unnormalized (T, N = J T in 2D; t1, t2, N_f, n1, n2 in
3D), so all entries stay rational.
"""

from dataclasses import dataclass
from itertools import combinations

from flint import fmpq

from . import currents as C
from . import linalg as la
from . import poly as P
from .traces import (JetBlock, PolyBlock, all_subsimplices, axes, bubble_chain,
                     build_trace, check_d_trace_commute, check_localization,
                     check_trace_inclusion, generic_context, geometric_decomposition,
                     jet_rows, local_dofs, orthogonal_bubble_basis, restriction_rows,
                     space_size, term, unisolvent)


class DegreeTooLow(ValueError):
    pass


class UnknownFamily(KeyError):
    pass


def _half():
    return fmpq(1, 2)


class Family:
    """Base class: subclasses fill in the tables and spec builders."""

    name = ""
    n = 2
    currents_name = ""
    min_k = 0
    M = 1
    shifts = ()          # slot degree = k - shift
    local = {}           # local[(s, d)] = [("poly", shift, ncomp) | ("jet", order)]

    def __init__(self, k, variant=None):
        if k < self.min_k:
            raise DegreeTooLow(f"{self.name} needs k >= {self.min_k}, got {k}")
        self.k = k
        self.variant = dict(variant or {})
        self.currents = C.get_currents(self.currents_name)
        self.ops, self.spaces = C.complex_ops(self.currents_name)
        self.nslots = self.n + 1

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k})"

    # ---------------------------------------------------------- spaces

    def slot_degree(self, s):
        return self.k - self.shifts[s]

    def cell_space_size(self, s, p):
        return self.spaces[s].ncomp * P.dim_poly(self.n, p)

    def cell_block(self, s, p):
        return PolyBlock(self.n, p, self.spaces[s].ncomp, self.spaces[s])

    def blocks(self, s, d, p):
        if d == self.n:
            return [self.cell_block(s, p)]
        out = []
        for b in self.local.get((s, d), []):
            if b[0] == "poly":
                out.append(PolyBlock(d, p - b[1], b[2]))
            else:
                out.append(JetBlock(P.JetLayout(self.n, b[1], self.spaces[s].full)))
        return out

    def jet_order(self, s):
        b = self.local.get((s, 0), [])
        return b[0][1] if b else None

    # ---------------------------------------------------------- traces

    def cell_trace(self, s, cell_pts, tau_pos, p):
        d = len(tau_pos) - 1
        src = [self.cell_block(s, p)]
        size = src[0].size
        if d == self.n:
            return P.Sparse(size, size, {(i, i): fmpq(1) for i in range(size)})
        out_blocks = self.blocks(s, d, p)
        if not out_blocks:
            return P.Sparse(0, size)
        tau_pts = [cell_pts[i] for i in tau_pos]
        if d == 0:
            specs = [jet_rows(out_blocks[0].layout, axes(self.n))]
        else:
            specs = self.cell_specs(s, d, tau_pts)
        return build_trace(cell_pts, src, tau_pos, out_blocks, specs)

    def sub_trace(self, s, tau_pts, eta_rel, p):
        d = len(tau_pts) - 1
        if d == self.n:
            return self.cell_trace(s, tau_pts, tuple(eta_rel), p)
        src = self.blocks(s, d, p)
        de = len(eta_rel) - 1
        out_blocks = self.blocks(s, de, p)
        if not out_blocks or not src:
            return P.Sparse(space_size(out_blocks), space_size(src))
        eta_pts = [tau_pts[i] for i in eta_rel]
        specs = self.sub_specs(s, d, tau_pts, eta_pts, out_blocks)
        return build_trace(tau_pts, src, eta_rel, out_blocks, specs)

    def d_local(self, s, tau_pts, p):
        d = len(tau_pts) - 1
        op = self.ops[s]
        if d == self.n:
            return P.op_matrix(op, tau_pts, p)
        src = self.blocks(s, d, p)
        nxt = self.blocks(s + 1, d, p - op.order)
        if not nxt or not src:
            return la.zeros(space_size(nxt), space_size(src))
        if d == 0:
            return P.jet_op_matrix(op, self.n, self.jet_order(s)).dense()
        specs = self.d_specs(s, d, tau_pts)
        full = tuple(range(d + 1))
        return build_trace(tau_pts, src, full, nxt, specs).dense()

    # ------------------------------------------------- localized currents

    def utilde(self, tau_pts, p):
        d = len(tau_pts) - 1
        if d == self.n:
            return self.currents.upsilon_matrix(tau_pts, tuple(range(d + 1)), p)
        blocks = self.blocks(d, d, p)
        offs = []
        o = 0
        for b in blocks:
            offs.append(o)
            o += b.size
        rows = []
        for psi in C.psi_basis(self.currents.psi_space, self.n):
            row = [fmpq(0)] * o
            if d == 0:
                idx = blocks[0].layout.index()
                for key, c in self.vertex_current(tau_pts[0], psi).items():
                    row[idx[key]] += P.Q(c)
            else:
                for (b, comp, g, coeff) in self.face_current(tau_pts, psi):
                    blk = blocks[b]
                    nm = P.dim_poly(d, blk.degree)
                    weight = P.affine_to_bary(tau_pts, [g(v) for v in tau_pts])
                    mom = P.weighted_moments(d, blk.degree, weight, 1)
                    base = offs[b] + comp * nm
                    for j, v in enumerate(mom):
                        row[base + j] += P.Q(coeff) * v
            rows.append(row)
        return la.mat(rows, o)

    # to be provided by subclasses
    def cell_specs(self, s, d, tau_pts):
        raise NotImplementedError

    def sub_specs(self, s, d, tau_pts, eta_pts, out_blocks):
        raise NotImplementedError

    def d_specs(self, s, d, tau_pts):
        raise NotImplementedError

    def vertex_current(self, x, psi):
        raise NotImplementedError

    def face_current(self, tau_pts, psi):
        raise NotImplementedError


def _const(c, n):
    return C.const(c, n)


def _fi(vs, idx):
    return vs.full_index(idx)


def _jet_spec(layout, vs, fn):
    """Rows for a jet target: fn(j, full index tuple, derivative tuple)."""
    full = vs.full_indices
    return [fn(j, full[c], e) for (j, c, e) in layout.blocks]


# ======================================================================= 2D


class _Family2D(Family):
    n = 2

    def edge_frame(self, tau_pts):
        return P.edge_frame_2d(tau_pts[0], tau_pts[1])

    def sub_specs(self, s, d, tau_pts, eta_pts, out_blocks):
        T, N = self.edge_frame(tau_pts)
        return [_jet_spec(out_blocks[0].layout, self.spaces[s],
                          lambda j, c, e: self.edge_to_vertex(s, T, N, j, c, e))]


class HermiteStenberg2D(_Family2D):
    """C1 vertex / C0 edge Hermite element, de Rham 2D (k >= 3)."""

    name = "hermite_stenberg_2d"
    currents_name = "derham_2d"
    min_k = 3
    M = 1
    shifts = (0, 1, 2)
    local = {
        (0, 1): [("poly", 0, 1)], (0, 0): [("jet", 1)],
        (1, 1): [("poly", 0, 1)], (1, 0): [("jet", 0)],
    }

    def edge_vector(self, T, a):
        if self.variant.get("axis_vertex_gradient"):
            return fmpq(1)
        return T[a]

    def cell_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        if s == 0:
            return [restriction_rows(1)]
        return [[[term(0, a, (), T[a]) for a in range(2)]]]

    def edge_to_vertex(self, s, T, N, j, c, e):
        if s == 0:
            if j == 0:
                return [term(0, 0, (), 1)]
            # gradient entry: d_s q times the tangent
            return [term(0, 0, (T,), self.edge_vector(T, e[0]))]
        return [term(0, 0, (), T[c[0]])]

    def d_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        return [[[term(0, 0, (T,), 1)]]]

    def vertex_current(self, x, psi):
        return {(0, 0, ()): 1}

    def face_current(self, tau_pts, psi):
        return [(0, 0, psi.comps[0], 1)]


class FalkNeilan2D(_Family2D):
    """Argyris-type Stokes pair, de Rham 2D (k >= 5)."""

    name = "falk_neilan_2d"
    currents_name = "derham_2d"
    min_k = 5
    M = 1
    shifts = (0, 1, 2)
    local = {
        (0, 1): [("poly", 0, 1), ("poly", 1, 1)], (0, 0): [("jet", 2)],
        (1, 1): [("poly", 0, 1), ("poly", 0, 1)], (1, 0): [("jet", 1)],
        (2, 0): [("jet", 0)],
    }

    def cell_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        if s == 0:
            return [restriction_rows(1), [[term(0, 0, (N,), 1)]]]
        return [[[term(0, a, (), T[a]) for a in range(2)]],
                [[term(0, a, (), N[a]) for a in range(2)]]]

    def edge_to_vertex(self, s, T, N, j, c, e):
        if s == 0:
            if j == 0:
                return [term(0, 0, (), 1)]
            if j == 1:
                a = e[0]
                return [term(0, 0, (T,), T[a]), term(1, 0, (), N[a])]
            a, b = e
            return [term(0, 0, (T, T), T[a] * T[b]), term(1, 0, (T,), N[a] * T[b])]
        (a,) = c
        if j == 0:
            return [term(0, 0, (), T[a]), term(1, 0, (), N[a])]
        b = e[0]
        return [term(0, 0, (T,), T[a] * T[b]), term(1, 0, (T,), N[a] * T[b])]

    def d_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        return [[[term(0, 0, (T,), 1)]], [[term(1, 0, (), 1)]]]

    def vertex_current(self, x, psi):
        return {(0, 0, ()): 1}

    def face_current(self, tau_pts, psi):
        return [(0, 0, psi.comps[0], 1)]


class HuZhangHessian2D(_Family2D):
    """Hessian complex in 2D with Hu-Zhang type symmetric stresses (k >= 5)."""

    name = "hu_zhang_hessian_2d"
    currents_name = "hessian_2d"
    min_k = 5
    M = 2
    shifts = (0, 2, 3)
    local = {
        (0, 1): [("poly", 0, 1), ("poly", 1, 1)], (0, 0): [("jet", 2)],
        (1, 1): [("poly", 0, 1), ("poly", 0, 1)], (1, 0): [("jet", 0)],
    }

    def cell_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        if s == 0:
            return [restriction_rows(1), [[term(0, 0, (N,), 1)]]]
        vs = self.spaces[1]
        tt = [term(0, _fi(vs, (a, b)), (), T[a] * T[b]) for a in range(2) for b in range(2)]
        nt = [term(0, _fi(vs, (a, b)), (), N[a] * T[b]) for a in range(2) for b in range(2)]
        return [[tt], [nt]]

    def edge_to_vertex(self, s, T, N, j, c, e):
        if s == 0:
            return FalkNeilan2D.edge_to_vertex(self, 0, T, N, j, c, e)
        a, b = c
        return [term(0, 0, (), T[a] * T[b]), term(1, 0, (), N[a] * T[b])]

    def d_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        return [[[term(0, 0, (T, T), 1)]], [[term(1, 0, (T,), 1)]]]

    def vertex_current(self, x, psi):
        out = {(0, 0, ()): -psi.div() / 2}
        val = psi(x)
        for a in range(2):
            out[(1, 0, (a,))] = val[a]
        return out

    def face_current(self, tau_pts, psi):
        T, N = self.edge_frame(tau_pts)
        tt = P.vdot(T, T)
        gT = _dot_field(psi, T)
        gN = _dot_field(psi, N)
        return [(0, 0, gT, 1 / tt), (1, 0, gN, 1 / tt)]


class HuMaZhangDivDiv2D(_Family2D):
    """divdiv complex in 2D with H(div div) conforming stresses (k >= 4)."""

    name = "hu_ma_zhang_divdiv_2d"
    currents_name = "divdiv_2d"
    min_k = 4
    M = 2
    shifts = (0, 1, 3)
    local = {
        (0, 1): [("poly", 0, 1), ("poly", 0, 1), ("poly", 1, 1)], (0, 0): [("jet", 1)],
        (1, 1): [("poly", 0, 1), ("poly", 0, 1), ("poly", 1, 1)], (1, 0): [("jet", 0)],
    }

    def cell_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        ax = axes(2)
        if s == 0:
            return [[[term(0, a, (), N[a]) for a in range(2)]],
                    [[term(0, a, (), T[a]) for a in range(2)]],
                    [[term(0, a, (ax[a],), 1) for a in range(2)]]]
        vs = self.spaces[1]
        nn = [term(0, _fi(vs, (a, b)), (), N[a] * N[b]) for a in range(2) for b in range(2)]
        tn = [term(0, _fi(vs, (a, b)), (), T[a] * N[b]) for a in range(2) for b in range(2)]
        dn = [term(0, _fi(vs, (a, b)), (ax[b],), N[a]) for a in range(2) for b in range(2)]
        return [[nn], [tn], [dn]]

    def edge_to_vertex(self, s, T, N, j, c, e):
        if s == 0:
            (a,) = c
            if j == 0:
                return [term(0, 0, (), N[a]), term(1, 0, (), T[a])]
            b = e[0]
            return [term(0, 0, (T,), N[a] * N[b]), term(1, 0, (T,), T[a] * T[b]),
                    term(2, 0, (), N[a] * T[b])]
        a, b = c
        return [term(0, 0, (), N[a] * N[b]), term(1, 0, (), N[a] * T[b])]

    def d_specs(self, s, d, tau_pts):
        T, N = self.edge_frame(tau_pts)
        tt = P.vdot(T, T)
        return [[[term(0, 0, (T,), 1)]],
                [[term(1, 0, (T,), 1), term(2, 0, (), -tt / 2)]],
                [[term(2, 0, (T,), _half())]]]

    def vertex_current(self, x, psi):
        g = psi.grad()
        val = psi(x)[0]
        out = {(0, a, ()): g[a] for a in range(2)}
        for a in range(2):
            out[(1, a, (a,))] = -val / 2
        return out

    def face_current(self, tau_pts, psi):
        T, N = self.edge_frame(tau_pts)
        tt = P.vdot(T, T)
        g = psi.grad()
        return [(0, 0, _const(P.vdot(N, g) / tt, 2), 1),
                (1, 0, _const(P.vdot(T, g) / tt, 2), 1),
                (2, 0, psi.comps[0], -1)]


def _dot_field(psi, w):
    """Affine scalar psi . w for a constant vector w."""
    c = sum((P.Q(w[a]) * psi.comps[a].c for a in range(len(w))), fmpq(0))
    n = len(w)
    b = tuple(sum((P.Q(w[a]) * psi.comps[a].b[i] for a in range(len(w))), fmpq(0)) for i in range(n))
    return C.Affine(c, b)


# ======================================================================= 3D

SYM2 = [(0, 0), (0, 1), (1, 1)]
PAIRS2 = [(0, 0), (0, 1), (1, 0), (1, 1)]


def _solve2(G, rhs):
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    return ((G[1][1] * rhs[0] - G[0][1] * rhs[1]) / det,
            (G[0][0] * rhs[1] - G[1][0] * rhs[0]) / det)


def _face_gram(t):
    return [[P.vdot(t[i], t[j]) for j in range(2)] for i in range(2)]


def _in_face(t, w):
    """Coordinates of an in-plane vector w in the basis t1, t2."""
    return _solve2(_face_gram(t), (P.vdot(t[0], w), P.vdot(t[1], w)))


def _projected(vectors, e):
    """sum_i v_i v_i[e]: the image of the axis e under sum_i v_i v_i^T."""
    n = len(vectors[0])
    return tuple(sum((v[a] * v[e] for v in vectors), fmpq(0)) for a in range(n))


class Hessian3D(Family):
    """Hessian complex in 3D with C4-vertex / C2-edge / C1-face scalars (k >= 9)."""

    name = "hessian_3d"
    n = 3
    currents_name = "hessian_3d"
    min_k = 9
    M = 2
    shifts = (0, 2, 3, 4)
    local = {
        (0, 2): [("poly", 0, 1), ("poly", 1, 1)],
        (0, 1): [("poly", 0, 1), ("poly", 1, 2), ("poly", 2, 4)],
        (0, 0): [("jet", 4)],
        (1, 2): [("poly", 0, 3), ("poly", 0, 2)],
        (1, 1): [("poly", 0, 1), ("poly", 0, 2), ("poly", 0, 4)],
        (1, 0): [("jet", 2)],
        (2, 2): [("poly", 0, 2), ("poly", 0, 1)],
        (2, 0): [("jet", 1)],
        (3, 0): [("jet", 0)],
    }

    # frames

    @staticmethod
    def face_frame(pts):
        t1, t2, N = P.face_frame_3d(*pts)
        return (t1, t2), N

    @staticmethod
    def edge_frame(pts):
        T = P.vsub(pts[1], pts[0])
        return T, P.edge_normals_3d(T)

    # cell -> face / edge

    def cell_specs(self, s, d, tau_pts):
        vs = self.spaces[s]
        R = range(3)
        if d == 2:
            t, N = self.face_frame(tau_pts)
            if s == 0:
                return [restriction_rows(1), [[term(0, 0, (N,), 1)]]]
            if s == 1:
                tt = [[term(0, _fi(vs, (a, b)), (), t[i][a] * t[j][b]) for a in R for b in R]
                      for (i, j) in SYM2]
                nt = [[term(0, _fi(vs, (a, b)), (), N[a] * t[j][b]) for a in R for b in R]
                      for j in range(2)]
                return [tt, nt]
            if s == 2:
                tn = [[term(0, _fi(vs, (a, b)), (), t[i][a] * N[b]) for a in R for b in R]
                      for i in range(2)]
                nn = [[term(0, _fi(vs, (a, b)), (), N[a] * N[b]) for a in R for b in R]]
                return [tn, nn]
        T, nrm = self.edge_frame(tau_pts)
        if s == 0:
            return [restriction_rows(1),
                    [[term(0, 0, (nrm[i],), 1)] for i in range(2)],
                    [[term(0, 0, (nrm[i], nrm[j]), 1)] for (i, j) in PAIRS2]]
        if s == 1:
            tt = [[term(0, _fi(vs, (a, b)), (), T[a] * T[b]) for a in R for b in R]]
            nt = [[term(0, _fi(vs, (a, b)), (), nrm[i][a] * T[b]) for a in R for b in R]
                  for i in range(2)]
            nn = [[term(0, _fi(vs, (a, b)), (), nrm[i][a] * nrm[j][b]) for a in R for b in R]
                  for (i, j) in PAIRS2]
            return [tt, nt, nn]
        raise ValueError("no edge space for this slot")

    # lower-dimensional traces

    def sub_specs(self, s, d, tau_pts, eta_pts, out_blocks):
        if d == 2 and len(eta_pts) == 2:
            return self.face_to_edge(s, tau_pts, eta_pts)
        layout = out_blocks[0].layout
        if d == 2:
            t, N = self.face_frame(tau_pts)
            return [_jet_spec(layout, self.spaces[s],
                              lambda j, c, e: self.face_to_vertex(s, t, N, j, c, e))]
        T, nrm = self.edge_frame(tau_pts)
        return [_jet_spec(layout, self.spaces[s],
                          lambda j, c, e: self.edge_to_vertex(s, T, nrm, j, c, e))]

    def face_to_edge(self, s, face_pts, edge_pts):
        t, N = self.face_frame(face_pts)
        T, nrm = self.edge_frame(edge_pts)
        nfe = P.cross(T, N)
        c1 = [P.vdot(v, nfe) / P.vdot(nfe, nfe) for v in nrm]
        c2 = [P.vdot(v, N) / P.vdot(N, N) for v in nrm]
        if s == 0:
            first = [[term(0, 0, (nfe,), c1[i]), term(1, 0, (), c2[i])] for i in range(2)]
            # the second normal derivative along N_f is not face data and is dropped
            second = [[term(0, 0, (nfe, nfe), c1[i] * c1[j]),
                       term(1, 0, (nfe,), c1[i] * c2[j] + c2[i] * c1[j])] for (i, j) in PAIRS2]
            return [restriction_rows(1), first, second]
        if s == 1:
            al = _in_face(t, T)
            be = _in_face(t, nfe)

            def bilinear(x, y):
                out = []
                for p, (i, j) in enumerate(SYM2):
                    coef = x[i] * y[j] + (x[j] * y[i] if i != j else 0)
                    out.append(term(0, p, (), coef))
                return out

            tt = [bilinear(al, al)]
            nt = [bilinear([c1[i] * b for b in be], al) +
                  [term(1, q, (), c2[i] * al[q]) for q in range(2)] for i in range(2)]
            nn = [bilinear([c1[i] * b for b in be], [c1[j] * b for b in be]) +
                  [term(1, q, (), (c1[i] * c2[j] + c2[i] * c1[j]) * be[q]) for q in range(2)]
                  for (i, j) in PAIRS2]
            return [tt, nt, nn]
        raise ValueError("no edge space for this slot")

    def face_to_vertex(self, s, t, N, j, c, e):
        dirs = [_projected(t, a) for a in e]
        if s == 0:
            out = [term(0, 0, dirs, 1)]
            if j >= 1:
                out.append(term(1, 0, dirs[:-1], N[e[-1]]))
            return out
        if s == 1:
            a, b = c
            out = []
            for p, (i, k) in enumerate(SYM2):
                coef = t[i][a] * t[k][b] + (t[k][a] * t[i][b] if i != k else 0)
                out.append(term(0, p, dirs, coef))
            for q in range(2):
                out.append(term(1, q, dirs, N[a] * t[q][b] + t[q][a] * N[b]))
            return out
        if s == 2:
            a, b = c
            out = [term(0, i, dirs, t[i][a] * N[b]) for i in range(2)]
            out.append(term(1, 0, dirs, N[a] * N[b]))
            return out
        raise ValueError("no face space for this slot")

    def edge_to_vertex(self, s, T, nrm, j, c, e):
        dirs = [_projected([T], a) for a in e]
        if s == 0:
            out = [term(0, 0, dirs, 1)]
            if j >= 1:
                out += [term(1, i, dirs[:-1], nrm[i][e[-1]]) for i in range(2)]
            if j >= 2:
                out += [term(2, p, dirs[:-2], nrm[i][e[-2]] * nrm[k][e[-1]])
                        for p, (i, k) in enumerate(PAIRS2)]
            return out
        a, b = c
        out = [term(0, 0, dirs, T[a] * T[b])]
        out += [term(1, i, dirs, nrm[i][a] * T[b] + T[a] * nrm[i][b]) for i in range(2)]
        out += [term(2, p, dirs, nrm[i][a] * nrm[k][b]) for p, (i, k) in enumerate(PAIRS2)]
        return out

    # local differentials

    def d_specs(self, s, d, tau_pts):
        if d == 1:
            T, _ = self.edge_frame(tau_pts)
            return [[[term(0, 0, (T, T), 1)]],
                    [[term(1, i, (T,), 1)] for i in range(2)],
                    [[term(2, p, (), 1)] for p in range(4)]]
        t, N = self.face_frame(tau_pts)
        if s == 0:
            return [[[term(0, 0, (t[i], t[j]), 1)] for (i, j) in SYM2],
                    [[term(1, 0, (t[j],), 1)] for j in range(2)]]
        # rot in the face frame: (rot A)_i = d_{t1} A_{i2} - d_{t2} A_{i1}
        sidx = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}
        rows0 = [[term(0, sidx[(i, 1)], (t[0],), 1), term(0, sidx[(i, 0)], (t[1],), -1)]
                 for i in range(2)]
        rows1 = [[term(1, 1, (t[0],), 1), term(1, 0, (t[1],), -1)]]
        return [rows0, rows1]

    # localized currents

    def vertex_current(self, x, psi):
        out = {(0, 0, ()): -psi.div() / 3}
        val = psi(x)
        for a in range(3):
            out[(1, 0, (a,))] = val[a]
        return out

    def face_current(self, tau_pts, psi):
        if len(tau_pts) == 2:
            T, nrm = self.edge_frame(tau_pts)
            out = [(0, 0, _dot_field(psi, T), 1 / P.vdot(T, T))]
            out += [(1, i, _dot_field(psi, nrm[i]), 1 / P.vdot(nrm[i], nrm[i])) for i in range(2)]
            return out
        t, N = self.face_frame(tau_pts)
        G = _face_gram(t)
        out = []
        for i in range(2):
            # i-th column of G^{-1}
            col = _solve2(G, (fmpq(int(i == 0)), fmpq(int(i == 1))))
            w = tuple(col[0] * t[0][a] + col[1] * t[1][a] for a in range(3))
            out.append((0, i, _dot_field(psi, w), 1))
        out.append((1, 0, _dot_field(psi, N), 1 / P.vdot(N, N)))
        return out


# ================================================================ registry

FAMILIES = {
    cls.name: cls for cls in
    (HermiteStenberg2D, FalkNeilan2D, HuZhangHessian2D, HuMaZhangDivDiv2D, Hessian3D)
}

FAMILY_NAMES = tuple(FAMILIES)
FAMILIES_2D = tuple(n for n, c in FAMILIES.items() if c.n == 2)


@dataclass(frozen=True)
class FamilyInfo:
    name: str
    dim: int
    complex_id: str
    currents_id: str
    min_k: int
    M: int


def registry():
    """Descriptor table: name, ambient dim, complex/currents id, min k, M."""
    return [FamilyInfo(c.name, c.n, c.currents_name, c.currents_name, c.min_k, c.M)
            for c in FAMILIES.values()]


class FamilyCheckFailed(RuntimeError):
    pass


_BUILT = {}


def get_family(name, k=None, variant=None, check=True):
    """Family instance; the first construction of each (name, k, variant)
    verifies that d d = 0 on the cell and that d commutes with every trace."""
    if name not in FAMILIES:
        raise UnknownFamily(name)
    cls = FAMILIES[name]
    k = cls.min_k if k is None else k
    key = (name, k, tuple(sorted((variant or {}).items())))
    if key in _BUILT:
        return _BUILT[key]
    fam = cls(k, variant)
    if check:
        bad = self_check(fam)
        if bad:
            raise FamilyCheckFailed(f"{name} k={k}: {bad}")
    _BUILT[key] = fam
    return fam


def self_check(fam):
    """Failures of d d = 0 and of d/trace commuting on the generic cell."""
    ctx = generic_context(fam.n)
    bad = []
    for s in range(fam.n - 1):
        p = fam.slot_degree(s)
        q = p - fam.ops[s].order
        if not la.is_zero(P.op_matrix(fam.ops[s + 1], ctx.cell_pts, q) * P.op_matrix(fam.ops[s], ctx.cell_pts, p)):
            bad.append(("dd", s))
    for s in range(fam.n):
        for tau in all_subsimplices(fam.n):
            if not check_d_trace_commute(fam, s, ctx.cell_pts, tau):
                bad.append(("commute", s, tau))
    return bad


# ================================================================ validation


@dataclass(frozen=True)
class CheckTask:
    family: str
    k: int
    variant: tuple
    check: str
    slot: int
    simplex: tuple
    extra: tuple = ()


def _record(task, ok, **data):
    rec = {"check": task.check, "family": task.family, "k": task.k, "slot": task.slot,
           "simplex_dim": len(task.simplex) - 1 if task.simplex else None,
           "simplex": list(task.simplex) if task.simplex else None,
           "status": "pass" if ok else "fail"}
    rec.update(data)
    return rec


def run_task(task):
    fam = get_family(task.family, task.k, dict(task.variant), check=False)
    ctx = generic_context(fam.n)
    pts = ctx.cell_pts
    s, tau = task.slot, task.simplex
    if task.check == "trace_inclusion":
        eta = task.extra
        return _record(task, check_trace_inclusion(fam, s, pts, tau, eta), eta=list(eta))
    if task.check == "d_trace_commute":
        return _record(task, check_d_trace_commute(fam, s, pts, tau))
    if task.check == "localization":
        return _record(task, check_localization(fam, pts, tau))
    if task.check == "geometric_decomposition":
        r = geometric_decomposition(fam, s, pts)
        return _record(task, r["ok"], decomposition_lhs=r["lhs"], decomposition_rhs=r["rhs"],
                       bubble_dims=r["by_dim"])
    if task.check == "bubble_exactness":
        ch = bubble_chain(fam, pts, tau)
        defects = ch.defects()
        ok = all(x == 0 for x in defects) and ch.closed()
        return _record(task, ok, bubble_dims=ch.dims(), exactness_defects=defects)
    if task.check == "unisolvence":
        dofs = local_dofs(fam, s, pts, reference_chains(fam))
        return _record(task, unisolvent(dofs), dofs=dofs.count,
                       dimension=fam.cell_space_size(s, fam.slot_degree(s)))
    raise ValueError(task.check)


_CHAINS = {}


def reference_chains(fam):
    """Orthogonalized bubble chains of every subsimplex of the generic cell."""
    key = (fam.name, fam.k, tuple(sorted(fam.variant.items())))
    if key not in _CHAINS:
        pts = generic_context(fam.n).cell_pts
        chains = {}
        for t in all_subsimplices(fam.n):
            ch = bubble_chain(fam, pts, t)
            orthogonal_bubble_basis(ch)
            chains[t] = ch
        _CHAINS[key] = chains
    return _CHAINS[key]


def validation_tasks(name, k=None, variant=None, extended=False):
    cls = FAMILIES[name]
    k = cls.min_k if k is None else k
    var = tuple(sorted((variant or {}).items()))
    n = cls.n
    heavy = n == 3 and not extended
    subs = all_subsimplices(n)
    tasks = []
    for s in range(n + 1):
        for tau in subs:
            for j in range(len(tau) - 1):
                for eta in combinations(range(len(tau)), j + 1):
                    tasks.append(CheckTask(name, k, var, "trace_inclusion", s, tau, eta))
    for s in range(n):
        for tau in subs:
            tasks.append(CheckTask(name, k, var, "d_trace_commute", s, tau))
    for tau in subs:
        tasks.append(CheckTask(name, k, var, "localization", len(tau) - 1, tau))
    if not heavy:
        for s in range(n + 1):
            tasks.append(CheckTask(name, k, var, "geometric_decomposition", s, ()))
    for tau in subs:
        if heavy and len(tau) > 2:
            continue
        tasks.append(CheckTask(name, k, var, "bubble_exactness", -1, tau))
    if not heavy:
        for s in range(n + 1):
            tasks.append(CheckTask(name, k, var, "unisolvence", s, ()))
    return tasks


def run_tasks(tasks, jobs=1):
    if jobs <= 1 or len(tasks) < 2:
        return [run_task(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_task, tasks))


def validate_family(name, k=None, variant=None, extended=False, jobs=1):
    """Run the local verification suite; failures are report entries."""
    if name not in FAMILIES:
        raise UnknownFamily(name)
    cls = FAMILIES[name]
    k = cls.min_k if k is None else k
    if k < cls.min_k:
        raise DegreeTooLow(f"{name} needs k >= {cls.min_k}, got {k}")
    records = run_tasks(validation_tasks(name, k, variant, extended), jobs)
    skipped = [] if cls.n == 2 or extended else ["geometric_decomposition", "bubble_exactness(face, cell)",
                                                  "unisolvence"]
    return {"family": name, "k": k, "records": records, "skipped": skipped,
            "pass": all(r["status"] == "pass" for r in records)}
