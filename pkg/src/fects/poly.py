"""Tensor-valued polynomials in barycentric coordinates.

A polynomial of degree k on a d-simplex is stored homogenized: a coefficient
per barycentric monomial lambda^alpha with |alpha| = k, in Python-sorted
(lexicographic) order. Tensor values are stored component-major over the
parameters of a ValueSpace (symmetric and trace-free matrices use a reduced
parameterization).

Differential operators are symbolic, constant-coefficient and described by
term lists over abstract direction indices. A direction index is mapped to a
concrete vector only when a matrix is built: Cartesian axes on cells, the
frame vectors t1, t2 on faces, the tangent T on edges. Composition is exact
and symbolic, which is how complex properties are checked.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb, factorial

from flint import fmpq, fmpq_mat

from . import linalg as la


class IncompatibleOp(ValueError):
    pass


class NotAFace(ValueError):
    pass


class UnsupportedMeasure(ValueError):
    pass


# ---------------------------------------------------------------- monomials


@lru_cache(maxsize=None)
def monomials(d, k):
    """Exponent tuples of length d+1 summing to k, sorted."""
    if k < 0:
        return ()
    out = []
    for bars in combinations(range(k + d), d):
        prev = -1
        alpha = []
        for b in bars:
            alpha.append(b - prev - 1)
            prev = b
        alpha.append(k + d - prev - 1)
        out.append(tuple(alpha))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def mono_index(d, k):
    return {a: i for i, a in enumerate(monomials(d, k))}


def dim_poly(d, k):
    return comb(k + d, d) if k >= 0 else 0


def _fact(alpha):
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


# ------------------------------------------------------------ sparse helper


class Sparse:
    """Tiny dict-of-entries matrix used while assembling operators."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows, cols, data=None):
        self.rows, self.cols = rows, cols
        self.data = data if data is not None else {}

    def add(self, r, c, v):
        if v == 0:
            return
        key = (r, c)
        nv = self.data.get(key, 0) + v
        if nv == 0:
            self.data.pop(key, None)
        else:
            self.data[key] = nv

    def add_block(self, other, r0, c0, scale=1):
        for (r, c), v in other.data.items():
            self.add(r0 + r, c0 + c, v * scale)

    def __matmul__(self, other):
        by_row = {}
        for (r, c), v in other.data.items():
            by_row.setdefault(r, []).append((c, v))
        out = Sparse(self.rows, other.cols)
        for (r, c), v in self.data.items():
            for c2, v2 in by_row.get(c, ()):
                out.add(r, c2, v * v2)
        return out

    def dense(self):
        M = fmpq_mat(self.rows, self.cols)
        for (r, c), v in self.data.items():
            M[r, c] = v
        return M

    @classmethod
    def from_dense(cls, M):
        nr, nc = la.shape(M)
        out = cls(nr, nc)
        e = M.entries()
        for i in range(nr):
            for j in range(nc):
                v = e[i * nc + j]
                if v != 0:
                    out.data[(i, j)] = v
        return out


# ------------------------------------------------------------- geometry


def Q(x):
    return x if isinstance(x, fmpq) else fmpq(x)


def vsub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def vdot(a, b):
    return sum((x * y for x, y in zip(a, b)), fmpq(0))


def vscale(a, s):
    return tuple(x * s for x in a)


def cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def tangent_coefficients(verts, w):
    """Directional derivatives of the barycentric coordinates of the simplex
    `verts` along a vector w lying in its affine span."""
    d = len(verts) - 1
    if d == 0:
        raise NotAFace("no tangent directions on a vertex")
    E = [vsub(v, verts[0]) for v in verts[1:]]
    n = len(w)
    A = la.mat([[E[j][i] for j in range(d)] for i in range(n)])
    try:
        a = la.solve(A, la.column(w))
    except la.NoSolution:
        raise IncompatibleOp("direction not tangent to the simplex")
    coeffs = [a[j, 0] for j in range(d)]
    return (-sum(coeffs, fmpq(0)),) + tuple(coeffs)


def barycentric(verts, x):
    lam = tangent_coefficients(verts, vsub(x, verts[0])) if len(verts) > 1 else (fmpq(0),)
    return (fmpq(1) + lam[0],) + tuple(lam[1:])


# --------------------------------------------------------------- frames


def edge_frame_2d(p0, p1):
    T = vsub(p1, p0)
    return T, (-T[1], T[0])


def face_frame_3d(p0, p1, p2):
    t1, t2 = vsub(p1, p0), vsub(p2, p0)
    return t1, t2, cross(t1, t2)


def edge_normals_3d(T):
    """Two rational normals of T with n1 x n2 parallel to T."""
    a = min(range(3), key=lambda i: (abs(T[i]), i))
    e = tuple(fmpq(int(i == a)) for i in range(3))
    n1 = tuple(vdot(T, T) * e[i] - T[a] * T[i] for i in range(3))
    n2 = cross(T, n1)
    return n1, n2


def frame(points):
    """Frame vectors of a simplex given by its vertex coordinates."""
    n = len(points[0])
    d = len(points) - 1
    if d < 1:
        raise ValueError("frames need dim >= 1")
    if d == 1:
        T = vsub(points[1], points[0])
        if n == 2:
            return {"T": T, "N": (-T[1], T[0])}
        n1, n2 = edge_normals_3d(T)
        return {"T": T, "n1": n1, "n2": n2}
    if d == 2 and n == 3:
        t1, t2, N = face_frame_3d(*points)
        return {"t1": t1, "t2": t2, "N": N}
    return {"t%d" % (i + 1): vsub(points[i + 1], points[0]) for i in range(d)}


def conormal(edge_points, face_points):
    """N_{f,e} = T x N_f in 3D, the 2D edge normal otherwise."""
    T = vsub(edge_points[1], edge_points[0])
    if len(T) == 2:
        return (-T[1], T[0])
    return cross(T, face_frame_3d(*face_points)[2])


# ----------------------------------------------------------- value spaces


@dataclass(frozen=True)
class ValueSpace:
    tag: str
    n: int

    @property
    def rank(self):
        return {"scalar": 0, "vec": 1, "mat": 2, "sym": 2, "trc": 2}[self.tag]

    @property
    def full(self):
        return self.n ** self.rank

    @property
    def params(self):
        """Full-tensor index tuples used as parameters."""
        n = self.n
        if self.tag == "scalar":
            return [()]
        if self.tag == "vec":
            return [(i,) for i in range(n)]
        if self.tag == "mat":
            return [(i, j) for i in range(n) for j in range(n)]
        if self.tag == "sym":
            return [(i, j) for i in range(n) for j in range(i, n)]
        if self.tag == "trc":
            return [(i, j) for i in range(n) for j in range(n) if (i, j) != (n - 1, n - 1)]
        raise ValueError(self.tag)

    @property
    def ncomp(self):
        return len(self.params)

    def full_index(self, idx):
        out = 0
        for i in idx:
            out = out * self.n + i
        return out

    @property
    def full_indices(self):
        return list(product(range(self.n), repeat=self.rank))

    def embed(self):
        """Matrix (full x params) sending parameters to the full tensor."""
        n = self.n
        E = fmpq_mat(self.full, self.ncomp)
        for p, idx in enumerate(self.params):
            E[self.full_index(idx), p] = 1
            if self.tag == "sym" and idx[0] != idx[1]:
                E[self.full_index(idx[::-1]), p] = 1
            if self.tag == "trc" and idx[0] == idx[1]:
                E[self.full_index((n - 1, n - 1)), p] = -1
        return E

    def extract(self):
        """Left inverse of embed (params x full)."""
        X = fmpq_mat(self.ncomp, self.full)
        for p, idx in enumerate(self.params):
            X[p, self.full_index(idx)] = 1
        return X

    def frobenius(self):
        E = self.embed()
        return E.transpose() * E

    def __str__(self):
        return self.tag if self.tag == "scalar" else f"{self.tag}{self.n}"


def scalar(n):
    return ValueSpace("scalar", n)


def vec(n):
    return ValueSpace("vec", n)


def sym(n):
    return ValueSpace("sym", n)


def trc(n):
    return ValueSpace("trc", n)


def matsp(n):
    return ValueSpace("mat", n)


# -------------------------------------------------------------- operators


def _canon(terms):
    return {k: v for k, v in terms.items() if v != 0}


class DiffOp:
    """Constant-coefficient differential operator on full tensor components.

    terms: {(out_full, in_full, dirs): coeff} with dirs a sorted tuple of
    abstract direction indices in range(m).
    """

    def __init__(self, name, vin, vout, m, terms):
        self.name = name
        self.vin, self.vout, self.m = vin, vout, m
        self.terms = _canon(terms)
        orders = {len(k[2]) for k in self.terms}
        self.order = max(orders) if orders else 0

    def compose(self, inner):
        """self after inner."""
        if inner.vout.full != self.vin.full or inner.m != self.m:
            raise IncompatibleOp(f"cannot compose {self.name} with {inner.name}")
        by_out = {}
        for (o, i, d), c in inner.terms.items():
            by_out.setdefault(o, []).append((i, d, c))
        terms = {}
        for (o, mid, d2), c2 in self.terms.items():
            for i, d1, c1 in by_out.get(mid, ()):
                key = (o, i, tuple(sorted(d1 + d2)))
                terms[key] = terms.get(key, 0) + c1 * c2
        return DiffOp(f"{self.name}.{inner.name}", inner.vin, self.vout, self.m, terms)

    def is_zero(self):
        return not self.terms

    def param_terms(self):
        """Terms relative to the parameterizations of vin and vout."""
        E = la.to_rows(self.vin.embed())
        X = la.to_rows(self.vout.extract())
        emb = {}
        for f in range(self.vin.full):
            for p, v in enumerate(E[f]):
                if v != 0:
                    emb.setdefault(f, []).append((p, v))
        ext = {}
        for p, row in enumerate(X):
            for f, v in enumerate(row):
                if v != 0:
                    ext.setdefault(f, []).append((p, v))
        out = {}
        for (o, i, d), c in self.terms.items():
            for po, vo in ext.get(o, ()):
                for pi, vi in emb.get(i, ()):
                    key = (po, pi, d)
                    out[key] = out.get(key, 0) + c * vo * vi
        return _canon(out)

    def __repr__(self):
        return f"DiffOp({self.name}: {self.vin} -> {self.vout})"


def _op(name, vin, vout, m, rule):
    terms = {}
    for in_idx in vin.full_indices:
        for out_idx, dirs, c in rule(in_idx):
            key = (vout.full_index(out_idx), vin.full_index(in_idx), tuple(sorted(dirs)))
            terms[key] = terms.get(key, 0) + fmpq(c)
    return DiffOp(name, vin, vout, m, terms)


def _raise_rank(v, tag=None):
    if v.rank == 0:
        return ValueSpace("vec", v.n)
    if v.rank == 1:
        return ValueSpace(tag or "mat", v.n)
    raise IncompatibleOp("rank too high")


def _lower_rank(v):
    return {0: None, 1: scalar(v.n), 2: vec(v.n)}[v.rank]


def grad(v, m=None, out=None):
    m = m or v.n
    vout = out or _raise_rank(v)
    return _op("grad", v, vout, m, lambda I: [(I + (a,), (a,), 1) for a in range(m)])


def div(v, m=None):
    m = m or v.n
    if v.rank == 0:
        raise IncompatibleOp("div of a scalar")
    return _op("div", v, _lower_rank(v), m,
               lambda I: [(I[:-1], (I[-1],), 1)] if I[-1] < m else [])


def curl(v, m=None, out=None):
    """Row-wise curl. In 3D acts on the last index, in 2D appends one."""
    n = v.n
    m = m or n
    if m == 3:
        if v.rank == 0:
            raise IncompatibleOp("3D curl of a scalar")
        vout = out or (vec(n) if v.rank == 1 else matsp(n))

        def rule(I):
            c = I[-1]
            res = []
            for a in range(3):
                for b in range(3):
                    e = _levi((a, b, c))
                    if e:
                        res.append((I[:-1] + (a,), (b,), e))
            return res
        return _op("curl", v, vout, m, rule)
    if m == 2:
        vout = out or _raise_rank(v)
        return _op("curl", v, vout, m, lambda I: [(I + (0,), (1,), -1), (I + (1,), (0,), 1)])
    raise IncompatibleOp("curl needs 2 or 3 directions")


def rot(v, m=None):
    """2D rot, row-wise: contracts the last index."""
    m = m or v.n
    if m != 2 or v.rank == 0:
        raise IncompatibleOp("rot needs a 2D field")

    def rule(I):
        if I[-1] == 1:
            return [(I[:-1], (0,), 1)]
        return [(I[:-1], (1,), -1)]
    return _op("rot", v, _lower_rank(v), m, rule)


def _levi(t):
    a, b, c = t
    if len({a, b, c}) < 3:
        return 0
    return 1 if (a, b, c) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1


def transpose_op(v, m=None):
    return DiffOp("T", v, v, m or v.n,
                  {(v.full_index((j, i)), v.full_index((i, j)), ()): fmpq(1)
                   for i in range(v.n) for j in range(v.n)})


def _identity_full(v, vout=None):
    vout = vout or v
    return DiffOp("id", v, vout, v.n, {(f, f, ()): fmpq(1) for f in range(v.full)})


def symmetrize(v, m=None):
    n = v.n
    terms = {}
    for i in range(n):
        for j in range(n):
            for a, b in ((i, j), (j, i)):
                key = (v.full_index((i, j)), v.full_index((a, b)), ())
                terms[key] = terms.get(key, 0) + fmpq(1, 2)
    return DiffOp("sym", v, sym(n), m or n, terms)


def deviator(v, m=None):
    n = v.n
    terms = {(v.full_index((i, j)), v.full_index((i, j)), ()): fmpq(1)
             for i in range(n) for j in range(n)}
    for i in range(n):
        for a in range(n):
            key = (v.full_index((i, i)), v.full_index((a, a)), ())
            terms[key] = terms.get(key, 0) - fmpq(1, n)
    return DiffOp("dev", v, trc(n), m or n, terms)


def hess(v, m=None):
    m = m or v.n
    if v.rank != 0:
        raise IncompatibleOp("hess acts on scalars")
    g = grad(v, m)
    op = grad(g.vout, m, out=sym(v.n)).compose(g)
    op.name = "hess"
    return op


def sym_curl(v, m=None):
    m = m or v.n
    c = curl(v, m, out=matsp(v.n))
    op = symmetrize(matsp(v.n), m).compose(c)
    op.name = "sym_curl"
    return op


def div_div(v, m=None):
    m = m or v.n
    d1 = div(v, m)
    op = div(d1.vout, m).compose(d1)
    op.name = "div_div"
    return op


def dev_grad(v, m=None):
    m = m or v.n
    op = deviator(matsp(v.n), m).compose(grad(v, m))
    op.name = "dev_grad"
    return op


def sym_grad(v, m=None):
    m = m or v.n
    op = symmetrize(matsp(v.n), m).compose(grad(v, m))
    op.name = "sym_grad"
    return op


def inc(v, m=None):
    m = m or v.n
    n = v.n
    c1 = curl(v, m, out=matsp(n))
    tr = transpose_op(matsp(n), m)
    c2 = curl(matsp(n), m, out=sym(n))
    op = c2.compose(tr.compose(c1))
    op.name = "inc"
    return op


OPERATORS = {
    "grad": grad, "curl": curl, "div": div, "rot": rot, "hess": hess,
    "sym_curl": sym_curl, "div_div": div_div, "dev_grad": dev_grad,
    "sym_grad": sym_grad, "inc": inc,
}


def surface_op(name, v):
    """Surface operators act in the two face frame directions."""
    base = {"grad_f": grad, "rot_f": rot, "hess_f": hess, "curl_f": curl, "div_f": div}[name]
    op = base(v, 2)
    op.name = name
    return op


def dt_edge(v):
    terms = {(f, f, (0,)): fmpq(1) for f in range(v.full)}
    return DiffOp("dt_edge", v, v, 1, terms)


def make_op(name, v):
    if name in OPERATORS:
        return OPERATORS[name](v)
    if name == "dt_edge":
        return dt_edge(v)
    if name.endswith("_f"):
        return surface_op(name, v)
    raise IncompatibleOp(f"unknown operator {name!r}")


# -------------------------------------------------- barycentric operators


def _key(points):
    return tuple(tuple((int(c.p), int(c.q)) for c in p) for p in points)


def _unkey(key):
    return [tuple(fmpq(a, b) for a, b in p) for p in key]


@lru_cache(maxsize=None)
def _dlam_cached(d, k, coeffs_key):
    coeffs = [fmpq(a, b) for a, b in coeffs_key]
    out = Sparse(dim_poly(d, k - 1), dim_poly(d, k))
    if k == 0:
        return out
    idx = mono_index(d, k - 1)
    for col, alpha in enumerate(monomials(d, k)):
        for i, ai in enumerate(alpha):
            if ai and coeffs[i] != 0:
                beta = alpha[:i] + (ai - 1,) + alpha[i + 1:]
                out.add(idx[beta], col, ai * coeffs[i])
    return out


def directional_matrix(d, k, coeffs):
    """Sparse map P_k -> P_{k-1} for sum_i coeffs[i] d/dlambda_i."""
    return _dlam_cached(d, k, tuple((int(c.p), int(c.q)) for c in map(Q, coeffs)))


@lru_cache(maxsize=None)
def _multi_cached(d, k, dirs_key):
    if not dirs_key:
        return _identity_sparse(dim_poly(d, k))
    first = [fmpq(a, b) for a, b in dirs_key[0]]
    rest = _multi_cached(d, k, dirs_key[1:])
    return directional_matrix(d, k - len(dirs_key) + 1, first) @ rest


@lru_cache(maxsize=None)
def _identity_sparse(n):
    return Sparse(n, n, {(i, i): fmpq(1) for i in range(n)})


def derivative_matrix(d, k, dir_coeffs):
    """Composite derivative along a sequence of barycentric coefficient
    vectors, as a sparse P_k -> P_{k-len} map."""
    key = tuple(tuple((int(c.p), int(c.q)) for c in map(Q, v)) for v in dir_coeffs)
    return _multi_cached(d, k, tuple(sorted(key)))


def op_sparse(op, points, k, directions=None):
    """Sparse matrix of a DiffOp on P_k(simplex) in parameter coordinates.

    points: vertex coordinates of the simplex; directions: the m vectors the
    abstract direction indices refer to (Cartesian axes by default).
    """
    d = len(points) - 1
    n = len(points[0])
    if directions is None:
        directions = [tuple(fmpq(int(i == j)) for i in range(n)) for j in range(n)]
    if len(directions) != op.m:
        raise IncompatibleOp(f"{op.name} needs {op.m} directions")
    dc = [tangent_coefficients(points, w) for w in directions]
    nin, nout = dim_poly(d, k), dim_poly(d, k - op.order)
    out = Sparse(op.vout.ncomp * nout, op.vin.ncomp * nin)
    for (o, i, dirs), c in op.param_terms().items():
        if len(dirs) != op.order:
            raise IncompatibleOp("mixed-order operators are not supported")
        D = derivative_matrix(d, k, [dc[j] for j in dirs])
        out.add_block(D, o * nout, i * nin, c)
    return out


def op_matrix(op, points, k, directions=None):
    return op_sparse(op, points, k, directions).dense()


# --------------------------------------------------- restriction and values


def face_positions(cell, face):
    """Positions of the face's vertices inside the cell vertex tuple."""
    try:
        return [cell.index(v) for v in face]
    except ValueError:
        raise NotAFace(f"{face} is not a face of {cell}")


@lru_cache(maxsize=None)
def _restrict_cached(dc, k, pos):
    df = len(pos) - 1
    idx = mono_index(df, k)
    out = Sparse(dim_poly(df, k), dim_poly(dc, k))
    posset = set(pos)
    for col, alpha in enumerate(monomials(dc, k)):
        if all(alpha[j] == 0 for j in range(dc + 1) if j not in posset):
            out.add(idx[tuple(alpha[p] for p in pos)], col, fmpq(1))
    return out


def restrict_sparse(cell, face, k, ncomp=1):
    """Restriction of P_k(cell)^ncomp to P_k(face)^ncomp (vertex id tuples)."""
    pos = tuple(face_positions(tuple(cell), tuple(face)))
    R = _restrict_cached(len(cell) - 1, k, pos)
    if ncomp == 1:
        return R
    out = Sparse(R.rows * ncomp, R.cols * ncomp)
    for c in range(ncomp):
        out.add_block(R, c * R.rows, c * R.cols)
    return out


def vertex_eval_sparse(d, k, j, ncomp=1):
    """Evaluation at vertex j of the simplex: the coefficient of k e_j."""
    alpha = tuple(k if i == j else 0 for i in range(d + 1))
    col = mono_index(d, k)[alpha]
    n = dim_poly(d, k)
    return Sparse(ncomp, ncomp * n, {(c, c * n + col): fmpq(1) for c in range(ncomp)})


def raise_degree_sparse(d, k, m, ncomp=1):
    """Multiplication by (sum lambda)^m: P_k -> P_{k+m}, identity on functions."""
    cur = _identity_sparse(dim_poly(d, k))
    for step in range(m):
        kk = k + step
        idx = mono_index(d, kk + 1)
        S = Sparse(dim_poly(d, kk + 1), dim_poly(d, kk))
        for col, alpha in enumerate(monomials(d, kk)):
            for i in range(d + 1):
                S.add(idx[alpha[:i] + (alpha[i] + 1,) + alpha[i + 1:]], col, fmpq(1))
        cur = S @ cur
    if ncomp == 1:
        return cur
    out = Sparse(cur.rows * ncomp, cur.cols * ncomp)
    for c in range(ncomp):
        out.add_block(cur, c * cur.rows, c * cur.cols)
    return out


# ---------------------------------------------------------- multiplication


def poly_mul(d, a, ka, b, kb):
    """Product of two homogeneous scalar coefficient lists."""
    ma, mb = monomials(d, ka), monomials(d, kb)
    idx = mono_index(d, ka + kb)
    out = [fmpq(0)] * dim_poly(d, ka + kb)
    for ca, al in zip(a, ma):
        if ca == 0:
            continue
        for cb, be in zip(b, mb):
            if cb != 0:
                out[idx[tuple(x + y for x, y in zip(al, be))]] += ca * cb
    return out


def multiplication_sparse(d, weight, kw, k):
    """Matrix of p -> weight * p from P_k to P_{k+kw}."""
    idx = mono_index(d, k + kw)
    out = Sparse(dim_poly(d, k + kw), dim_poly(d, k))
    for cw, be in zip(weight, monomials(d, kw)):
        if cw == 0:
            continue
        for col, al in enumerate(monomials(d, k)):
            out.add(idx[tuple(x + y for x, y in zip(al, be))], col, cw)
    return out


def affine_to_bary(points, values_at_vertices):
    """Degree-1 homogeneous coefficients of an affine function."""
    d = len(points) - 1
    out = [fmpq(0)] * (d + 1)
    for j, v in enumerate(values_at_vertices):
        alpha = tuple(int(i == j) for i in range(d + 1))
        out[mono_index(d, 1)[alpha]] = Q(v)
    return out


def cartesian_to_bary(points, cpoly, k):
    """Convert {exponent tuple: coeff} in ambient Cartesian coordinates to the
    degree-k homogeneous barycentric representation on the simplex."""
    d = len(points) - 1
    n = len(points[0])
    xs = [affine_to_bary(points, [p[i] for p in points]) for i in range(n)]
    out = [fmpq(0)] * dim_poly(d, k)
    powers = {}

    def power(i, e):
        if (i, e) not in powers:
            if e == 0:
                powers[(i, e)] = ([fmpq(1)], 0)
            else:
                prev, kp = power(i, e - 1)
                powers[(i, e)] = (poly_mul(d, prev, kp, xs[i], 1), kp + 1)
        return powers[(i, e)]

    for expo, c in cpoly.items():
        if c == 0:
            continue
        term, kt = [fmpq(1)], 0
        for i, e in enumerate(expo):
            if e:
                pw, kp = power(i, e)
                term, kt = poly_mul(d, term, kt, pw, kp), kt + kp
        if kt > k:
            raise ValueError("degree too low for the Cartesian polynomial")
        R = raise_degree_sparse(d, kt, k - kt)
        for (r, col), v in R.data.items():
            out[r] += v * term[col] * Q(c)
    return out


# -------------------------------------------------------------- integration


@lru_cache(maxsize=None)
def _moment_table(d, k, m):
    """Parametric integrals of lambda^alpha lambda^beta, |alpha|=k, |beta|=m."""
    rows = []
    for be in monomials(d, m):
        row = []
        for al in monomials(d, k):
            g = tuple(x + y for x, y in zip(al, be))
            row.append(fmpq(_fact(g), factorial(k + m + d)))
        rows.append(row)
    return la.mat(rows, dim_poly(d, k))


def gram_poly(d, k, m=None):
    """Parametric L2 Gram between P_m (rows) and P_k (columns)."""
    return _moment_table(d, k, k if m is None else m)


def integral_row(d, k):
    """Row vector of parametric integrals of the degree-k monomials."""
    return _moment_table(d, k, 0)


def measure_factor(points, measure):
    d = len(points) - 1
    n = len(points[0])
    if measure == "parametric":
        return fmpq(1)
    if measure == "euclidean":
        if d != n:
            raise UnsupportedMeasure("euclidean measure only on top cells")
        E = [vsub(p, points[0]) for p in points[1:]]
        return fmpq_mat(n, n, [E[j][i] for i in range(n) for j in range(n)]).det()
    raise UnsupportedMeasure(measure)


def integrate(coeffs, points, k, measure="parametric"):
    """Integral of a scalar polynomial. The euclidean measure on a top cell
    is signed by the orientation of the vertex order."""
    d = len(points) - 1
    row = integral_row(d, k)
    val = sum((row[0, j] * Q(c) for j, c in enumerate(coeffs)), fmpq(0))
    return val * measure_factor(points, measure)


def weighted_moments(d, k, weight, kw):
    """Row vector p -> integral of weight * p over the parametric simplex."""
    G = gram_poly(d, k, kw)
    row = [fmpq(0)] * dim_poly(d, k)
    for i, w in enumerate(weight):
        if w != 0:
            for j in range(len(row)):
                row[j] += w * G[i, j]
    return row


def tensor_gram(vs, d, k, m=None):
    """Frobenius-L2 Gram on P_k(simplex) tensor vs (parametric measure)."""
    G = gram_poly(d, k, m)
    F = vs.frobenius()
    nr, nc = G.nrows(), G.ncols()
    out = fmpq_mat(vs.ncomp * nr, vs.ncomp * nc)
    gl = la.to_rows(G)
    for a in range(vs.ncomp):
        for b in range(vs.ncomp):
            f = F[a, b]
            if f == 0:
                continue
            for i in range(nr):
                for j in range(nc):
                    if gl[i][j] != 0:
                        out[a * nr + i, b * nc + j] = f * gl[i][j]
    return out


# ------------------------------------------------------------------- jets


@dataclass(frozen=True)
class JetLayout:
    """Coordinates of an m-jet of a field with `full` tensor components in
    R^n: for each order j, each component, each derivative index tuple."""
    n: int
    order: int
    full: int

    @property
    def blocks(self):
        out = []
        for j in range(self.order + 1):
            for c in range(self.full):
                for e in product(range(self.n), repeat=j):
                    out.append((j, c, e))
        return out

    @property
    def size(self):
        return sum(self.full * self.n ** j for j in range(self.order + 1))

    def index(self):
        return {b: i for i, b in enumerate(self.blocks)}


def jet_matrix(points, vertex_pos, vs, k, order):
    """Map P_k(cell) tensor vs -> order-m jet (full components) at a vertex."""
    d = len(points) - 1
    n = len(points[0])
    lay = JetLayout(n, order, vs.full)
    axes = [tuple(fmpq(int(i == j)) for i in range(n)) for j in range(n)]
    dc = [tangent_coefficients(points, w) for w in axes]
    E = la.to_rows(vs.embed())
    nin = dim_poly(d, k)
    out = Sparse(lay.size, vs.ncomp * nin)
    for r, (j, c, e) in enumerate(lay.blocks):
        if j > k:
            continue
        D = derivative_matrix(d, k, [dc[a] for a in e])
        alpha = tuple(k - j if i == vertex_pos else 0 for i in range(d + 1))
        row = mono_index(d, k - j)[alpha]
        for p, v in enumerate(E[c]):
            if v == 0:
                continue
            for (rr, col), val in D.data.items():
                if rr == row:
                    out.add(r, p * nin + col, v * val)
    return out


def jet_op_matrix(op, n, order):
    """Action of a DiffOp (Cartesian directions) on m-jets: m -> m - ord."""
    lin = JetLayout(n, order, op.vin.full)
    lout = JetLayout(n, order - op.order, op.vout.full)
    if order < op.order:
        raise IncompatibleOp("operator order exceeds jet order")
    iidx = lin.index()
    out = Sparse(lout.size, lin.size)
    for r, (j, o, e) in enumerate(lout.blocks):
        for (oo, i, dirs), c in op.terms.items():
            if oo == o:
                out.add(r, iidx[(j + len(dirs), i, tuple(dirs) + e)], c)
    return out


def jet_differentiate(jet, op, n, order):
    """Apply op to the coordinates of an order-m jet; returns an (m - ord)-jet."""
    return _apply(jet_op_matrix(op, n, order), jet)


# ------------------------------------------------------------ TensorPoly


@dataclass
class TensorPoly:
    """A polynomial field on an embedded simplex (vertex coordinates)."""
    points: tuple
    value: ValueSpace
    degree: int
    coeffs: list

    @property
    def dim(self):
        return len(self.points) - 1

    def vector(self):
        return la.column(self.coeffs)

    def differentiate(self, op, directions=None):
        if op.vin != self.value and op.vin.full != self.value.full:
            raise IncompatibleOp(f"{op.name} does not act on {self.value}")
        S = op_sparse(op, self.points, self.degree, directions)
        return TensorPoly(self.points, op.vout, self.degree - op.order, _apply(S, self.coeffs))

    def restrict(self, face_points):
        cell_ids = tuple(range(len(self.points)))
        pos = []
        for fp in face_points:
            if tuple(fp) not in [tuple(p) for p in self.points]:
                raise NotAFace("point is not a vertex of the simplex")
            pos.append([tuple(p) for p in self.points].index(tuple(fp)))
        R = restrict_sparse(cell_ids, tuple(pos), self.degree, self.value.ncomp)
        return TensorPoly(tuple(face_points), self.value, self.degree, _apply(R, self.coeffs))

    def point_eval(self, x):
        lam = barycentric(list(self.points), x)
        nm = dim_poly(self.dim, self.degree)
        vals = []
        for c in range(self.value.ncomp):
            s = fmpq(0)
            for j, alpha in enumerate(monomials(self.dim, self.degree)):
                t = self.coeffs[c * nm + j]
                if t != 0:
                    for l, a in zip(lam, alpha):
                        if a:
                            t *= l ** a
                    s += t
            vals.append(s)
        return vals

    def jet_eval(self, vertex_pos, order):
        S = jet_matrix(self.points, vertex_pos, self.value, self.degree, order)
        return _apply(S, self.coeffs)

    def integrate(self, measure="parametric"):
        if self.value.ncomp != 1:
            raise IncompatibleOp("integrate expects a scalar polynomial")
        return integrate(self.coeffs, self.points, self.degree, measure)

    def dump(self):
        nm = dim_poly(self.dim, self.degree)
        lines = []
        for c in range(self.value.ncomp):
            for j, alpha in enumerate(monomials(self.dim, self.degree)):
                v = self.coeffs[c * nm + j]
                if v != 0:
                    lines.append(f"{c} {alpha} -> {v}")
        return "\n".join(lines)


def _apply(S, coeffs):
    out = [fmpq(0)] * S.rows
    for (r, c), v in S.data.items():
        out[r] += v * coeffs[c]
    return out


def poly_basis(k, points, value):
    """Unit coefficient vectors: component-major, monomials in sorted order."""
    d = len(points) - 1
    n = value.ncomp * dim_poly(d, k)
    out = []
    for i in range(n):
        c = [fmpq(0)] * n
        c[i] = fmpq(1)
        out.append(TensorPoly(tuple(points), value, k, c))
    return out
