"""Generalized currents for the supported smooth complexes.

Each family attaches to a simplex tau of dimension m a functional on fields
of slot m with values in an auxiliary space Z (the kernel of the first
operator). The functionals are written with unnormalized frames and
parametric measures, so that unit vectors never appear:

    t ds      = T dlambda        (edges)
    n dA      = N_f dxi deta     (faces of a tetrahedron)
    dV        = det(E) dlambda   (top cells, signed by the vertex order)

Z-vectors are coordinates in a fixed L2-orthogonal (not normalized) basis
z_1..z_m of Z. The i-th coordinate is the pairing with the test field psi_i.
"""

from dataclasses import dataclass, field

from flint import fmpq, fmpq_mat

from . import linalg as la
from . import poly as P


class SlotMismatch(ValueError):
    pass


# ------------------------------------------------------------ affine fields


@dataclass(frozen=True)
class Affine:
    """Scalar affine function c + b.x."""
    c: fmpq
    b: tuple

    def __call__(self, x):
        return self.c + P.vdot(self.b, x)

    def pullback(self, x0, a):
        """x_hat -> self(x0 + a x_hat)."""
        return Affine(self(x0), tuple(bi * a for bi in self.b))


def const(c, n):
    return Affine(P.Q(c), tuple(fmpq(0) for _ in range(n)))


def coord(i, n):
    return Affine(fmpq(0), tuple(fmpq(int(j == i)) for j in range(n)))


@dataclass(frozen=True)
class AffineField:
    """Scalar (one component) or vector affine field."""
    comps: tuple

    @property
    def n(self):
        return len(self.comps[0].b)

    def __call__(self, x):
        return tuple(c(x) for c in self.comps)

    def grad(self):
        return self.comps[0].b

    def div(self):
        return sum((self.comps[a].b[a] for a in range(self.n)), fmpq(0))

    def curl(self):
        B = [c.b for c in self.comps]
        return (B[2][1] - B[1][2], B[0][2] - B[2][0], B[1][0] - B[0][1])

    def pullback(self, x0, a):
        return AffineField(tuple(c.pullback(x0, a) for c in self.comps))

    def cartesian(self):
        """Per component {exponent: coeff} dictionaries."""
        n = self.n
        out = []
        for c in self.comps:
            d = {tuple(0 for _ in range(n)): c.c}
            for i, bi in enumerate(c.b):
                if bi != 0:
                    d[tuple(int(j == i) for j in range(n))] = bi
            out.append(d)
        return out


def _scalar_field(aff):
    return AffineField((aff,))


def _vector_field(comps):
    return AffineField(tuple(comps))


def psi_basis(space, n):
    """Printed test bases: P1 = {1, x, ...}, RT = {e_i, x}, RM = {e_i, e_i x x}."""
    if space == "R":
        return [_scalar_field(const(1, n))]
    if space == "P1":
        return [_scalar_field(const(1, n))] + [_scalar_field(coord(i, n)) for i in range(n)]
    if space == "RT":
        out = []
        for i in range(n):
            out.append(_vector_field([const(int(j == i), n) for j in range(n)]))
        out.append(_vector_field([coord(j, n) for j in range(n)]))
        return out
    if space == "RM":
        out = []
        for i in range(3):
            out.append(_vector_field([const(int(j == i), 3) for j in range(3)]))
        for i in range(3):
            e = tuple(fmpq(int(j == i)) for j in range(3))
            # e_i x x has components linear in x
            comps = []
            for a in range(3):
                b = [fmpq(0)] * 3
                # (e x x)_a = e_{a+1} x_{a+2} - e_{a+2} x_{a+1}
                b[(a + 2) % 3] += e[(a + 1) % 3]
                b[(a + 1) % 3] -= e[(a + 2) % 3]
                comps.append(Affine(fmpq(0), tuple(b)))
            out.append(_vector_field(comps))
        return out
    raise ValueError(space)


def _box_moment(expo):
    out = fmpq(1)
    for e in expo:
        out /= e + 1
    return out


def box_inner(f, g):
    """L2 inner product of two affine fields on the unit box [0,1]^n."""
    total = fmpq(0)
    for cf, cg in zip(f.cartesian(), g.cartesian()):
        for ea, va in cf.items():
            for eb, vb in cg.items():
                total += va * vb * _box_moment(tuple(x + y for x, y in zip(ea, eb)))
    return total


def _combine(fields, coeffs):
    comps = []
    for a in range(len(fields[0].comps)):
        c = sum((k * f.comps[a].c for f, k in zip(fields, coeffs)), fmpq(0))
        n = fields[0].n
        b = tuple(sum((k * f.comps[a].b[j] for f, k in zip(fields, coeffs)), fmpq(0)) for j in range(n))
        comps.append(Affine(c, b))
    return AffineField(tuple(comps))


def z_basis(space, n):
    """Gram-Schmidt (no normalization) of the printed basis on the unit box."""
    base = psi_basis(space, n)
    out = []
    for f in base:
        coeffs = [fmpq(1)]
        fields = [f]
        for g in out:
            c = box_inner(f, g) / box_inner(g, g)
            fields.append(g)
            coeffs.append(-c)
        out.append(_combine(fields, coeffs))
    return out


def z_gram(space, n):
    zs = z_basis(space, n)
    G = fmpq_mat(len(zs), len(zs))
    for i, z in enumerate(zs):
        G[i, i] = box_inner(z, z)
    return G


# ------------------------------------------------------------ expressions


def scalar_expr(vin, n, terms):
    """Scalar DiffOp from {(full_index_tuple, dirs): coeff}; one order only."""
    out = {}
    for (idx, dirs), c in terms.items():
        key = (0, vin.full_index(idx), tuple(sorted(dirs)))
        out[key] = out.get(key, 0) + P.Q(c)
    return P.DiffOp("expr", vin, P.scalar(n), n, out)


def split_by_order(vin, n, terms):
    by = {}
    for (idx, dirs), c in terms.items():
        if c != 0:
            by.setdefault(len(dirs), {})[(idx, dirs)] = c
    return [scalar_expr(vin, n, t) for _, t in sorted(by.items())]


@dataclass
class Integrand:
    """sum over terms of expr(w) * g with g affine."""
    terms: dict
    weight: Affine


# ------------------------------------------------------------ functionals


def _affine_bary(points, g):
    return P.affine_to_bary(points, [g(p) for p in points])


def functional_row(cell_pts, tau_pos, K, vin, integrands, scale=1):
    """Row vector on P_K(cell) tensor vin of sum_j integral_tau expr_j(w) g_j.

    Vertices use point values; dim >= 1 uses parametric integration."""
    n = len(cell_pts[0])
    d = len(tau_pos) - 1
    dc = len(cell_pts) - 1
    tau_pts = [cell_pts[i] for i in tau_pos]
    ncols = vin.ncomp * P.dim_poly(dc, K)
    row = [fmpq(0)] * ncols
    for ig in integrands:
        for op in split_by_order(vin, n, ig.terms):
            kk = K - op.order
            if kk < 0:
                continue
            S = P.op_sparse(op, cell_pts, K)
            if d == 0:
                gval = ig.weight(tau_pts[0])
                if gval == 0:
                    continue
                alpha = tuple(kk if i == tau_pos[0] else 0 for i in range(dc + 1))
                target = P.mono_index(dc, kk)[alpha]
                for (r, c), v in S.data.items():
                    if r == target:
                        row[c] += v * gval * scale
            else:
                R = P.restrict_sparse(tuple(range(dc + 1)), tuple(tau_pos), kk)
                weight = _affine_bary(tau_pts, ig.weight)
                mom = P.weighted_moments(d, kk, weight, 1)
                RS = R @ S
                for (r, c), v in RS.data.items():
                    row[c] += mom[r] * v * scale
    return row


# --------------------------------------------------------------- families


@dataclass
class CurrentsFamily:
    name: str
    n: int
    z_space: str
    ops: list
    spaces: list
    psi_space: str
    variant: dict = field(default_factory=dict)

    @property
    def dim_z(self):
        return len(psi_basis(self.psi_space, self.n))

    def orders(self):
        return [op.order for op in self.ops]

    def exponents(self):
        """l_0 from the vertex formula, then l_{k+1} = l_k + ord(d_k)."""
        out = [VERTEX_EXPONENT[self.name]]
        for o in self.orders():
            out.append(out[-1] + o)
        return out

    def integrands(self, level, tau_pts, psi):
        return INTEGRANDS[self.name](self, level, tau_pts, psi)

    def upsilon_matrix(self, cell_pts, tau_pos, K, psis=None):
        """dim Z x dim(P_K(cell) tensor X^level) matrix of Upsilon_tau."""
        level = len(tau_pos) - 1
        vin = self.spaces[level]
        psis = psis or psi_basis(self.psi_space, self.n)
        tau_pts = [cell_pts[i] for i in tau_pos]
        scale = 1
        if level == self.n:
            scale = P.measure_factor(tau_pts, "euclidean")
        rows = []
        for psi in psis:
            rows.append(functional_row(cell_pts, tau_pos, K, vin,
                                       self.integrands(level, tau_pts, psi), scale))
        return la.mat(rows, vin.ncomp * P.dim_poly(len(cell_pts) - 1, K))

    def upsilon(self, cell_pts, tau_pos, w):
        """Apply to a TensorPoly w on the cell."""
        level = len(tau_pos) - 1
        if w.value.ncomp != self.spaces[level].ncomp:
            raise SlotMismatch(f"{self.name}: level {level} expects {self.spaces[level]}")
        M = self.upsilon_matrix(cell_pts, tau_pos, w.degree)
        return la.col_list(M * w.vector())


def _idx_vec(a):
    return (a,)


def _mat_idx(a, b):
    return (a, b)


def _ig(terms, g):
    return Integrand({k: v for k, v in terms.items() if v != 0}, g)


def _one(n):
    return const(1, n)


def _frame_vec(level, tau_pts):
    if level == 1:
        return P.vsub(tau_pts[1], tau_pts[0])
    t1, t2, N = P.face_frame_3d(*tau_pts)
    return N


def _derham(fam, level, tau_pts, psi):
    n = fam.n
    g = psi.comps[0]
    if level == 0:
        return [_ig({((), ()): 1}, g)]
    if level == n:
        return [_ig({((), ()): 1}, g)]
    w = _frame_vec(level, tau_pts)
    return [_ig({((a,), ()): w[a] for a in range(n)}, g)]


def _hessian(fam, level, tau_pts, psi):
    n = fam.n
    if level == 0:
        out = [_ig({((), (a,)): 1}, psi.comps[a]) for a in range(n)]
        out.append(_ig({((), ()): -psi.div() / n}, _one(n)))
        return out
    if level == n:
        return [_ig({((a,), ()): 1}, psi.comps[a]) for a in range(n)]
    # (sigma w) . psi with w = T on edges, N_f on faces
    w = _frame_vec(level, tau_pts)
    return [_ig({((a, b), ()): w[b] for b in range(n)}, psi.comps[a]) for a in range(n)]


def _divdiv2d(fam, level, tau_pts, psi):
    n = 2
    g = psi.comps[0]
    grad_psi = psi.grad()
    s = fam.variant.get("sign", 1)
    if level == 0:
        out = [_ig({((a,), ()): s * grad_psi[a] for a in range(n)}, _one(n))]
        out.append(_ig({((a,), (a,)): -s * fmpq(1, 2) for a in range(n)}, g))
        return out
    if level == 1:
        T = P.vsub(tau_pts[1], tau_pts[0])
        N = (-T[1], T[0])
        sn = {((a, b), ()): s * N[b] * grad_psi[a] for a in range(n) for b in range(n)}
        dsn = {((a, b), (b,)): -s * N[a] for a in range(n) for b in range(n)}
        return [_ig(sn, _one(n)), _ig(dsn, g)]
    return [_ig({((), ()): 1}, g)]


def _divdiv3d(fam, level, tau_pts, psi):
    n = 3
    g = psi.comps[0]
    grad_psi = psi.grad()
    s = fam.variant.get("sign", 1)
    if level == 0:
        return [_ig({((a,), (a,)): s * fmpq(1, 3) for a in range(n)}, g),
                _ig({((a,), ()): -s * grad_psi[a] for a in range(n)}, _one(n))]
    if level == 1:
        T = P.vsub(tau_pts[1], tau_pts[0])
        if fam.variant.get("edge_div", "column") == "column":
            # divergence taken over the first index of tau
            div_t = {((a, b), (a,)): s * fmpq(1, 2) * T[b] for a in range(n) for b in range(n)}
        else:
            div_t = {((a, b), (b,)): s * fmpq(1, 2) * T[a] for a in range(n) for b in range(n)}
        tt = {((a, b), ()): -s * T[b] * grad_psi[a] for a in range(n) for b in range(n)}
        return [_ig(div_t, g), _ig(tt, _one(n))]
    if level == 2:
        N = P.face_frame_3d(*tau_pts)[2]
        div_n = {((a, b), (b,)): s * N[a] for a in range(n) for b in range(n)}
        sn = {((a, b), ()): -s * N[b] * grad_psi[a] for a in range(n) for b in range(n)}
        return [_ig(div_n, g), _ig(sn, _one(n))]
    return [_ig({((), ()): 1}, g)]


def _levi(a, b, c):
    return P._levi((a, b, c))


def _elasticity(fam, level, tau_pts, psi):
    n = 3
    cpsi = psi.curl()
    if level == 0:
        out = []
        # 1/2 psi . curl u
        for a in range(3):
            terms = {}
            for b in range(3):
                for c in range(3):
                    e = _levi(a, b, c)
                    if e:
                        terms[((c,), (b,))] = terms.get(((c,), (b,)), 0) + fmpq(e, 2)
            out.append(_ig(terms, psi.comps[a]))
        out.append(_ig({((a,), ()): cpsi[a] / 2 for a in range(3)}, _one(n)))
        return out
    if level == 1:
        T = P.vsub(tau_pts[1], tau_pts[0])
        half = {((a, b), ()): T[b] * cpsi[a] / 2 for a in range(3) for b in range(3)}
        out = [_ig(half, _one(n))]
        transpose = fam.variant.get("edge_curl_transpose", True)
        # (curl sigma)_{i a} = eps_{a b c} d_b sigma_{i c}
        for j in range(3):
            terms = {}
            for i in range(3):
                for a in range(3):
                    for b in range(3):
                        for c in range(3):
                            e = _levi(a, b, c)
                            if not e:
                                continue
                            # pair (curl sigma)_{i a} with T and psi
                            if transpose:
                                coef, comp = T[i], a
                            else:
                                coef, comp = T[a], i
                            if comp != j:
                                continue
                            key = ((i, c), (b,))
                            terms[key] = terms.get(key, 0) + e * coef
            out.append(_ig(terms, psi.comps[j]))
        return out
    if level == 2:
        N = P.face_frame_3d(*tau_pts)[2]
        return [_ig({((a, b), ()): N[b] for b in range(n)}, psi.comps[a]) for a in range(n)]
    return [_ig({((a,), ()): 1}, psi.comps[a]) for a in range(n)]


INTEGRANDS = {
    "derham_2d": _derham,
    "derham_3d": _derham,
    "hessian_2d": _hessian,
    "hessian_3d": _hessian,
    "divdiv_2d": _divdiv2d,
    "divdiv_3d": _divdiv3d,
    "elasticity_3d": _elasticity,
}

# scaling exponent of the vertex functional under x_hat = (x - x0)/a
VERTEX_EXPONENT = {
    "derham_2d": 0, "derham_3d": 0,
    "hessian_2d": -1, "hessian_3d": -1,
    "divdiv_2d": -1, "divdiv_3d": -1,
    "elasticity_3d": -1,
}


def complex_ops(name):
    if name == "derham_2d":
        return [P.grad(P.scalar(2)), P.rot(P.vec(2))], [P.scalar(2), P.vec(2), P.scalar(2)]
    if name == "derham_3d":
        return ([P.grad(P.scalar(3)), P.curl(P.vec(3)), P.div(P.vec(3))],
                [P.scalar(3), P.vec(3), P.vec(3), P.scalar(3)])
    if name == "hessian_2d":
        return [P.hess(P.scalar(2)), P.rot(P.sym(2))], [P.scalar(2), P.sym(2), P.vec(2)]
    if name == "hessian_3d":
        return ([P.hess(P.scalar(3)), P.curl(P.sym(3), out=P.trc(3)), P.div(P.trc(3))],
                [P.scalar(3), P.sym(3), P.trc(3), P.vec(3)])
    if name == "divdiv_2d":
        return [P.sym_curl(P.vec(2)), P.div_div(P.sym(2))], [P.vec(2), P.sym(2), P.scalar(2)]
    if name == "divdiv_3d":
        return ([P.dev_grad(P.vec(3)), P.sym_curl(P.trc(3)), P.div_div(P.sym(3))],
                [P.vec(3), P.trc(3), P.sym(3), P.scalar(3)])
    if name == "elasticity_3d":
        return ([P.sym_grad(P.vec(3)), P.inc(P.sym(3)), P.div(P.sym(3))],
                [P.vec(3), P.sym(3), P.sym(3), P.vec(3)])
    raise KeyError(name)


FAMILY_SPACES = {
    # name: (n, Z space, psi space)
    "derham_2d": (2, "R", "R"),
    "derham_3d": (3, "R", "R"),
    "hessian_2d": (2, "P1", "RT"),
    "hessian_3d": (3, "P1", "RT"),
    "divdiv_2d": (2, "RT", "P1"),
    "divdiv_3d": (3, "RT", "P1"),
    "elasticity_3d": (3, "RM", "RM"),
}

CURRENTS_NAMES = tuple(FAMILY_SPACES)

DEFAULT_VARIANTS = {}


def get_currents(name, variant=None):
    n, zs, ps = FAMILY_SPACES[name]
    ops, spaces = complex_ops(name)
    v = dict(DEFAULT_VARIANTS.get(name, {}))
    v.update(variant or {})
    return CurrentsFamily(name, n, zs, ops, spaces, ps, v)


# ------------------------------------------------------------------ checks


def stokes_residual(fam, cell_pts, sigma_pos, w_coeffs, K):
    """Upsilon_sigma(d w) - sum_j (-1)^j Upsilon_{sigma minus j}(w)."""
    m = len(sigma_pos) - 1
    op = fam.ops[m - 1]
    w = la.column(w_coeffs)
    dw = P.op_sparse(op, cell_pts, K).dense() * w
    lhs = fam.upsilon_matrix(cell_pts, sigma_pos, K - op.order) * dw
    rhs = la.zeros(fam.dim_z, 1)
    for j in range(len(sigma_pos)):
        face = sigma_pos[:j] + sigma_pos[j + 1:]
        rhs += fam.upsilon_matrix(cell_pts, face, K) * w * ((-1) ** j)
    return la.col_list(lhs - rhs)


def check_stokes(fam, cell_pts, sigma_pos, w_coeffs, K):
    res = stokes_residual(fam, cell_pts, sigma_pos, w_coeffs, K)
    return all(r == 0 for r in res), res


def surjectivity_rank(fam, cell_pts, level, K):
    tau = tuple(range(level + 1))
    return la.rank(fam.upsilon_matrix(cell_pts, tau, K))


def check_homogeneity(fam, cell_pts, tau_pos, w_coeffs, K, a):
    """Upsilon_tau(phi) == a^l Upsilon_tau_hat(phi_hat) with phi_hat = phi o
    inverse map and the test fields pulled back the same way."""
    level = len(tau_pos) - 1
    x0 = cell_pts[tau_pos[0]]
    a = P.Q(a)
    hat_pts = [tuple((x - y) / a for x, y in zip(p, x0)) for p in cell_pts]
    psis = psi_basis(fam.psi_space, fam.n)
    hat_psis = [psi.pullback(x0, a) for psi in psis]
    lhs = fam.upsilon_matrix(cell_pts, tau_pos, K, psis) * la.column(w_coeffs)
    # barycentric coefficients are invariant under the affine map
    rhs = fam.upsilon_matrix(hat_pts, tau_pos, K, hat_psis) * la.column(w_coeffs)
    ell = fam.exponents()[level]
    factor = a ** ell if ell >= 0 else 1 / a ** (-ell)
    return lhs == rhs * factor


# ------------------------------------------------------- randomized trials


def random_cell(rng, n, bound=6):
    """Nondegenerate simplex with small rational vertex coordinates."""
    while True:
        pts = [tuple(fmpq(rng.randint(-bound, bound), rng.randint(1, 3)) for _ in range(n))
               for _ in range(n + 1)]
        if P.measure_factor(pts, "euclidean") != 0:
            return pts


def random_coeffs(rng, vs, n, K, bound=9):
    return [fmpq(rng.randint(-bound, bound)) for _ in range(vs.ncomp * P.dim_poly(n, K))]


def complex_trials(name, trials, rng, K=5):
    """Per slot: how many random polynomials satisfy d_{s+1} d_s w = 0."""
    ops, spaces = complex_ops(name)
    n = FAMILY_SPACES[name][0]
    out = {}
    for s in range(len(ops) - 1):
        ok = 0
        q = K - ops[s].order
        for _ in range(trials):
            pts = random_cell(rng, n)
            w = la.column(random_coeffs(rng, spaces[s], n, K))
            dw = P.op_matrix(ops[s], pts, K) * w
            ok += la.is_zero(P.op_matrix(ops[s + 1], pts, q) * dw)
        out[s] = ok
    return out


def stokes_trials(fam, trials, rng, K=4):
    """Per level m >= 1: passes of the Stokes identity on random cells,
    random m-simplices of them and random polynomials."""
    out = {}
    for m in range(1, fam.n + 1):
        ok = 0
        for _ in range(trials):
            pts = random_cell(rng, fam.n)
            sigma = tuple(sorted(rng.sample(range(fam.n + 1), m + 1)))
            w = random_coeffs(rng, fam.spaces[m - 1], fam.n, K)
            ok += check_stokes(fam, pts, sigma, w, K)[0]
        out[m] = ok
    return out


def homogeneity_trials(fam, scales, rng, K=4):
    """Per level: passes of the scaling identity over the given factors, and
    whether the exponents follow l_{k+1} = l_k + ord(d_k)."""
    out = {}
    for level in range(fam.n + 1):
        ok = 0
        for a in scales:
            pts = random_cell(rng, fam.n)
            tau = tuple(sorted(rng.sample(range(fam.n + 1), level + 1)))
            w = random_coeffs(rng, fam.spaces[level], fam.n, K)
            ok += check_homogeneity(fam, pts, tau, w, K, a)
        out[level] = ok
    ex = fam.exponents()
    recursion = all(ex[i + 1] == ex[i] + fam.ops[i].order for i in range(len(fam.ops)))
    return out, recursion
