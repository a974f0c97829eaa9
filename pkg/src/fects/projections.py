"""Canonical DOF interpolation, bubble-part weights and vertex weights.

Inputs to the interpolant are global Cartesian polynomials. On each cell
they are converted to barycentric form and hit with the cell's DOF
functionals at the input degree; a DOF shared by several cells must receive
the same value from each of them.
"""

import math
import random
from dataclasses import dataclass, field
from itertools import product

from flint import fmpq, fmpq_mat

from . import linalg as la
from . import poly as P
from . import traces as TR
from .assembly import FamilyOnMesh, extend_bubble, global_complex


class InsufficientSmoothness(ValueError):
    pass


class SingularWeightedGram(ValueError):
    pass


# ------------------------------------------------------------ polynomials


def cartesian_monomials(n, K):
    return [e for e in product(range(K + 1), repeat=n) if sum(e) <= K]


def random_cartesian(rng, n, K, ncomp, bound=9):
    """Coefficient vector (component-major) of a random tensor polynomial."""
    m = len(cartesian_monomials(n, K))
    return [fmpq(rng.randint(-bound, bound)) for _ in range(ncomp * m)]


def cartesian_to_cell(pts, K, ncomp):
    """Matrix from Cartesian coefficients (component-major) to barycentric ones."""
    d = len(pts) - 1
    monos = cartesian_monomials(len(pts[0]), K)
    cols = [P.cartesian_to_bary(pts, {e: 1}, K) for e in monos]
    S = fmpq_mat(P.dim_poly(d, K), len(monos), [cols[j][i] for i in range(P.dim_poly(d, K))
                                               for j in range(len(monos))])
    return la.block_diag([S] * ncomp)


# ------------------------------------------------------------ interpolant


def _scatter(fm, s, per_cell, ncols, what):
    """Global matrix from per-cell (rows, global ids) with agreement check."""
    idx = fm.dof_index(s)
    out = fmpq_mat(idx.size, ncols)
    seen = {}
    for ci, (Mloc, ids) in enumerate(per_cell):
        rows = la.to_rows(Mloc)
        for r, g in enumerate(ids):
            if g in seen:
                if seen[g] != rows[r]:
                    raise InsufficientSmoothness(f"{what}: DOF {idx.entries[g]} differs between cells")
            else:
                seen[g] = rows[r]
                for c, v in enumerate(rows[r]):
                    if v != 0:
                        out[g, c] = v
    return out


def interpolation_matrix(fm, s, K):
    """Cartesian coefficients of degree K -> DOF values of the interpolant."""
    vs = fm.fam.spaces[s]
    per = []
    for ci in range(len(fm.mesh.cells)):
        L, ids = fm.local_dofs(s, ci, K)
        per.append((L * cartesian_to_cell(fm.cell_pts(ci), K, vs.ncomp), ids))
    return _scatter(fm, s, per, vs.ncomp * len(cartesian_monomials(fm.n, K)), f"slot {s}")


def interpolation_of_derivative(fm, s, K):
    """Cartesian coefficients of w (degree K, slot s) -> DOFs of Pi(d w)."""
    fam = fm.fam
    vs = fam.spaces[s]
    q = K - fam.ops[s].order
    per = []
    for ci in range(len(fm.mesh.cells)):
        pts = fm.cell_pts(ci)
        L, ids = fm.local_dofs(s + 1, ci, q)
        Dm = P.op_matrix(fam.ops[s], pts, K)
        per.append((L * Dm * cartesian_to_cell(pts, K, vs.ncomp), ids))
    return _scatter(fm, s + 1, per, vs.ncomp * len(cartesian_monomials(fm.n, K)), f"d of slot {s}")


@dataclass
class InterpolationResult:
    slot: int
    degree: int
    dofs: list


def canonical_interpolate(fm, s, coeffs, K):
    """Interpolant of the global Cartesian polynomial with the given coefficients."""
    Pi = interpolation_matrix(fm, s, K)
    return InterpolationResult(s, K, la.col_list(Pi * la.column(coeffs)))


@dataclass
class CommutingReport:
    trials: int
    passes: list                      # per slot
    matrix_identity: list             # per slot: D Pi == Pi d on all inputs
    projection: list                  # per slot: Pi restricted to A is the identity
    idempotent: list

    @property
    def ok(self):
        return (all(p == self.trials for p in self.passes) and all(self.matrix_identity)
                and all(self.projection) and all(self.idempotent))


def check_commuting(fm, trials=50, seed=0, extra_degree=1, Ds=None):
    rng = random.Random(seed)
    fam = fm.fam
    Ds = Ds or global_complex(fm)
    passes, ident, proj, idem = [], [], [], []
    for s in range(fm.n):
        K = fam.slot_degree(s) + extra_degree
        Pi = interpolation_matrix(fm, s, K)
        PiD = interpolation_of_derivative(fm, s, K)
        lhs = Ds[s] * Pi
        ident.append(lhs == PiD)
        ok = 0
        for _ in range(trials):
            c = la.column(random_cartesian(rng, fm.n, K, fam.spaces[s].ncomp))
            if Ds[s] * (Pi * c) == PiD * c:
                ok += 1
        passes.append(ok)
    for s in range(fm.n + 1):
        pr, ip = check_projection(fm, s, rng, extra_degree)
        proj.append(pr)
        idem.append(ip)
    return CommutingReport(trials, passes, ident, proj, idem)


def check_projection(fm, s, rng, extra_degree=1):
    """Pi w = w for a random w in A (at its own degree and raised), and
    Pi(Pi u) = Pi u for a random polynomial u."""
    fam = fm.fam
    p0 = fam.slot_degree(s)
    ncomp = fam.spaces[s].ncomp
    v = [fmpq(rng.randint(-9, 9)) for _ in range(fm.dim(s))]
    raise_ = P.raise_degree_sparse(fm.n, p0, extra_degree, ncomp).dense()
    same = raised = True
    vals0, valsK = {}, {}
    for ci in range(len(fm.mesh.cells)):
        c = fm.to_cell(s, ci, v)
        L0, ids = fm.local_dofs(s, ci, p0)
        LK, _ = fm.local_dofs(s, ci, p0 + extra_degree)
        for g, a, b in zip(ids, la.col_list(L0 * c), la.col_list(LK * (raise_ * c))):
            vals0[g], valsK[g] = a, b
    same = all(vals0[g] == v[g] for g in range(len(v)))
    raised = all(valsK[g] == v[g] for g in range(len(v)))
    # idempotency on a polynomial input
    K = p0 + extra_degree
    u = la.column(random_cartesian(rng, fm.n, K, ncomp))
    first = la.col_list(interpolation_matrix(fm, s, K) * u)
    again = []
    for ci in range(len(fm.mesh.cells)):
        L0, ids = fm.local_dofs(s, ci, p0)
        again.append(dict(zip(ids, la.col_list(L0 * fm.to_cell(s, ci, first)))))
    idem = all(d[g] == first[g] for d in again for g in d)
    return same and raised, idem


# ------------------------------------------------------- weighted Grams


def _weighted_cell_gram(vs, n, p, weight, kw):
    """Frobenius Gram on P_p x vs with a polynomial weight of degree kw."""
    mult = P.multiplication_sparse(n, weight, kw, p).dense()
    S = mult.transpose() * P.gram_poly(n, p, p + kw)
    S = (S + S.transpose()) * fmpq(1, 2)
    F = vs.frobenius()
    m = S.nrows()
    out = fmpq_mat(vs.ncomp * m, vs.ncomp * m)
    rows = la.to_rows(S)
    for a in range(vs.ncomp):
        for b in range(vs.ncomp):
            f = F[a, b]
            if f == 0:
                continue
            for i in range(m):
                for j in range(m):
                    if rows[i][j] != 0:
                        out[a * m + i, b * m + j] = f * rows[i][j]
    return out


def _power(n, coeffs, k, e):
    out, deg = [fmpq(1)], 0
    for _ in range(e):
        out = P.poly_mul(n, out, deg, coeffs, k)
        deg += k
    return out, deg


def patch_gram(pm, s, weight_of_cell):
    """Gram of the patch space in DOF coordinates with per-cell weights.

    weight_of_cell(ci) -> (barycentric coefficients, degree)."""
    fam = pm.fam
    p = fam.slot_degree(s)
    G = fmpq_mat(pm.dim(s), pm.dim(s))
    for ci in range(len(pm.mesh.cells)):
        w, kw = weight_of_cell(ci)
        vol = abs(P.measure_factor(pm.cell_pts(ci), "euclidean"))
        C = pm.cell_basis(s, ci)
        Gl = C.transpose() * _weighted_cell_gram(fam.spaces[s], pm.n, p, w, kw) * C * vol
        _, ids = pm.local_dofs(s, ci)
        for a, ga in enumerate(ids):
            for b, gb in enumerate(ids):
                if Gl[a, b] != 0:
                    G[ga, gb] += Gl[a, b]
    return G


def star_bubble(pm, tau, power):
    """b_tau^power per cell, b_tau = product of the barycentric coordinates of
    tau's vertices: continuous, positive inside st(tau), zero on its boundary."""
    n = pm.n

    def weight(ci):
        cell = pm.mesh.cells[ci]
        alpha = tuple(int(v in tau) for v in cell)
        base = [fmpq(0)] * P.dim_poly(n, len(tau))
        base[P.mono_index(n, len(tau))[alpha]] = fmpq(1)
        return _power(n, base, len(tau), power)

    return weight


def hat_sum(pm, verts, power):
    """(sum of hat functions of the given vertices)^power per cell."""
    n = pm.n

    def weight(ci):
        cell = pm.mesh.cells[ci]
        base = [fmpq(int(v in verts)) for v in cell]
        idx = P.mono_index(n, 1)
        lin = [fmpq(0)] * (n + 1)
        for j in range(n + 1):
            lin[idx[tuple(int(i == j) for i in range(n + 1))]] = base[j]
        return _power(n, lin, 1, power)

    return weight


# ----------------------------------------------------------- bubble weights


@dataclass
class BubbleWeight:
    tau: tuple                  # global simplex
    slot: int
    index: int
    omega: list                 # DOF coordinates on the star patch
    patch: object = field(repr=False, default=None)


def _dphi_pairing_rows(pm, s, tau):
    """Rows w -> <tr w, dphi_i> over the patch DOFs, from traces and metrics."""
    ch = pm.chain(tau)
    ci, pos = pm.host(tau)
    p = pm.fam.slot_degree(s)
    Tr = pm.fam.cell_trace(s, pm.cell_pts(ci), pos, p).dense()
    rows = ch.dphi[s].transpose() * ch.metrics[s] * Tr * pm.cell_basis(s, ci)
    _, ids = pm.local_dofs(s, ci)
    out = fmpq_mat(rows.nrows(), pm.dim(s))
    for r, row in enumerate(la.to_rows(rows)):
        for c, v in enumerate(row):
            out[r, ids[c]] = v
    return out


def build_bubble_weights(fm, tau, s):
    """Weights with (w, b_tau^(2M) omega_i) = <tr w, dphi_i> on A(st(tau))."""
    tau = tuple(tau)
    ch = fm.chain(tau)
    if ch.dphi[s].ncols() == 0:
        return []
    pm = fm.patch(fm.mesh.star(tau, 0).cells)
    local = tuple(pm.mesh.parent_vertices.index(v) for v in tau)
    W = patch_gram(pm, s, star_bubble(pm, local, 2 * fm.fam.M))
    R = _dphi_pairing_rows(pm, s, local)
    try:
        Om = W.solve(R.transpose())
    except ZeroDivisionError:
        raise SingularWeightedGram(f"slot {s} at {tau}")
    out = []
    for i in range(Om.ncols()):
        out.append(BubbleWeight(tau, s, i, la.col_list(Om, i), pm))
    pm._weighted = (W, local)
    return out


def check_bubble_weight_identity(fm, weights):
    """Recheck against DOF unit vectors: (e_j, b^(2M) omega_i) = [j is dphi_i at tau]."""
    ok = True
    for w in weights:
        pm = w.patch
        W, local = pm._weighted
        vals = la.col_list(W * la.column(w.omega))
        idx = pm.dof_index(w.slot)
        target = idx.lookup[(local, "dphi", w.index)]
        ok = ok and all(v == int(j == target) for j, v in enumerate(vals))
    return ok


class BubbleProjector:
    """pi_B on FE inputs: bubble DOFs from weighted integrals, skeletal DOFs 0."""

    def __init__(self, fm):
        self.fm = fm
        self.weights = {}
        for s in range(fm.n + 1):
            for d in range(fm.n + 1):
                for tau in fm.mesh.simplices[d]:
                    ws = build_bubble_weights(fm, tau, s)
                    if ws:
                        self.weights[(s, tau)] = ws

    def _pair(self, w, vec_global):
        pm = w.patch
        W, _ = pm._weighted
        u = la.column(self.fm.restrict(pm, w.slot, vec_global))
        return (u.transpose() * W * la.column(w.omega))[0, 0]

    def apply(self, s, vec, dvec=None):
        """pi_B^s of the global function vec; dvec = D_s vec is needed for
        the phi coefficients, which pair d w with the next slot's weights."""
        fm = self.fm
        idx = fm.dof_index(s)
        out = [fmpq(0)] * idx.size
        for d in range(fm.n + 1):
            for tau in fm.mesh.simplices[d]:
                for w in self.weights.get((s, tau), []):
                    out[idx.lookup[(tau, "dphi", w.index)]] = self._pair(w, vec)
                if dvec is not None:
                    for w in self.weights.get((s + 1, tau), []):
                        key = (tau, "phi", w.index)
                        if key in idx.lookup:
                            out[idx.lookup[key]] = self._pair(w, dvec)
        return out


def check_bubble_commuting(fm, trials=5, seed=0, Ds=None):
    """pi_B^(s+1)(d w) = d pi_B^s(w) for random FE inputs w."""
    rng = random.Random(seed)
    Ds = Ds or global_complex(fm)
    proj = BubbleProjector(fm)
    ident = all(check_bubble_weight_identity(fm, ws) for ws in proj.weights.values())
    ok = True
    for s in range(fm.n):
        for _ in range(trials):
            v = [fmpq(rng.randint(-9, 9)) for _ in range(fm.dim(s))]
            dv = la.col_list(Ds[s] * la.column(v))
            ddv = la.col_list(Ds[s + 1] * la.column(dv)) if s + 1 < fm.n else None
            left = proj.apply(s + 1, dv, ddv)
            right = la.col_list(Ds[s] * la.column(proj.apply(s, v, dv)))
            ok = ok and left == right
    return ident and ok


# ----------------------------------------------------------- vertex Xi


@dataclass
class VertexXi:
    vertex: int
    z_index: int
    xi: list                    # DOF coordinates on st1(x), weight (b1)^M
    patch: object = field(repr=False, default=None)


def build_vertex_xi(fm, x, zi):
    """(w, (b1)^M xi)_{st1(x)} = i-th coordinate of the vertex current of w."""
    pm = fm.patch(fm.mesh.star((x,), 1).cells)
    up = pm.mesh.parent_vertices
    inner = {v for ci in fm.mesh.star((x,), 0).cells for v in fm.mesh.cells[ci]}
    verts = {up.index(v) for v in inner}
    W = patch_gram(pm, 0, hat_sum(pm, verts, fm.fam.M))
    lx = (up.index(x),)
    ci, pos = pm.host(lx)
    U = fm.fam.currents.upsilon_matrix(pm.cell_pts(ci), pos, fm.fam.slot_degree(0)) * pm.cell_basis(0, ci)
    _, ids = pm.local_dofs(0, ci)
    r = [fmpq(0)] * pm.dim(0)
    for c, g in enumerate(ids):
        r[g] = U[zi, c]
    try:
        xi = W.solve(la.column(r))
    except ZeroDivisionError:
        raise SingularWeightedGram(f"vertex {x}")
    out = VertexXi(x, zi, la.col_list(xi), pm)
    pm._weighted = (W, lx)
    return out


def check_vertex_xi(fm, xi):
    """Recheck on DOF unit vectors: the vertex current DOFs are Kronecker."""
    pm = xi.patch
    W, lx = pm._weighted
    vals = la.col_list(W * la.column(xi.xi))
    idx = pm.dof_index(0)
    target = idx.lookup[(lx, "current", xi.z_index)]
    return all(v == int(j == target) for j, v in enumerate(vals))


# ----------------------------------------------- floating point evidence


def l2_norm_sq(fm, s, cell_coeffs):
    fam = fm.fam
    total = fmpq(0)
    for ci, c in enumerate(cell_coeffs):
        p = (c.nrows() // fam.spaces[s].ncomp)
        deg = next(k for k in range(64) if P.dim_poly(fm.n, k) == p)
        G = P.tensor_gram(fam.spaces[s], fm.n, deg)
        vol = abs(P.measure_factor(fm.cell_pts(ci), "euclidean"))
        total += (c.transpose() * G * c)[0, 0] * vol
    return total


def estimate_l2_norm(fam, shape, levels, samples=3, seed=0, slot=0, extra_degree=1):
    """Ratios |Pi u| / |u| for random global polynomials u, per level."""
    rng = random.Random(seed)
    from .mesh import generate_mesh
    table = []
    for r in levels:
        fm = FamilyOnMesh(fam, generate_mesh(shape, r))
        K = fam.slot_degree(slot) + extra_degree
        ncomp = fam.spaces[slot].ncomp
        Pi = interpolation_matrix(fm, slot, K)
        ratios = []
        for _ in range(samples):
            u = random_cartesian(rng, fm.n, K, ncomp)
            cu = la.column(u)
            v = la.col_list(Pi * cu)
            num = l2_norm_sq(fm, slot, fm.broken(slot, v))
            den = l2_norm_sq(fm, slot, [cartesian_to_cell(fm.cell_pts(ci), K, ncomp) * cu
                                        for ci in range(len(fm.mesh.cells))])
            ratios.append(math.sqrt(float(num) / float(den)) if den else 0.0)
        table.append({"level": r, "h": float(fm.mesh.h) if hasattr(fm.mesh, "h") else None,
                      "max": max(ratios), "mean": sum(ratios) / len(ratios)})
    return table


# ------------------------------------------------ scaling of extensions


class InhomogeneousTrace(ValueError):
    pass


def trace_row_exponents(fam, s, cell_pts, tau_pos, p):
    """Per trace coordinate, the exponent e with coord(w o x/t) = t^e coord(w).

    Frame vectors in the trace rows scale with the cell, Cartesian
    derivatives against it; doubling the cell exposes the net power. Rows
    that mix powers raise InhomogeneousTrace."""
    if len(tau_pos) - 1 == fam.n:
        return [0] * fam.cell_space_size(s, p)
    small = la.to_rows(fam.cell_trace(s, cell_pts, tau_pos, p).dense())
    big = la.to_rows(fam.cell_trace(s, [tuple(2 * x for x in q) for q in cell_pts], tau_pos, p).dense())
    out = []
    for i, (a, b) in enumerate(zip(small, big)):
        ratios = {y / x for x, y in zip(a, b) if x != 0}
        if any(y != 0 for x, y in zip(a, b) if x == 0) or len(ratios) > 1:
            raise InhomogeneousTrace(f"slot {s} row {i}")
        r = ratios.pop() if ratios else fmpq(1)
        e = 0
        while r > 1:
            r, e = r / 2, e - 1
        while r < 1:
            r, e = r * 2, e + 1
        if r != 1:
            raise InhomogeneousTrace(f"slot {s} row {i}: ratio is not a power of 2")
        out.append(e)
    return out


def _euclidean_metric(blocks, tau_pts):
    """Block metrics with polynomial blocks integrated in the Euclidean
    measure of tau (floating point); jets keep the dot product."""
    d = len(tau_pts) - 1
    if d == 0:
        jac = 1.0
    else:
        E = [[float(a - b) for a, b in zip(p, tau_pts[0])] for p in tau_pts[1:]]
        G = [[sum(x * y for x, y in zip(u, v)) for v in E] for u in E]
        jac = math.sqrt(_float_det(G))
    return la.block_diag([TR.block_metric(b) * fmpq(1) for b in blocks]), \
        [1.0 if isinstance(b, TR.JetBlock) else jac for b in blocks for _ in range(b.size)]


def _float_det(G):
    n = len(G)
    A = [row[:] for row in G]
    det = 1.0
    for i in range(n):
        piv = max(range(i, n), key=lambda r: abs(A[r][i]))
        if A[piv][i] == 0:
            return 0.0
        if piv != i:
            A[i], A[piv] = A[piv], A[i]
            det = -det
        det *= A[i][i]
        for r in range(i + 1, n):
            f = A[r][i] / A[i][i]
            for c in range(i, n):
                A[r][c] -= f * A[i][c]
    return det


def _weighted_quad(metric, vec, weights):
    """sum_ij w_i M_ij w_j v_i v_j with per-coordinate float weights."""
    M, jac = metric
    v = [float(x) * w * math.sqrt(j) for x, w, j in zip(la.col_list(vec), weights, jac)]
    rows = la.to_rows(M)
    return sum(v[i] * float(rows[i][j]) * v[j] for i in range(len(v)) for j in range(len(v))
               if rows[i][j] != 0)


@dataclass
class ScalingRecord:
    simplex_dim: int
    slot: int
    kind: str                 # "phi" or "dphi"
    index: int
    norms: list               # extension norm over the h-scaled data norm, per level
    slope: float
    predicted: float
    raw_slope: float          # same, normalized by the unweighted data norm
    exponents: list           # scaling exponents present in the normalizing data

    def relative_error(self):
        t = self.predicted
        return abs(self.slope - t) / abs(t) if t else abs(self.slope)

    def matches(self, tol=0.05):
        return self.relative_error() < tol


def _fit_slope(hs, values):
    xs = [math.log(h) for h in hs]
    ys = [math.log(v) for v in values]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def bubble_extension_scaling(fam, levels=(1, 2, 3), shape="square", dims=None):
    """Norms of E_tau(phi) and E_tau(d phi) on dyadically refined meshes, for
    simplices at the origin corner, whose stars are similar across levels.

    Each extension is divided by the L2 norm on tau of the data d phi (or
    d phi itself), every data coordinate weighted by h^e with e its scaling
    exponent, so that data of the same function at every scale has the same
    weighted norm. The fitted slope of log ratio against log h is returned
    with l + (n - dim tau)/2 (phi) or (n - dim tau)/2 (d phi), l the order
    of d. raw_slope repeats the fit without the weights."""
    from .mesh import generate_mesh
    meshes = [generate_mesh(shape, r) for r in levels]
    base = meshes[0]
    origin = next(v for v, c in enumerate(base.coords) if all(x == 0 for x in c))
    n = base.n
    chosen = []
    for d in range(n + 1):
        if dims is not None and d not in dims:
            continue
        cands = [t for t in base.simplices[d] if origin in t]
        if cands:
            chosen.append(cands[0])
    hs = [2.0 ** -r for r in levels]
    records = []
    for tau0 in chosen:
        coords0 = [base.coords[v] for v in tau0]
        per_level = []
        for j, m in enumerate(meshes):
            f = fmpq(1, 2 ** (levels[j] - levels[0]))
            where = {tuple(c): v for v, c in enumerate(m.coords)}
            tau = tuple(sorted(where[tuple(f * x for x in c)] for c in coords0))
            fm = FamilyOnMesh(fam, m.subcomplex(m.star(tau, 0).cells))
            up = fm.mesh.parent_vertices
            local = tuple(up.index(v) for v in tau)
            ch = fm.chain(local)
            tau_pts = fm.mesh.points(local)
            ci, pos = fm.host(local)
            h = hs[j]
            vals, raw, expos = {}, {}, {}
            for s in range(n + 1):
                for kind in ("phi", "dphi"):
                    basis = ch.phi[s] if kind == "phi" else ch.dphi[s]
                    if basis.ncols() == 0:
                        continue
                    t = s + 1 if kind == "phi" else s
                    metric = _euclidean_metric(ch.blocks[t], tau_pts)
                    ex = trace_row_exponents(fam, t, fm.cell_pts(ci), pos, fam.slot_degree(t))
                    weights = [h ** e for e in ex]
                    for i in range(basis.ncols()):
                        b = la.submatrix(basis, None, [i])
                        data = ch.dmats[s] * b if kind == "phi" else b
                        norm = math.sqrt(float(l2_norm_sq(fm, s, fm.broken(s, extend_bubble(fm, s, local, b)))))
                        key = (s, kind, i)
                        vals[key] = norm / math.sqrt(_weighted_quad(metric, data, weights))
                        raw[key] = norm / math.sqrt(_weighted_quad(metric, data, [1.0] * len(ex)))
                        expos[key] = sorted({e for e, x in zip(ex, la.col_list(data)) if x != 0})
            per_level.append((vals, raw, expos))
        d = len(tau0) - 1
        for key in per_level[0][0]:
            s, kind, i = key
            norms = [pl[0][key] for pl in per_level]
            order = fam.ops[s].order if kind == "phi" else 0
            records.append(ScalingRecord(d, s, kind, i, norms, _fit_slope(hs, norms),
                                         order + (n - d) / 2,
                                         _fit_slope(hs, [pl[1][key] for pl in per_level]),
                                         per_level[0][2][key]))
    return records
