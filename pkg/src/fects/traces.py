"""Generic trace-structure machinery.

A local space A^k(tau) is a list of blocks: polynomial blocks on tau (a
degree and a number of scalar components) or jet blocks at a vertex. Trace
maps are described by row specifications: each output component is a sum of
terms (source block, source component, derivative vectors, coefficient),
evaluated by differentiating along the given vectors, which must be tangent
to the source simplex, and restricting to the target. Everything else
(bubbles, decompositions, DOFs, bubble complexes) is computed from the
definitions on top of these matrices.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

from flint import fmpq, fmpq_mat

from . import linalg as la
from . import poly as P


class UnsupportedSlot(ValueError):
    pass


class Singular(ValueError):
    pass


class NotAComplex(ValueError):
    pass


# ------------------------------------------------------------------ blocks


@dataclass(frozen=True)
class PolyBlock:
    dim: int
    degree: int
    ncomp: int
    value: P.ValueSpace = None   # set on cell blocks: Frobenius metric

    @property
    def size(self):
        return self.ncomp * P.dim_poly(self.dim, self.degree)


@dataclass(frozen=True)
class JetBlock:
    layout: P.JetLayout

    @property
    def size(self):
        return self.layout.size

    @property
    def entries(self):
        return self.layout.blocks


def space_size(blocks):
    return sum(b.size for b in blocks)


def offsets(blocks):
    out, o = [], 0
    for b in blocks:
        out.append(o)
        o += b.size
    return out


def block_metric(b):
    """Inner product on one block: parametric L2 on polynomials (Frobenius on
    cell tensor blocks), the dot product on jet coordinates."""
    if isinstance(b, JetBlock):
        return la.eye(b.size)
    if b.value is not None:
        return P.tensor_gram(b.value, b.dim, b.degree)
    G = P.gram_poly(b.dim, b.degree)
    return la.block_diag([G] * b.ncomp) if b.ncomp > 1 else G


def space_metric(blocks):
    return la.block_diag([block_metric(b) for b in blocks]) if blocks else la.zeros(0, 0)


def mixed_block_metric(b_rows, b_cols):
    """Pairing between the same block type at two degrees."""
    if isinstance(b_rows, JetBlock):
        return la.eye(b_rows.size)
    if b_rows.value is not None:
        return P.tensor_gram(b_rows.value, b_rows.dim, b_cols.degree, b_rows.degree)
    G = P.gram_poly(b_rows.dim, b_cols.degree, b_rows.degree)
    return la.block_diag([G] * b_rows.ncomp) if b_rows.ncomp > 1 else G


def mixed_metric(blocks_rows, blocks_cols):
    return la.block_diag([mixed_block_metric(a, b) for a, b in zip(blocks_rows, blocks_cols)]) \
        if blocks_rows else la.zeros(0, 0)


# ------------------------------------------------------------- row specs


def term(block, comp, vectors, coeff):
    return (block, comp, tuple(tuple(v) for v in vectors), coeff)


def _vec_key(v):
    return tuple((int(c.p), int(c.q)) for c in map(P.Q, v))


@lru_cache(maxsize=None)
def _restricted_derivative(d, deg, pos, coeff_keys):
    coeffs = [tuple(fmpq(a, b) for a, b in k) for k in coeff_keys]
    D = P.derivative_matrix(d, deg, coeffs)
    R = P.restrict_sparse(tuple(range(d + 1)), pos, deg - len(coeffs))
    return R @ D


def build_trace(src_pts, src_blocks, tgt_pos, out_blocks, specs):
    """Sparse matrix of a trace from a polynomial source space.

    src_blocks: PolyBlocks on the source simplex (cell blocks may carry a
    ValueSpace; their terms then refer to full tensor components).
    out_blocks: target blocks. specs: per output block, a list of rows, one
    per output component (poly blocks) or jet coordinate, each a list of
    terms.
    """
    d = len(src_pts) - 1
    soff = offsets(src_blocks)
    toff = offsets(out_blocks)
    out = P.Sparse(space_size(out_blocks), space_size(src_blocks))
    embeds = [la.to_rows(b.value.embed()) if getattr(b, "value", None) is not None else None
              for b in src_blocks]
    tc_cache = {}

    def tcoef(w):
        key = _vec_key(w)
        if key not in tc_cache:
            tc_cache[key] = _vec_key(P.tangent_coefficients(src_pts, w))
        return tc_cache[key]

    for ob, oo, rows in zip(out_blocks, toff, specs):
        if isinstance(ob, JetBlock):
            nm_out = 1
            out_deg = None
        else:
            nm_out = P.dim_poly(ob.dim, ob.degree)
            out_deg = ob.degree
        for r, terms in enumerate(rows):
            for (b, comp, vecs, coeff) in terms:
                if coeff == 0:
                    continue
                sb = src_blocks[b]
                if out_deg is not None and sb.degree - len(vecs) != out_deg:
                    raise ValueError("degree mismatch in trace specification")
                if sb.degree - len(vecs) < 0:
                    continue
                key = tuple(sorted(tcoef(w) for w in vecs))
                RD = _restricted_derivative(d, sb.degree, tuple(tgt_pos), key)
                nm_in = P.dim_poly(d, sb.degree)
                if embeds[b] is not None:
                    comps = [(p, v) for p, v in enumerate(embeds[b][comp]) if v != 0]
                else:
                    comps = [(comp, fmpq(1))]
                for pc, pv in comps:
                    out.add_block(RD, oo + r * nm_out, soff[b] + pc * nm_in, P.Q(coeff) * pv)
    return out


def restriction_rows(ncomp, block=0):
    return [[term(block, c, (), 1)] for c in range(ncomp)]


def jet_rows(layout, axes, block=0):
    """Full jet of a cell block: derivatives along Cartesian axes."""
    return [[term(block, c, [axes[a] for a in e], 1)] for (j, c, e) in layout.blocks]


def axes(n):
    return [tuple(fmpq(int(i == j)) for i in range(n)) for j in range(n)]


# --------------------------------------------------------------- contexts


@dataclass
class SimplexContext:
    """A reference cell and its subsimplices, used for local computations."""
    cell_pts: list

    @property
    def n(self):
        return len(self.cell_pts) - 1

    def faces(self, d):
        return list(combinations(range(self.n + 1), d + 1))

    def pts(self, pos):
        return [self.cell_pts[i] for i in pos]


GENERIC_CELLS = {
    2: [(0, 0), (3, 1), (1, 2)],
    3: [(0, 0, 0), (2, 1, 0), (0, 2, 1), (1, 0, 3)],
}


def generic_context(n):
    return SimplexContext([tuple(fmpq(c) for c in p) for p in GENERIC_CELLS[n]])


def relative_positions(outer, inner):
    return tuple(outer.index(v) for v in inner)


def stacked_subtraces(fam, s, tau_pts, p):
    """Traces from tau to all strict subsimplices (nonempty targets)."""
    d = len(tau_pts) - 1
    mats = []
    for k in range(d):
        for eta in combinations(range(d + 1), k + 1):
            if space_size(fam.blocks(s, k, p)) == 0:
                continue
            mats.append(fam.sub_trace(s, tau_pts, eta, p).dense())
    ncols = space_size(fam.blocks(s, d, p))
    return la.vstack(mats, cols=ncols)


def bubble_space(fam, s, cell_pts, tau_pos, reduced=False, p=None):
    """B^s(tau) = image(tr_{cell->tau}) intersected with the kernels of the
    traces to strict subsimplices; reduced also intersects ker utilde."""
    p = fam.slot_degree(s) if p is None else p
    d = len(tau_pos) - 1
    tau_pts = [cell_pts[i] for i in tau_pos]
    ambient = space_size(fam.blocks(s, d, p))
    if ambient == 0:
        return la.Subspace.zero(0)
    Tr = fam.cell_trace(s, cell_pts, tau_pos, p).dense()
    img = la.image(Tr)
    if d > 0:
        S = stacked_subtraces(fam, s, tau_pts, p)
        if S.nrows() > 0:
            img = la.intersect(img, la.kernel(S))
    if reduced and s == d:
        U = fam.utilde(tau_pts, p)
        img = la.intersect(img, la.kernel(U))
    return img


def check_trace_inclusion(fam, s, cell_pts, tau_pos, eta_rel):
    """rowspace(tr_{tau->eta} tr_{cell->tau}) inside rowspace(tr_{cell->eta})."""
    tau_pts = [cell_pts[i] for i in tau_pos]
    eta_pos = tuple(tau_pos[i] for i in eta_rel)
    p = fam.slot_degree(s)
    A = fam.sub_trace(s, tau_pts, eta_rel, p).dense() * fam.cell_trace(s, cell_pts, tau_pos, p).dense()
    B = fam.cell_trace(s, cell_pts, eta_pos, p).dense()
    if A.nrows() == 0:
        return True
    if B.nrows() == 0:
        return la.is_zero(A)
    return la.contains(la.image(B.transpose()), la.image(A.transpose()))


def check_d_trace_commute(fam, s, cell_pts, tau_pos, p=None):
    """d_tau tr^s = tr^{s+1} d_cell as matrices."""
    p = fam.slot_degree(s) if p is None else p
    tau_pts = [cell_pts[i] for i in tau_pos]
    op = fam.ops[s]
    q = p - op.order
    lhs = fam.d_local(s, tau_pts, p) * fam.cell_trace(s, cell_pts, tau_pos, p).dense()
    rhs = fam.cell_trace(s + 1, cell_pts, tau_pos, q).dense() * P.op_matrix(op, cell_pts, p)
    return lhs == rhs


def check_localization(fam, cell_pts, tau_pos, p=None):
    d = len(tau_pos) - 1
    p = fam.slot_degree(d) if p is None else p
    tau_pts = [cell_pts[i] for i in tau_pos]
    lhs = fam.utilde(tau_pts, p) * fam.cell_trace(d, cell_pts, tau_pos, p).dense()
    rhs = fam.currents.upsilon_matrix(cell_pts, tau_pos, p)
    return lhs == rhs


# ---------------------------------------------------------- bubble chains


@dataclass
class BubbleChain:
    """Reduced bubble spaces B~^s(tau) for all slots, with d restricted."""
    tau_pos: tuple
    dim: int
    bases: list          # per slot: matrix with columns spanning B~^s
    blocks: list         # per slot: local blocks
    dmats: list          # per slot: d_tau on the local spaces
    metrics: list
    phi: list = field(default_factory=list)     # per slot: complement basis
    dphi: list = field(default_factory=list)    # per slot: d of previous phi

    def dims(self):
        return [B.ncols() for B in self.bases]

    def defects(self):
        """dim ker - dim im per slot of the restricted complex."""
        out = []
        ranks = []
        for s, B in enumerate(self.bases):
            if s + 1 < len(self.bases) and B.ncols() > 0:
                ranks.append(la.rank(self.dmats[s] * B))
            else:
                ranks.append(0)
        for s, B in enumerate(self.bases):
            prev = ranks[s - 1] if s > 0 else 0
            out.append(B.ncols() - ranks[s] - prev)
        return out

    def closed(self):
        """d maps each reduced bubble space into the next."""
        for s in range(len(self.bases) - 1):
            B = self.bases[s]
            if B.ncols() == 0:
                continue
            img = self.dmats[s] * B
            if self.bases[s + 1].nrows() == 0:
                if not la.is_zero(img):
                    return False
                continue
            if not la.contains(la.Subspace(img.nrows(), self.bases[s + 1]),
                               la.Subspace(img.nrows(), img)):
                return False
        return True


def bubble_chain(fam, cell_pts, tau_pos):
    d = len(tau_pos) - 1
    tau_pts = [cell_pts[i] for i in tau_pos]
    bases, blocks, dmats, metrics = [], [], [], []
    for s in range(fam.nslots):
        p = fam.slot_degree(s)
        bl = fam.blocks(s, d, p)
        blocks.append(bl)
        metrics.append(space_metric(bl))
        bases.append(bubble_space(fam, s, cell_pts, tau_pos, reduced=(s == d)).basis
                     if space_size(bl) else la.zeros(0, 0))
        if s + 1 < fam.nslots:
            dmats.append(fam.d_local(s, tau_pts, p))
    return BubbleChain(tuple(tau_pos), d, bases, blocks, dmats, metrics)


def orthogonal_bubble_basis(chain):
    """phi_s spans B~^s minus d B~^{s-1} (metric complement), orthogonalized
    for (d phi, d phi); dphi_{s-1} = d phi_{s-1}."""
    phi, dphi = [], []
    prev_phi = None
    for s, B in enumerate(chain.bases):
        G = chain.metrics[s]
        if s > 0 and prev_phi is not None and prev_phi.ncols() > 0:
            dp = chain.dmats[s - 1] * prev_phi
        else:
            dp = la.zeros(B.nrows(), 0)
        dphi.append(dp)
        if B.ncols() == 0:
            phi.append(la.zeros(B.nrows(), 0))
            prev_phi = phi[-1]
            continue
        # complement of im d inside B: solve (b, dp)_G = 0 for b in span B
        if dp.ncols() > 0:
            K = la.nullspace(dp.transpose() * (G * B))
            C = B * K
        else:
            C = B
        if s + 1 < len(chain.bases) and C.ncols() > 0:
            Dm = chain.dmats[s]
            Gn = chain.metrics[s + 1]
            C = la.primitive_columns(C)
            DC = Dm * C
            C = la.primitive_columns(la.orthogonalize_for(C, DC.transpose() * Gn * DC))
        elif C.ncols() > 0:
            raise la.SingularGram("top slot bubble complement is not zero")
        phi.append(C)
        prev_phi = C
    chain.phi, chain.dphi = phi, dphi
    return phi, dphi


def harmonic_gram(chain, s):
    """Harmonic Gram on B~^s in the basis [dphi_{s-1} | phi_s]."""
    G = chain.metrics[s]
    basis = la.hstack([chain.dphi[s], chain.phi[s]], rows=chain.bases[s].nrows())
    Pim = None
    # (P u, P v) + (du, dv), with P the G-orthogonal projector onto d B~^{s-1}
    dp = chain.dphi[s]
    if dp.ncols() > 0:
        A = dp.transpose() * G * dp
        Pcoef = la.solve(A, dp.transpose() * G * basis)
        Pim = dp * Pcoef
        part1 = Pim.transpose() * G * Pim
    else:
        part1 = la.zeros(basis.ncols(), basis.ncols())
    if s < len(chain.dmats):
        Db = chain.dmats[s] * basis
        part2 = Db.transpose() * chain.metrics[s + 1] * Db
    else:
        part2 = la.zeros(basis.ncols(), basis.ncols())
    return part1 + part2


# --------------------------------------------------------------------- DOFs


@dataclass
class LocalDofs:
    """DOF functionals for one slot on one cell, grouped by subsimplex."""
    slot: int
    groups: list        # (tau_pos, kind, count) with kind in {"current", "dphi", "phi"}
    matrix: object      # functionals x cell coefficients

    @property
    def count(self):
        return self.matrix.nrows()


def dof_rows_for(fam, s, cell_pts, tau_pos, chain, p=None, with_current=True):
    """Functionals on P_p(cell) for tau: currents, (a, dphi), (d a, d phi).

    The trace and local d are built at the given degree p, so the same
    functionals can be applied to higher degree inputs."""
    p0 = fam.slot_degree(s)
    p = p0 if p is None else p
    d = len(tau_pos) - 1
    tau_pts = [cell_pts[i] for i in tau_pos]
    rows = []
    groups = []
    if space_size(fam.blocks(s, d, p0)) == 0:
        if with_current and s == d:
            raise UnsupportedSlot("currents need a nonzero local space")
        return groups, rows
    # the cell's own trace is the identity; skip multiplying by it
    Tr = None if d == fam.n else fam.cell_trace(s, cell_pts, tau_pos, p).dense()

    def then_trace(R):
        return R if Tr is None else R * Tr

    blocks0 = fam.blocks(s, d, p0)
    blocks_p = fam.blocks(s, d, p)
    if with_current and s == d:
        rows.append(then_trace(fam.utilde(tau_pts, p)))
        groups.append((tuple(tau_pos), "current", fam.currents.dim_z))
    dphi = chain.dphi[s]
    if dphi.ncols() > 0:
        M = mixed_metric(blocks0, blocks_p)
        rows.append(then_trace(dphi.transpose() * M))
        groups.append((tuple(tau_pos), "dphi", dphi.ncols()))
    phi = chain.phi[s]
    if phi.ncols() > 0:
        q0 = p0 - fam.ops[s].order
        q = p - fam.ops[s].order
        D0 = fam.d_local(s, tau_pts, p0) * phi
        Dp = fam.d_local(s, tau_pts, p)
        M = mixed_metric(fam.blocks(s + 1, d, q0), fam.blocks(s + 1, d, q))
        rows.append(then_trace(D0.transpose() * (M * Dp)))
        groups.append((tuple(tau_pos), "phi", phi.ncols()))
    return groups, rows


def all_subsimplices(n):
    out = []
    for d in range(n + 1):
        out.extend(combinations(range(n + 1), d + 1))
    return out


def local_dofs(fam, s, cell_pts, chains, p=None):
    """chains: {tau_pos: BubbleChain with orthogonal bases}."""
    n = len(cell_pts) - 1
    groups, rows = [], []
    for tau in all_subsimplices(n):
        g, r = dof_rows_for(fam, s, cell_pts, tau, chains[tau], p)
        groups.extend(g)
        rows.extend(r)
    p = fam.slot_degree(s) if p is None else p
    ncols = fam.cell_space_size(s, p)
    return LocalDofs(s, groups, la.vstack(rows, cols=ncols))


def unisolvent(dofs):
    M = dofs.matrix
    return M.nrows() == M.ncols() and la.has_full_rank(M)


def geometric_decomposition(fam, s, cell_pts):
    n = len(cell_pts) - 1
    lhs = 0
    per_dim = [0] * (n + 1)
    for tau in all_subsimplices(n):
        b = bubble_space(fam, s, cell_pts, tau).dim
        lhs += b
        per_dim[len(tau) - 1] += b
    rhs = fam.cell_space_size(s, fam.slot_degree(s))
    return {"lhs": lhs, "rhs": rhs, "ok": lhs == rhs, "by_dim": per_dim}
