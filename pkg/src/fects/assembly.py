"""Global finite element spaces, differentials and cohomology on a mesh.

Global functions are stored in DOF coordinates. Skeletal DOFs (the currents
of the simplices of dimension k, one per z index) come first, then bubble
DOFs grouped by simplex. Per cell, the DOF functionals form an invertible
matrix L; its inverse maps DOF values to the cell's polynomial coefficients.
"""

from dataclasses import dataclass, field

from flint import fmpq, fmpq_mat

from . import linalg as la
from . import poly as P
from . import traces as TR


class DimensionMismatch(RuntimeError):
    pass


class InconsistentAssembly(RuntimeError):
    pass


@dataclass
class DofIndex:
    slot: int
    entries: list                 # (dim, simplex tuple, kind, i)
    n_skeletal: int
    lookup: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lookup = {(e[1], e[2], e[3]): j for j, e in enumerate(self.entries)}

    @property
    def size(self):
        return len(self.entries)

    def bubble_dofs(self, tau):
        return [j for j, e in enumerate(self.entries) if e[1] == tau and e[2] != "current"]


class FamilyOnMesh:
    """Lazily computed local data of one family on one mesh."""

    def __init__(self, fam, mesh, chain_source=None):
        """chain_source, if given, maps a simplex of this mesh to a bubble
        chain; patches use it to share the bases of the parent mesh."""
        if fam.n != mesh.n:
            raise ValueError("family and mesh dimensions differ")
        self.fam = fam
        self.mesh = mesh
        self.n = mesh.n
        self._chains = {}
        self._index = {}
        self._local = {}
        self._inv = {}
        self._ops = {}
        self._chain_source = chain_source

    # ---------------------------------------------------------- local data

    def cell_pts(self, ci):
        return self.mesh.points(self.mesh.cells[ci])

    def host(self, tau):
        """First cell containing tau and tau's positions in it."""
        ci = self.mesh.cells_containing[tau][0]
        cell = self.mesh.cells[ci]
        return ci, tuple(cell.index(v) for v in tau)

    def chain(self, tau):
        tau = tuple(tau)
        if tau not in self._chains and self._chain_source is not None:
            self._chains[tau] = self._chain_source(tau)
        if tau not in self._chains:
            ci, pos = self.host(tau)
            ch = TR.bubble_chain(self.fam, self.cell_pts(ci), pos)
            TR.orthogonal_bubble_basis(ch)
            self._chains[tau] = ch
        return self._chains[tau]

    def dof_index(self, s):
        if s not in self._index:
            entries = []
            for tau in self.mesh.simplices[s]:
                for i in range(self.fam.currents.dim_z):
                    entries.append((s, tau, "current", i))
            nsk = len(entries)
            for d in range(self.n + 1):
                for tau in self.mesh.simplices[d]:
                    ch = self.chain(tau)
                    for kind, M in (("dphi", ch.dphi[s]), ("phi", ch.phi[s])):
                        for i in range(M.ncols()):
                            entries.append((d, tau, kind, i))
            self._index[s] = DofIndex(s, entries, nsk)
        return self._index[s]

    def local_dofs(self, s, ci, p=None):
        """(functional matrix, global DOF ids) of slot s on cell ci."""
        key = (s, ci, p)
        if key not in self._local:
            cell = self.mesh.cells[ci]
            pts = self.cell_pts(ci)
            idx = self.dof_index(s)
            rows, ids = [], []
            for pos in TR.all_subsimplices(self.n):
                tau = tuple(cell[i] for i in pos)
                groups, r = TR.dof_rows_for(self.fam, s, pts, pos, self.chain(tau), p)
                rows.extend(r)
                for (_, kind, cnt) in groups:
                    ids.extend(idx.lookup[(tau, kind, i)] for i in range(cnt))
            pp = self.fam.slot_degree(s) if p is None else p
            L = la.vstack(rows, cols=self.fam.cell_space_size(s, pp))
            self._local[key] = (L, ids)
        return self._local[key]

    def cell_basis(self, s, ci):
        """Inverse of the local DOF matrix: DOF values -> cell coefficients."""
        key = (s, ci)
        if key not in self._inv:
            L, ids = self.local_dofs(s, ci)
            if L.nrows() != L.ncols():
                raise TR.Singular(f"slot {s} cell {ci}: {L.nrows()} DOFs for {L.ncols()} coefficients")
            try:
                self._inv[key] = L.inv()
            except ZeroDivisionError:
                raise TR.Singular(f"slot {s} cell {ci}: DOF matrix is singular")
        return self._inv[key]

    def cell_op(self, s, ci):
        key = (s, ci)
        if key not in self._ops:
            p = self.fam.slot_degree(s)
            self._ops[key] = P.op_matrix(self.fam.ops[s], self.cell_pts(ci), p)
        return self._ops[key]

    # ------------------------------------------------------ global objects

    def patch(self, cell_ids):
        """The same family on a closed subcomplex, sharing bubble bases."""
        sub = self.mesh.subcomplex(cell_ids)
        up = sub.parent_vertices
        pm = FamilyOnMesh(self.fam, sub, lambda tau: self.chain(tuple(up[v] for v in tau)))
        pm.parent = self
        where = {tuple(c): ci for ci, c in enumerate(self.mesh.cells)}
        pm.cell_map = [where[tuple(up[v] for v in c)] for c in sub.cells]
        return pm

    def restrict(self, patch, s, vec):
        """Global DOF vector -> DOF vector on a patch built by patch()."""
        up = patch.mesh.parent_vertices
        gidx = self.dof_index(s)
        out = []
        for (_, tau, kind, i) in patch.dof_index(s).entries:
            out.append(vec[gidx.lookup[(tuple(up[v] for v in tau), kind, i)]])
        return out

    def dim(self, s):
        return self.dof_index(s).size

    def to_cell(self, s, ci, vec):
        """Cell coefficients of a global DOF vector (list of rationals)."""
        L, ids = self.local_dofs(s, ci)
        local = la.column([vec[j] for j in ids])
        return self.cell_basis(s, ci) * local

    def broken(self, s, vec):
        return [self.to_cell(s, ci, vec) for ci in range(len(self.mesh.cells))]

    def constraint_matrix(self, s):
        """Inter-element trace mismatches on the broken space."""
        fam, mesh = self.fam, self.mesh
        p = fam.slot_degree(s)
        size = fam.cell_space_size(s, p)
        ncell = len(mesh.cells)
        blocks = []
        for d in range(self.n):
            for tau in mesh.simplices[d]:
                cells = mesh.cells_containing[tau]
                if len(cells) < 2:
                    continue
                trs = []
                for ci in cells:
                    cell = mesh.cells[ci]
                    pos = tuple(cell.index(v) for v in tau)
                    trs.append((ci, fam.cell_trace(s, self.cell_pts(ci), pos, p)))
                if trs[0][1].rows == 0:
                    continue
                c0, T0 = trs[0]
                for cj, Tj in trs[1:]:
                    S = P.Sparse(T0.rows, ncell * size)
                    S.add_block(T0, 0, c0 * size)
                    S.add_block(Tj, 0, cj * size, -1)
                    blocks.append(S.dense())
        return la.vstack(blocks, cols=ncell * size)

    def constraint_dimension(self, s):
        C = self.constraint_matrix(s)
        total = len(self.mesh.cells) * self.fam.cell_space_size(s, self.fam.slot_degree(s))
        return total - la.rank(C)

    def global_d(self, s):
        """D_s in DOF coordinates, assembled cell by cell with a consistency check."""
        ia, ib = self.dof_index(s), self.dof_index(s + 1)
        rows = {}
        for ci in range(len(self.mesh.cells)):
            L1, ids1 = self.local_dofs(s + 1, ci)
            _, ids0 = self.local_dofs(s, ci)
            Dl = L1 * self.cell_op(s, ci) * self.cell_basis(s, ci)
            for r, g in enumerate(ids1):
                vals = {ids0[c]: Dl[r, c] for c in range(Dl.ncols()) if Dl[r, c] != 0}
                if g in rows:
                    if rows[g] != vals:
                        raise InconsistentAssembly(f"slot {s}: row {ib.entries[g]} differs across cells")
                else:
                    rows[g] = vals
        D = fmpq_mat(ib.size, ia.size)
        for g, vals in rows.items():
            for c, v in vals.items():
                D[g, c] = v
        return D

    def gram(self, s):
        """Exact L2 Gram of the global space in DOF coordinates."""
        fam = self.fam
        p = fam.slot_degree(s)
        G = fmpq_mat(self.dim(s), self.dim(s))
        base = P.tensor_gram(fam.spaces[s], self.n, p)
        for ci in range(len(self.mesh.cells)):
            vol = abs(P.measure_factor(self.cell_pts(ci), "euclidean"))
            C = self.cell_basis(s, ci)
            Gl = C.transpose() * base * C * vol
            _, ids = self.local_dofs(s, ci)
            for a, ga in enumerate(ids):
                for b, gb in enumerate(ids):
                    if Gl[a, b] != 0:
                        G[ga, gb] += Gl[a, b]
        return G


# ----------------------------------------------------------------- reports


@dataclass
class SpaceReport:
    slot: int
    dof_dim: int
    constraint_dim: int
    skeletal: int
    bubbles: int

    @property
    def ok(self):
        return self.dof_dim == self.constraint_dim


def assemble_space(fm, s):
    idx = fm.dof_index(s)
    rep = SpaceReport(s, idx.size, fm.constraint_dimension(s), idx.n_skeletal, idx.size - idx.n_skeletal)
    if not rep.ok:
        raise DimensionMismatch(f"slot {s}: DOF count {rep.dof_dim} vs constraint nullity {rep.constraint_dim}")
    return rep


@dataclass
class CohomologyReport:
    dims: list
    ranks: list
    computed: list
    expected: list
    harmonic_counts: list
    cocycle_ok: bool
    harmonic_ls_ok: bool
    harmonic: list = field(default_factory=list, repr=False)

    @property
    def ok(self):
        return (self.computed == self.expected and self.harmonic_counts == self.computed
                and self.cocycle_ok and self.harmonic_ls_ok)


def global_complex(fm):
    return [fm.global_d(s) for s in range(fm.n)]


def cohomology(fm, Ds=None, harmonic=True):
    n = fm.n
    Ds = Ds or global_complex(fm)
    dims = [fm.dim(s) for s in range(n + 1)]
    cocycle_ok = all(la.is_zero(b * a) for a, b in zip(Ds, Ds[1:]))
    ranks = [la.rank(D) for D in Ds]
    r = [0] + ranks + [0]
    computed = [dims[s] - r[s] - r[s + 1] for s in range(n + 1)]
    zdim = fm.fam.currents.dim_z
    expected = [zdim * b for b in fm.mesh.betti_numbers()]
    counts, reps = [], []
    ls_ok = True
    if harmonic:
        cochains = fm.mesh.cochain_complex(zdim)
        for s in range(n + 1):
            H = harmonic_basis(fm, s, Ds)
            reps.append(H)
            counts.append(H.ncols())
            ls_ok = ls_ok and harmonic_spans_cohomology(fm, s, H, cochains)
    return CohomologyReport(dims, ranks, computed, expected, counts, cocycle_ok, ls_ok, reps)


def harmonic_basis(fm, s, Ds):
    """ker D_s intersected with the Gram complement of im D_{s-1}."""
    dim = fm.dim(s)
    parts = []
    if s < fm.n:
        parts.append(Ds[s])
    if s > 0:
        parts.append(Ds[s - 1].transpose() * fm.gram(s))
    if not parts:
        return la.eye(dim)
    return la.nullspace(la.vstack(parts, cols=dim))


def skeletal_part(fm, s, M):
    idx = fm.dof_index(s)
    return la.submatrix(M, range(idx.n_skeletal), None)


def harmonic_spans_cohomology(fm, s, H, cochains):
    """L_S maps harmonic forms to independent simplicial cohomology classes."""
    if H.ncols() == 0:
        return True
    LS = skeletal_part(fm, s, H)
    if s > 0:
        cob = cochains.D[s - 1]
        base = la.rank(cob)
        both = la.rank(la.hstack([cob, LS], rows=LS.nrows()))
        if both - base != H.ncols():
            return False
    else:
        if la.rank(LS) != H.ncols():
            return False
    if s < fm.n:
        return la.is_zero(cochains.D[s] * LS)
    return True


def check_skeletal_isomorphism(fm, Ds=None):
    """L_S d E_S equals the Z-valued simplicial coboundary, and d does not mix
    skeletal and bubble DOFs."""
    Ds = Ds or global_complex(fm)
    cochains = fm.mesh.cochain_complex(fm.fam.currents.dim_z)
    for s in range(fm.n):
        a, b = fm.dof_index(s), fm.dof_index(s + 1)
        D = Ds[s]
        block = la.submatrix(D, range(b.n_skeletal), range(a.n_skeletal))
        if block != cochains.D[s]:
            return False
        if not la.is_zero(la.submatrix(D, range(b.n_skeletal, b.size), range(a.n_skeletal))):
            return False
        if not la.is_zero(la.submatrix(D, range(b.n_skeletal), range(a.n_skeletal, a.size))):
            return False
    return True


def bubble_dof_values(fm, s, tau, b):
    """DOF values on tau of a local trace-space vector b (the pairings)."""
    ch = fm.chain(tau)
    d = len(tau) - 1
    G = ch.metrics[s]
    out = []
    if ch.dphi[s].ncols():
        out.extend(la.col_list(ch.dphi[s].transpose() * G * b))
    if ch.phi[s].ncols():
        Dm = ch.dmats[s]
        Dphi = Dm * ch.phi[s]
        out.extend(la.col_list(Dphi.transpose() * ch.metrics[s + 1] * Dm * b))
    return out


def extend_bubble(fm, s, tau, b):
    """E_tau b as a global DOF vector."""
    idx = fm.dof_index(s)
    vec = [fmpq(0)] * idx.size
    for j, v in zip(idx.bubble_dofs(tuple(tau)), bubble_dof_values(fm, s, tau, b)):
        vec[j] = v
    return vec


def extend_skeletal(fm, s, tau, i):
    idx = fm.dof_index(s)
    vec = [fmpq(0)] * idx.size
    vec[idx.lookup[(tuple(tau), "current", i)]] = fmpq(1)
    return vec


def skeletal_projection(fm, s, vec):
    """L_S: the currents of a global function, computed from cell data."""
    out = []
    zdim = fm.fam.currents.dim_z
    for tau in fm.mesh.simplices[s]:
        ci, pos = fm.host(tau)
        coeffs = fm.to_cell(s, ci, vec)
        p = fm.fam.slot_degree(s)
        out.extend(la.col_list(fm.fam.currents.upsilon_matrix(fm.cell_pts(ci), pos, p) * coeffs))
    return out


@dataclass
class DirectSumReport:
    slot: int
    dim_A: int
    dim_S: int
    dim_B: int
    independent: bool
    conforming: bool
    trace_identity: bool
    skeletal_kronecker: bool
    commutes: bool

    @property
    def ok(self):
        return (self.dim_A == self.dim_S + self.dim_B and self.independent and self.conforming
                and self.trace_identity and self.skeletal_kronecker and self.commutes)


def check_direct_sum(fm, s, Ds=None):
    """Checks, in cell coefficients, that the extensions E_S and E_tau give a
    conforming basis of the global space with the defining identities."""
    idx = fm.dof_index(s)
    ncell = len(fm.mesh.cells)
    # every DOF unit vector is E_S(z x tau) or E_tau of a bubble basis member
    cols = []
    for j in range(idx.size):
        e = [fmpq(0)] * idx.size
        e[j] = fmpq(1)
        cols.append(la.vstack(fm.broken(s, e), cols=1))
    B = la.hstack(cols, rows=ncell * fm.fam.cell_space_size(s, fm.fam.slot_degree(s)))
    independent = la.rank(B) == idx.size
    C = fm.constraint_matrix(s)
    conforming = C.nrows() == 0 or la.is_zero(C * B)
    # tr E_tau b = b on every cell containing tau
    trace_ok = True
    comm_ok = True
    for d in range(fm.n + 1):
        for tau in fm.mesh.simplices[d]:
            ch = fm.chain(tau)
            basis = ch.bases[s]
            if basis.ncols() == 0:
                continue
            for c in range(basis.ncols()):
                b = la.submatrix(basis, None, [c])
                vec = extend_bubble(fm, s, tau, b)
                for ci in fm.mesh.cells_containing[tau]:
                    cell = fm.mesh.cells[ci]
                    pos = tuple(cell.index(v) for v in tau)
                    T = fm.fam.cell_trace(s, fm.cell_pts(ci), pos, fm.fam.slot_degree(s)).dense()
                    if T * fm.to_cell(s, ci, vec) != b:
                        trace_ok = False
                if Ds is not None and s < fm.n:
                    lhs = Ds[s] * la.column(vec)
                    db = ch.dmats[s] * b
                    rhs = extend_bubble(fm, s + 1, tau, db)
                    if la.col_list(lhs) != rhs:
                        comm_ok = False
    # Upsilon_{tau'}(E_S(z_i x tau)) = delta
    kron = True
    for j in range(idx.n_skeletal):
        _, tau, _, i = idx.entries[j]
        vals = skeletal_projection(fm, s, extend_skeletal(fm, s, tau, i))
        want = [fmpq(int(k == j)) for k in range(idx.n_skeletal)]
        if vals != want:
            kron = False
            break
    return DirectSumReport(s, idx.size, idx.n_skeletal, idx.size - idx.n_skeletal,
                           independent, conforming, trace_ok, kron, comm_ok)
