"""Oriented simplicial complexes with rational coordinates.

Simplices are stored as ascending tuples of global vertex ids; that order is
the orientation of every simplex. Boundary signs, stars and simplicial
cochains all derive from it.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations
from math import isqrt

from flint import fmpq, fmpq_mat

from . import linalg as la


class NonConforming(ValueError):
    pass


class DegenerateCell(ValueError):
    pass


@dataclass(frozen=True)
class Simplex:
    id: int
    vertices: tuple

    @property
    def dim(self):
        return len(self.vertices) - 1


def parse_rational(text):
    if "/" in text:
        p, qq = text.split("/")
        return fmpq(int(p), int(qq))
    return fmpq(int(text))


def _det(rows):
    n = len(rows)
    if n == 0:
        return fmpq(1)
    return fmpq_mat(n, n, [v for r in rows for v in r]).det()


def _rational_sqrt_upper(x, bits=24):
    """Smallest m / 2^bits with (m / 2^bits)^2 >= x, for rational x >= 0."""
    num, den = int(x.p), int(x.q)
    scale = 4 ** bits
    t = num * scale
    m = isqrt(t // den)
    while m * m * den < t:
        m += 1
    return fmpq(m, 2 ** bits)


class Triangulation:
    """Immutable simplicial complex of dimension n embedded in R^n."""

    def __init__(self, cells, coords):
        self.coords = [tuple(fmpq(c) if not isinstance(c, fmpq) else c for c in p) for p in coords]
        if not self.coords:
            raise ValueError("empty coordinate list")
        self.n = len(self.coords[0])
        cells = [tuple(sorted(c)) for c in cells]
        if len(set(cells)) != len(cells):
            raise NonConforming("duplicate cells")
        for c in cells:
            if len(c) != self.n + 1 or len(set(c)) != len(c):
                raise NonConforming(f"cell {c} is not an {self.n}-simplex")
        self.simplices = [[] for _ in range(self.n + 1)]
        self.index = {}
        by_dim = [set() for _ in range(self.n + 1)]
        for c in cells:
            for d in range(self.n + 1):
                by_dim[d].update(combinations(c, d + 1))
        for d in range(self.n + 1):
            for s in sorted(by_dim[d]):
                self.index[s] = len(self.simplices[d])
                self.simplices[d].append(s)
        self.cells = self.simplices[self.n]
        self._check()

    def _check(self):
        for c in self.cells:
            if self.signed_volume(c) == 0:
                raise DegenerateCell(f"cell {c} has zero volume")
        count = {}
        for c in self.cells:
            for f in combinations(c, self.n):
                count[f] = count.get(f, 0) + 1
        bad = [f for f, m in count.items() if m > 2]
        if bad:
            raise NonConforming(f"facet {bad[0]} shared by more than two cells")
        used = {v for c in self.cells for v in c}
        if used != set(range(len(self.coords))):
            raise NonConforming("unused vertices in coordinate list")
        for s in self.index:
            if not self.is_connected(self.cells_containing[s]):
                raise NonConforming(f"star of {s} is not connected")

    # basic queries

    def count(self, d):
        return len(self.simplices[d])

    def simplex(self, d, i):
        return Simplex(i, self.simplices[d][i])

    def points(self, verts):
        return [self.coords[v] for v in verts]

    def edge_vectors(self, verts):
        p0 = self.coords[verts[0]]
        return [tuple(a - b for a, b in zip(self.coords[v], p0)) for v in verts[1:]]

    def signed_volume(self, cell):
        from math import factorial
        return _det(self.edge_vectors(cell)) / factorial(len(cell) - 1)

    def diameter_sq(self, cell):
        best = fmpq(0)
        for a, b in combinations(cell, 2):
            d2 = sum((x - y) ** 2 for x, y in zip(self.coords[a], self.coords[b]))
            best = max(best, d2)
        return best

    def diameter_bound(self, cell):
        return _rational_sqrt_upper(self.diameter_sq(cell))

    @cached_property
    def h(self):
        return max(self.diameter_bound(c) for c in self.cells)

    def euler_characteristic(self):
        return sum((-1) ** d * self.count(d) for d in range(self.n + 1))

    @cached_property
    def cells_containing(self):
        """Map simplex tuple -> sorted list of cell ids containing it."""
        out = {s: [] for s in self.index}
        for ci, c in enumerate(self.cells):
            for d in range(self.n + 1):
                for s in combinations(c, d + 1):
                    out[s].append(ci)
        return out

    def faces(self, s, d=None):
        s = tuple(s)
        if d is None:
            return [f for k in range(1, len(s) + 1) for f in combinations(s, k)]
        return list(combinations(s, d + 1))

    # orientation

    @staticmethod
    def boundary_sign(tau, sigma):
        tau, sigma = tuple(tau), tuple(sigma)
        if len(tau) + 1 != len(sigma):
            return 0
        for j in range(len(sigma)):
            if sigma[:j] + sigma[j + 1:] == tau:
                return (-1) ** j
        return 0

    def boundary_matrix(self, d):
        """Matrix of the boundary from d-chains to (d-1)-chains."""
        rows, cols = self.count(d - 1), self.count(d)
        M = fmpq_mat(rows, cols)
        for j, s in enumerate(self.simplices[d]):
            for k in range(len(s)):
                f = s[:k] + s[k + 1:]
                M[self.index[f], j] = (-1) ** k
        return M

    # stars

    def star(self, tau, level=0):
        tau = tuple(tau)
        if level == 0:
            cells = set(self.cells_containing[tau])
        elif level == 1:
            cells = set()
            for v in tau:
                cells.update(self.cells_containing[(v,)])
        elif level == 2:
            inner = self.star(tau, 1).cells
            verts = {v for ci in inner for v in self.cells[ci]}
            cells = set()
            for v in verts:
                cells.update(self.cells_containing[(v,)])
        else:
            raise ValueError("level must be 0, 1 or 2")
        kind = ("st", "st1", "st2")[level]
        return PatchSelector(kind, tau, tuple(sorted(cells)))

    def subcomplex(self, cell_ids):
        """Closed subcomplex on the given cells; vertex order is preserved."""
        cell_ids = sorted(cell_ids)
        verts = sorted({v for ci in cell_ids for v in self.cells[ci]})
        remap = {v: i for i, v in enumerate(verts)}
        cells = [tuple(remap[v] for v in self.cells[ci]) for ci in cell_ids]
        sub = Triangulation(cells, [self.coords[v] for v in verts])
        sub.parent_vertices = verts
        return sub

    # topology

    def cochain_complex(self, z_dim=1):
        Ds = [la.kron_eye(self.boundary_matrix(d + 1).transpose(), z_dim) for d in range(self.n)]
        dims = [z_dim * self.count(d) for d in range(self.n + 1)]
        return CochainComplex(dims, Ds)

    def betti_numbers(self):
        ranks = [0] + [la.rank(self.boundary_matrix(d)) for d in range(1, self.n + 1)] + [0]
        return [self.count(d) - ranks[d] - ranks[d + 1] for d in range(self.n + 1)]

    def is_connected(self, cell_ids=None):
        """Connectivity of the given cells through shared facets."""
        cell_ids = list(range(len(self.cells))) if cell_ids is None else list(cell_ids)
        if not cell_ids:
            return True
        by_facet = {}
        for ci in cell_ids:
            for f in combinations(self.cells[ci], self.n):
                by_facet.setdefault(f, []).append(ci)
        seen = {cell_ids[0]}
        stack = [cell_ids[0]]
        while stack:
            c = stack.pop()
            for f in combinations(self.cells[c], self.n):
                for o in by_facet[f]:
                    if o not in seen:
                        seen.add(o)
                        stack.append(o)
        return len(seen) == len(cell_ids)

    def patch_is_simply_connected(self, tau, level=1):
        patch = self.star(tau, level)
        sub = self.subcomplex(patch.cells)
        b = sub.betti_numbers()
        return b[0] == 1 and (len(b) < 2 or b[1] == 0)


@dataclass(frozen=True)
class PatchSelector:
    kind: str
    center: tuple
    cells: tuple


@dataclass
class CochainComplex:
    dims: list
    D: list
    labels: list = field(default_factory=list)

    def check(self):
        for a, b in zip(self.D, self.D[1:]):
            if not la.is_zero(b * a):
                return False
        return True

    def ranks(self):
        return [la.rank(M) for M in self.D]

    def cohomology_dims(self):
        r = [0] + self.ranks() + [0]
        return [self.dims[k] - r[k + 1] - r[k] for k in range(len(self.dims))]


def build_complex(cells, coords):
    return Triangulation(cells, coords)


# mesh text format


def read_mesh(text):
    dim = None
    coords, cells = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "dim":
            dim = int(tok[1])
        elif tok[0] == "v":
            coords.append(tuple(parse_rational(t) for t in tok[1:]))
        elif tok[0] == "c":
            cells.append(tuple(int(t) for t in tok[1:]))
        else:
            raise ValueError(f"unknown mesh line: {raw!r}")
    if dim is None:
        raise ValueError("missing 'dim' header")
    if any(len(c) != dim for c in coords):
        raise ValueError("coordinate length does not match dim")
    return Triangulation(cells, coords)


def write_mesh(mesh):
    lines = [f"dim {mesh.n}"]
    for p in mesh.coords:
        lines.append("v " + " ".join(str(c) for c in p))
    for c in mesh.cells:
        lines.append("c " + " ".join(str(v) for v in c))
    return "\n".join(lines) + "\n"


# generators

SHAPES = ("triangle", "square", "annulus", "l_shape", "two_holes", "tet", "cube", "cube_with_hole")


def _grid_2d(squares, N, keep=None):
    """Unit squares on an integer grid, each split by its anti-diagonal and
    subdivided N x N times. Coordinates are scaled by 1/N."""
    vid = {}
    coords, cells = [], []

    def v(i, j):
        key = (i, j)
        if key not in vid:
            vid[key] = len(coords)
            coords.append((fmpq(i, N), fmpq(j, N)))
        return vid[key]

    for (a, b) in squares:
        for di in range(N):
            for dj in range(N):
                i, j = a * N + di, b * N + dj
                lower = (v(i, j), v(i + 1, j), v(i, j + 1))
                upper = (v(i + 1, j), v(i + 1, j + 1), v(i, j + 1))
                for tri, tag in ((lower, "lower"), (upper, "upper")):
                    if keep is None or keep(i, j, tag):
                        cells.append(tri)
    return _compact(cells, coords)


def _compact(cells, coords):
    used = sorted({x for c in cells for x in c}, key=lambda x: coords[x])
    remap = {old: new for new, old in enumerate(used)}
    return Triangulation([tuple(remap[x] for x in c) for c in cells], [coords[o] for o in used])


def _grid_3d(cubes, N, keep=None):
    vid = {}
    coords, cells = [], []

    def v(p):
        if p not in vid:
            vid[p] = len(coords)
            coords.append(tuple(fmpq(x, N) for x in p))
        return vid[p]

    for (a, b, c) in cubes:
        for di in range(N):
            for dj in range(N):
                for dk in range(N):
                    o = (a * N + di, b * N + dj, c * N + dk)
                    for perm in permutations(range(3)):
                        p = list(o)
                        verts = [v(tuple(p))]
                        for axis in perm:
                            p[axis] += 1
                            verts.append(v(tuple(p)))
                        if keep is None or keep(o, perm):
                            cells.append(tuple(verts))
    return _compact(cells, coords)


def generate_mesh(shape, refinement=0):
    if refinement < 0:
        raise ValueError("refinement must be >= 0")
    N = 2 ** refinement
    if shape == "square":
        return _grid_2d([(0, 0)], N)
    if shape == "triangle":
        return _grid_2d([(0, 0)], N, keep=lambda i, j, tag: i + j + (tag == "upper") <= N - 1)
    if shape == "annulus":
        return _grid_2d([(a, b) for a in range(3) for b in range(3) if (a, b) != (1, 1)], N)
    if shape == "l_shape":
        return _grid_2d([(0, 0), (1, 0), (0, 1)], N)
    if shape == "two_holes":
        holes = {(1, 1), (3, 1)}
        return _grid_2d([(a, b) for a in range(5) for b in range(3) if (a, b) not in holes], N)
    if shape == "cube":
        return _grid_3d([(0, 0, 0)], N)
    if shape == "tet":
        # the Kuhn simplex 0 <= x <= y <= z <= 1 is a union of small Kuhn simplices
        return _grid_3d([(0, 0, 0)], N, keep=lambda o, perm: _kuhn_inside(o, perm))
    if shape == "cube_with_hole":
        cubes = [(a, b, c) for a in range(3) for b in range(3) for c in range(3) if (a, b) != (1, 1)]
        return _grid_3d(cubes, N)
    raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def _kuhn_inside(o, perm):
    # centroid of the small tet, scaled by 4 to stay integral
    p = list(o)
    acc = [4 * x for x in o]
    for axis in perm:
        p[axis] += 1
        for i in range(3):
            acc[i] += p[i] - o[i]
    return acc[0] < acc[1] < acc[2]
