"""Exact rational linear algebra on top of flint's fmpq_mat.

Everything that the verifier proves reduces to ranks, kernels and images of
rational matrices, so this module is small but load bearing. Vectors are
column matrices, subspaces carry a column basis.
"""

from dataclasses import dataclass
from math import gcd, lcm

from flint import fmpq, fmpq_mat, nmod_mat

Mat = fmpq_mat


class NoSolution(ValueError):
    """The linear system is inconsistent."""


class AmbientMismatch(ValueError):
    pass


class SingularGram(ValueError):
    pass


def q(value, den=1):
    if isinstance(value, fmpq) and den == 1:
        return value
    if hasattr(value, "numerator") and not isinstance(value, int):
        return fmpq(int(value.numerator), int(value.denominator)) / den
    return fmpq(value, den)


def zeros(rows, cols):
    return fmpq_mat(rows, cols)


def eye(n):
    M = fmpq_mat(n, n)
    for i in range(n):
        M[i, i] = 1
    return M


def mat(rows, ncols=None):
    rows = [list(r) for r in rows]
    nr = len(rows)
    nc = len(rows[0]) if rows else (ncols or 0)
    flat = []
    for r in rows:
        if len(r) != nc:
            raise ValueError("ragged rows")
        flat.extend(r)
    return fmpq_mat(nr, nc, flat)


def column(values):
    values = list(values)
    return fmpq_mat(len(values), 1, values)


def shape(M):
    return M.nrows(), M.ncols()


def to_rows(M):
    nr, nc = shape(M)
    e = M.entries()
    return [e[i * nc:(i + 1) * nc] for i in range(nr)]


def col_list(M, j=0):
    nr, nc = shape(M)
    e = M.entries()
    return [e[i * nc + j] for i in range(nr)]


def hstack(mats, rows=None):
    mats = list(mats)
    if not mats:
        return fmpq_mat(rows or 0, 0)
    nr = mats[0].nrows()
    if any(m.nrows() != nr for m in mats):
        raise ValueError("row mismatch in hstack")
    nc = sum(m.ncols() for m in mats)
    parts = [to_rows(m) for m in mats]
    flat = []
    for i in range(nr):
        for p in parts:
            flat.extend(p[i])
    return fmpq_mat(nr, nc, flat)


def vstack(mats, cols=None):
    mats = list(mats)
    if not mats:
        return fmpq_mat(0, cols or 0)
    nc = mats[0].ncols()
    if any(m.ncols() != nc for m in mats):
        raise ValueError("column mismatch in vstack")
    flat = []
    for m in mats:
        flat.extend(m.entries())
    return fmpq_mat(sum(m.nrows() for m in mats), nc, flat)


def block_diag(mats):
    mats = list(mats)
    nr = sum(m.nrows() for m in mats)
    nc = sum(m.ncols() for m in mats)
    out = fmpq_mat(nr, nc)
    r0 = c0 = 0
    for m in mats:
        for i, row in enumerate(to_rows(m)):
            for j, v in enumerate(row):
                if v != 0:
                    out[r0 + i, c0 + j] = v
        r0 += m.nrows()
        c0 += m.ncols()
    return out


def submatrix(M, rows=None, cols=None):
    nr, nc = shape(M)
    rows = range(nr) if rows is None else list(rows)
    cols = range(nc) if cols is None else list(cols)
    e = M.entries()
    flat = [e[i * nc + j] for i in rows for j in cols]
    return fmpq_mat(len(rows), len(cols), flat)


def is_zero(M):
    return all(v == 0 for v in M.entries())


def kron_eye(M, n):
    """M tensor identity(n), with the identity as the fast index."""
    nr, nc = shape(M)
    out = fmpq_mat(nr * n, nc * n)
    for i, row in enumerate(to_rows(M)):
        for j, v in enumerate(row):
            if v != 0:
                for a in range(n):
                    out[i * n + a, j * n + a] = v
    return out


def rref(M):
    """Reduced row echelon form, pivot columns and rank."""
    nr, nc = shape(M)
    if nr == 0 or nc == 0:
        return fmpq_mat(nr, nc), [], 0
    R, r = M.rref()
    pivots = []
    e = R.entries()
    j = 0
    for i in range(r):
        while e[i * nc + j] == 0:
            j += 1
        pivots.append(j)
    return R, pivots, r


def rank(M):
    nr, nc = shape(M)
    if nr == 0 or nc == 0:
        return 0
    return M.rank()


_PRIMES = (2305843009213693951, 4611686018427387847)


def modular_rank(M, p=_PRIMES[0]):
    """Rank of the entrywise reduction mod p, or None when some denominator
    is divisible by p. The reduction's rank never exceeds rank(M)."""
    nr, nc = shape(M)
    if nr == 0 or nc == 0:
        return 0
    vals = []
    for v in M.entries():
        num, den = int(v.p), int(v.q)
        if den % p == 0:
            return None
        vals.append(num * pow(den, -1, p) % p)
    return nmod_mat(nr, nc, vals, p).rank()


def has_full_rank(M):
    """rank(M) == min(shape), certified mod p when possible, exact otherwise."""
    full = min(shape(M))
    if any(modular_rank(M, p) == full for p in _PRIMES):
        return True
    return rank(M) == full


def nullspace(M):
    """Column basis of ker M, one vector per free column of the rref."""
    nr, nc = shape(M)
    R, pivots, r = rref(M)
    pivset = set(pivots)
    free = [j for j in range(nc) if j not in pivset]
    out = fmpq_mat(nc, len(free))
    e = R.entries()
    for k, f in enumerate(free):
        out[f, k] = 1
        for i, p in enumerate(pivots):
            v = e[i * nc + f]
            if v != 0:
                out[p, k] = -v
    return out


def left_nullspace(M):
    return nullspace(M.transpose()).transpose()


@dataclass(frozen=True)
class Subspace:
    ambient: int
    basis: Mat

    @property
    def dim(self):
        return self.basis.ncols()

    @classmethod
    def zero(cls, n):
        return cls(n, fmpq_mat(n, 0))

    @classmethod
    def whole(cls, n):
        return cls(n, eye(n))


def row_basis(M):
    """Nonzero rows of rref(M): a canonical basis of the row space."""
    R, pivots, r = rref(M)
    return submatrix(R, range(r), None)


def image(M):
    nr = M.nrows()
    if M.ncols() == 0 or nr == 0:
        return Subspace.zero(nr)
    return Subspace(nr, row_basis(M.transpose()).transpose())


def kernel(M):
    return Subspace(M.ncols(), nullspace(M))


def solve(M, B):
    """Some exact X with M X = B, free variables set to zero."""
    nr, nc = shape(M)
    if B.nrows() != nr:
        raise ValueError("shape mismatch in solve")
    nb = B.ncols()
    if nc == 0:
        if is_zero(B):
            return fmpq_mat(0, nb)
        raise NoSolution("inconsistent system")
    R, pivots, r = rref(hstack([M, B]))
    if pivots and pivots[-1] >= nc:
        raise NoSolution("inconsistent system")
    X = fmpq_mat(nc, nb)
    w = nc + nb
    e = R.entries()
    for i, p in enumerate(pivots):
        for j in range(nb):
            v = e[i * w + nc + j]
            if v != 0:
                X[p, j] = v
    return X


def _check_ambient(S, T):
    if S.ambient != T.ambient:
        raise AmbientMismatch(f"{S.ambient} != {T.ambient}")


def contains(S, T):
    """True iff T is a subspace of S."""
    _check_ambient(S, T)
    if T.dim == 0:
        return True
    return rank(hstack([S.basis, T.basis])) == rank(S.basis)


def intersect(S, T):
    _check_ambient(S, T)
    if S.dim == 0 or T.dim == 0:
        return Subspace.zero(S.ambient)
    K = nullspace(hstack([S.basis, -T.basis]))
    coeffs = submatrix(K, range(S.dim), None)
    return image(S.basis * coeffs)


def span_sum(S, T):
    _check_ambient(S, T)
    return image(hstack([S.basis, T.basis], rows=S.ambient))


def _orth_coeffs(H):
    """Unit upper triangular U with U^T H U diagonal, for H positive definite.

    Block recursion on Schur complements; U is the unique such matrix, so
    H U's columns match unnormalized Gram-Schmidt of the identity basis."""
    m = H.nrows()
    if m == 1:
        if H[0, 0] <= 0:
            raise SingularGram("gram not positive definite on the span")
        return eye(1)
    k = m // 2
    A = submatrix(H, range(k), range(k))
    B = submatrix(H, range(k), range(k, m))
    C = submatrix(H, range(k, m), range(k, m))
    try:
        X = A.solve(B)
    except ZeroDivisionError:
        raise SingularGram("gram not positive definite on the span")
    S = C - B.transpose() * X
    UA = _orth_coeffs(A)
    US = _orth_coeffs(S)
    U = fmpq_mat(m, m)
    top = -(X * US)
    for i in range(k):
        for j in range(k):
            U[i, j] = UA[i, j]
        for j in range(m - k):
            U[i, k + j] = top[i, j]
    for i in range(m - k):
        for j in range(m - k):
            U[k + i, k + j] = US[i, j]
    return U


def gram_orthogonalize(vectors, gram):
    """Gram-Schmidt without normalization.

    vectors: matrix whose columns are the inputs. Returns a matrix with the
    same column span whose gram matrix is diagonal with positive entries.
    """
    n, m = shape(vectors)
    if m == 0:
        return fmpq_mat(n, 0)
    return orthogonalize_for(vectors, vectors.transpose() * gram * vectors)


def orthogonalize_for(vectors, H):
    """gram_orthogonalize given the gram H of the columns themselves."""
    if shape(vectors)[1] == 0:
        return vectors
    return vectors * _orth_coeffs(H)


def primitive_columns(M):
    """Each nonzero column rescaled by a positive rational to a primitive
    integer vector; keeps spans, orthogonality and signs."""
    n, m = shape(M)
    out = fmpq_mat(n, m)
    for j in range(m):
        col = [M[i, j] for i in range(n)]
        den = lcm(*(int(v.q) for v in col))
        num = gcd(*(int(v.p) * (den // int(v.q)) for v in col))
        if num == 0:
            continue
        f = fmpq(den, num)
        for i in range(n):
            if col[i] != 0:
                out[i, j] = col[i] * f
    return out


def diag_entries(M):
    return [M[i, i] for i in range(min(shape(M)))]
