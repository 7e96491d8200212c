"""Exact integer linear algebra.

Matrices are plain 2-D numpy arrays.  Entries that fit comfortably in int64
are stored as int64; anything larger falls back to ``dtype=object`` holding
Python ints, so no result is ever silently truncated.  Heavy lifting (rref,
HNF, SNF without transforms) is delegated to FLINT through python-flint;
the Smith form *with* transforms is implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from math import gcd
from typing import Iterable, Sequence

import flint
import numpy as np
import scipy.sparse as sp

_INT64_SAFE = 1 << 62
FLOAT_EXACT = 1 << 52  # integer products below this are exact in float64


# ---------------------------------------------------------------------------
# conversions


def _rows(M) -> list[list[int]]:
    """Row list of Python ints for any 2-D integer array-like."""
    if isinstance(M, flint.fmpz_mat):
        return [[int(x) for x in row] for row in M.tolist()]
    a = np.asarray(M, dtype=object)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return [[int(x) for x in row] for row in a]


def as_matrix(rows, ncols: int | None = None) -> np.ndarray:
    """Pack integer rows into an int64 array, or object array if too large."""
    if isinstance(rows, np.ndarray) and rows.ndim == 2:
        if rows.dtype != object:
            return rows.astype(np.int64, copy=False)
        rows = rows.tolist()
    elif isinstance(rows, flint.fmpz_mat):
        ncols = rows.ncols()
        rows = _rows(rows)
    rows = [list(r) for r in rows]
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    if not rows:
        return np.zeros((0, ncols), dtype=np.int64)
    big = max((abs(int(x)) for r in rows for x in r), default=0)
    if big < _INT64_SAFE:
        return np.array(rows, dtype=np.int64).reshape(len(rows), ncols)
    out = np.empty((len(rows), ncols), dtype=object)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            out[i, j] = int(x)
    return out


def to_fmpz(M) -> flint.fmpz_mat:
    if isinstance(M, flint.fmpz_mat):
        return M
    a = np.asarray(M)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    r, c = a.shape
    if r == 0 or c == 0:
        return flint.fmpz_mat(r, c)
    return flint.fmpz_mat([[int(x) for x in row] for row in a])


def checked_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Product that stays in int64 only when overflow is impossible."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.size == 0 or B.size == 0 or A.shape[-1] == 0:
        return np.zeros(A.shape[:-1] + B.shape[1:], dtype=np.int64)
    if A.dtype != object and B.dtype != object:
        bound = int(np.abs(A).max()) * int(np.abs(B).max()) * A.shape[-1]
        if bound < FLOAT_EXACT and A.shape[-1] >= 32:
            return np.rint(A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64)
        if bound < _INT64_SAFE:
            return A.astype(np.int64) @ B.astype(np.int64)
    return as_matrix((A.astype(object) @ B.astype(object)))


def sparse_matmul(A, B) -> sp.csr_matrix:
    """Exact product of scipy sparse (or dense) integer matrices, in int64."""
    A, B = sp.csr_matrix(A, dtype=np.int64), sp.csr_matrix(B, dtype=np.int64)
    if A.nnz and B.nnz:
        per_row = int(np.diff(A.indptr).max())
        bound = int(abs(A.data).max()) * int(abs(B.data).max()) * per_row
        if bound >= _INT64_SAFE:
            raise OverflowError("sparse product may overflow int64")
    C = (A @ B).tocsr()
    C.eliminate_zeros()
    return C


def is_zero(M) -> bool:
    if sp.issparse(M):
        M = sp.csr_matrix(M)
        M.eliminate_zeros()
        return M.nnz == 0
    return not np.any(np.asarray(M))


# ---------------------------------------------------------------------------
# finitely generated abelian groups


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_prime(n: int) -> bool:
    return n >= 2 and _factor(n) == {n: 1}


def invariant_factors_of_cyclics(orders: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Free rank and invariant factors of a direct sum of cyclic groups.

    An order of 0 means an infinite cyclic summand; orders of 1 vanish.
    """
    free = 0
    powers: dict[int, list[int]] = {}
    for n in orders:
        n = abs(int(n))
        if n == 0:
            free += 1
            continue
        for p, e in _factor(n).items():
            powers.setdefault(p, []).append(p**e)
    length = max((len(v) for v in powers.values()), default=0)
    factors = [1] * length
    for p, qs in powers.items():
        qs.sort(reverse=True)
        for k, q in enumerate(qs):
            factors[length - 1 - k] *= q
    return free, tuple(f for f in factors if f > 1)


@dataclass(frozen=True)
class FgAbGroup:
    """Finitely generated abelian group, Z^free_rank + Z/t1 + ... with t1 | t2 | ..."""

    free_rank: int = 0
    torsion: tuple[int, ...] = ()

    def __post_init__(self):
        t = tuple(int(x) for x in self.torsion)
        object.__setattr__(self, "torsion", t)
        if self.free_rank < 0 or any(x < 2 for x in t):
            raise ValueError(f"not a canonical group: {self.free_rank}, {t}")
        if any(t[k + 1] % t[k] for k in range(len(t) - 1)):
            raise ValueError(f"torsion {t} is not a divisibility chain")

    @classmethod
    def from_cyclics(cls, orders: Iterable[int]) -> "FgAbGroup":
        free, tors = invariant_factors_of_cyclics(orders)
        return cls(free, tors)

    @classmethod
    def trivial(cls) -> "FgAbGroup":
        return cls()

    @property
    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.torsion

    @property
    def is_finite(self) -> bool:
        return self.free_rank == 0

    @property
    def order(self) -> int | None:
        if self.free_rank:
            return None
        return reduce(lambda a, b: a * b, self.torsion, 1)

    @property
    def exponent(self) -> int | None:
        if self.free_rank:
            return 0
        return self.torsion[-1] if self.torsion else 1

    def __add__(self, other: "FgAbGroup") -> "FgAbGroup":
        return FgAbGroup.from_cyclics([0] * (self.free_rank + other.free_rank)
                                      + list(self.torsion) + list(other.torsion))

    def scaled_by(self, n: int) -> "FgAbGroup":
        """The subgroup n*A."""
        tors = [t // gcd(t, n) for t in self.torsion]
        return FgAbGroup.from_cyclics([0] * (self.free_rank if n else 0) + tors)

    def to_json(self) -> dict:
        return {"free_rank": self.free_rank, "invariant_factors": list(self.torsion)}

    def __str__(self) -> str:
        parts = []
        if self.free_rank == 1:
            parts.append("Z")
        elif self.free_rank:
            parts.append(f"Z^{self.free_rank}")
        parts += [f"Z/{t}" for t in self.torsion]
        return " + ".join(parts) if parts else "0"


def p_primary(A: FgAbGroup, p: int) -> FgAbGroup:
    """The p-primary torsion subgroup A{p}."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    parts = []
    for t in A.torsion:
        q = 1
        while t % p == 0:
            t //= p
            q *= p
        parts.append(q)
    return FgAbGroup.from_cyclics(parts)


def prime_to_p(A: FgAbGroup, p: int) -> FgAbGroup:
    parts = []
    for t in A.torsion:
        while t % p == 0:
            t //= p
        parts.append(t)
    return FgAbGroup.from_cyclics(parts)


# ---------------------------------------------------------------------------
# Smith normal form with transforms


@dataclass(frozen=True)
class SmithForm:
    """left @ M @ right == diag(d) padded with zeros."""

    d: tuple[int, ...]
    left: np.ndarray
    right: np.ndarray
    right_inverse: np.ndarray = field(repr=False, default=None)


def _identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(M) -> SmithForm:
    """Smith normal form with unimodular transforms.

    Pivoting is deterministic: the smallest nonzero absolute value in the
    active block, ties broken by lowest row then lowest column.  ``d`` has
    length min(rows, cols).
    """
    A = _rows(M)
    n = len(A)
    m = len(A[0]) if n else np.asarray(M).shape[1]
    L = _identity(n)
    R = _identity(m)
    Rinv = _identity(m)

    def swap_rows(i, j):
        if i != j:
            A[i], A[j] = A[j], A[i]
            L[i], L[j] = L[j], L[i]

    def swap_cols(i, j):
        if i != j:
            for row in A:
                row[i], row[j] = row[j], row[i]
            for row in R:
                row[i], row[j] = row[j], row[i]
            Rinv[i], Rinv[j] = Rinv[j], Rinv[i]

    def add_row(dst, src, c):  # row_dst += c * row_src
        if c:
            a, b = A[dst], A[src]
            for k in range(m):
                if b[k]:
                    a[k] += c * b[k]
            la, lb = L[dst], L[src]
            for k in range(n):
                if lb[k]:
                    la[k] += c * lb[k]

    def add_col(dst, src, c):  # col_dst += c * col_src
        if c:
            for row in A:
                if row[src]:
                    row[dst] += c * row[src]
            for row in R:
                if row[src]:
                    row[dst] += c * row[src]
            # inverse: row_src -= c * row_dst
            ra, rb = Rinv[src], Rinv[dst]
            for k in range(m):
                if rb[k]:
                    ra[k] -= c * rb[k]

    t = 0
    while t < min(n, m):
        best = None
        for i in range(t, n):
            row = A[i]
            for j in range(t, m):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            piv = A[t][t]
            done = True
            for i in range(t + 1, n):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // piv))
                    if A[i][t]:
                        done = False
            for j in range(t + 1, m):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // piv))
                    if A[t][j]:
                        done = False
            if not done:
                # move the smallest remainder in row/column t into the pivot
                cands = [(abs(A[i][t]), 0, i) for i in range(t + 1, n) if A[i][t]]
                cands += [(abs(A[t][j]), 1, j) for j in range(t + 1, m) if A[t][j]]
                _, kind, k = min(cands)
                if kind == 0:
                    swap_rows(t, k)
                else:
                    swap_cols(t, k)
                continue
            bad = None
            for i in range(t + 1, n):
                for j in range(t + 1, m):
                    if A[i][j] % piv:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, 1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            L[t] = [-x for x in L[t]]
        t += 1
    d = tuple(A[k][k] for k in range(min(n, m)))
    return SmithForm(d, as_matrix(L, n), as_matrix(R, m), as_matrix(Rinv, m))


# ---------------------------------------------------------------------------
# sparse unit-pivot elimination


def _sparse_rows(M) -> tuple[list[dict[int, int]], int]:
    """Dict rows for a dense array or an (nrows, ncols, triples) tuple."""
    if isinstance(M, SparseMatrix):
        return [dict(r) for r in M.rows], M.ncols
    if sp.issparse(M):
        return SparseMatrix.from_scipy(M).rows, M.shape[1]
    a = np.asarray(M)
    rows = []
    for r in a:
        nz = np.nonzero(r)[0]
        rows.append({int(j): int(r[j]) for j in nz})
    return rows, a.shape[1]


@dataclass
class SparseMatrix:
    """Row-oriented sparse integer matrix, used for the large structured maps."""

    rows: list[dict[int, int]]
    ncols: int

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), self.ncols)

    @classmethod
    def from_scipy(cls, M) -> "SparseMatrix":
        M = sp.csr_matrix(M)
        M.sum_duplicates()
        rows = []
        for i in range(M.shape[0]):
            a, b = M.indptr[i], M.indptr[i + 1]
            rows.append({int(j): int(v) for j, v in zip(M.indices[a:b], M.data[a:b]) if v})
        return cls(rows, M.shape[1])

    @classmethod
    def from_dense(cls, M) -> "SparseMatrix":
        rows, ncols = _sparse_rows(M)
        return cls(rows, ncols)

    def to_scipy(self) -> sp.csr_matrix:
        ri = [i for i, r in enumerate(self.rows) for _ in r]
        ci = [j for r in self.rows for j in r]
        vals = [v for r in self.rows for v in r.values()]
        return sp.csr_matrix((np.array(vals, dtype=np.int64), (ri, ci)), shape=self.shape)

    def transpose(self) -> "SparseMatrix":
        cols: list[dict[int, int]] = [dict() for _ in range(self.ncols)]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                cols[j][i] = v
        return SparseMatrix(cols, len(self.rows))

    def to_dense(self) -> np.ndarray:
        out = [[0] * self.ncols for _ in self.rows]
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i][j] = v
        return as_matrix(out, self.ncols)

    def matvec_rows(self, X: np.ndarray) -> np.ndarray:
        """self @ X for a dense X."""
        X = np.asarray(X)
        out = np.zeros((self.nrows,) + X.shape[1:], dtype=X.dtype if X.dtype == object else np.int64)
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                out[i] += v * X[j]
        return out


def unit_eliminate(M, record: list | None = None) -> tuple[int, list[dict[int, int]], list[int]]:
    """Eliminate +-1 pivots greedily (Markowitz order).

    Returns (number of unit pivots, residual rows, residual column ids).
    The Smith form of M is diag(1,...,1) + Smith form of the residual.
    If ``record`` is a list, (column, pivot, row) is appended for each pivot;
    the row is the pivot row at elimination time and mentions no column
    eliminated before it.
    """
    rows, ncols = _sparse_rows(M)
    rows = {i: r for i, r in enumerate(rows) if r}
    colrows: dict[int, set[int]] = {}
    for i, r in rows.items():
        for j in r:
            colrows.setdefault(j, set()).add(i)
    units = 0
    progress = True
    while progress:
        progress = False
        order = sorted(rows, key=lambda i: len(rows[i]))
        for i in order:
            r = rows.get(i)
            if r is None:
                continue
            best = None
            for j, v in r.items():
                if v == 1 or v == -1:
                    c = len(colrows[j])
                    if best is None or c < best[0]:
                        best = (c, j)
                        if c == 1:
                            break
            if best is None:
                continue
            j = best[1]
            pv = r[j]
            del rows[i]
            if record is not None:
                record.append((j, pv, r))
            for k in r:
                colrows[k].discard(i)
            for i2 in list(colrows[j]):
                r2 = rows[i2]
                f = r2[j] * pv
                for k, v in r.items():
                    nv = r2.get(k, 0) - f * v
                    if nv:
                        if k not in r2:
                            colrows[k].add(i2)
                        r2[k] = nv
                    elif k in r2:
                        del r2[k]
                        colrows[k].discard(i2)
                if not r2:
                    del rows[i2]
            del colrows[j]
            units += 1
            progress = True
    live_cols = sorted(j for j, s in colrows.items() if s)
    return units, list(rows.values()), live_cols


def _residual_dense(rows: list[dict[int, int]], cols: list[int]) -> np.ndarray:
    index = {c: k for k, c in enumerate(cols)}
    out = [[0] * len(cols) for _ in rows]
    for i, r in enumerate(rows):
        for j, v in r.items():
            out[i][index[j]] = v
    return as_matrix(out, len(cols))


def invariant_factors(M) -> tuple[int, ...]:
    """Nonzero invariant factors (ones included) of an integer matrix."""
    if isinstance(M, SparseMatrix) or min(np.asarray(M).shape) > 60:
        units, rows, cols = unit_eliminate(M)
        rest = _residual_dense(rows, cols)
        return (1,) * units + invariant_factors(rest) if rest.size else (1,) * units
    F = to_fmpz(M)
    if F.nrows() == 0 or F.ncols() == 0:
        return ()
    S = F.snf()
    return tuple(int(S[k, k]) for k in range(min(F.nrows(), F.ncols())) if S[k, k] != 0)


def rank(M) -> int:
    if isinstance(M, SparseMatrix):
        return len(invariant_factors(M))
    F = to_fmpz(M)
    if F.nrows() == 0 or F.ncols() == 0:
        return 0
    return F.rank()


def cokernel(M, ncols: int | None = None) -> FgAbGroup:
    """Z^cols / rowspan(M)."""
    if isinstance(M, SparseMatrix):
        ncols = M.ncols
        nrows = M.nrows
    else:
        a = np.asarray(M)
        if a.ndim != 2:
            a = a.reshape(0, ncols or 0)
        nrows, ncols = a.shape
        M = a
    if nrows == 0 or ncols == 0:
        return FgAbGroup(ncols)
    fs = invariant_factors(M)
    return FgAbGroup.from_cyclics([0] * (ncols - len(fs)) + list(fs))


def is_torsion_free_cokernel(M) -> bool:
    return all(f == 1 for f in invariant_factors(M))


# ---------------------------------------------------------------------------
# Hermite forms, saturation, kernels


def hnf(M) -> np.ndarray:
    """Row Hermite normal form with zero rows removed."""
    F = to_fmpz(M)
    if F.nrows() == 0 or F.ncols() == 0:
        return np.zeros((0, F.ncols()), dtype=np.int64)
    H = _rows(F.hnf())
    return as_matrix([r for r in H if any(r)], F.ncols())


def _echelon_pivots(H: list[list[int]]) -> list[int]:
    piv = []
    for r in H:
        piv.append(next(j for j, x in enumerate(r) if x))
    return piv


def _lattice_of_congruences(C: list[list[int]], f: int, modulus: int) -> list[list[int]]:
    """Basis of {y in Z^f : C y = 0 mod modulus} (rows of C are constraints)."""
    if modulus == 1:
        return _identity(f)
    basis = _identity(f)
    # reduce the constraint set to a Hermite basis mod modulus first
    cons = [[x % modulus for x in row] for row in C]
    cons = [r for r in cons if any(r)]
    if cons:
        cons = _rows(hnf_mod(as_matrix(cons, f), modulus))
    for a in cons:
        vals = [sum(b[k] * a[k] for k in range(f)) % modulus for b in basis]
        if not any(vals):
            continue
        # unimodular combination so that only the first vector has nonzero value
        order = sorted(range(f), key=lambda k: (vals[k] == 0, k))
        basis = [basis[k] for k in order]
        vals = [vals[k] for k in order]
        for k in range(1, f):
            if not vals[k]:
                continue
            g, u, v = _xgcd(vals[0], vals[k])
            a0, ak = vals[0] // g, vals[k] // g
            b0, bk = basis[0], basis[k]
            basis[0] = [u * x + v * y for x, y in zip(b0, bk)]
            basis[k] = [ak * x - a0 * y for x, y in zip(b0, bk)]
            vals[0], vals[k] = g, 0
        mult = modulus // gcd(vals[0], modulus)
        basis[0] = [mult * x for x in basis[0]]
        basis = _rows(hnf(as_matrix(basis, f)))
    return basis


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def saturate(K) -> np.ndarray:
    """Hermite basis of (Q-rowspan K) intersected with Z^n."""
    F = to_fmpz(K)
    n = F.ncols()
    if F.nrows() == 0 or n == 0:
        return np.zeros((0, n), dtype=np.int64)
    R, den, r = F.rref()
    if r == 0:
        return np.zeros((0, n), dtype=np.int64)
    R = _rows(R)[:r]
    den = int(den)
    piv = _echelon_pivots(R)
    g = reduce(gcd, (x for row in R for x in row), den)
    R = [[x // g for x in row] for row in R]
    den //= g
    nonpiv = [j for j in range(n) if j not in set(piv)]
    # y in Z^r gives the vector (y R)/den; integrality needed off the pivots
    C = [[R[i][c] for i in range(r)] for c in nonpiv]
    Y = _lattice_of_congruences(C, r, den)
    out = []
    for y in Y:
        v = [0] * n
        for i, yi in enumerate(y):
            if yi:
                Ri = R[i]
                for c in range(n):
                    if Ri[c]:
                        v[c] += yi * Ri[c]
        out.append([x // den for x in v])
    return hnf(as_matrix(out, n))


def kernel_basis(M) -> np.ndarray:
    """Saturated Hermite basis (rows) of the left kernel {x : x M = 0}."""
    a = np.asarray(M)
    n, m = a.shape
    if n == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if m == 0:
        return np.eye(n, dtype=np.int64)
    T = to_fmpz(a).transpose()
    R, den, r = T.rref()
    R = _rows(R)[:r]
    piv = _echelon_pivots(R)
    pivset = set(piv)
    free = [j for j in range(n) if j not in pivset]
    if not free:
        return np.zeros((0, n), dtype=np.int64)
    den = int(den)
    K = []
    for j in free:
        v = [0] * n
        v[j] = den
        for i, p in enumerate(piv):
            v[p] = -R[i][j]
        K.append(v)
    return saturate(as_matrix(K, n))


def right_kernel_basis(M) -> np.ndarray:
    """Saturated basis (rows) of {x : M x = 0}."""
    a = np.asarray(M)
    return kernel_basis(a.T)


def _residual_kernel(R: np.ndarray) -> np.ndarray:
    """Right kernel of a tall dense residual, via a random row compression.

    The kernel of C @ R contains that of R; the final check makes it exact.
    """
    nrows, ncols = R.shape
    if nrows > 2 * ncols + 16:
        rng = np.random.default_rng(nrows * 7919 + ncols)
        for _ in range(3):
            C = rng.integers(-1, 2, size=(ncols + 8, nrows))
            K = right_kernel_basis(checked_matmul(C, R))
            if not np.any(checked_matmul(R, K.T)):
                return K
    return right_kernel_basis(R)


def sparse_right_kernel(M) -> tuple[np.ndarray, list[int]]:
    """Saturated basis (rows) of {x : M x = 0} for a large sparse M.

    Unit pivots are eliminated and later solved for by back substitution, so
    only the residual block is treated densely.  Also returns the non-pivot
    columns; the basis restricted to them has full rank modulo every prime.
    """
    record: list = []
    _, res_rows, live = unit_eliminate(M, record)
    ncols = M.shape[1]
    pivcols = {j for j, _, _ in record}
    free = [j for j in range(ncols) if j not in pivcols]
    liveset = set(live)
    loose = [j for j in free if j not in liveset]
    if res_rows:
        K = _residual_kernel(_residual_dense(res_rows, live))
    else:
        K = np.eye(len(live), dtype=np.int64)
    k = K.shape[0] + len(loose)
    X = np.zeros((ncols, k), dtype=np.int64)  # transposed basis
    if live:
        X[live, :K.shape[0]] = K.T
    X[loose, K.shape[0] + np.arange(len(loose))] = 1
    for j, pv, r in reversed(record):
        acc = np.zeros(k, dtype=np.int64)
        for c, v in r.items():
            if c != j:
                acc += v * X[c]
        X[j] = -pv * acc
        if np.abs(X[j]).max(initial=0) > FLOAT_EXACT:
            raise OverflowError("kernel entries too large for int64")
    B = X.T.copy()
    Ms = M.to_scipy() if isinstance(M, SparseMatrix) else sp.csr_matrix(M)
    if not is_zero(sparse_matmul(Ms, B.T)):
        raise AssertionError("sparse kernel check failed")
    return B, free


def inverse_mod_prime_power(A: np.ndarray, p: int, e: int) -> np.ndarray:
    """Inverse of a square int matrix over Z/p^e (it must be invertible mod p)."""
    q = p**e
    k = A.shape[0]
    X = np.hstack([np.asarray(A, dtype=np.int64) % q, np.eye(k, dtype=np.int64)])
    for c in range(k):
        cand = np.flatnonzero(X[c:, c] % p) + c
        if cand.size == 0:
            raise ValueError("matrix is singular modulo p")
        r = int(cand[0])
        if r != c:
            X[[c, r]] = X[[r, c]]
        X[c] = (X[c] * pow(int(X[c, c]), -1, q)) % q
        col = X[:, c].copy()
        col[c] = 0
        nz = np.flatnonzero(col)
        if nz.size:
            X[nz] = (X[nz] - np.outer(col[nz], X[c])) % q
    return X[:, k:]


def local_howell(X: np.ndarray, p: int, e: int) -> tuple[np.ndarray, np.ndarray]:
    """Howell-type echelon of rowspan(X) over Z/p^e.

    Returns (rows, pivot columns); each row has a power of p at its pivot and
    zeros in earlier pivot columns.  Rows p^(e-v) * r are fed back so that
    membership can be decided by plain reduction.
    """
    q = p**e
    X = np.array(X, dtype=np.int64) % q
    X = X[np.any(X != 0, axis=1)]
    cols = X.shape[1]
    out, pivs = [], []
    for c in range(cols):
        if X.shape[0] == 0:
            break
        nz = np.flatnonzero(X[:, c])
        if nz.size == 0:
            continue
        colv = X[nz, c]
        vals = np.zeros(nz.size, dtype=np.int64)
        t = colv.copy()
        while True:
            m = t % p == 0
            if not m.any():
                break
            vals[m] += 1
            t[m] //= p
        kbest = int(np.argmin(vals))
        r = nz[kbest]
        v = int(vals[kbest])
        step = p**v
        prow = (X[r] * pow(int(X[r, c]) // step, -1, q)) % q
        others = nz[nz != r]
        if others.size:
            coef = (X[others, c] // step) % q
            X[others] = (X[others] - np.outer(coef, prow)) % q
        keep = np.ones(X.shape[0], dtype=bool)
        keep[r] = False
        X = X[keep]
        if v:
            extra = (prow * (q // step)) % q
            if extra.any():
                X = np.vstack([X, extra[None, :]])
        X = X[np.any(X != 0, axis=1)]
        out.append(prow)
        pivs.append(c)
    if not out:
        return np.zeros((0, cols), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.array(out, dtype=np.int64), np.array(pivs, dtype=np.int64)


def _mod_matmul(A: np.ndarray, B: np.ndarray, q: int) -> np.ndarray:
    """(A @ B) mod q for entries in [0, q), in float64 when that is exact."""
    if A.shape[1] * (q - 1) ** 2 < FLOAT_EXACT:
        return np.rint(A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64) % q
    return checked_matmul(A, B) % q


def howell_contains(H: np.ndarray, pivs: np.ndarray, V: np.ndarray, p: int, e: int, block: int = 32) -> np.ndarray:
    """Which rows of V lie in the Z/p^e span of a local Howell form.

    Pivots are handled in blocks: a short sequential pass on the block
    columns, then one product for the rest of the matrix.
    """
    q = p**e
    V = np.atleast_2d(np.array(V, dtype=np.int64)) % q
    ok = np.ones(V.shape[0], dtype=bool)
    for b0 in range(0, len(pivs), block):
        rows = H[b0:b0 + block]
        cols = pivs[b0:b0 + block]
        W = V[:, cols].copy()
        coef = np.zeros((V.shape[0], len(cols)), dtype=np.int64)
        for i, c in enumerate(cols):
            piv = int(rows[i, c])
            x = W[:, i]
            div = x % piv == 0
            ok &= div
            coef[:, i] = np.where(div, x // piv, 0)
            W = (W - np.outer(coef[:, i], rows[i, cols])) % q
        V = (V - _mod_matmul(coef, rows, q)) % q
    return ok & ~np.any(V != 0, axis=1)


def local_span(X: np.ndarray, p: int, e: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Howell form of rowspan(X) over Z/p^e for a tall X.

    Random combinations of the rows give a candidate span; every row of X is
    then reduced against it and the leftovers are added until nothing is
    left, so the result is exact whatever the random choices.
    """
    q = p**e
    X = np.asarray(X, dtype=np.int64) % q
    m, k = X.shape
    if m <= 2 * k + 32:
        return local_howell(X, p, e)
    rng = np.random.default_rng(seed)
    R = rng.integers(0, q, size=(k + 16, m))
    Y = np.vstack([_mod_matmul(R[:, i:i + 20000], X[i:i + 20000], q) for i in range(0, m, 20000)])
    Y = np.sum(Y.reshape(-1, k + 16, k), axis=0) % q
    while True:
        H, pivs = local_howell(Y, p, e)
        inside = np.concatenate([howell_contains(H, pivs, X[i:i + 8192], p, e) for i in range(0, m, 8192)])
        if inside.all():
            return H, pivs
        Y = np.vstack([H, X[~inside][: 2 * k]])


def solve_rows(B, V) -> np.ndarray:
    """Integer C with C @ B == V, for B of full row rank; raises if impossible."""
    B = np.asarray(B)
    V = np.asarray(V)
    k, n = B.shape
    if V.shape[0] == 0:
        return np.zeros((0, k), dtype=np.int64)
    if k == 0:
        if np.any(V != 0):
            raise ValueError("vectors are not in the span")
        return np.zeros((V.shape[0], 0), dtype=np.int64)
    FB = to_fmpz(B)
    RB, _, r = FB.rref()
    if r != k:
        raise ValueError("basis rows are linearly dependent")
    # pivot columns of B select a nonsingular square block
    cols = _echelon_pivots(_rows(RB)[:k])
    Bsq = to_fmpz(B[:, cols])
    X = Bsq.transpose().solve(to_fmpz(V[:, cols]).transpose())  # Bsq^T X = V^T
    C = []
    for j in range(V.shape[0]):
        row = []
        for i in range(k):
            q = X[i, j]
            if q.denom() != 1:
                raise ValueError("vectors are not in the integer span")
            row.append(int(q.numer()))
        C.append(row)
    C = as_matrix(C, k)
    if not np.array_equal(np.asarray(checked_matmul(C, B), dtype=object), V.astype(object)):
        raise ValueError("vectors are not in the span")
    return C


def subquotient(numerator, denominator) -> FgAbGroup:
    """(rowspan numerator) / (rowspan denominator)."""
    num = np.asarray(numerator)
    den = np.asarray(denominator)
    if num.ndim != 2:
        raise ValueError("numerator must be 2-D")
    n = num.shape[1]
    if den.size == 0:
        den = np.zeros((0, n), dtype=np.int64)
    if den.shape[1] != n:
        raise ValueError("column counts differ")
    B = hnf(num)
    C = solve_rows(B, den)
    return cokernel(C, B.shape[0])


# ---------------------------------------------------------------------------
# computations modulo an integer


def hnf_mod(M, modulus: int) -> np.ndarray:
    """Howell-style echelon basis of rowspan(M) + modulus*Z^n, entries in [0, modulus).

    Rows are returned in echelon order; for each pivot column j the pivot
    divides ``modulus``.  Columns without a pivot implicitly carry
    ``modulus * e_j``, which is omitted.
    """
    a = [[int(x) % modulus for x in row] for row in _rows(M)]
    n = np.asarray(M).shape[1] if not a else len(a[0])
    pool = [r for r in a if any(r)]
    out = []
    for j in range(n):
        active = [r for r in pool if r[j]]
        rest = [r for r in pool if not r[j]]
        if not active:
            pool = rest
            continue
        piv = active[0]
        for r in active[1:]:
            g, u, v = _xgcd(piv[j], r[j])
            a0, a1 = piv[j] // g, r[j] // g
            newp = [(u * x + v * y) % modulus for x, y in zip(piv, r)]
            newr = [(a1 * x - a0 * y) % modulus for x, y in zip(piv, r)]
            piv = newp
            if any(newr):
                rest.append(newr)
        g, u, _ = _xgcd(piv[j], modulus)
        piv = [(u * x) % modulus for x in piv]
        # modulus/g * piv vanishes in column j but not necessarily beyond
        extra = [((modulus // g) * x) % modulus for x in piv]
        if any(extra):
            rest.append(extra)
        out.append(piv)
        pool = [r for r in rest if any(r)]
    # reduce entries above pivots
    for i, r in enumerate(out):
        j = next(k for k, x in enumerate(r) if x)
        for i2 in range(i):
            q = out[i2][j] // r[j]
            if q:
                out[i2] = [(x - q * y) % modulus for x, y in zip(out[i2], r)]
    return as_matrix(out, n)


def _local_snf_diag(X: np.ndarray, p: int, e: int) -> list[int]:
    """Valuations of the Smith form over Z/p^e of an int64 matrix (dense).

    Columns that never receive a pivot are reported as valuation e.
    """
    q = p**e
    X = np.array(X, dtype=np.int64) % q
    rows, cols = X.shape
    vals = []
    col_alive = np.ones(cols, dtype=bool)
    row_alive = np.ones(rows, dtype=bool)
    powers = [p**k for k in range(e + 1)]
    for v in range(e):
        step = powers[v]
        while True:
            sub = X[np.ix_(row_alive, col_alive)]
            if sub.size == 0:
                break
            # entries of valuation exactly v: divisible by p^v, not by p^(v+1)
            mask = (sub % powers[v + 1]) != 0
            if not mask.any():
                break
            ri, ci = np.argwhere(mask)[0]
            r = np.flatnonzero(row_alive)[ri]
            c = np.flatnonzero(col_alive)[ci]
            a = int(X[r, c]) // step
            inv = pow(a, -1, q)
            prow = (X[r] * inv) % q  # pivot entry now p^v
            others = row_alive.copy()
            others[r] = False
            idx = np.flatnonzero(others & (X[:, c] != 0))
            if idx.size:
                coef = (X[idx, c] // step) % q
                X[idx] = (X[idx] - np.outer(coef, prow)) % q
            row_alive[r] = False
            col_alive[c] = False
            vals.append(v)
    vals += [e] * int(col_alive.sum())
    return vals


def cokernel_mod(M, modulus: int, ncols: int | None = None) -> FgAbGroup:
    """Z^n / (rowspan M + modulus Z^n), computed one prime power at a time.

    When modulus*Z^n is known to lie in rowspan(M) this is exactly coker M.
    """
    a = np.asarray(M)
    if a.size == 0:
        a = np.zeros((0, ncols if ncols is not None else a.shape[-1]), dtype=np.int64)
    n = a.shape[1]
    orders = []
    modulus = int(modulus)
    for p, e in _factor(modulus).items():
        q = p**e
        red = np.array([[int(x) % q for x in row] for row in a], dtype=np.int64).reshape(a.shape)
        red = _chunked_local_echelon(red, p, e)
        vals = _local_snf_diag(red, p, e) if red.shape[0] else [e] * n
        orders += [p**v for v in vals if v]
    return FgAbGroup.from_cyclics(orders)


def _chunked_local_echelon(X: np.ndarray, p: int, e: int, chunk: int | None = None) -> np.ndarray:
    """Shrink a tall matrix over Z/p^e to at most ncols rows generating the same module."""
    q = p**e
    rows, cols = X.shape
    if rows <= 2 * cols + 8:
        return X
    chunk = chunk or max(cols, 64)
    basis = np.zeros((0, cols), dtype=np.int64)
    for start in range(0, rows, chunk):
        block = np.vstack([basis, X[start:start + chunk]])
        basis = _local_row_echelon(block, p, e)
    return basis


def _local_row_echelon(X: np.ndarray, p: int, e: int) -> np.ndarray:
    """Row echelon over Z/p^e (min-valuation pivot per column); nonzero rows."""
    q = p**e
    X = np.array(X, dtype=np.int64) % q
    rows, cols = X.shape
    out = []
    alive = np.ones(rows, dtype=bool)
    for c in range(cols):
        idx = np.flatnonzero(alive & (X[:, c] != 0))
        if idx.size == 0:
            continue
        colv = X[idx, c]
        vals = np.zeros(idx.size, dtype=np.int64)
        t = colv.copy()
        while True:
            m = (t % p == 0) & (t != 0)
            if not m.any():
                break
            vals[m] += 1
            t[m] //= p
        k = int(np.argmin(vals))
        r = idx[k]
        v = int(vals[k])
        step = p**v
        a = int(X[r, c]) // step
        prow = (X[r] * pow(a, -1, q)) % q
        others = idx[idx != r]
        if others.size:
            coef = (X[others, c] // step) % q
            X[others] = (X[others] - np.outer(coef, prow)) % q
        alive[r] = False
        out.append(prow)
    if not out:
        return np.zeros((0, cols), dtype=np.int64)
    return np.array(out, dtype=np.int64)


def sparse_local_valuations(M, p: int, k: int) -> list[int]:
    """Valuations of the nonzero Smith invariants of M over Z/p^k (those < k).

    Sparse elimination: unit pivots first (Markowitz order); once no unit
    entry remains every entry is divisible by p, so divide through and
    continue one valuation higher.  Entries never grow beyond p^k.
    """
    q = p**k
    rows, _ = _sparse_rows(M)
    live = {}
    for i, r in enumerate(rows):
        rr = {j: v % q for j, v in r.items() if v % q}
        if rr:
            live[i] = rr
    vals = []
    v = 0
    while live and v < k:
        colrows: dict[int, set[int]] = {}
        for i, r in live.items():
            for j in r:
                colrows.setdefault(j, set()).add(i)
        progress = True
        while progress:
            progress = False
            for i in sorted(live, key=lambda i: len(live[i])):
                r = live.get(i)
                if r is None:
                    continue
                best = None
                for j, x in r.items():
                    if x % p:
                        c = len(colrows[j])
                        if best is None or c < best[0]:
                            best = (c, j)
                            if c == 1:
                                break
                if best is None:
                    continue
                j = best[1]
                inv = pow(r[j], -1, q)
                del live[i]
                for kk in r:
                    colrows[kk].discard(i)
                for i2 in list(colrows[j]):
                    r2 = live[i2]
                    f = (r2[j] * inv) % q
                    for kk, x in r.items():
                        nv = (r2.get(kk, 0) - f * x) % q
                        if nv:
                            if kk not in r2:
                                colrows[kk].add(i2)
                            r2[kk] = nv
                        elif kk in r2:
                            del r2[kk]
                            colrows[kk].discard(i2)
                    if not r2:
                        del live[i2]
                del colrows[j]
                vals.append(v)
                progress = True
        # everything left is divisible by p
        q //= p
        v += 1
        nxt = {}
        for i, r in live.items():
            rr = {j: (x // p) % q for j, x in r.items() if (x // p) % q} if q > 1 else {}
            if rr:
                nxt[i] = rr
        live = nxt
    return vals


def torsion_of_cokernel(M, exponent_bound: int) -> FgAbGroup:
    """Torsion of coker(M) when every nonzero invariant factor divides exponent_bound.

    For each p^e || exponent_bound the Smith form is computed locally over
    Z/p^(e+1), which separates nonzero invariant factors (valuation <= e)
    from zero ones.
    """
    orders = []
    for p, e in _factor(int(exponent_bound)).items():
        vals = sparse_local_valuations(M, p, e + 1)
        orders += [p**v for v in vals if 0 < v <= e]
    return FgAbGroup.from_cyclics(orders)


def in_hnf_mod_span(H: np.ndarray, v: Sequence[int], modulus: int) -> bool:
    """Membership of v in rowspan(H) + modulus Z^n for H from hnf_mod."""
    v = [int(x) % modulus for x in v]
    for r in np.asarray(H).tolist():
        j = next(k for k, x in enumerate(r) if x)
        if v[j] % r[j]:
            return False
        q = v[j] // r[j]
        if q:
            v = [(x - q * y) % modulus for x, y in zip(v, r)]
    return not any(v)


def unit_pivots(M) -> list[tuple[int, int]]:
    """Greedy +-1 pivots (row, col) of a sparse elimination of M.

    The pivots form a square submatrix M[rows, cols] that is unimodular
    (it is triangular with unit diagonal after the recorded row operations).
    """
    rows, ncols = _sparse_rows(M)
    live = {i: r for i, r in enumerate(rows) if r}
    colrows: dict[int, set[int]] = {}
    for i, r in live.items():
        for j in r:
            colrows.setdefault(j, set()).add(i)
    out = []
    progress = True
    while progress:
        progress = False
        for i in sorted(live, key=lambda i: (len(live[i]), i)):
            r = live.get(i)
            if r is None:
                continue
            cand = [(len(colrows[j]), j) for j, v in r.items() if v in (1, -1)]
            if not cand:
                continue
            _, j = min(cand)
            pv = r[j]
            del live[i]
            for k in r:
                colrows[k].discard(i)
            for i2 in list(colrows[j]):
                r2 = live[i2]
                f = r2[j] * pv
                for k, v in r.items():
                    nv = r2.get(k, 0) - f * v
                    if nv:
                        if k not in r2:
                            colrows[k].add(i2)
                        r2[k] = nv
                    elif k in r2:
                        del r2[k]
                        colrows[k].discard(i2)
                if not r2:
                    del live[i2]
            del colrows[j]
            out.append((i, j))
            progress = True
    return out


class RowBasisSolver:
    """Coordinates with respect to a row basis B of full row rank.

    ``coords(V)`` returns integer C with C @ B == V, raising if some row of V
    is not in the integer row span.  Only the pivot columns of B are used for
    solving; the remaining columns are checked when ``check`` is set.
    """

    def __init__(self, B):
        self.B = as_matrix(B) if not isinstance(B, np.ndarray) or B.ndim != 2 else B
        k, n = self.B.shape
        self.k, self.n = k, n
        if k == 0:
            self.cols = []
            self.inv = None
            self.den = 1
            return
        R, _, r = to_fmpz(self.B).rref()
        if r != k:
            raise ValueError("basis rows are linearly dependent")
        self.cols = _echelon_pivots(_rows(R)[:k])
        sq = to_fmpz(self.B[:, self.cols])
        inv = flint.fmpq_mat(sq).inv()
        den = 1
        for i in range(k):
            for j in range(k):
                den = den * int(inv[i, j].denom()) // gcd(den, int(inv[i, j].denom()))
        self.den = den
        self.inv = as_matrix([[int(inv[i, j] * den) for j in range(k)] for i in range(k)], k)

    def coords(self, V, check: bool = True) -> np.ndarray:
        V = np.asarray(V)
        if V.ndim == 1:
            return self.coords(V[None, :], check)[0]
        if self.k == 0:
            if check and np.any(V != 0):
                raise ValueError("vector not in span")
            return np.zeros((V.shape[0], 0), dtype=np.int64)
        num = checked_matmul(V[:, self.cols], self.inv)
        if self.den != 1:
            if np.any(num % self.den != 0):
                raise ValueError("vector not in the integer span")
            num = num // self.den
        num = as_matrix(num)
        if check:
            back = checked_matmul(num, self.B)
            if not np.array_equal(np.asarray(back, dtype=object), np.asarray(V, dtype=object)):
                raise ValueError("vector not in span")
        return num
