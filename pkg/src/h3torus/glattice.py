"""G-lattices, maps between them, and the specific lattices of the torus pipeline.

Conventions used throughout:

* vectors are coordinate columns; ``L.act(g, V)`` applies g to every column
  of V and ``L.mats[g]`` is the matrix with ``mats[g] @ mats[h] == mats[g*h]``;
* S^2(L) has basis e_i e_j (i <= j) and /\\^2(L) has basis e_i ^ e_j (i < j),
  both in lexicographic order;
* the norm-one lattice W = Z[G]/Z N_G has basis the images of the
  non-identity elements, in element order;
* sublattices are stored by a row basis in ambient coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import flint
import numpy as np
import scipy.sparse as sp

from . import zlinalg as zl
from .groups import FinAbGroup, FiniteGroup, Subgroup, coset_reps, whole_group

# lattices with rank*|G| above this only materialize matrices on request
_VALIDATE_LIMIT = 200_000


def group_generators(G: FiniteGroup) -> list[int]:
    if isinstance(G, FinAbGroup):
        return G.generators()
    return list(whole_group(G).generators)


# ---------------------------------------------------------------------------
# index helpers for symmetric and exterior squares


def sym_pairs(r: int) -> tuple[np.ndarray, np.ndarray]:
    I, J = np.triu_indices(r)
    return I.astype(np.int64), J.astype(np.int64)


def wedge_pairs(r: int) -> tuple[np.ndarray, np.ndarray]:
    I, J = np.triu_indices(r, k=1)
    return I.astype(np.int64), J.astype(np.int64)


def sym_to_gram(V: np.ndarray, r: int) -> np.ndarray:
    """(s, k) symmetric-square coordinates -> (k, r, r) even-diagonal Gram matrices."""
    I, J = sym_pairs(r)
    V = np.asarray(V)
    k = V.shape[1]
    B = np.zeros((k, r, r), dtype=V.dtype if V.dtype == object else np.int64)
    B[:, I, J] = V.T
    B[:, J, I] = V.T
    d = np.arange(r)
    B[:, d, d] *= 2
    return B


def gram_to_sym(B: np.ndarray) -> np.ndarray:
    """(k, r, r) even-diagonal Gram matrices -> (s, k) coordinates."""
    r = B.shape[1]
    I, J = sym_pairs(r)
    V = B[:, I, J].copy()
    diag = I == J
    if np.any(B[:, I[diag], I[diag]] % 2):
        raise ValueError("Gram matrix has odd diagonal")
    V[:, diag] //= 2
    return V.T.copy()


def wedge_to_alt(V: np.ndarray, r: int) -> np.ndarray:
    I, J = wedge_pairs(r)
    V = np.asarray(V)
    X = np.zeros((V.shape[1], r, r), dtype=V.dtype if V.dtype == object else np.int64)
    X[:, I, J] = V.T
    X[:, J, I] = -V.T
    return X


def alt_to_wedge(X: np.ndarray) -> np.ndarray:
    I, J = wedge_pairs(X.shape[1])
    return X[:, I, J].T.copy()


def sym_product(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Row-wise products u*v in S^2 coordinates, for (k, r) arrays U, V."""
    U = np.asarray(U)
    V = np.asarray(V)
    r = U.shape[1]
    I, J = sym_pairs(r)
    out = U[:, I] * V[:, J] + U[:, J] * V[:, I]
    diag = I == J
    out[:, diag] //= 2
    return out


def _transform_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A @ B[k] @ A.T for a batch B, with overflow-safe fallback."""
    if A.dtype != object and B.dtype != object:
        bound = int(np.abs(A).max(initial=0)) ** 2 * int(np.abs(B).max(initial=0)) * A.shape[1] ** 2
        if bound < zl.FLOAT_EXACT:
            # float64 BLAS is exact below 2^53 and much faster than integer einsum
            Af = A.astype(np.float64)
            return np.rint(Af @ B.astype(np.float64) @ Af.T).astype(np.int64)
        if bound < (1 << 62):
            return np.einsum("ai,kij,bj->kab", A, B, A, optimize=True)
    A = A.astype(object)
    B = B.astype(object)
    return np.array([A @ b @ A.T for b in B], dtype=object).reshape(B.shape[0], A.shape[0], A.shape[0])


# ---------------------------------------------------------------------------
# lattices


class GLattice:
    """A G-lattice.  Subclasses provide ``act``; matrices are derived lazily."""

    group: FiniteGroup
    rank: int
    name: str = ""
    perm: np.ndarray | None = None

    def act(self, g: int, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name or '?'}, rank={self.rank})"

    @cached_property
    def mats(self) -> np.ndarray:
        I = np.eye(self.rank, dtype=np.int64)
        return np.stack([np.asarray(self.act(g, I)) for g in self.group.elements]) if self.rank \
            else np.zeros((self.group.order, 0, 0), dtype=np.int64)

    def matrix(self, g: int) -> np.ndarray:
        return self.mats[g]

    @property
    def generators(self) -> list[int]:
        return group_generators(self.group)

    @property
    def action(self) -> list[np.ndarray]:
        """Matrices of the group generators."""
        I = np.eye(self.rank, dtype=np.int64)
        return [self.act(s, I) for s in self.generators]

    @property
    def is_permutation(self) -> bool:
        return self.perm is not None

    def validate(self) -> None:
        """Check the homomorphism property on generators and unimodularity."""
        G = self.group
        I = np.eye(self.rank, dtype=np.int64)
        if not np.array_equal(self.act(G.identity, I), I):
            raise ValueError("identity does not act trivially")
        gens = self.generators
        M = self.mats
        for s in gens:
            for g in G.elements:
                if not np.array_equal(zl.checked_matmul(M[g], M[s]), M[G.mul(g, s)]):
                    raise ValueError("action is not a homomorphism")
            if self.rank and abs(int(zl.to_fmpz(M[s]).det())) != 1:
                raise ValueError("generator matrix is not unimodular")


class MatrixLattice(GLattice):
    def __init__(self, group: FiniteGroup, mats, name: str = "", check: bool = True):
        self.group = group
        mats = np.asarray(mats)
        self.rank = mats.shape[1] if mats.ndim == 3 else 0
        self.__dict__["mats"] = mats if mats.ndim == 3 else np.zeros((group.order, 0, 0), dtype=np.int64)
        self.name = name
        if check and self.rank * group.order <= _VALIDATE_LIMIT:
            self.validate()

    def act(self, g, V):
        return zl.checked_matmul(self.mats[g], V)

    @classmethod
    def from_generators(cls, group: FiniteGroup, gen_mats: Sequence, name: str = "") -> "MatrixLattice":
        gens = group_generators(group)
        if len(gens) != len(gen_mats):
            raise ValueError("need one matrix per group generator")
        gen_mats = [zl.as_matrix(np.asarray(A)) for A in gen_mats]
        r = gen_mats[0].shape[0] if gen_mats else 1
        mats: list = [None] * group.order
        mats[group.identity] = np.eye(r, dtype=np.int64)
        frontier = [group.identity]
        while frontier:
            nxt = []
            for g in frontier:
                for s, A in zip(gens, gen_mats):
                    h = group.mul(g, s)
                    if mats[h] is None:
                        mats[h] = zl.checked_matmul(mats[g], A)
                        nxt.append(h)
            frontier = nxt
        return cls(group, np.stack(mats), name=name)


class PermLattice(GLattice):
    """Permutation lattice: g e_j = e_{perm[g, j]}."""

    def __init__(self, group: FiniteGroup, perm, name: str = "", check: bool = True):
        self.group = group
        self.perm = np.asarray(perm, dtype=np.int64).reshape(group.order, -1)
        self.rank = self.perm.shape[1]
        self.name = name
        if check:
            P = self.perm
            if not np.array_equal(P[group.identity], np.arange(self.rank)):
                raise ValueError("identity does not act trivially")
            for s in self.generators:
                # (g s) e_j = g (s e_j)
                if not np.array_equal(P[group.mul_table[:, s]], P[:, P[s]]):
                    raise ValueError("permutation action is not a homomorphism")

    def act(self, g, V):
        V = np.asarray(V)
        out = np.zeros_like(V)
        out[self.perm[g]] = V
        return out

    @cached_property
    def mats(self) -> np.ndarray:
        n, r = self.group.order, self.rank
        M = np.zeros((n, r, r), dtype=np.int64)
        for g in range(n):
            M[g, self.perm[g], np.arange(r)] = 1
        return M


class SignedPermLattice(GLattice):
    """g e_j = sign[g, j] e_{perm[g, j]}."""

    def __init__(self, group, perm, sign, name=""):
        self.group = group
        self.sperm = np.asarray(perm, dtype=np.int64)
        self.sign = np.asarray(sign, dtype=np.int64)
        self.rank = self.sperm.shape[1]
        self.name = name

    def act(self, g, V):
        V = np.asarray(V)
        out = np.zeros_like(V)
        out[self.sperm[g]] = V * self.sign[g][:, None]
        return out


class TensorLattice(GLattice):
    def __init__(self, L1: GLattice, L2: GLattice, name=""):
        _same_group(L1, L2)
        self.group = L1.group
        self.L1, self.L2 = L1, L2
        self.rank = L1.rank * L2.rank
        self.name = name or f"{L1.name}(x){L2.name}"

    def act(self, g, V):
        V = np.asarray(V)
        k = V.shape[1]
        X = V.reshape(self.L1.rank, self.L2.rank, k)
        A, B = self.L1.mats[g], self.L2.mats[g]
        Y = np.einsum("ai,ijk->ajk", A, X)
        Y = np.einsum("bj,ajk->abk", B, Y)
        return Y.reshape(self.rank, k)


class Sym2Lattice(GLattice):
    def __init__(self, L: GLattice, name=""):
        self.group = L.group
        self.base = L
        self.rank = L.rank * (L.rank + 1) // 2
        self.name = name or f"S2({L.name})"

    def act(self, g, V):
        r = self.base.rank
        B = sym_to_gram(V, r)
        return gram_to_sym(_transform_gram(self.base.mats[g], B))


class Wedge2Lattice(GLattice):
    def __init__(self, L: GLattice, name=""):
        self.group = L.group
        self.base = L
        self.rank = L.rank * (L.rank - 1) // 2
        self.name = name or f"W2({L.name})"

    def act(self, g, V):
        r = self.base.rank
        X = wedge_to_alt(V, r)
        return alt_to_wedge(_transform_gram(self.base.mats[g], X))


class SubLattice(GLattice):
    """G-stable saturated sublattice of ``ambient`` spanned by the rows of ``basis``.

    ``basis`` may be a callable (with ``rank`` given) when materializing it is
    expensive and only the rank or ``coords`` are needed.
    """

    def __init__(self, ambient: GLattice, basis, name="", coords: Callable | None = None, rank: int | None = None):
        self.group = ambient.group
        self.ambient = ambient
        if callable(basis):
            if rank is None:
                raise ValueError("a lazy basis needs an explicit rank")
            self._basis_fn = basis
            self.rank = rank
        else:
            self.__dict__["basis"] = zl.as_matrix(basis)
            self.rank = self.basis.shape[0]
        self.name = name
        self._coords = coords

    @cached_property
    def basis(self) -> np.ndarray:
        B = zl.as_matrix(self._basis_fn())
        if B.shape[0] != self.rank:
            raise AssertionError("lazy basis has the wrong rank")
        return B

    @cached_property
    def solver(self) -> zl.RowBasisSolver:
        return zl.RowBasisSolver(self.basis)

    def coords(self, X: np.ndarray) -> np.ndarray:
        """Coordinates (columns) of ambient column vectors X."""
        if self._coords is not None:
            return self._coords(X)
        return self.solver.coords(np.asarray(X).T).T

    def embed(self, V: np.ndarray) -> np.ndarray:
        return zl.checked_matmul(self.basis.T, V)

    def act(self, g, V):
        return self.coords(self.ambient.act(g, self.embed(V)))


def _same_group(L1: GLattice, L2: GLattice):
    if L1.group is not L2.group and L1.group != L2.group:
        raise ValueError("lattices over different groups")


# ---------------------------------------------------------------------------
# constructors


def trivial_lattice(G: FiniteGroup, r: int = 1) -> PermLattice:
    return PermLattice(G, np.tile(np.arange(r), (G.order, 1)), name="Z" if r == 1 else f"Z^{r}")


def regular_lattice(G: FiniteGroup) -> PermLattice:
    return PermLattice(G, G.mul_table, name="Z[G]")


def permutation_lattice(G: FiniteGroup, H: Subgroup) -> PermLattice:
    reps = coset_reps(G, H)
    T = G.mul_table
    coset_of = np.empty(G.order, dtype=np.int64)
    hs = np.array(H.elements)
    for i, g in enumerate(reps):
        coset_of[T[g, hs]] = i
    perm = coset_of[T[:, reps]]
    return PermLattice(G, perm, name=f"Z[G/H{H.order}]")


def direct_sum(*Ls: GLattice) -> GLattice:
    G = Ls[0].group
    for L in Ls[1:]:
        _same_group(Ls[0], L)
    if all(L.perm is not None for L in Ls):
        offs = np.cumsum([0] + [L.rank for L in Ls])
        perm = np.hstack([L.perm + o for L, o in zip(Ls, offs)])
        return PermLattice(G, perm, name="+".join(L.name for L in Ls), check=False)
    r = sum(L.rank for L in Ls)
    M = np.zeros((G.order, r, r), dtype=np.int64)
    o = 0
    for L in Ls:
        M[:, o:o + L.rank, o:o + L.rank] = L.mats
        o += L.rank
    return MatrixLattice(G, M, name="+".join(L.name for L in Ls), check=False)


def dual(L: GLattice) -> GLattice:
    if L.perm is not None:
        return PermLattice(L.group, L.perm, name=f"{L.name}^o", check=False)
    inv = L.group.inverse
    M = L.mats
    return MatrixLattice(L.group, np.transpose(M[inv], (0, 2, 1)).copy(), name=f"{L.name}^o", check=False)


def tensor(L1: GLattice, L2: GLattice) -> GLattice:
    _same_group(L1, L2)
    if L1.perm is not None and L2.perm is not None:
        perm = L1.perm[:, :, None] * L2.rank + L2.perm[:, None, :]
        return PermLattice(L1.group, perm.reshape(L1.group.order, -1),
                           name=f"{L1.name}(x){L2.name}", check=False)
    return TensorLattice(L1, L2)


def sym2(L: GLattice) -> GLattice:
    if L.perm is not None:
        r = L.rank
        I, J = sym_pairs(r)
        pos = np.full((r, r), -1, dtype=np.int64)
        pos[I, J] = np.arange(I.size)
        pos[J, I] = np.arange(I.size)
        perm = pos[L.perm[:, I], L.perm[:, J]]
        return PermLattice(L.group, perm, name=f"S2({L.name})", check=False)
    return Sym2Lattice(L)


def wedge2(L: GLattice) -> GLattice:
    if L.perm is not None:
        r = L.rank
        I, J = wedge_pairs(r)
        pos = np.full((r, r), -1, dtype=np.int64)
        pos[I, J] = np.arange(I.size)
        pos[J, I] = np.arange(I.size)
        a, b = L.perm[:, I], L.perm[:, J]
        return SignedPermLattice(L.group, pos[a, b], np.where(a < b, 1, -1), name=f"W2({L.name})")
    return Wedge2Lattice(L)


def quotient_lattice(P: GLattice, proj: np.ndarray, section: np.ndarray, name="", check=True) -> MatrixLattice:
    """Induced action on P/K given a projection P -> Q and a Z-section Q -> P."""
    mats = np.stack([zl.checked_matmul(proj, P.act(g, section)) for g in P.group.elements])
    return MatrixLattice(P.group, mats, name=name, check=check)


def restrict(L: GLattice, H: Subgroup) -> GLattice:
    """L viewed as a lattice over an abstract copy of H."""
    Hg, emb = H.as_group()
    if L.perm is not None:
        return PermLattice(Hg, L.perm[emb], name=f"{L.name}|H", check=False)
    return MatrixLattice(Hg, L.mats[emb], name=f"{L.name}|H", check=False)


def invariants_basis(L: GLattice, H: Subgroup | None = None) -> np.ndarray:
    """Saturated Hermite basis (rows) of L^H (H defaults to G)."""
    G = L.group
    gens = list(H.generators) if H is not None else group_generators(G)
    if L.rank == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if L.perm is not None:
        # orbit sums of the subgroup generated by gens
        seen = np.full(L.rank, -1, dtype=np.int64)
        rows = []
        for j in range(L.rank):
            if seen[j] >= 0:
                continue
            orbit = {j}
            frontier = [j]
            while frontier:
                nxt = []
                for x in frontier:
                    for s in gens:
                        y = int(L.perm[s, x])
                        if y not in orbit:
                            orbit.add(y)
                            nxt.append(y)
                frontier = nxt
            v = np.zeros(L.rank, dtype=np.int64)
            v[list(orbit)] = 1
            seen[list(orbit)] = len(rows)
            rows.append(v)
        return zl.hnf(np.array(rows))
    if not gens:
        return np.eye(L.rank, dtype=np.int64)
    I = np.eye(L.rank, dtype=np.int64)
    stacked = np.hstack([(L.act(s, I) - I).T for s in gens])
    return zl.kernel_basis(stacked)


def norm_vector_action(L: GLattice, H: Subgroup | None = None) -> np.ndarray:
    """Matrix of the norm element N_H acting on L."""
    els = H.elements if H is not None else L.group.elements
    return sum(np.asarray(L.mats[g], dtype=np.int64) for g in els)


# ---------------------------------------------------------------------------
# maps and short exact sequences


@dataclass
class LatticeMap:
    """Equivariant map given by a (target x source) matrix, dense or scipy sparse."""

    source: GLattice
    target: GLattice
    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        shape = (self.target.rank, self.source.rank)
        if sp.issparse(self.matrix):
            if self.matrix.shape != shape:
                raise ValueError(f"matrix has shape {self.matrix.shape}, expected {shape}")
            self.matrix = sp.csr_matrix(self.matrix, dtype=np.int64)
        else:
            self.matrix = zl.as_matrix(np.asarray(self.matrix).reshape(shape))
        if self.check:
            if not self.is_equivariant():
                raise ValueError("map does not commute with the group action")

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def is_equivariant(self) -> bool:
        M = self.matrix
        if self.is_sparse:
            for s in self.source.generators:
                lhs = zl.sparse_matmul(M, action_matrix(self.source, s))
                rhs = np.asarray(self.target.act(s, M.toarray()))
                if not np.array_equal(lhs.toarray(), rhs):
                    return False
            return True
        I = np.eye(self.source.rank, dtype=np.int64)
        for s in self.source.generators:
            lhs = zl.checked_matmul(M, self.source.act(s, I))
            rhs = self.target.act(s, M)
            if not np.array_equal(np.asarray(lhs, dtype=object), np.asarray(rhs, dtype=object)):
                return False
        return True

    def __call__(self, V):
        if self.is_sparse:
            return zl.checked_matmul(self.matrix.toarray(), V)
        return zl.checked_matmul(self.matrix, V)


def action_matrix(L: GLattice, g: int) -> sp.csr_matrix:
    """Sparse matrix of g on L (cheap for permutation and signed permutation lattices)."""
    r = L.rank
    if L.perm is not None:
        return sp.csr_matrix((np.ones(r, dtype=np.int64), (L.perm[g], np.arange(r))), shape=(r, r))
    if isinstance(L, SignedPermLattice):
        return sp.csr_matrix((L.sign[g], (L.sperm[g], np.arange(r))), shape=(r, r))
    return sp.csr_matrix(np.asarray(L.act(g, np.eye(r, dtype=np.int64))))


def _sparse(M) -> zl.SparseMatrix:
    if sp.issparse(M):
        return zl.SparseMatrix.from_scipy(M)
    M = np.asarray(M)
    rows = [dict() for _ in range(M.shape[0])]
    for i, j in zip(*np.nonzero(M)):
        rows[int(i)][int(j)] = int(M[i, j])
    return zl.SparseMatrix(rows, M.shape[1])


def injective_with_saturated_image(M) -> bool:
    """Is the column map M injective with torsion-free cokernel?"""
    if M.shape[1] == 0:
        return True
    fs = zl.invariant_factors(_sparse(M.T))
    return len(fs) == M.shape[1] and all(f == 1 for f in fs)


def surjective(M) -> bool:
    if M.shape[0] == 0:
        return True
    fs = zl.invariant_factors(_sparse(M))
    return len(fs) == M.shape[0] and all(f == 1 for f in fs)


def _composite_zero(P, I) -> bool:
    if 0 in P.shape or 0 in I.shape:
        return True
    if sp.issparse(P) or sp.issparse(I):
        return zl.is_zero(zl.sparse_matmul(P, I))
    return not np.any(np.asarray(zl.checked_matmul(P, I)) != 0)


@dataclass
class LatticeSES:
    """0 -> A -i-> B -p-> C -> 0, verified at construction."""

    A: GLattice
    B: GLattice
    C: GLattice
    i: LatticeMap
    p: LatticeMap
    check: bool = True
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.check and not self.verify():
            raise ValueError(f"sequence is not exact: {self.report}")

    def verify(self) -> bool:
        I, P = self.i.matrix, self.p.matrix
        rep = {}
        rep["composite_zero"] = _composite_zero(P, I)
        rep["injective"] = injective_with_saturated_image(I)
        rep["surjective"] = surjective(P)
        rep["ranks"] = self.A.rank + self.C.rank == self.B.rank
        self.report = rep
        return all(rep.values())


# ---------------------------------------------------------------------------
# the norm-one lattice and the flasque resolution


def norm_one_projection(G: FiniteGroup) -> tuple[np.ndarray, np.ndarray]:
    """Projection Z[G] -> W and the section e_h -> e_h (h != 1)."""
    n = G.order
    others = [h for h in G.elements if h != G.identity]
    q = np.zeros((n - 1, n), dtype=np.int64)
    q[np.arange(n - 1), others] = 1
    q[:, G.identity] = -1
    s = np.zeros((n, n - 1), dtype=np.int64)
    s[others, np.arange(n - 1)] = 1
    return q, s


def norm_one_lattice(G: FiniteGroup) -> tuple[GLattice, LatticeSES]:
    R = regular_lattice(G)
    Z = trivial_lattice(G)
    q, s = norm_one_projection(G)
    W = quotient_lattice(R, q, s, name="W")
    N = np.ones((G.order, 1), dtype=np.int64)
    ses = LatticeSES(Z, R, W, LatticeMap(Z, R, N), LatticeMap(R, W, q))
    return W, ses


@dataclass
class FlasqueResolution:
    """0 -> W -> P = Z[G]^r -> T -> 0 with x -> (x(g_i - 1))_i.

    ``proj`` is the matrix of P -> T; T has basis the images of the P-basis
    vectors listed in ``free_cols`` and ``pivots`` are the remaining ones.
    """

    group: FiniteGroup
    gens: tuple[int, ...]
    W: GLattice
    P: PermLattice
    T: GLattice
    embed: np.ndarray
    proj: np.ndarray
    pivots: np.ndarray
    free_cols: np.ndarray
    ses: LatticeSES

    def lift(self, V: np.ndarray) -> np.ndarray:
        """Section T -> P on columns."""
        V = np.asarray(V)
        out = np.zeros((self.P.rank,) + V.shape[1:], dtype=V.dtype)
        out[self.free_cols] = V
        return out

    @cached_property
    def complement(self) -> np.ndarray:
        """Columns w'_a = p_a - lift(proj(p_a)) for a in pivots; a basis of the image of W."""
        n = self.P.rank
        E = np.zeros((n, len(self.pivots)), dtype=np.int64)
        E[self.pivots, np.arange(len(self.pivots))] = 1
        return E - self.lift(self.proj[:, self.pivots])

    @cached_property
    def change_of_basis(self) -> np.ndarray:
        """Q with Q x = (x[pivots], proj x): coordinates in the basis (w'_a, p_c)."""
        n = self.P.rank
        k = len(self.pivots)
        Q = np.zeros((n, n), dtype=np.int64)
        Q[np.arange(k), self.pivots] = 1
        Q[k:] = self.proj
        return Q


def flasque_resolution(G: FiniteGroup, gens: Sequence[int] | None = None, check: bool = True) -> FlasqueResolution:
    gens = tuple(int(g) for g in (group_generators(G) if gens is None else gens))
    n = G.order
    m = len(gens)
    T = G.mul_table
    W, _ = norm_one_lattice(G)
    perm = np.hstack([T + i * n for i in range(m)]) if m else np.zeros((n, 0), dtype=np.int64)
    P = PermLattice(G, perm, name=f"Z[G]^{m}", check=False)
    others = [h for h in G.elements if h != G.identity]
    E = np.zeros((m * n, n - 1), dtype=np.int64)
    for col, h in enumerate(others):
        for i, g in enumerate(gens):
            E[i * n + T[h, g], col] += 1
            E[i * n + h, col] -= 1
    if n > 1 and not injective_with_saturated_image(E):
        raise RuntimeError("flasque embedding is not injective: generators do not generate G")
    piv = zl.unit_pivots(E.T)
    if len(piv) != n - 1:
        raise RuntimeError("could not find a unimodular pivot set for the flasque embedding")
    J = np.array(sorted(c for _, c in piv), dtype=np.int64)
    notJ = np.array([c for c in range(m * n) if c not in set(J.tolist())], dtype=np.int64)
    if n > 1:
        EJinv = zl.to_fmpz(E[J]).inv()  # fmpq; unimodular so integral
        EJinv = zl.as_matrix([[int(EJinv[i, j]) for j in range(n - 1)] for i in range(n - 1)], n - 1)
        proj = np.zeros((len(notJ), m * n), dtype=np.int64)
        proj[np.arange(len(notJ)), notJ] = 1
        proj[:, J] = -zl.checked_matmul(E[notJ], EJinv)
    else:
        proj = np.eye(m * n, dtype=np.int64)
    section = np.zeros((m * n, len(notJ)), dtype=np.int64)
    section[notJ, np.arange(len(notJ))] = 1
    That = quotient_lattice(P, proj, section, name="T", check=check)
    ses = LatticeSES(W, P, That, LatticeMap(W, P, E, check=check), LatticeMap(P, That, proj, check=check),
                     check=check)
    fr = FlasqueResolution(G, gens, W, P, That, E, proj, J, notJ, ses)
    if check and not is_flasque(That):
        raise RuntimeError("constructed T is not flasque")
    return fr


def is_flasque(L: GLattice) -> bool:
    from .cohomres import h1_vanishes_on_subgroups

    return h1_vanishes_on_subgroups(dual(L))


def is_coflasque(L: GLattice) -> bool:
    from .cohomres import h1_vanishes_on_subgroups

    return h1_vanishes_on_subgroups(L)


# ---------------------------------------------------------------------------
# auxiliary sequences


@dataclass
class NSequence:
    """0 -> /\\^2 W -f-> W (x) P -f'-> N -> 0 with N = ker(S^2 P -> S^2 T).

    ``f_amb`` is f' composed with the inclusion N -> S^2 P.  The three maps
    are scipy sparse matrices; the ambient ranks grow like |G|^2.
    """

    fr: FlasqueResolution
    wedgeW: GLattice
    WP: GLattice
    S2P: GLattice
    N: SubLattice
    f: sp.csr_matrix
    f_amb: sp.csr_matrix
    s2proj: sp.csr_matrix
    report: dict = field(default_factory=dict)

    def verify(self) -> bool:
        f, fa = self.f, self.f_amb
        rep = {}
        rep["composite_zero"] = _composite_zero(fa, f)
        rep["image_in_N"] = _composite_zero(self.s2proj, fa)
        rep["f_injective"] = injective_with_saturated_image(f)
        # f' has saturated image in S^2 P of the right rank, so its image is N
        rep["f_prime_onto_N"] = _saturated_image_rank(fa) == self.N.rank
        rep["ranks"] = self.wedgeW.rank + self.N.rank == self.WP.rank
        self.report = rep
        return all(rep.values())

    def as_ses(self) -> LatticeSES:
        """The sequence with N as a lattice in its own right (small groups only)."""
        fN = self.N.coords(self.f_amb.toarray())
        return LatticeSES(self.wedgeW, self.WP, self.N,
                          LatticeMap(self.wedgeW, self.WP, self.f.toarray()), LatticeMap(self.WP, self.N, fN))


def _saturated_image_rank(M) -> int:
    """Rank of M if its column image is saturated, else -1."""
    if M.shape[1] == 0:
        return 0
    fs = zl.invariant_factors(_sparse(M.T))
    return len(fs) if all(f == 1 for f in fs) else -1


def _sym_index(r: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Position of e_a e_b in the S^2 basis (i <= j, row-major)."""
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return lo * r - lo * (lo - 1) // 2 + (hi - lo)


def s2_of_map(M: np.ndarray) -> np.ndarray:
    """Matrix of S^2(M) for a column map M: Z^a -> Z^b."""
    M = np.asarray(M)
    b, a = M.shape
    I, J = sym_pairs(a)
    # image of e_i e_j is (M e_i)(M e_j)
    return sym_product(M[:, I].T, M[:, J].T).T.copy()


def s2_of_map_sparse(M) -> sp.csr_matrix:
    """Sparse S^2(M): column e_i e_j maps to (M e_i)(M e_j)."""
    M = sp.csc_matrix(M, dtype=np.int64)
    M.sum_duplicates()
    b, a = M.shape
    nb, na = b * (b + 1) // 2, a * (a + 1) // 2
    start = M.indptr[:-1].astype(np.int64)
    nnz = np.diff(M.indptr).astype(np.int64)
    I, J = sym_pairs(a)
    counts = nnz[I] * nnz[J]
    total = int(counts.sum())
    if total == 0:
        return sp.csr_matrix((nb, na), dtype=np.int64)
    pair = np.repeat(np.arange(len(I)), counts)
    t = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    x = start[I[pair]] + t // nnz[J[pair]]
    y = start[J[pair]] + t % nnz[J[pair]]
    rows = _sym_index(b, M.indices[x].astype(np.int64), M.indices[y].astype(np.int64))
    out = sp.csr_matrix((M.data[x] * M.data[y], (rows, pair)), shape=(nb, na))
    out.sum_duplicates()
    out.eliminate_zeros()
    return out


def n_sublattice(fr: FlasqueResolution) -> SubLattice:
    """N = ker(S^2 P -> S^2 T), with basis w'_a w'_b (a <= b) and w'_a p_c."""
    S2P = sym2(fr.P)
    k = len(fr.pivots)
    n = fr.P.rank
    nfree = len(fr.free_cols)

    def basis():
        Wc = fr.complement  # n x k
        rows = []
        if k:
            Ia, Ib = sym_pairs(k)
            rows.append(sym_product(Wc[:, Ia].T, Wc[:, Ib].T))
            Pc = np.zeros((n, nfree), dtype=np.int64)
            Pc[fr.free_cols, np.arange(nfree)] = 1
            A = np.repeat(Wc.T, nfree, axis=0)
            C = np.tile(Pc.T, (k, 1))
            rows.append(sym_product(A, C))
        return np.vstack(rows) if rows else np.zeros((0, S2P.rank), dtype=np.int64)

    Q = fr.change_of_basis

    def coords(X):
        X = np.asarray(X)
        B = _transform_gram(Q, sym_to_gram(X, n))  # Gram in the basis (w', p_c)
        if np.any(B[:, k:, k:]):
            raise ValueError("vector not in N")
        Ia, Ib = sym_pairs(k)
        top = B[:, Ia, Ib].copy()
        diag = Ia == Ib
        top[:, diag] //= 2
        mixed = B[:, :k, k:].reshape(B.shape[0], k * nfree)
        return np.hstack([top, mixed]).T.copy()

    return SubLattice(S2P, basis, name="N", coords=coords, rank=k * (k + 1) // 2 + k * nfree)


def n_sequence(fr: FlasqueResolution, check: bool = True) -> NSequence:
    W, P = fr.W, fr.P
    w, p = W.rank, P.rank
    E = sp.csc_matrix(fr.embed, dtype=np.int64)
    wedgeW = wedge2(W)
    WP = tensor(W, P)
    S2P = sym2(P)
    N = n_sublattice(fr)
    # f(w_a ^ w_b) = w_a (x) iota(w_b) - w_b (x) iota(w_a)
    Ia, Ib = wedge_pairs(w)
    rows, cols, vals = [], [], []
    for col, (a, b) in enumerate(zip(Ia, Ib)):
        for x, y, sign in ((a, b, 1), (b, a, -1)):
            lo, hi = E.indptr[y], E.indptr[y + 1]
            rows.append(x * p + E.indices[lo:hi])
            vals.append(sign * E.data[lo:hi])
            cols.append(np.full(hi - lo, col, dtype=np.int64))
    f = _coo(rows, cols, vals, (w * p, Ia.size))
    # f'(w_a (x) p_c) = iota(w_a) * p_c
    rows, cols, vals = [], [], []
    for a in range(w):
        lo, hi = E.indptr[a], E.indptr[a + 1]
        xs, vs = E.indices[lo:hi], E.data[lo:hi]
        for c in range(p):
            rows.append(_sym_index(p, xs, np.full_like(xs, c)))
            vals.append(vs)
            cols.append(np.full(len(xs), a * p + c, dtype=np.int64))
    f_amb = _coo(rows, cols, vals, (S2P.rank, w * p))
    s2proj = s2_of_map_sparse(fr.proj)
    seq = NSequence(fr, wedgeW, WP, S2P, N, f, f_amb, s2proj)
    if check and not seq.verify():
        raise RuntimeError(f"n_sequence is not exact: {seq.report}")
    return seq


def _coo(rows, cols, vals, shape) -> sp.csr_matrix:
    if not rows:
        return sp.csr_matrix(shape, dtype=np.int64)
    M = sp.csr_matrix((np.concatenate(vals).astype(np.int64), (np.concatenate(rows), np.concatenate(cols))),
                      shape=shape)
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


def dec_sequence(fr: FlasqueResolution, check: bool = True) -> LatticeSES:
    """0 -> N -> S^2 P -> S^2 T -> 0, whose connecting map is delta."""
    N = n_sublattice(fr)
    S2P, S2T = N.ambient, sym2(fr.T)
    return LatticeSES(N, S2P, S2T, LatticeMap(N, S2P, N.basis.T.copy(), check=check),
                      LatticeMap(S2P, S2T, s2_of_map(fr.proj), check=check), check=check)


def kernel_sequence(B: GLattice, C: GLattice, M: np.ndarray, name: str = "K") -> LatticeSES:
    """0 -> ker M -> B -> C -> 0 for a surjective equivariant M (small ranks)."""
    K = zl.kernel_basis(np.asarray(M).T)
    sub = SubLattice(B, K, name=name)
    return LatticeSES(sub, B, C, LatticeMap(sub, B, K.T.copy()), LatticeMap(B, C, M))


def n_prime_sequence(fr: FlasqueResolution) -> LatticeSES:
    """N' = ker(P (x) T -> S^2 T)."""
    P, T = fr.P, fr.T
    p, t = P.rank, T.rank
    A = np.repeat(fr.proj.T, t, axis=0)
    C = np.tile(np.eye(t, dtype=np.int64), (p, 1))
    M = sym_product(A, C).T.copy()
    return kernel_sequence(tensor(P, T), sym2(T), M, name="N'")


def n_double_prime_sequence(fr: FlasqueResolution) -> LatticeSES:
    """N'' = ker(P (x) P -> S^2 T)."""
    P, T = fr.P, fr.T
    p = P.rank
    A = np.repeat(fr.proj.T, p, axis=0)
    C = np.tile(fr.proj.T, (p, 1))
    M = sym_product(A, C).T.copy()
    return kernel_sequence(tensor(P, P), sym2(T), M, name="N''")


def phi_sequence(G: FiniteGroup, check: bool = True) -> LatticeSES:
    """0 -> W -phi-> /\\^2 Z[G] -> /\\^2 W -> 0 with phi(b) = b ^ N_G(1)."""
    n = G.order
    R = regular_lattice(G)
    W, _ = norm_one_lattice(G)
    WR = wedge2(R)
    WW = wedge2(W)
    others = [h for h in G.elements if h != G.identity]
    Ia, Ib = wedge_pairs(n)
    pos = np.full((n, n), -1, dtype=np.int64)
    pos[Ia, Ib] = np.arange(Ia.size)
    rows, cols, vals = [], [], []
    for col, h in enumerate(others):
        g = np.array([x for x in G.elements if x != h])
        rows.append(np.where(g > h, pos[h, g], pos[g, h]))
        vals.append(np.where(g > h, 1, -1))
        cols.append(np.full(len(g), col, dtype=np.int64))
    phi = _coo(rows, cols, vals, (WR.rank, n - 1))
    # q(e_1) = -(sum of all basis vectors), q(e_h) = f_h; hence e_a ^ e_b maps to
    # f_a ^ f_b, or to -(sum_c f_c) ^ f_b when a is the identity
    q, _ = norm_one_projection(G)
    m = n - 1
    rows, cols, vals = [], [], []
    if m >= 2:
        Jw, Kw = wedge_pairs(m)
        wpos = np.full((m, m), -1, dtype=np.int64)
        wpos[Jw, Kw] = np.arange(Jw.size)
        qc = sp.csc_matrix(q)
        for k, (a, b) in enumerate(zip(Ia, Ib)):
            xa, va = qc.indices[qc.indptr[a]:qc.indptr[a + 1]], qc.data[qc.indptr[a]:qc.indptr[a + 1]]
            xb, vb = qc.indices[qc.indptr[b]:qc.indptr[b + 1]], qc.data[qc.indptr[b]:qc.indptr[b + 1]]
            X, Y = np.meshgrid(xa, xb, indexing="ij")
            V = np.outer(va, vb)
            keep = X != Y
            X, Y, V = X[keep], Y[keep], V[keep]
            rows.append(wpos[np.minimum(X, Y), np.maximum(X, Y)])
            vals.append(np.where(X < Y, V, -V))
            cols.append(np.full(len(X), k, dtype=np.int64))
    psi = _coo(rows, cols, vals, (WW.rank, WR.rank))
    return LatticeSES(W, WR, WW, LatticeMap(W, WR, phi, check=check), LatticeMap(WR, WW, psi, check=check),
                      check=check)
