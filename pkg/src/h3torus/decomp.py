"""The decomposable subgroup Dec(A) of S^2(A)^G and the quotient S^2(A)^G/Dec.

Dec(A) is generated by (A^G)^2 and Qtr_H(A^H) over all subgroups H.  Qtr is
quadratic, so we use a finite generating set coming from polarization:

    Qtr_H(a + b) = Qtr_H(a) + Qtr_H(b) + Tr_H(a) Tr_H(b) - Tr_H(a b)
    Tr_H(a a)    = Tr_H(a)^2 - 2 Qtr_H(a)

For a basis e_k of A^H this reduces Qtr_H(A^H) to the span of Qtr_H(e_k),
Tr_H(e_k e_l) (k < l) and (A^G)^2.  Here Tr_H = sum over left coset reps of H.

Taking H = 1 gives Tr_1(x) = N_G(x) = |G| x for invariant x, so
|G| S^2(A)^G lies in Dec and the quotient is computed modulo |G|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import flint
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import zlinalg as zl
from .glattice import (GLattice, _sym_index, action_matrix, group_generators, invariants_basis,
                       s2_of_map_sparse, sym_pairs, sym_product)
from .groups import FinAbGroup, FiniteGroup, Subgroup, coset_reps, subgroups
from .zlinalg import FgAbGroup


def _images(A: GLattice, g: int, X: np.ndarray) -> np.ndarray:
    """Rows of X moved by g."""
    return np.asarray(A.act(g, np.asarray(X).T)).T


def sym2_square(U: np.ndarray) -> np.ndarray:
    return sym_product(U, U)


def trace(A: GLattice, H: Subgroup, X: np.ndarray) -> np.ndarray:
    """Tr_H^G on rows of X (elements of A^H)."""
    X = np.atleast_2d(X)
    out = np.zeros_like(X)
    for s in coset_reps(A.group, H):
        out = out + _images(A, s, X)
    return out


def _is_fixed(A: GLattice, H: Subgroup, X: np.ndarray) -> bool:
    X = np.atleast_2d(X)
    return all(np.array_equal(_images(A, h, X), X) for h in H.generators)


def qtr_rows(A: GLattice, H: Subgroup, X: np.ndarray) -> np.ndarray:
    """Qtr_H on each row of X, via Qtr(a) = (Tr(a)^2 - sum_i (s_i a)^2) / 2."""
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    reps = coset_reps(A.group, H)
    tot = np.zeros_like(X)
    sq = np.zeros((X.shape[0], A.rank * (A.rank + 1) // 2), dtype=np.int64)
    for s in reps:
        Y = _images(A, s, X)
        tot = tot + Y
        sq = sq + sym2_square(Y)
    # coordinates of u.u are u_k^2 on the diagonal and 2 u_k u_l off it, so
    # num is twice the wanted sum in every coordinate
    num = sym2_square(tot) - sq
    if np.any(num % 2):
        raise AssertionError("quadratic trace is not integral")
    return num // 2


def qtr(A: GLattice, H: Subgroup, a) -> np.ndarray:
    """Qtr_H(a) = sum_{i<j} s_i(a) s_j(a) in S^2 coordinates."""
    a = np.asarray(a, dtype=np.int64)
    if not _is_fixed(A, H, a):
        raise ValueError("a is not fixed by H")
    return qtr_rows(A, H, a[None, :])[0]


def qtr_naive(A: GLattice, H: Subgroup, a) -> np.ndarray:
    """The defining double sum, kept as a test oracle."""
    a = np.asarray(a, dtype=np.int64)
    ys = [_images(A, s, a[None, :])[0] for s in coset_reps(A.group, H)]
    out = np.zeros(A.rank * (A.rank + 1) // 2, dtype=np.int64)
    for i in range(len(ys)):
        for j in range(i + 1, len(ys)):
            out += sym_product(ys[i][None, :], ys[j][None, :])[0]
    return out


def pair_traces(A: GLattice, H: Subgroup, E: np.ndarray) -> np.ndarray:
    """Tr_H(e_k e_l) for all k < l, E the rows e_k."""
    m = E.shape[0]
    K, L = np.triu_indices(m, 1)
    out = np.zeros((len(K), A.rank * (A.rank + 1) // 2), dtype=np.int64)
    if not len(K):
        return out
    for s in coset_reps(A.group, H):
        Y = _images(A, s, E)
        out += sym_product(Y[K], Y[L])
    return out


def trace_products(A: GLattice, H: Subgroup, a, b) -> np.ndarray:
    """Tr_H(a b) = sum_s (s a)(s b) in S^2 coordinates."""
    out = np.zeros(A.rank * (A.rank + 1) // 2, dtype=np.int64)
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    for s in coset_reps(A.group, H):
        out += sym_product(_images(A, s, a), _images(A, s, b))[0]
    return out


def sym2_matrix(A: np.ndarray) -> np.ndarray:
    """Matrix of S^2(A) on the basis e_i e_j (i <= j), columns = images."""
    A = np.asarray(A, dtype=np.int64)
    I, J = sym_pairs(A.shape[0])
    M = A[I][:, I] * A[J][:, J] + A[J][:, I] * A[I][:, J]
    diag = I == J
    M[diag] //= 2
    return M


def sym2_invariants(A: GLattice) -> np.ndarray:
    """Saturated basis (rows) of S^2(A)^G in S^2 coordinates.

    The rational span of the invariants is the image of the norm map, so we
    saturate the norm images of the basis; no S^2 action matrix is stored
    beyond one at a time.
    """
    r = A.rank
    if r == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if A.perm is not None:
        # S^2 of a permutation lattice is a permutation lattice: orbit sums
        from .glattice import sym2

        return invariants_basis(sym2(A))
    Nm = None
    for g in A.group.elements:
        S = sym2_matrix(A.mats[g])
        Nm = S if Nm is None else Nm + S
    R, _, rk = zl.to_fmpz(Nm.T).rref()
    rows = zl.as_matrix(zl._rows(R)[:rk], Nm.shape[0])
    return zl.saturate(rows)


@dataclass
class DecSubgroup:
    lattice: GLattice
    invariants: np.ndarray  # basis of S^2(A)^G
    generators: np.ndarray  # S^2 coordinates
    labels: list[str] = field(repr=False)

    @cached_property
    def solver(self) -> zl.RowBasisSolver:
        return zl.RowBasisSolver(self.invariants)

    @cached_property
    def coords(self) -> np.ndarray:
        """Generators in the basis of S^2(A)^G; raises if one is not invariant."""
        if self.generators.shape[0] == 0:
            return np.zeros((0, self.invariants.shape[0]), dtype=np.int64)
        return self.solver.coords(self.generators)

    @cached_property
    def _span(self) -> zl.RowBasisSolver:
        k = self.invariants.shape[0]
        n = self.lattice.group.order
        H = zl.hnf(np.vstack([self.coords, n * np.eye(k, dtype=np.int64)]))
        return zl.RowBasisSolver(H)

    def contains(self, v) -> bool:
        """Is the S^2 vector v in Dec?  (v must be G-invariant.)"""
        c = self.solver.coords(np.atleast_2d(v))
        try:
            self._span.coords(c)
        except ValueError:
            return False
        return True

    def quotient(self) -> FgAbGroup:
        k = self.invariants.shape[0]
        if k == 0:
            return FgAbGroup()
        return zl.cokernel_mod(self.coords, self.lattice.group.order, k)


@lru_cache(maxsize=32)
def _sorted_subgroups(G: FiniteGroup) -> list[Subgroup]:
    return sorted(subgroups(G), key=lambda H: (G.order // H.order, tuple(H.elements)))


def dec_generators(A: GLattice, subgroup_list: list[Subgroup] | None = None) -> DecSubgroup:
    G = A.group
    inv = sym2_invariants(A)
    gens: list[np.ndarray] = []
    labels: list[str] = []
    AG = invariants_basis(A)
    if AG.shape[0]:
        K, L = np.triu_indices(AG.shape[0])
        gens.append(sym_product(AG[K], AG[L]))
        labels += [f"inv:{k},{l}" for k, l in zip(K, L)]
    for H in (subgroup_list if subgroup_list is not None else _sorted_subgroups(G)):
        if H.order == G.order:
            continue  # Qtr_G = 0, Tr_G(e_k e_l) is already an invariant product
        E = invariants_basis(A, H)
        if E.shape[0] == 0:
            continue
        gens.append(qtr_rows(A, H, E))
        labels += [f"qtr:{H.order}:{k}" for k in range(E.shape[0])]
        T = pair_traces(A, H, E)
        gens.append(T)
        K, L = np.triu_indices(E.shape[0], 1)
        labels += [f"tr:{H.order}:{k},{l}" for k, l in zip(K, L)]
    if gens:
        X = np.vstack(gens)
        keep = np.any(X != 0, axis=1)
        X = X[keep]
        labels = [l for l, k in zip(labels, keep) if k]
    else:
        X = np.zeros((0, A.rank * (A.rank + 1) // 2), dtype=np.int64)
    return DecSubgroup(A, inv, X, labels)


# ---------------------------------------------------------------------------
# the modular path, for lattices whose S^2 is too large for dense matrices
#
# Since |G| S^2(A)^G lies in Dec, only the reduction modulo each p^e || |G|
# matters.  If B is a basis of S^2(A)^G and M = B[:, C] is invertible mod p,
# an invariant vector v has coordinates v[C] M^-1 mod p^e.  So every
# generator is evaluated at the few S^2 positions in C only.
#
# Generators come from a cover P -> A by a permutation lattice: the images
# u_O of the H-orbit sums of P, plus a few elements of A^H spanning the finite
# cokernel, generate A^H.  Polarization works for any generating family, and
# when H is normal Tr_H(g x) = Tr_H(x), so Tr_H(u_O u_O') only depends on the
# G-orbit of the pair (O, O').


@dataclass
class Cover:
    """Equivariant surjection P -> A (columns) from a permutation lattice."""

    P: GLattice
    proj: np.ndarray


def identity_cover(A: GLattice) -> Cover:
    if A.perm is None:
        raise ValueError("not a permutation lattice")
    return Cover(A, np.eye(A.rank, dtype=np.int64))


def _components(n: int, maps: list[np.ndarray]) -> np.ndarray:
    """Orbit labels of the maps x -> m[x] on range(n)."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if not maps:
        return np.arange(n)
    src = np.concatenate([np.arange(n)] * len(maps))
    dst = np.concatenate(maps)
    g = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(n, n))
    _, lab = connected_components(g, directed=True, connection="weak")
    return lab.astype(np.int64)


def _sym_generator_mats(A: GLattice) -> list[sp.csr_matrix]:
    return [s2_of_map_sparse(action_matrix(A, g)) for g in group_generators(A.group)]


def _fixed_basis(A: GLattice, H: Subgroup) -> np.ndarray:
    """Basis of A^H; sparse elimination for large matrix lattices."""
    if A.perm is not None or A.rank <= 48 or not H.generators:
        return invariants_basis(A, H)
    I = sp.identity(A.rank, dtype=np.int64, format="csr")
    M = sp.vstack([action_matrix(A, h) - I for h in H.generators]).tocsr()
    return zl.sparse_right_kernel(M)[0]


def _pivot_columns_mod_p(X: np.ndarray, p: int) -> list[int]:
    k, m = X.shape
    R, r = flint.nmod_mat(k, m, [int(x) % p for x in X.ravel()], p).rref()
    if r != k:
        raise ValueError("rows are dependent modulo p")
    out = []
    for i in range(k):
        out.append(next(j for j in range(m) if int(R[i, j])))
    return out


class InvariantCoords:
    """Coordinates on S^2(A)^G read off a few S^2 positions."""

    def __init__(self, A: GLattice):
        self.lattice = A
        r = A.rank
        n = A.group.order
        primes = zl._factor(n)
        if A.perm is not None:
            # orbit sums of pairs; the coordinate is the value at a representative
            I, J = sym_pairs(r)
            maps = [_sym_index(r, A.perm[g][I], A.perm[g][J]) for g in group_generators(A.group)]
            lab = _components(len(I), maps)
            _, reps = np.unique(lab, return_index=True)
            order = np.argsort(lab[reps])
            self.labels = lab
            self.basis = None
            self.rank = len(reps)
            self.positions = reps[order]
            self.local = {p: (e, np.arange(self.rank), None) for p, e in primes.items()}
            return
        S = _sym_generator_mats(A)
        D = r * (r + 1) // 2
        if S:
            M = sp.vstack([m - sp.identity(D, dtype=np.int64, format="csr") for m in S]).tocsr()
            B, free = zl.sparse_right_kernel(M)
        else:
            B, free = np.eye(D, dtype=np.int64), list(range(D))
        self.labels = None
        self.basis = B
        self.free = np.asarray(free, dtype=np.int64)
        self.rank = B.shape[0]
        cols = {}
        for p, e in primes.items():
            sub = _pivot_columns_mod_p(B[:, free], p)
            cols[p] = [free[j] for j in sub]
        self.positions = np.array(sorted({c for cs in cols.values() for c in cs}), dtype=np.int64)
        where = {c: i for i, c in enumerate(self.positions.tolist())}
        self.local = {}
        for p, e in primes.items():
            idx = np.array([where[c] for c in cols[p]], dtype=np.int64)
            Minv = zl.inverse_mod_prime_power(B[:, cols[p]], p, e) if self.rank else None
            self.local[p] = (e, idx, Minv)

    def local_coords(self, vals: np.ndarray, p: int) -> np.ndarray:
        """Coordinates mod p^e of invariant vectors given by their values at ``positions``."""
        e, idx, Minv = self.local[p]
        q = p**e
        X = np.asarray(vals, dtype=np.int64)[:, idx] % q
        if Minv is None:
            return X
        return zl.checked_matmul(X, Minv) % q

    def exact_coords(self, V: np.ndarray) -> np.ndarray:
        """Integer coordinates of full S^2 vectors; raises unless they are invariant."""
        V = np.atleast_2d(np.asarray(V, dtype=np.int64))
        if self.basis is None:
            C = V[:, self.positions]
            if not np.array_equal(C[:, self.labels], V):
                raise ValueError("vector is not invariant")
            return C
        if self.rank == 0:
            if np.any(V):
                raise ValueError("vector is not invariant")
            return np.zeros((V.shape[0], 0), dtype=np.int64)
        # pivot coordinates are determined by the free ones
        C = self._free_solver.coords(V[:, self.free])
        if not np.array_equal(zl.checked_matmul(C, self.basis), V):
            raise ValueError("vector is not invariant")
        return C

    @cached_property
    def _free_solver(self) -> zl.RowBasisSolver:
        return zl.RowBasisSolver(self.basis[:, self.free])


def _sq_at(XI: np.ndarray, XJ: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """u.u at the chosen positions (2 u_i u_j off the diagonal)."""
    out = XI * XJ
    return np.where(diag, out, 2 * out)


def _prod_at(aI, aJ, bI, bJ, diag) -> np.ndarray:
    out = aI * bJ + aJ * bI
    return np.where(diag, out // 2, out)


class DecModular:
    """Dec(A) modulo each prime power of |G|, from generators evaluated at few positions."""

    def __init__(self, A: GLattice, cover: Cover | None = None, subgroup_list: list[Subgroup] | None = None):
        if not isinstance(A.group, FinAbGroup):
            cover = None  # orbit sums are only permuted when every H is normal
        elif cover is None and A.perm is not None:
            cover = identity_cover(A)
        self.lattice = A
        self.cover = cover
        self.coords = InvariantCoords(A)
        G = A.group
        r = A.rank
        pos = self.coords.positions
        I, J = sym_pairs(r)
        self.PI, self.PJ = I[pos], J[pos]
        self.diag = self.PI == self.PJ
        self.blocks: dict[int, list[np.ndarray]] = {p: [] for p in self.coords.local}
        self.generator_count = 0
        AG = invariants_basis(A)
        if AG.shape[0]:
            K, L = np.triu_indices(AG.shape[0])
            self._add(_prod_at(AG[K][:, self.PI], AG[K][:, self.PJ], AG[L][:, self.PI], AG[L][:, self.PJ], self.diag))
        for H in (subgroup_list if subgroup_list is not None else _sorted_subgroups(G)):
            if H.order < G.order:
                self._add_subgroup(H)

    def _add(self, vals: np.ndarray) -> None:
        if vals.shape[0] == 0:
            return
        self.generator_count += vals.shape[0]
        for p in self.blocks:
            self.blocks[p].append(self.coords.local_coords(vals, p))

    def _family(self, H: Subgroup):
        """Generators of A^H: orbit-sum images with their index permutations, and extras."""
        A, G = self.lattice, self.lattice.group
        reps = coset_reps(G, H)
        if self.cover is None:
            return None, None, _fixed_basis(A, H), reps
        P, proj = self.cover.P, self.cover.proj
        # the smallest point of each H-orbit names it
        _, lab = np.unique(np.min(np.asarray(P.perm)[list(H.elements)], axis=0), return_inverse=True)
        t = int(lab.max()) + 1
        ind = np.zeros((t, P.rank), dtype=np.int64)
        ind[lab, np.arange(P.rank)] = 1
        U = zl.checked_matmul(ind, np.asarray(proj).T)
        first = np.unique(lab, return_index=True)[1]
        # s u_O = u_{sO}
        perms = {s: lab[P.perm[s][first]] for s in G.elements}
        extras = np.zeros((0, A.rank), dtype=np.int64)
        if self.cover.P is not A:
            E = _fixed_basis(A, H)
            Y = zl.RowBasisSolver(E).coords(U)
            Hy = zl.hnf(Y)
            d = np.zeros(E.shape[0], dtype=np.int64)
            for row in Hy:
                j = int(np.flatnonzero(row)[0])
                d[j] = abs(int(row[j]))
            extras = E[d != 1]
        return U, perms, extras, reps

    def _add_subgroup(self, H: Subgroup) -> None:
        A, G = self.lattice, self.lattice.group
        PI, PJ, diag = self.PI, self.PJ, self.diag
        U, perms, X, reps = self._family(H)
        # the family as one array of rows, with images under each coset rep
        rows = [] if U is None else [U]
        if X.shape[0]:
            rows.append(X)
        if not rows:
            return
        Z = np.vstack(rows)
        nU = 0 if U is None else U.shape[0]
        imgI, imgJ = [], []
        for s in reps:
            parts = []
            if nU:
                parts.append(U[perms[s]])
            if X.shape[0]:
                parts.append(_images(A, s, X))
            Zs = np.vstack(parts)
            imgI.append(Zs[:, PI])
            imgJ.append(Zs[:, PJ])
        trI, trJ = sum(imgI), sum(imgJ)
        num = _sq_at(trI, trJ, diag) - sum(_sq_at(a, b, diag) for a, b in zip(imgI, imgJ))
        if np.any(num % 2):
            raise AssertionError("quadratic trace is not integral")
        self._add(num // 2)
        m = Z.shape[0]
        K, L = np.triu_indices(m, 1)
        if nU > 1 and isinstance(G, FinAbGroup):
            # pairs of orbit sums up to the action of G
            uu = (K < nU) & (L < nU)
            a, b = K[uu], L[uu]
            pid = a * nU + b
            pg = np.stack([perms[g] for g in G.elements])
            pa, pb = pg[:, a], pg[:, b]
            canon = np.min(np.minimum(pa, pb) * nU + np.maximum(pa, pb), axis=0)
            keep_uu = np.unique(canon, return_index=True)[1]
            K = np.concatenate([a[keep_uu], K[~uu]])
            L = np.concatenate([b[keep_uu], L[~uu]])
        if len(K) == 0:
            return
        for start in range(0, len(K), 4096):
            k, l = K[start:start + 4096], L[start:start + 4096]
            acc = 0
            for aI, aJ in zip(imgI, imgJ):
                acc = acc + _prod_at(aI[k], aJ[k], aI[l], aJ[l], diag)
            self._add(acc)

    @cached_property
    def _local(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        out = {}
        k = self.coords.rank
        for p, blocks in self.blocks.items():
            e = self.coords.local[p][0]
            X = np.vstack(blocks) if blocks else np.zeros((0, k), dtype=np.int64)
            out[p] = zl.local_span(X, p, e)
        return out

    def quotient(self) -> FgAbGroup:
        k = self.coords.rank
        orders = []
        for p, (H, _) in self._local.items():
            e = self.coords.local[p][0]
            vals = zl._local_snf_diag(H, p, e) if H.shape[0] else [e] * k
            orders += [p**v for v in vals if v]
        return FgAbGroup.from_cyclics(orders)

    def contains(self, V) -> np.ndarray | bool:
        """Membership in Dec of invariant S^2 vectors (rows of V)."""
        V = np.asarray(V, dtype=np.int64)
        single = V.ndim == 1
        V = np.atleast_2d(V)
        self.coords.exact_coords(V)  # raises unless invariant
        vals = V[:, self.coords.positions]
        ok = np.ones(V.shape[0], dtype=bool)
        for p, (H, pivs) in self._local.items():
            e = self.coords.local[p][0]
            ok &= zl.howell_contains(H, pivs, self.coords.local_coords(vals, p), p, e)
        return bool(ok[0]) if single else ok


DENSE_S2_LIMIT = 300


def s2_mod_dec(A: GLattice, cover: Cover | None = None, method: str = "auto") -> FgAbGroup:
    """S^2(A)^G / Dec(A), canonical.

    ``method`` is "dense", "modular" or "auto" (dense only for small S^2, or
    when G is not abelian and no permutation structure helps).
    """
    if method not in ("auto", "dense", "modular"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        small = A.rank * (A.rank + 1) // 2 <= DENSE_S2_LIMIT
        method = "dense" if small or not isinstance(A.group, FinAbGroup) else "modular"
    if method == "dense":
        return dec_generators(A).quotient()
    return DecModular(A, cover).quotient()


def flasque_cover(fr) -> Cover:
    """The cover P -> T of a flasque resolution."""
    return Cover(fr.P, np.asarray(fr.proj, dtype=np.int64))


def s2_mod_dec_flasque(fr, method: str = "auto") -> FgAbGroup:
    """S^2(T)^G / Dec(T) for the flasque lattice of a resolution."""
    return s2_mod_dec(fr.T, cover=flasque_cover(fr), method=method)


def h1_n_mod_delta(fr, check: bool = True) -> FgAbGroup:
    """H^1(G, N) / delta((T^G)^2) for 0 -> N -> S^2 P -> S^2 T -> 0 (abelian G)."""
    from .cohomres import cohomology, connecting_delta, small_resolution
    from .glattice import dec_sequence

    ses = dec_sequence(fr, check=check)
    G = fr.group
    R = small_resolution(G, 2)
    _, H1 = cohomology(R, ses.A, 1)
    if H1.group.is_trivial:
        return FgAbGroup()
    TG = invariants_basis(fr.T)
    K, L = np.triu_indices(TG.shape[0])
    rows = []
    for x in sym_product(TG[K], TG[L]):
        rows.append(list(H1.coords(connecting_delta(ses, x, R))))
    k = len(H1.moduli)
    rows += [[m if j == i else 0 for j in range(k)] for i, m in enumerate(H1.moduli)]
    return zl.cokernel(np.array(rows, dtype=np.int64), k)
