"""Free resolutions of Z over Z[G], lattice cohomology, cup products.

A resolution stores, for each degree i >= 1, the differential of every free
generator y of F_i as a list of terms (k, g, c) meaning d(y) = sum c g x_k,
together with a Z-linear contracting homotopy.  The homotopy is what makes
lifting (diagonals, comparison maps) a direct computation: for a cycle c of
positive degree, d(h(c)) = c.

Elements of F_i are dicts {(k, g): c}.  Elements of F (x) F are dicts
{(p, k1, g1, k2, g2): c}, p being the degree of the left factor.

Koszul convention: d(a (x) b) = da (x) b + (-1)^|a| a (x) db.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import zlinalg as zl
from .glattice import GLattice, LatticeMap, LatticeSES, group_generators, restrict, trivial_lattice
from .groups import FinAbGroup, FiniteGroup, Subgroup, TableGroup, subgroups
from .zlinalg import FgAbGroup

BAR_COST_LIMIT = 200_000  # generators in the top degree of a bar resolution


def _add(acc: dict, key, c: int) -> None:
    v = acc.get(key, 0) + c
    if v:
        acc[key] = v
    else:
        acc.pop(key, None)


# ---------------------------------------------------------------------------
# resolutions


class Resolution:
    group: FiniteGroup
    max_deg: int
    ranks: list[int]

    def diff(self, i: int) -> list[list[tuple[int, int, int]]]:
        """d on generators of F_i: list over y of [(k, g, c), ...]."""
        raise NotImplementedError

    def homotopy_basis(self, i: int, k: int, g: int) -> dict:
        """h(g x_k) for x_k a generator of F_i; an element of F_{i+1}."""
        raise NotImplementedError

    # generic element operations -----------------------------------------

    def act(self, g: int, elem: dict) -> dict:
        T = self.group.mul_table
        return {(k, int(T[g, h])): c for (k, h), c in elem.items()}

    def d(self, i: int, elem: dict) -> dict:
        T = self.group.mul_table
        D = self.diff(i)
        out: dict = {}
        for (k, h), c in elem.items():
            for (k2, g2, c2) in D[k]:
                _add(out, (k2, int(T[h, g2])), c * c2)
        return out

    def h(self, i: int, elem: dict) -> dict:
        out: dict = {}
        cache = self._hcache.setdefault(i, {})
        for (k, g), c in elem.items():
            img = cache.get((k, g))
            if img is None:
                img = self.homotopy_basis(i, k, g)
                cache[(k, g)] = img
            for key, v in img.items():
                _add(out, key, c * v)
        return out

    @cached_property
    def _hcache(self) -> dict:
        return {}

    def epsilon(self, elem: dict) -> int:
        return sum(elem.values())

    @property
    def identity(self) -> int:
        return self.group.identity

    def check_complex(self) -> bool:
        """d d = 0 and d h + h d = 1 on every generator (the exactness certificate)."""
        G = self.group
        for i in range(1, self.max_deg + 1):
            for y in range(self.ranks[i]):
                gen = {(y, G.identity): 1}
                if i >= 2 and self.d(i - 1, self.d(i, gen)):
                    return False
                if i == 1 and self.epsilon(self.d(1, gen)) != 0:
                    return False
        for i in range(0, self.max_deg):
            for k in range(self.ranks[i]):
                for g in G.elements:
                    e = {(k, g): 1}
                    lhs = self.d(i + 1, self.h(i, e))
                    if i >= 1:
                        for key, c in self.h(i - 1, self.d(i, e)).items():
                            _add(lhs, key, c)
                    else:
                        _add(lhs, (0, G.identity), self.epsilon(e))
                    if lhs != e:
                        return False
        return True

    def verify_exact(self) -> bool:
        """Exactness of F_{max-1} -> ... -> F_0 -> Z by ranks and saturation.

        At each F_i: rank d_i + rank d_{i+1} = rank_Z F_i and d_{i+1} has
        saturated image (all invariant factors 1).
        """
        n = self.group.order
        ranks = [0]  # rank of eps counted below
        for i in range(1, self.max_deg + 1):
            M = self.z_matrix(i)
            fs = zl.invariant_factors(zl.SparseMatrix.from_scipy(M.T)) if M.nnz else []
            if any(f != 1 for f in fs):
                return False
            ranks.append(len(fs))
        if ranks[1] != n - 1:  # image of d_1 is the augmentation ideal
            return False
        for i in range(1, self.max_deg):
            if ranks[i] + ranks[i + 1] != self.ranks[i] * n:
                return False
        return True

    def z_matrix(self, i: int) -> sp.csr_matrix:
        """d_i as a Z-matrix on the bases g x_k (index k*|G| + g)."""
        n = self.group.order
        T = self.group.mul_table
        rows, cols, vals = [], [], []
        for y, terms in enumerate(self.diff(i)):
            for (k, g, c) in terms:
                for h in range(n):
                    rows.append(k * n + T[h, g])
                    cols.append(y * n + h)
                    vals.append(c)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.ranks[i - 1] * n, self.ranks[i] * n))


class PeriodicResolution(Resolution):
    """... -> Z[C_n] -N-> Z[C_n] -(t-1)-> Z[C_n] -> Z for the cyclic group of order n."""

    def __init__(self, n: int, max_deg: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.max_deg = max_deg
        self.group = FinAbGroup((n,)) if n > 1 else FinAbGroup(())
        self.ranks = [1] + [1 if n > 1 else 0] * max_deg

    def diff(self, i):
        if self.n == 1:
            return []
        if i % 2 == 1:
            return [[(0, 1 % self.n, 1), (0, 0, -1)]]
        return [[(0, a, 1) for a in range(self.n)]]

    def homotopy_basis(self, i, k, g):
        n = self.n
        if n == 1 or i >= self.max_deg:
            return {}
        if i % 2 == 0:
            return {(0, c): 1 for c in range(g)}
        return {(0, 0): 1} if g == n - 1 else {}


def _product_group(G1: FiniteGroup, G2: FiniteGroup) -> FiniteGroup:
    if isinstance(G1, FinAbGroup) and isinstance(G2, FinAbGroup):
        f = G1.invariant_factors + G2.invariant_factors
        if all(f[i + 1] % f[i] == 0 for i in range(len(f) - 1)):
            return FinAbGroup(f)
    n1, n2 = G1.order, G2.order
    T1, T2 = G1.mul_table, G2.mul_table
    a = np.arange(n1 * n2)
    g1, g2 = a // n2, a % n2
    T = T1[g1[:, None], g1[None, :]] * n2 + T2[g2[:, None], g2[None, :]]
    return TableGroup(T, identity=G1.identity * n2 + G2.identity, name=f"{G1!r}x{G2!r}")


class TensorResolution(Resolution):
    """Total complex of R1 (x) R2, a resolution over G1 x G2."""

    def __init__(self, R1: Resolution, R2: Resolution, max_deg: int | None = None):
        self.R1, self.R2 = R1, R2
        self.max_deg = min(R1.max_deg, R2.max_deg) if max_deg is None else max_deg
        self.group = _product_group(R1.group, R2.group)
        self.n2 = R2.group.order
        self.gens: list[list[tuple[int, int, int]]] = []
        self.index: list[dict] = []
        for d in range(self.max_deg + 1):
            lst = [(p, k1, k2) for p in range(d + 1)
                   for k1 in range(R1.ranks[p] if p <= R1.max_deg else 0)
                   for k2 in range(R2.ranks[d - p] if d - p <= R2.max_deg else 0)]
            self.gens.append(lst)
            self.index.append({t: i for i, t in enumerate(lst)})
        self.ranks = [len(l) for l in self.gens]
        self._diffs: dict = {}

    def split(self, g: int) -> tuple[int, int]:
        return g // self.n2, g % self.n2

    def join(self, g1: int, g2: int) -> int:
        return g1 * self.n2 + g2

    def diff(self, i):
        if i in self._diffs:
            return self._diffs[i]
        e1, e2 = self.R1.identity, self.R2.identity
        out = []
        for (p, k1, k2) in self.gens[i]:
            terms: dict = {}
            q = i - p
            if p >= 1:
                for (k, g, c) in self.R1.diff(p)[k1]:
                    _add(terms, (self.index[i - 1][(p - 1, k, k2)], self.join(g, e2)), c)
            if q >= 1:
                s = -1 if p % 2 else 1
                for (k, g, c) in self.R2.diff(q)[k2]:
                    _add(terms, (self.index[i - 1][(p, k1, k)], self.join(e1, g)), s * c)
            out.append([(k, g, c) for (k, g), c in terms.items()])
        self._diffs[i] = out
        return out

    def homotopy_basis(self, i, k, g):
        if i >= self.max_deg:
            return {}
        p, k1, k2 = self.gens[i][k]
        q = i - p
        g1, g2 = self.split(g)
        out: dict = {}
        for (kk, gg), c in self.R1.h(p, {(k1, g1): 1}).items():
            _add(out, (self.index[i + 1][(p + 1, kk, k2)], self.join(gg, g2)), c)
        if p == 0:
            for (kk, gg), c in self.R2.h(q, {(k2, g2): 1}).items():
                _add(out, (self.index[i + 1][(0, 0, kk)], self.join(self.R1.identity, gg)), c)
        return out


class BarResolution(Resolution):
    """Normalized (default) or unnormalized bar resolution."""

    def __init__(self, G: FiniteGroup, max_deg: int, normalized: bool = True):
        self.group = G
        self.max_deg = max_deg
        self.normalized = normalized
        self.letters = [g for g in G.elements if not (normalized and g == G.identity)]
        self.pos = {g: i for i, g in enumerate(self.letters)}
        b = len(self.letters)
        if b ** max_deg > BAR_COST_LIMIT:
            raise ValueError(f"bar resolution too large: {b}^{max_deg} generators")
        self.base = b
        self.ranks = [b**d for d in range(max_deg + 1)]
        self._diffs: dict = {}

    def word(self, d: int, k: int) -> tuple[int, ...]:
        out = []
        for _ in range(d):
            k, r = divmod(k, self.base)
            out.append(self.letters[r])
        return tuple(reversed(out))

    def code(self, word: Sequence[int]) -> int | None:
        k = 0
        for g in word:
            if g not in self.pos:
                return None
            k = k * self.base + self.pos[g]
        return k

    def diff(self, i):
        if i in self._diffs:
            return self._diffs[i]
        G = self.group
        e = G.identity
        out = []
        for y in range(self.ranks[i]):
            w = self.word(i, y)
            terms: dict = {}
            k = self.code(w[1:])
            if k is not None:
                _add(terms, (k, w[0]), 1)
            for j in range(i - 1):
                w2 = w[:j] + (G.mul(w[j], w[j + 1]),) + w[j + 2:]
                k = self.code(w2)
                if k is not None:
                    _add(terms, (k, e), -1 if (j + 1) % 2 else 1)
            k = self.code(w[:-1])
            if k is not None:
                _add(terms, (k, e), -1 if i % 2 else 1)
            out.append([(k, g, c) for (k, g), c in terms.items()])
        self._diffs[i] = out
        return out

    def homotopy_basis(self, i, k, g):
        if i >= self.max_deg:
            return {}
        c = self.code((g,) + self.word(i, k))
        return {} if c is None else {(c, self.group.identity): 1}


_cache_lock = threading.Lock()
_res_cache: dict = {}


def periodic_resolution(n: int, max_deg: int) -> PeriodicResolution:
    return PeriodicResolution(n, max_deg)


def tensor_resolution(R1: Resolution, R2: Resolution) -> TensorResolution:
    return TensorResolution(R1, R2)


def bar_resolution(G: FiniteGroup, max_deg: int, normalized: bool = True) -> BarResolution:
    return BarResolution(G, max_deg, normalized)


def small_resolution(G: FinAbGroup, max_deg: int) -> Resolution:
    """Tensor product of periodic resolutions of the cyclic factors (cached)."""
    key = ("small", G.invariant_factors, max_deg)
    with _cache_lock:
        if key in _res_cache:
            return _res_cache[key]
    if G.rank == 0:
        R: Resolution = PeriodicResolution(1, max_deg)
    else:
        R = PeriodicResolution(G.invariant_factors[0], max_deg)
        for n in G.invariant_factors[1:]:
            R = TensorResolution(R, PeriodicResolution(n, max_deg))
    if not R.verify_exact():
        raise RuntimeError(f"resolution for {G!r} failed the exactness check")
    with _cache_lock:
        _res_cache.setdefault(key, R)
        return _res_cache[key]


def default_resolution(G: FiniteGroup, max_deg: int) -> Resolution:
    if isinstance(G, FinAbGroup):
        return small_resolution(G, max_deg)
    return bar_resolution(G, max_deg)


# ---------------------------------------------------------------------------
# cochains with lattice coefficients


def _lattice_terms(L: GLattice, g: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonzero entries (row, col, val) of the matrix of g on L."""
    if L.perm is not None:
        return L.perm[g], np.arange(L.rank), np.ones(L.rank, dtype=np.int64)
    M = np.asarray(L.mats[g])
    r, c = np.nonzero(M)
    return r, c, M[r, c].astype(np.int64)


def cochain_matrix(R: Resolution, L: GLattice, i: int) -> sp.csr_matrix:
    """delta^i : Hom_G(F_i, L) -> Hom_G(F_{i+1}, L) as a matrix on columns.

    A cochain is the concatenation of its values on the generators of F_i.
    (delta f)(y) = f(d y) = sum c A_g f(x_k).
    """
    r = L.rank
    if i + 1 > R.max_deg:
        raise ValueError(f"degree {i + 1} exceeds the resolution length {R.max_deg}")
    terms_cache: dict = {}
    rows, cols, vals = [], [], []
    for y, terms in enumerate(R.diff(i + 1)):
        for (k, g, c) in terms:
            t = terms_cache.get(g)
            if t is None:
                t = terms_cache[g] = _lattice_terms(L, g)
            a, b, v = t
            rows.append(y * r + a)
            cols.append(k * r + b)
            vals.append(c * v)
    shape = (R.ranks[i + 1] * r, R.ranks[i] * r)
    if not rows:
        return sp.csr_matrix(shape, dtype=np.int64)
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    M = M.tocsr()
    M.sum_duplicates()
    M.eliminate_zeros()
    return M


# ---------------------------------------------------------------------------
# cohomology groups and classes


@dataclass
class CohomClass:
    degree: int
    lattice: GLattice
    cocycle: np.ndarray
    resolution: Resolution

    def __add__(self, other: "CohomClass") -> "CohomClass":
        return CohomClass(self.degree, self.lattice, self.cocycle + other.cocycle, self.resolution)

    def __rmul__(self, c: int) -> "CohomClass":
        return CohomClass(self.degree, self.lattice, c * self.cocycle, self.resolution)

    def value(self, k: int) -> np.ndarray:
        r = self.lattice.rank
        return self.cocycle[k * r:(k + 1) * r]

    def is_cocycle(self) -> bool:
        D = cochain_matrix(self.resolution, self.lattice, self.degree)
        return not np.any(D @ self.cocycle.astype(np.int64))


@dataclass
class CohomologyGroup:
    """H^i(G, L) with canonical generators.

    ``coords(z)`` expresses a cocycle in the generators: torsion coordinates
    reduced modulo their orders, so class equality is tuple equality.
    """

    resolution: Resolution
    lattice: GLattice
    degree: int
    group: FgAbGroup
    generators: list[CohomClass]
    moduli: list[int]
    _kernel: np.ndarray = field(repr=False)
    _right: np.ndarray = field(repr=False)
    _positions: list[int] = field(repr=False)

    @cached_property
    def _solver(self) -> zl.RowBasisSolver:
        return zl.RowBasisSolver(self._kernel)

    def coords(self, z) -> tuple[int, ...]:
        z = np.asarray(z.cocycle if isinstance(z, CohomClass) else z)
        if self._kernel.shape[0] == 0:
            if np.any(z):
                raise ValueError("not a cocycle")
            return ()
        c = self._solver.coords(z[None, :])  # raises if z is not a cocycle
        y = zl.checked_matmul(c, self._right)[0]
        out = []
        for pos, m in zip(self._positions, self.moduli):
            v = int(y[pos])
            out.append(v % m if m else v)
        return tuple(out)

    def is_zero(self, z) -> bool:
        return not any(self.coords(z))


def _honest_cohomology(R: Resolution, L: GLattice, i: int) -> CohomologyGroup:
    r = L.rank
    n_i = R.ranks[i] * r
    if i + 1 <= R.max_deg:
        D = cochain_matrix(R, L, i)
        K = zl.kernel_basis(D.T.toarray()) if D.shape[0] else np.eye(n_i, dtype=np.int64)
    else:
        raise ValueError(f"need degree {i + 1} of the resolution for H^{i}")
    if i >= 1:
        Dm = cochain_matrix(R, L, i - 1)
        Im = Dm.T.toarray()  # rows = images of basis cochains
        Im = Im[np.any(Im != 0, axis=1)]
    else:
        Im = np.zeros((0, n_i), dtype=np.int64)
    k = K.shape[0]
    if k == 0:
        return CohomologyGroup(R, L, i, FgAbGroup(), [], [], K, np.zeros((0, 0), dtype=np.int64), [])
    C = zl.RowBasisSolver(K).coords(Im) if Im.shape[0] else np.zeros((0, k), dtype=np.int64)
    if C.shape[0]:
        S = zl.smith_normal_form(C)
        d = list(S.d) + [0] * (k - len(S.d))
        Rm, Rinv = S.right, S.right_inverse
    else:
        d = [0] * k
        Rm = Rinv = np.eye(k, dtype=np.int64)
    d = [abs(x) for x in d]
    tors = [j for j in range(k) if d[j] > 1]
    free = [j for j in range(k) if d[j] == 0]
    positions = tors + free
    moduli = [d[j] for j in tors] + [0] * len(free)
    gens = [CohomClass(i, L, np.asarray(zl.checked_matmul(np.asarray(Rinv)[j:j + 1], K))[0], R)
            for j in positions]
    group = FgAbGroup(len(free), tuple(d[j] for j in tors))
    return CohomologyGroup(R, L, i, group, gens, moduli, K, Rm, positions)


def cohomology(R: Resolution, L: GLattice, i: int, generators: bool = True):
    """H^i(G, L) computed on the resolution R.

    With ``generators`` the full kernel/image computation is done and a
    ``CohomologyGroup`` (with cocycle generators) is returned as the second
    element; otherwise only the group is computed, for i >= 1 as the torsion
    of coker(delta^(i-1)), which is valid since H^i is killed by |G|.
    """
    if i < 0 or i > R.max_deg - (1 if generators else 0):
        raise ValueError(f"degree {i} out of range for a resolution of length {R.max_deg}")
    if generators:
        H = _honest_cohomology(R, L, i)
        return H.group, H
    return cohomology_group(R, L, i), None


def cohomology_group(R: Resolution, L: GLattice, i: int) -> FgAbGroup:
    if i == 0:
        from .glattice import invariants_basis

        return FgAbGroup(invariants_basis(L).shape[0])
    D = cochain_matrix(R, L, i - 1)
    return zl.torsion_of_cokernel(zl.SparseMatrix.from_scipy(D.T), R.group.order)


def h1_vanishes_on_subgroups(L: GLattice) -> bool:
    """Is H^1(H, L) = 0 for every subgroup H of the group of L?"""
    G = L.group
    for H in subgroups(G):
        if H.order == 1:
            continue
        LH = restrict(L, H)
        R = default_resolution(LH.group, 2)
        if not cohomology_group(R, LH, 1).is_trivial:
            return False
    return True


# ---------------------------------------------------------------------------
# Tate cohomology in degrees -1 and 0


def tate_low(G: FiniteGroup, L: GLattice, i: int) -> FgAbGroup:
    from .glattice import invariants_basis

    N = sum(np.asarray(L.mats[g], dtype=np.int64) for g in G.elements)
    if i == 0:
        inv = invariants_basis(L)
        if inv.shape[0] == 0:
            return FgAbGroup()
        return zl.subquotient(inv, N.T)
    if i == -1:
        K = zl.kernel_basis(N.T)
        if K.shape[0] == 0:
            return FgAbGroup()
        I = np.eye(L.rank, dtype=np.int64)
        rels = np.vstack([(np.asarray(L.mats[g]) - I).T for g in G.elements])
        return zl.subquotient(K, rels)
    raise ValueError("only Tate degrees -1 and 0 are supported")


# ---------------------------------------------------------------------------
# chain maps between resolutions, diagonals


class ChainMap:
    """Equivariant chain map F -> F' over a group homomorphism, lifting id_Z.

    ``hom[g]`` is the image in the target group of a source element.
    Built degree by degree as phi(x) = h'(phi(dx)).
    """

    def __init__(self, source: Resolution, target: Resolution, max_deg: int, hom: np.ndarray | None = None):
        self.source, self.target = source, target
        self.hom = np.arange(source.group.order) if hom is None else np.asarray(hom)
        self.max_deg = max_deg
        self.images: list[list[dict]] = [[{(0, target.identity): 1}]]
        for i in range(1, max_deg + 1):
            imgs = []
            for terms in source.diff(i):
                acc: dict = {}
                for (k, g, c) in terms:
                    for key, v in target.act(int(self.hom[g]), self.images[i - 1][k]).items():
                        _add(acc, key, c * v)
                imgs.append(target.h(i - 1, acc))
            self.images.append(imgs)

    def pullback(self, u: CohomClass, L_source: GLattice | None = None) -> np.ndarray:
        """Cocycle u o phi on the source resolution (coefficients viewed over the source group)."""
        L = u.lattice
        r = L.rank
        i = u.degree
        out = np.zeros(self.source.ranks[i] * r, dtype=object)
        for y, img in enumerate(self.images[i]):
            acc = np.zeros(r, dtype=object)
            for (k, g), c in img.items():
                acc = acc + c * np.asarray(L.act(g, u.value(k)[:, None]))[:, 0]
            out[y * r:(y + 1) * r] = acc
        return np.asarray(zl.as_matrix(out[None, :]))[0]


class DiagonalApprox:
    """Delta: F -> F (x) F lifting the identity, built with the contraction of F (x) F."""

    def __init__(self, R: Resolution, max_deg: int = 4):
        if max_deg > R.max_deg:
            raise ValueError("resolution too short for the requested diagonal")
        self.R = R
        self.max_deg = max_deg
        e = R.identity
        self.components: list[list[dict]] = [[{(0, 0, e, 0, e): 1}]]
        for n in range(1, max_deg + 1):
            comp = []
            for terms in R.diff(n):
                acc: dict = {}
                for (k, g, c) in terms:
                    for key, v in self._act(g, self.components[n - 1][k]).items():
                        _add(acc, key, c * v)
                comp.append(self._h(n - 1, acc))
            self.components.append(comp)

    def _act(self, g: int, elem: dict) -> dict:
        T = self.R.group.mul_table
        return {(p, k1, int(T[g, g1]), k2, int(T[g, g2])): c for (p, k1, g1, k2, g2), c in elem.items()}

    def _h(self, n: int, elem: dict) -> dict:
        """Contraction h (x) 1 + eta eps (x) h of F (x) F in total degree n."""
        R = self.R
        e = R.identity
        out: dict = {}
        for (p, k1, g1, k2, g2), c in elem.items():
            for (kk, gg), v in R.h(p, {(k1, g1): 1}).items():
                _add(out, (p + 1, kk, gg, k2, g2), c * v)
            if p == 0:
                for (kk, gg), v in R.h(n, {(k2, g2): 1}).items():
                    _add(out, (0, 0, e, kk, gg), c * v)
        return out

    def d_tensor(self, n: int, elem: dict) -> dict:
        R = self.R
        out: dict = {}
        for (p, k1, g1, k2, g2), c in elem.items():
            q = n - p
            if p >= 1:
                for (kk, gg), v in R.d(p, {(k1, g1): 1}).items():
                    _add(out, (p - 1, kk, gg, k2, g2), c * v)
            if q >= 1:
                s = -1 if p % 2 else 1
                for (kk, gg), v in R.d(q, {(k2, g2): 1}).items():
                    _add(out, (p, k1, g1, kk, gg), s * c * v)
        return out

    def is_chain_map(self) -> bool:
        for n in range(1, self.max_deg + 1):
            for y, terms in enumerate(self.R.diff(n)):
                lhs = self.d_tensor(n, self.components[n][y])
                rhs: dict = {}
                for (k, g, c) in terms:
                    for key, v in self._act(g, self.components[n - 1][k]).items():
                        _add(rhs, key, c * v)
                if lhs != rhs:
                    return False
        return True

    def collapsed(self, n: int) -> list[dict]:
        """For trivial coefficients: per generator, {(p, k1, k2): sum of coefficients}."""
        out = []
        for comp in self.components[n]:
            acc: dict = {}
            for (p, k1, g1, k2, g2), c in comp.items():
                _add(acc, (p, k1, k2), c)
            out.append(acc)
        return out


def diagonal_approx(R: Resolution, max_deg: int = 4) -> DiagonalApprox:
    return DiagonalApprox(R, max_deg)


class AlexanderWhitney:
    """The standard diagonal of the bar resolution."""

    def __init__(self, R: BarResolution, max_deg: int = 4):
        self.R = R
        self.max_deg = max_deg

    def terms(self, n: int, y: int, p: int):
        R = self.R
        G = R.group
        w = R.word(n, y)
        left = R.code(w[:p])
        right = R.code(w[p:])
        if left is None or right is None:
            return []
        g = G.identity
        for x in w[:p]:
            g = G.mul(g, x)
        return [(left, G.identity, right, g, 1)]


def collapsed_diagonal(R: Resolution, n: int) -> list[dict]:
    """Collapsed diagonal {(p, k1, k2): c} per generator of F_n.

    For tensor resolutions it is assembled from the factors: the diagonal of
    F1 (x) F2 is the shuffle of the factor diagonals, with sign (-1)^{|x''||y'|}.
    """
    table = R.__dict__.get("_collapsed")
    if table is None:
        table = _collapsed_table(R)
        R.__dict__["_collapsed"] = table
    return table[n]


def _collapsed_table(R: Resolution) -> list[list[dict]]:
    top = min(R.max_deg, 4)
    if not isinstance(R, TensorResolution):
        D = DiagonalApprox(R, top)
        return [D.collapsed(m) for m in range(top + 1)]
    A = [collapsed_diagonal(R.R1, m) for m in range(top + 1)]
    B = [collapsed_diagonal(R.R2, m) for m in range(top + 1)]
    table = []
    for n in range(top + 1):
        out = []
        for (pa, k1, k2) in R.gens[n]:
            qa = n - pa
            acc: dict = {}
            for (p1, a1, a2), c1 in A[pa][k1].items():
                for (p2, b1, b2), c2 in B[qa][k2].items():
                    s = -1 if ((pa - p1) * p2) % 2 else 1
                    key = (p1 + p2, R.index[p1 + p2][(p1, a1, b1)], R.index[n - p1 - p2][(pa - p1, a2, b2)])
                    _add(acc, key, s * c1 * c2)
            out.append(acc)
        table.append(out)
    return table


def _sign(p: int, q: int) -> int:
    return -1 if (p * q) % 2 else 1


def cup(x: CohomClass, y: CohomClass, pairing: LatticeMap | None = None,
        diagonal: DiagonalApprox | None = None) -> CohomClass:
    """x cup y with (u cup v)(z) = (-1)^{pq} (u (x) v)(Delta z), pushed through ``pairing``.

    Without a pairing both coefficient lattices must be trivial of rank one
    and the product is taken in Z.
    """
    R = x.resolution
    if y.resolution is not R:
        raise ValueError("classes live on different resolutions")
    p, q = x.degree, y.degree
    n = p + q
    L1, L2 = x.lattice, y.lattice
    if pairing is None:
        if not (L1.rank == 1 and L2.rank == 1 and L1.perm is not None and L2.perm is not None):
            raise ValueError("a pairing is required for nontrivial coefficients")
        target = L1
        out = np.zeros(R.ranks[n], dtype=object)
        coll = diagonal.collapsed(n) if diagonal is not None else collapsed_diagonal(R, n)
        for z, comp in enumerate(coll):
            acc = 0
            for (pp, k1, k2), c in comp.items():
                if pp == p:
                    acc += c * int(x.cocycle[k1]) * int(y.cocycle[k2])
            out[z] = _sign(p, q) * acc
        return CohomClass(n, target, np.asarray(zl.as_matrix(out[None, :]))[0], R)
    if diagonal is None:
        diagonal = DiagonalApprox(R, n)
    target = pairing.target
    r = target.rank
    out = np.zeros(R.ranks[n] * r, dtype=object)
    P = pairing.matrix.astype(object)
    for z, comp in enumerate(diagonal.components[n]):
        acc = np.zeros(r, dtype=object)
        for (pp, k1, g1, k2, g2), c in comp.items():
            if pp != p:
                continue
            a = np.asarray(L1.act(g1, x.value(k1)[:, None]))[:, 0].astype(object)
            b = np.asarray(L2.act(g2, y.value(k2)[:, None]))[:, 0].astype(object)
            acc = acc + c * (P @ np.outer(a, b).reshape(-1))
        out[z * r:(z + 1) * r] = _sign(p, q) * acc
    return CohomClass(n, target, np.asarray(zl.as_matrix(out[None, :]))[0], R)


def bar_cup(x: CohomClass, y: CohomClass, pairing: LatticeMap | None = None) -> CohomClass:
    """Alexander-Whitney cup on a bar resolution, same sign convention as ``cup``."""
    R = x.resolution
    if not isinstance(R, BarResolution):
        raise ValueError("bar_cup needs a bar resolution")
    p, q = x.degree, y.degree
    n = p + q
    AW = AlexanderWhitney(R, n)
    L1, L2 = x.lattice, y.lattice
    target = pairing.target if pairing is not None else L1
    r = target.rank
    out = np.zeros(R.ranks[n] * r, dtype=object)
    P = pairing.matrix.astype(object) if pairing is not None else None
    for z in range(R.ranks[n]):
        acc = np.zeros(r, dtype=object)
        for (k1, g1, k2, g2, c) in AW.terms(n, z, p):
            a = np.asarray(L1.act(g1, x.value(k1)[:, None]))[:, 0].astype(object)
            b = np.asarray(L2.act(g2, y.value(k2)[:, None]))[:, 0].astype(object)
            if P is None:
                acc = acc + c * a * b
            else:
                acc = acc + c * (P @ np.outer(a, b).reshape(-1))
        out[z * r:(z + 1) * r] = _sign(p, q) * acc
    return CohomClass(n, target, np.asarray(zl.as_matrix(out[None, :]))[0], R)


# ---------------------------------------------------------------------------
# the cokernel of H^2 x H^2 -> H^4 with trivial coefficients


def cup_coker_2_2_4(G: FinAbGroup) -> FgAbGroup:
    """H^4(G,Z) modulo the span of all products of H^2 generators."""
    return cup_coker_on(small_resolution(G, 5))


def cup_coker_on(R: Resolution) -> FgAbGroup:
    """The same cokernel computed on an arbitrary resolution of length >= 5."""
    Z = trivial_lattice(R.group)
    _, H2 = cohomology(R, Z, 2)
    _, H4 = cohomology(R, Z, 4)
    if H4.group.is_trivial:
        return FgAbGroup()
    k = len(H4.moduli)
    rows = [list(H4.coords(cup(a, b))) for a in H2.generators for b in H2.generators]
    rows += [[m if j == i else 0 for j in range(k)] for i, m in enumerate(H4.moduli)]
    return zl.cokernel(np.array(rows, dtype=np.int64), k)


# ---------------------------------------------------------------------------
# connecting homomorphism H^0(G, C) -> H^1(G, A)


def connecting_delta(ses: LatticeSES, x: np.ndarray, R: Resolution, lift: np.ndarray | None = None) -> CohomClass:
    """delta(x) for x in C^G: lift to B, the cocycle y -> (d y) . lift lies in A."""
    C, B, A = ses.C, ses.B, ses.A
    x = np.asarray(x)
    for s in C.generators:
        if not np.array_equal(np.asarray(C.act(s, x[:, None]))[:, 0], x):
            raise ValueError("x is not invariant")
    if lift is None:
        lift = _preimage(ses.p.matrix, x)
    lift = np.asarray(lift)
    vals = []
    for terms in R.diff(1):
        acc = np.zeros(B.rank, dtype=object)
        for (k, g, c) in terms:
            acc = acc + c * np.asarray(B.act(g, lift[:, None]))[:, 0].astype(object)
        vals.append(acc)
    V = zl.as_matrix(np.array(vals, dtype=object).reshape(len(vals), B.rank))
    coords = zl.RowBasisSolver(ses.i.matrix.T).coords(V)
    return CohomClass(1, A, np.asarray(zl.as_matrix(np.asarray(coords).reshape(1, -1)))[0], R)


def _preimage(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Some integer v with P v = x (P surjective)."""
    S = zl.smith_normal_form(P)
    y = zl.checked_matmul(S.left, x[:, None])[:, 0]
    d = S.d
    z = np.zeros(P.shape[1], dtype=object)
    for j, dj in enumerate(d):
        if dj == 0:
            if y[j]:
                raise ValueError("not in the image")
            continue
        if int(y[j]) % dj:
            raise ValueError("not in the image")
        z[j] = int(y[j]) // dj
    v = zl.checked_matmul(S.right, zl.as_matrix(z[:, None]))[:, 0]
    return np.asarray(zl.as_matrix(v[None, :]))[0]
