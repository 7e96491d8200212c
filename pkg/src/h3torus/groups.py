"""Finite groups: abelian groups by invariant factors, small groups by table.

Both kinds expose the same minimal interface used by the lattice code:
elements are the integers ``0..order-1``, ``mul_table[a, b]`` is the index
of ``a*b``, ``inverse[a]`` the index of ``a^-1`` and ``identity`` the index
of the neutral element.  For abelian groups element ``k`` is the k-th tuple
in lexicographic order, so comparing indices is comparing tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, reduce
from math import gcd
from typing import Sequence

import numpy as np

from .zlinalg import FgAbGroup, invariant_factors_of_cyclics

MAX_ABELIAN_SUBGROUP_ORDER = 512
MAX_TABLE_SUBGROUP_ORDER = 24


class FiniteGroup:
    order: int
    identity: int

    @property
    def elements(self) -> range:
        return range(self.order)

    @cached_property
    def mul_table(self) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def inverse(self) -> np.ndarray:
        T = self.mul_table
        inv = np.empty(self.order, dtype=np.int64)
        for a in range(self.order):
            inv[a] = int(np.flatnonzero(T[a] == self.identity)[0])
        return inv

    def mul(self, a: int, b: int) -> int:
        return int(self.mul_table[a, b])

    @cached_property
    def is_abelian(self) -> bool:
        T = self.mul_table
        return bool(np.array_equal(T, T.T))

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != self.identity:
            x = self.mul(x, a)
            k += 1
        return k

    def generated(self, gens: Sequence[int]) -> tuple[int, ...]:
        """Elements of the subgroup generated by gens, sorted."""
        seen = {self.identity}
        frontier = [self.identity]
        gens = [int(g) for g in gens]
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = self.mul(x, g)
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return tuple(sorted(seen))

    def label(self, a: int):
        return a


@dataclass(frozen=True, eq=False)
class FinAbGroup(FiniteGroup):
    """Finite abelian group Z/n1 + ... + Z/nm with n1 | n2 | ... | nm."""

    invariant_factors: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(x) for x in self.invariant_factors)
        object.__setattr__(self, "invariant_factors", t)
        if any(x < 2 for x in t):
            raise ValueError(f"invariant factors must be >= 2, got {t}")
        if any(t[i + 1] % t[i] for i in range(len(t) - 1)):
            raise ValueError(f"{t} is not a divisibility chain")

    def __eq__(self, other):
        return isinstance(other, FinAbGroup) and self.invariant_factors == other.invariant_factors

    def __hash__(self):
        return hash(("FinAbGroup", self.invariant_factors))

    def __repr__(self):
        return f"FinAbGroup{list(self.invariant_factors)}"

    @property
    def order(self) -> int:
        return reduce(lambda a, b: a * b, self.invariant_factors, 1)

    @property
    def identity(self) -> int:
        return 0

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    @property
    def exponent(self) -> int:
        return self.invariant_factors[-1] if self.invariant_factors else 1

    @cached_property
    def _strides(self) -> np.ndarray:
        n = self.invariant_factors
        s = [1] * len(n)
        for i in range(len(n) - 2, -1, -1):
            s[i] = s[i + 1] * n[i + 1]
        return np.array(s, dtype=np.int64)

    @cached_property
    def tuples(self) -> np.ndarray:
        """order x rank array; row k is the tuple of element k."""
        if not self.invariant_factors:
            return np.zeros((1, 0), dtype=np.int64)
        return np.array(list(itertools.product(*[range(n) for n in self.invariant_factors])),
                        dtype=np.int64)

    def index(self, t: Sequence[int]) -> int:
        n = self.invariant_factors
        return int(sum((int(a) % m) * s for a, m, s in zip(t, n, self._strides)))

    def element(self, k: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.tuples[k])

    def label(self, a: int):
        return self.element(a)

    @cached_property
    def mul_table(self) -> np.ndarray:
        T = self.tuples
        n = np.array(self.invariant_factors, dtype=np.int64)
        S = (T[:, None, :] + T[None, :, :]) % n
        return (S * self._strides).sum(axis=-1).astype(np.int64)

    @cached_property
    def inverse(self) -> np.ndarray:
        n = np.array(self.invariant_factors, dtype=np.int64)
        return ((-self.tuples) % n * self._strides).sum(axis=-1).astype(np.int64)

    @property
    def is_abelian(self) -> bool:
        return True

    def generators(self) -> list[int]:
        """The standard basis elements e_1, ..., e_m."""
        out = []
        for i in range(self.rank):
            t = [0] * self.rank
            t[i] = 1
            out.append(self.index(t))
        return out

    def power(self, a: int, k: int) -> int:
        n = self.invariant_factors
        return self.index([(k * x) % m for x, m in zip(self.element(a), n)])


def canonicalize_abelian(factors: Sequence[int]) -> FinAbGroup:
    factors = [int(f) for f in factors]
    if any(f < 2 for f in factors):
        raise ValueError(f"cyclic orders must be >= 2, got {factors}")
    _, tors = invariant_factors_of_cyclics(factors)
    return FinAbGroup(tors)


def parse_group(text: str) -> FinAbGroup:
    """Parse a comma-separated list such as "3,9"."""
    s = text.strip()
    if s in ("", "1", "trivial"):
        return FinAbGroup(())
    try:
        parts = [int(x) for x in s.split(",")]
    except ValueError as exc:
        raise ValueError(f"bad group string {text!r}") from exc
    return canonicalize_abelian(parts)


def abelian_groups_of_order(n: int, max_factors: int | None = None) -> list[FinAbGroup]:
    """All abelian groups of order n, up to isomorphism."""
    from .zlinalg import _factor

    per_prime = []
    for p, e in sorted(_factor(n).items()):
        per_prime.append([[p**k for k in part] for part in _partitions(e)])
    out = []
    for combo in itertools.product(*per_prime):
        G = canonicalize_abelian([q for part in combo for q in part]) if n > 1 else FinAbGroup(())
        if max_factors is None or G.rank <= max_factors:
            out.append(G)
    return sorted(out, key=lambda G: G.invariant_factors)


def _partitions(e: int, largest: int | None = None):
    largest = e if largest is None else largest
    if e == 0:
        yield []
        return
    for k in range(min(e, largest), 0, -1):
        for rest in _partitions(e - k, k):
            yield [k] + rest


@dataclass(frozen=True, eq=False)
class TableGroup(FiniteGroup):
    """A finite group given by its multiplication table."""

    table: np.ndarray
    identity: int = 0
    name: str = ""

    def __post_init__(self):
        T = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "table", T)
        n = T.shape[0]
        if T.shape != (n, n) or n == 0:
            raise ValueError("table must be square and nonempty")
        full = np.arange(n)
        for k in range(n):
            if not (np.array_equal(np.sort(T[k]), full) and np.array_equal(np.sort(T[:, k]), full)):
                raise ValueError("table is not a Latin square")
        e = self.identity
        if not (np.array_equal(T[e], full) and np.array_equal(T[:, e], full)):
            raise ValueError("identity does not act as identity")
        # associativity: (ab)c == a(bc) for all triples
        if not np.array_equal(T[T, :], _assoc_rhs(T)):
            raise ValueError("table is not associative")

    def __repr__(self):
        return f"TableGroup({self.name or self.order})"

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @cached_property
    def mul_table(self) -> np.ndarray:
        return self.table


def _assoc_rhs(T: np.ndarray) -> np.ndarray:
    # result[a, b, c] = a(bc); compare against T[T, :][a, b, c] = (ab)c
    n = T.shape[0]
    a = np.arange(n)[:, None, None]
    return T[a, T[None, :, :]]


def _table_from_perms(perms: list[tuple[int, ...]], name: str) -> TableGroup:
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    T = np.empty((n, n), dtype=np.int64)
    for i, p in enumerate(perms):
        for j, q in enumerate(perms):
            # (p*q)(x) = p(q(x))
            T[i, j] = index[tuple(p[q[x]] for x in range(len(q)))]
    return TableGroup(T, identity=index[tuple(range(len(perms[0])))], name=name)


def _closure_perms(gens: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    ident = tuple(range(len(gens[0])))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = tuple(x[g[k]] for k in range(len(g)))
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return sorted(seen)


def symmetric_group(k: int) -> TableGroup:
    return _table_from_perms(sorted(itertools.permutations(range(k))), f"S{k}")


def dihedral_group(k: int) -> TableGroup:
    """Dihedral group of order 2k acting on a k-gon."""
    r = tuple((x + 1) % k for x in range(k))
    s = tuple((-x) % k for x in range(k))
    return _table_from_perms(_closure_perms([r, s]), f"D{2 * k}")


def quaternion_group() -> TableGroup:
    """Q8 as the regular permutation representation of the unit quaternions."""
    # elements (sign, unit) with unit in 1,i,j,k
    mult = {("1", u): (1, u) for u in "1ijk"}
    mult.update({(u, "1"): (1, u) for u in "1ijk"})
    mult.update({("i", "i"): (-1, "1"), ("j", "j"): (-1, "1"), ("k", "k"): (-1, "1"),
                 ("i", "j"): (1, "k"), ("j", "k"): (1, "i"), ("k", "i"): (1, "j"),
                 ("j", "i"): (-1, "k"), ("k", "j"): (-1, "i"), ("i", "k"): (-1, "j")})
    elems = [(s, u) for s in (1, -1) for u in "1ijk"]
    index = {x: i for i, x in enumerate(elems)}
    T = np.empty((8, 8), dtype=np.int64)
    for a, (s1, u1) in enumerate(elems):
        for b, (s2, u2) in enumerate(elems):
            s, u = mult[(u1, u2)]
            T[a, b] = index[(s1 * s2 * s, u)]
    return TableGroup(T, identity=0, name="Q8")


def abelian_table(G: FinAbGroup) -> TableGroup:
    return TableGroup(G.mul_table, identity=0, name=f"Z{list(G.invariant_factors)}")


# ---------------------------------------------------------------------------
# subgroups


@dataclass(frozen=True)
class Subgroup:
    parent: FiniteGroup = field(compare=False, hash=False)
    elements: tuple[int, ...]
    generators: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        els = tuple(sorted(int(x) for x in self.elements))
        object.__setattr__(self, "elements", els)
        G = self.parent
        S = set(els)
        if G.identity not in S:
            raise ValueError("subgroup must contain the identity")
        T = G.mul_table
        arr = np.array(els)
        if not set(T[np.ix_(arr, arr)].ravel().tolist()) <= S:
            raise ValueError("not closed under multiplication")
        if not self.generators:
            object.__setattr__(self, "generators", _minimal_generators(G, els))

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def index(self) -> int:
        return self.parent.order // self.order

    def __contains__(self, a: int) -> bool:
        return int(a) in set(self.elements)

    def is_cyclic(self) -> bool:
        return len(self.generators) <= 1

    def as_abelian(self) -> tuple[FinAbGroup, list[int]]:
        """Abstract invariant-factor form and images of its standard generators.

        Returns (H, imgs) where imgs[i] in the parent is the image of the i-th
        standard generator of H.
        """
        G = self.parent
        if not G.is_abelian:
            # generators of an abelian subgroup of a table group still work
            if not _commute_all(G, self.elements):
                raise ValueError("subgroup is not abelian")
        return _abelian_basis(G, self.elements)


    def as_group(self) -> tuple[FiniteGroup, np.ndarray]:
        """An abstract copy of H and the embedding (array: element -> parent index)."""
        G = self.parent
        if _commute_all(G, self.elements):
            A, imgs = self.as_abelian()
            emb = np.empty(A.order, dtype=np.int64)
            for k in range(A.order):
                x = G.identity
                for a, g in zip(A.element(k), imgs):
                    for _ in range(a):
                        x = G.mul(x, g)
                emb[k] = x
            return A, emb
        els = list(self.elements)
        pos = {a: i for i, a in enumerate(els)}
        T = np.array([[pos[G.mul(a, b)] for b in els] for a in els], dtype=np.int64)
        return TableGroup(T, identity=pos[G.identity]), np.array(els, dtype=np.int64)


def _commute_all(G: FiniteGroup, els) -> bool:
    T = G.mul_table
    arr = np.array(els)
    sub = T[np.ix_(arr, arr)]
    return bool(np.array_equal(sub, sub.T))


def _minimal_generators(G: FiniteGroup, els: tuple[int, ...]) -> tuple[int, ...]:
    """A small generating set, greedily by descending element order."""
    if len(els) == 1:
        return ()
    cand = sorted(els, key=lambda a: (-G.element_order(a), a))
    gens: list[int] = []
    cur = {G.identity}
    for a in cand:
        if a not in cur:
            gens.append(a)
            cur = set(G.generated(gens))
            if len(cur) == len(els):
                break
    return tuple(gens)


def _abelian_basis(G: FiniteGroup, els: tuple[int, ...]) -> tuple[FinAbGroup, list[int]]:
    """Decompose an abelian subgroup into cyclic factors with n1 | n2 | ...

    Works prime by prime: in each Sylow subgroup repeatedly split off an
    element of maximal order; then recombine prime-power pieces.
    """
    from .zlinalg import _factor

    n = len(els)
    if n == 1:
        return FinAbGroup(()), []
    pieces: dict[int, list[tuple[int, int]]] = {}  # p -> [(order, element)]
    for p in sorted(_factor(n)):
        syl = [a for a in els if _is_p_power(G.element_order(a), p)]
        pieces[p] = _split_p_group(G, syl, p)
    length = max(len(v) for v in pieces.values())
    factors = []
    imgs = []
    for k in range(length):
        order, elem = 1, G.identity
        for lst in pieces.values():
            asc = sorted(lst)
            idx = len(asc) - length + k
            if idx >= 0:
                q, a = asc[idx]
                order *= q
                elem = G.mul(elem, a)
        factors.append(order)
        imgs.append(elem)
    return FinAbGroup(tuple(factors)), imgs


def _is_p_power(k: int, p: int) -> bool:
    while k % p == 0:
        k //= p
    return k == 1


def _split_p_group(G: FiniteGroup, syl: list[int], p: int) -> list[tuple[int, int]]:
    """Basis of an abelian p-group as (order, element) pairs.

    Uses the standard algorithm: pick an element whose cyclic subgroup is a
    direct summand by choosing, at each step, an element of maximal order in
    the quotient with minimal order among its coset.
    """
    target = len(syl)
    basis: list[tuple[int, int]] = []
    span = {G.identity}
    while len(span) < target:
        # quotient order of an element a: least k with a^k in span
        best = None
        for a in syl:
            if a in span:
                continue
            k, x = 1, a
            while x not in span:
                x = G.mul(x, a)
                k += 1
            if best is None or k > best[0]:
                best = (k, a, x)
        k, a, x = best
        # x = a^k lies in span; adjust a by an element of span so that a^k = 1.
        # In a p-group with span a direct summand of the right shape, x is a
        # k-th power of some s in span; then a * s^-1 works.
        fixed = None
        for s in sorted(span):
            if _pow(G, s, k) == x:
                fixed = G.mul(a, int(G.inverse[s]))
                break
        assert fixed is not None
        basis.append((k, fixed))
        span = set(G.generated([b for _, b in basis]))
    return basis


def _pow(G: FiniteGroup, a: int, k: int) -> int:
    x = G.identity
    for _ in range(k):
        x = G.mul(x, a)
    return x


def _abelian_subgroup_lattices(n: tuple[int, ...]):
    """Row-HNF matrices H with diag(n) Z^m <= rowspan(H) <= Z^m."""
    m = len(n)

    def divisors(k):
        return [d for d in range(1, k + 1) if k % d == 0]

    def rec(i, rows):
        # rows: rows for indices i+1..m-1, each as full-length lists
        if i < 0:
            yield [r for r in rows]
            return
        for d in divisors(n[i]):
            ranges = [range(rows[j - i - 1][j]) if rows[j - i - 1][j] else range(1)
                      for j in range(i + 1, m)]
            for tail in itertools.product(*ranges):
                row = [0] * i + [d] + list(tail)
                new = [row] + rows
                if _contains_scaled_unit(new, i, n[i]):
                    yield from rec(i - 1, new)

    yield from rec(m - 1, [])


def _contains_scaled_unit(rows: list[list[int]], i: int, ni: int) -> bool:
    """Is ni * e_i in the span of the echelon rows (rows[0] has pivot i)?"""
    v = [0] * len(rows[0])
    v[i] = ni
    for r in rows:
        j = next(k for k, x in enumerate(r) if x)
        if v[j] % r[j]:
            return False
        q = v[j] // r[j]
        v = [a - q * b for a, b in zip(v, r)]
    return not any(v)


def subgroups(G: FiniteGroup, max_order: int | None = None) -> list[Subgroup]:
    """All subgroups of G, sorted by (order, elements)."""
    if isinstance(G, FinAbGroup):
        bound = MAX_ABELIAN_SUBGROUP_ORDER if max_order is None else max_order
        if G.order > bound:
            raise ValueError(f"group order {G.order} exceeds subgroup bound {bound}")
        if G.rank == 0:
            return [Subgroup(G, (0,))]
        out = {}
        for H in _abelian_subgroup_lattices(G.invariant_factors):
            gens = [G.index(r) for r in H]
            els = G.generated(gens)
            out[els] = Subgroup(G, els)
        return sorted(out.values(), key=lambda S: (S.order, S.elements))
    bound = MAX_TABLE_SUBGROUP_ORDER if max_order is None else max_order
    if G.order > bound:
        raise ValueError(f"group order {G.order} exceeds subgroup bound {bound}")
    # every subgroup is generated by adding one element at a time to a smaller one
    found = {(G.identity,)}
    frontier = [(G.identity,)]
    while frontier:
        nxt = []
        for S in frontier:
            Sset = set(S)
            for a in G.elements:
                if a in Sset:
                    continue
                T = G.generated(list(_minimal_generators(G, S)) + [a])
                if T not in found:
                    found.add(T)
                    nxt.append(T)
        frontier = nxt
    return sorted((Subgroup(G, S) for S in found), key=lambda S: (S.order, S.elements))


def cyclic_subgroups(G: FiniteGroup) -> list[Subgroup]:
    seen = {}
    for a in G.elements:
        els = G.generated([a])
        if els not in seen:
            seen[els] = Subgroup(G, els, generators=(a,) if a != G.identity else ())
    return sorted(seen.values(), key=lambda S: (S.order, S.elements))


def coset_reps(G: FiniteGroup, H: Subgroup) -> list[int]:
    """Lex-least representative of each left coset gH, in increasing order."""
    if H.parent is not G and not (isinstance(G, FinAbGroup) and H.parent == G):
        raise ValueError("H is not a subgroup of G")
    T = G.mul_table
    hs = np.array(H.elements)
    seen = np.zeros(G.order, dtype=bool)
    reps = []
    for g in G.elements:
        if not seen[g]:
            reps.append(g)
            seen[T[g, hs]] = True
    return reps


def commutator_subgroup(G: FiniteGroup) -> Subgroup:
    T = G.mul_table
    inv = G.inverse
    comms = set()
    for a in G.elements:
        for b in G.elements:
            comms.add(int(T[T[a, b], T[inv[a], inv[b]]]))
    els = G.generated(sorted(comms))
    return Subgroup(G, els)


def trivial_subgroup(G: FiniteGroup) -> Subgroup:
    return Subgroup(G, (G.identity,))


def whole_group(G: FiniteGroup) -> Subgroup:
    return Subgroup(G, tuple(G.elements))


# ---------------------------------------------------------------------------
# automorphisms, for reducing checks that are invariant under transport


def automorphism_generators(G: FinAbGroup) -> list[np.ndarray]:
    """Some automorphisms of G, as arrays g -> phi(g) on element indices.

    Unit scalings of a factor, transvections x_i -> x_i + c x_j and swaps of
    equal factors.  They need not generate Aut(G); orbit reductions only need
    a subgroup of it.
    """
    n = G.invariant_factors
    m = len(n)
    T = G.tuples
    nn = np.array(n, dtype=np.int64)
    out = []

    def from_images(Y):
        # Y[i] = coordinates of phi(x_i); phi(g) = sum g_i Y[i]
        img = (T @ np.array(Y, dtype=np.int64)) % nn if m else np.zeros((1, 0), dtype=np.int64)
        perm = (img * G._strides).sum(axis=-1).astype(np.int64)
        if len(np.unique(perm)) == G.order:
            out.append(perm)

    eye = [[int(i == j) for j in range(m)] for i in range(m)]
    for i in range(m):
        for u in range(2, n[i]):
            if gcd(u, n[i]) == 1:
                Y = [row[:] for row in eye]
                Y[i][i] = u
                from_images(Y)
        for j in range(m):
            if j == i:
                continue
            Y = [row[:] for row in eye]
            Y[i][j] = n[j] // gcd(n[i], n[j])
            from_images(Y)
            if n[i] == n[j] and i < j:
                Y = [row[:] for row in eye]
                Y[i], Y[j] = Y[j], Y[i]
                from_images(Y)
    return out


def subgroup_orbits(G: FinAbGroup, subs: list[Subgroup], pairs: bool = False) -> list[tuple[int, ...]]:
    """Representatives of subgroups (or unordered pairs i <= j) up to automorphism."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components

    where = {H.elements: k for k, H in enumerate(subs)}
    acts = []
    for phi in automorphism_generators(G):
        acts.append(np.array([where[tuple(sorted(int(x) for x in phi[list(H.elements)]))] for H in subs]))
    s = len(subs)
    if pairs:
        I, J = np.triu_indices(s)
        items = list(zip(I.tolist(), J.tolist()))
        code = I * s + J
        maps = []
        for a in acts:
            lo, hi = np.minimum(a[I], a[J]), np.maximum(a[I], a[J])
            maps.append(np.searchsorted(code, lo * s + hi))
    else:
        items = [(k,) for k in range(s)]
        maps = acts
    n = len(items)
    if not maps:
        return items
    src = np.concatenate([np.arange(n)] * len(maps))
    g = csr_matrix((np.ones(src.size), (src, np.concatenate(maps))), shape=(n, n))
    _, lab = connected_components(g, directed=True, connection="weak")
    first = np.unique(lab, return_index=True)[1]
    return [items[k] for k in sorted(first)]


def corpus_groups(max_order: int = 81, max_factors: int = 4,
                  extra: Sequence[Sequence[int]] = ((2, 2, 4, 4),)) -> list[FinAbGroup]:
    """Nontrivial abelian groups of order <= max_order with at most max_factors
    invariant factors, then the extra groups not already listed."""
    out: list[FinAbGroup] = []
    for n in range(2, max_order + 1):
        out += abelian_groups_of_order(n, max_factors)
    for fs in extra:
        G = canonicalize_abelian(fs)
        if G not in out:
            out.append(G)
    return out
