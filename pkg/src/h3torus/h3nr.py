"""Unramified H^3 of norm-one tori of abelian extensions, and the checks behind it.

For G = C_1 + ... + C_m (invariant factors) and an odd prime p,

    H3nr{p} = H^3(G, K^*){p} + (C_1^{d_1} + ... + C_{m-2}^{d_{m-2}}){p},
    d_i = (m - i)(m - i - 1) / 2,

where the lattice summand is the cokernel of the cup product
H^2(G,Z) x H^2(G,Z) -> H^4(G,Z), equivalently S^2(T)^G / Dec on odd parts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from . import zlinalg as zl
from .classfield import LocalData, h3_units_global
from .groups import FinAbGroup, FiniteGroup, abelian_groups_of_order, cyclic_subgroups, dihedral_group, \
    quaternion_group, subgroup_orbits, subgroups, symmetric_group
from .zlinalg import FgAbGroup, p_primary

UNDETERMINED = "undetermined-by-method"


def _odd_primes(n: int) -> list[int]:
    return sorted(p for p in zl._factor(n) if p != 2)


def closed_form_coker(G: FinAbGroup) -> FgAbGroup:
    """sum_{i=1}^{m-2} C_i^{d_i} with d_i = (m-i)(m-i-1)/2."""
    f = G.invariant_factors
    m = len(f)
    orders = []
    for i in range(1, m - 1):
        orders += [f[i - 1]] * ((m - i) * (m - i - 1) // 2)
    return FgAbGroup.from_cyclics(orders)


def intermediate_form(G: FinAbGroup) -> FgAbGroup:
    """sum_{i=1}^{m-1} H^3(G_i, Z), G_i = C_1 + ... + C_i, computed by resolutions."""
    from .cohomres import cohomology_group, small_resolution
    from .glattice import trivial_lattice

    out = FgAbGroup()
    f = G.invariant_factors
    for i in range(1, len(f)):
        Gi = FinAbGroup(f[:i])
        R = small_resolution(Gi, 3)
        out = out + cohomology_group(R, trivial_lattice(Gi), 3)
    return out


# ---------------------------------------------------------------------------
# the report


@dataclass
class H3Report:
    group: tuple[int, ...]
    p_parts: dict[int, FgAbGroup]
    arithmetic_p_parts: dict[int, FgAbGroup] | None
    lattice_p_parts: dict[int, FgAbGroup]
    arithmetic_source: str  # "local-data" | "supplied" | "omitted"
    lattice_method: str
    full_group: FgAbGroup | None
    two_part_status: str
    arithmetic: FgAbGroup | None = None
    lattice_summand: FgAbGroup | None = None

    def to_json(self) -> dict:
        def parts(d):
            return None if d is None else {str(p): g.to_json() for p, g in sorted(d.items())}

        return {
            "group": list(self.group),
            "order": int(np.prod(self.group)) if self.group else 1,
            "arithmetic_source": self.arithmetic_source,
            "arithmetic": None if self.arithmetic is None else self.arithmetic.to_json(),
            "lattice_method": self.lattice_method,
            "lattice_summand": None if self.lattice_summand is None else self.lattice_summand.to_json(),
            "p_parts": parts(self.p_parts),
            "arithmetic_p_parts": parts(self.arithmetic_p_parts),
            "lattice_p_parts": parts(self.lattice_p_parts),
            "full_group": None if self.full_group is None else self.full_group.to_json(),
            "two_part_status": self.two_part_status,
            "two_part": None,
        }


def lattice_summand(G: FinAbGroup, method: str = "closed-form") -> FgAbGroup:
    if method == "closed-form":
        return closed_form_coker(G)
    if method == "cup":
        from .cohomres import cup_coker_2_2_4

        return cup_coker_2_2_4(G)
    if method == "dec":
        from .decomp import s2_mod_dec_flasque
        from .glattice import flasque_resolution

        return s2_mod_dec_flasque(flasque_resolution(G, check=False))
    raise ValueError(f"unknown lattice method {method!r}")


def unramified_h3(G: FinAbGroup, arithmetic: LocalData | FgAbGroup | None = None,
                  lattice_method: str = "closed-form") -> H3Report:
    n = G.order
    if isinstance(arithmetic, LocalData):
        if arithmetic.n != n:
            raise ValueError(f"local data has degree {arithmetic.n} but |G| = {n}")
        arith, source = h3_units_global(arithmetic), "local-data"
    elif isinstance(arithmetic, FgAbGroup):
        arith, source = arithmetic, "supplied"
    elif arithmetic is None:
        arith, source = None, "omitted"
    else:
        raise TypeError("arithmetic must be LocalData, FgAbGroup or None")
    lat = lattice_summand(G, lattice_method)
    primes = _odd_primes(n)
    lat_parts = {p: p_primary(lat, p) for p in primes}
    arith_parts = None if arith is None else {p: p_primary(arith, p) for p in primes}
    if arith_parts is None:
        p_parts = dict(lat_parts)
    else:
        p_parts = {p: arith_parts[p] + lat_parts[p] for p in primes}
    full = None
    if n % 2 == 1 and arith is not None:
        full = arith + lat
    return H3Report(
        group=G.invariant_factors,
        p_parts=p_parts,
        arithmetic_p_parts=arith_parts,
        lattice_p_parts=lat_parts,
        arithmetic_source=source,
        lattice_method=lattice_method,
        full_group=full,
        two_part_status=UNDETERMINED if n % 2 == 0 else "trivial",
        arithmetic=arith,
        lattice_summand=lat,
    )


# ---------------------------------------------------------------------------
# unramified Brauer group, two ways


def brauer_nr(G: FinAbGroup) -> FgAbGroup:
    """H^1(G, T) for the flasque lattice T of the norm-one torus."""
    from .cohomres import cohomology_group, small_resolution
    from .glattice import flasque_resolution

    fr = flasque_resolution(G, check=False)
    return cohomology_group(small_resolution(G, 2), fr.T, 1)


def sha2_omega(G: FinAbGroup) -> FgAbGroup:
    """ker( H^2(G, W) -> prod over cyclic C of H^2(C, W) ) for the norm-one lattice W."""
    from .cohomres import ChainMap, CohomClass, cohomology, periodic_resolution, small_resolution
    from .glattice import norm_one_lattice

    W, _ = norm_one_lattice(G)
    R = small_resolution(G, 3)
    _, H2 = cohomology(R, W, 2)
    k = len(H2.moduli)
    if k == 0:
        return FgAbGroup()
    blocks, mods = [], []
    for C in cyclic_subgroups(G):
        if C.order == 1:
            continue
        g = C.generators[0]
        n = C.order
        emb = np.array([G.power(g, a) for a in range(n)])
        P = periodic_resolution(n, 3)
        phi = ChainMap(P, R, 2, hom=emb)
        WC = _pull_lattice(W, emb, P.group)
        _, H2C = cohomology(P, WC, 2)
        if not H2C.moduli:
            continue
        rows = []
        for u in H2.generators:
            z = CohomClass(2, WC, phi.pullback(u), P)
            rows.append(list(H2C.coords(z)))
        blocks.append(np.array(rows, dtype=np.int64))
        mods += H2C.moduli
    if not blocks:
        return H2.group
    Rm = np.hstack(blocks)
    # x in Z^k maps to 0 iff x Rm lies in diag(mods) Z^l
    stacked = np.vstack([Rm, -np.diag(mods)]).astype(np.int64)
    K = zl.kernel_basis(stacked)
    Kx = K[:, :k] if K.shape[0] else np.zeros((0, k), dtype=np.int64)
    return zl.subquotient(np.vstack([Kx, np.diag(H2.moduli)]), np.diag(H2.moduli))


def _pull_lattice(L, emb, C):
    from .glattice import MatrixLattice

    return MatrixLattice(C, np.stack([np.asarray(L.mats[int(e)]) for e in emb]), name=f"{L.name}|C", check=False)


# ---------------------------------------------------------------------------
# lemma suite


@dataclass
class LemmaRecord:
    lemma: str
    group: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"lemma": self.lemma, "group": self.group, "passed": self.passed,
                "detail": self.detail, "seconds": round(self.seconds, 3)}


@dataclass
class VerifyOptions:
    include_table_groups: bool = False
    fault: str | None = None  # "n-sequence" corrupts f in the N sequence
    n_sequence_max_order: int = 27
    iso_max_order: int = 16
    sym2_wedge2_max_order: int = 27
    dec_max_order: int = 27


def _label(G: FiniteGroup) -> str:
    if isinstance(G, FinAbGroup):
        return ",".join(map(str, G.invariant_factors)) or "1"
    return G.name if getattr(G, "name", "") else f"table{G.order}"


def _killed_by_two(A: FgAbGroup) -> bool:
    return A.free_rank == 0 and all(2 % t == 0 for t in A.torsion)


def _check_n_sequence(G, opts):
    from .glattice import flasque_resolution, n_sequence

    fr = flasque_resolution(G, check=False)
    seq = n_sequence(fr, check=False)
    if opts.fault == "n-sequence" and min(seq.f.shape):
        f = seq.f.tolil()
        f[0, 0] += 1
        seq.f = f.tocsr()
    ok = seq.verify()
    return ok, "" if ok else str(seq.report)


def _check_phi(G, opts):
    from .glattice import phi_sequence

    ses = phi_sequence(G, check=False)
    ok = ses.verify()
    return ok, "" if ok else str(ses.report)


def _check_flasque(G, opts):
    from .glattice import flasque_resolution, is_flasque

    return is_flasque(flasque_resolution(G, check=False).T), ""


def _check_sym2_wedge2(G, opts):
    from .cohomres import cohomology_group, default_resolution
    from .glattice import regular_lattice, sym2, wedge2

    R = default_resolution(G, 3)
    out = []
    for name, L in (("S2", sym2(regular_lattice(G))), ("W2", wedge2(regular_lattice(G)))):
        for i in (1, 2):
            A = cohomology_group(R, L, i)
            if not _killed_by_two(A):
                return False, f"H^{i}(G,{name}) = {A}"
            out.append(f"H{i}{name}={A}")
    return True, "; ".join(out)


def _check_permutation_dec(G, opts):
    from .decomp import s2_mod_dec
    from .glattice import direct_sum, permutation_lattice

    Hs = subgroups(G)
    for H in Hs:
        q = s2_mod_dec(permutation_lattice(G, H))
        if not q.is_trivial:
            return False, f"Z[G/H], |H|={H.order}: {q}"
    pairs = subgroup_orbits(G, Hs, pairs=True) if isinstance(G, FinAbGroup) else \
        [(i, j) for i in range(len(Hs)) for j in range(i, len(Hs))]
    for i, j in pairs:
        q = s2_mod_dec(direct_sum(permutation_lattice(G, Hs[i]), permutation_lattice(G, Hs[j])))
        if not q.is_trivial:
            return False, f"Z[G/H]+Z[G/K], |H|={Hs[i].order}, |K|={Hs[j].order}: {q}"
    return True, f"{len(Hs)} subgroups, {len(pairs)} pairs"


def _check_iso(G, opts):
    from .decomp import h1_n_mod_delta, s2_mod_dec_flasque
    from .glattice import flasque_resolution

    fr = flasque_resolution(G, check=False)
    a, b = s2_mod_dec_flasque(fr), h1_n_mod_delta(fr, check=False)
    return a == b, f"{a} vs {b}"


def _check_dec_vs_cup(G, opts):
    from .cohomres import cup_coker_2_2_4
    from .decomp import s2_mod_dec_flasque
    from .glattice import flasque_resolution

    a = s2_mod_dec_flasque(flasque_resolution(G, check=False))
    b = cup_coker_2_2_4(G)
    ok = all(p_primary(a, p) == p_primary(b, p) for p in _odd_primes(G.order))
    return ok, f"dec={a} cup={b}"


def _check_closed_form(G, opts):
    from .cohomres import cup_coker_2_2_4

    a, b, c = cup_coker_2_2_4(G), closed_form_coker(G), intermediate_form(G)
    return a == b == c, f"cup={a} closed={b} intermediate={c}"


def _check_brauer(G, opts):
    a, b = brauer_nr(G), sha2_omega(G)
    return a == b, f"H1(T)={a} sha={b}"


FAMILIES: dict[str, tuple[Callable, str]] = {
    "n-sequence-exact": (_check_n_sequence, "n_sequence_max_order"),
    "phi-sequence-exact": (_check_phi, ""),
    "flasque": (_check_flasque, ""),
    "sym2-wedge2-two-torsion": (_check_sym2_wedge2, "sym2_wedge2_max_order"),
    "permutation-dec-vanishes": (_check_permutation_dec, "dec_max_order"),
    "dec-vs-h1n": (_check_iso, "iso_max_order"),
    "dec-vs-cup-odd": (_check_dec_vs_cup, "dec_max_order"),
    "cup-vs-closed-form": (_check_closed_form, ""),
    "brauer-two-routes": (_check_brauer, "iso_max_order"),
}
ABELIAN_ONLY = {"dec-vs-h1n", "dec-vs-cup-odd", "cup-vs-closed-form", "brauer-two-routes", "flasque",
                "n-sequence-exact"}


def verify_groups(max_order: int, include_table_groups: bool = False) -> list[FiniteGroup]:
    out: list[FiniteGroup] = []
    for n in range(2, max_order + 1):
        out += abelian_groups_of_order(n, 4)
    if include_table_groups:
        out += [g for g in (symmetric_group(3), dihedral_group(4), quaternion_group()) if g.order <= max(max_order, 8)]
    return out


def verify_lemmas(max_order: int = 9, options: VerifyOptions | None = None,
                  groups: Iterable[FiniteGroup] | None = None,
                  families: Iterable[str] | None = None) -> list[LemmaRecord]:
    """One record per (lemma, group) cell; sorted by key."""
    opts = options or VerifyOptions()
    gs = list(groups) if groups is not None else verify_groups(max_order, opts.include_table_groups)
    fams = list(families) if families is not None else list(FAMILIES)
    recs = []
    for fam in fams:
        fn, bound = FAMILIES[fam]
        for G in gs:
            if fam in ABELIAN_ONLY and not isinstance(G, FinAbGroup):
                continue
            if bound and G.order > getattr(opts, bound):
                continue
            t = time.perf_counter()
            try:
                ok, detail = fn(G, opts)
            except Exception as e:  # a crash is a failed cell, not a crashed suite
                ok, detail = False, f"{type(e).__name__}: {e}"
            recs.append(LemmaRecord(fam, _label(G), bool(ok), detail, time.perf_counter() - t))
    recs.sort(key=lambda r: (r.lemma, r.group))
    return recs
