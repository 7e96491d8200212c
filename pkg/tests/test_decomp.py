import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from h3torus import decomp as dc
from h3torus import glattice as gl
from h3torus import zlinalg as zl
from h3torus.groups import FinAbGroup, subgroups
from h3torus.zlinalg import FgAbGroup


def by_order(G):
    out = {}
    for H in subgroups(G):
        out.setdefault(H.order, H)
    return out


def test_qtr_regular_c2():
    G = FinAbGroup((2,))
    L = gl.regular_lattice(G)
    one = by_order(G)[1]
    # S^2 basis e0e0, e0e1, e1e1: Qtr_1(e) = e * g
    assert dc.qtr(L, one, [1, 0]).tolist() == [0, 1, 0]
    assert dc.qtr(L, by_order(G)[2], [1, 1]).tolist() == [0, 0, 0]
    with pytest.raises(ValueError):
        dc.qtr(L, by_order(G)[2], [1, 0])


def test_trace_examples():
    G = FinAbGroup((4,))
    L = gl.regular_lattice(G)
    H2 = by_order(G)[2]
    a = np.array([1, 0, 1, 0])
    assert dc.trace(L, H2, a).tolist() == [[1, 1, 1, 1]]
    assert dc.trace(L, by_order(G)[1], np.array([2, 0, 0, 0])).tolist() == [[2, 2, 2, 2]]


def test_sym2_matrix_matches_lattice():
    G = FinAbGroup((2, 2))
    fr = gl.flasque_resolution(G)
    S = gl.sym2(fr.T)
    for g in G.elements:
        assert np.array_equal(dc.sym2_matrix(fr.T.mats[g]), S.mats[g])


@pytest.mark.parametrize("fs", [(2,), (4,), (2, 2), (3, 3), (2, 4)])
def test_sym2_invariants_saturated(fs):
    G = FinAbGroup(fs)
    fr = gl.flasque_resolution(G)
    for L in [fr.T, fr.W, gl.regular_lattice(G)]:
        A = dc.sym2_invariants(L)
        B = gl.invariants_basis(gl.sym2(L))
        assert A.shape == B.shape
        # same saturated sublattice: each expresses the other integrally
        zl.RowBasisSolver(A).coords(B)
        zl.RowBasisSolver(B).coords(A)


@settings(max_examples=40)
@given(st.sampled_from([(2,), (3,), (4,), (2, 2), (3, 3), (2, 4), (6,)]), st.integers(0, 10**6))
def test_qtr_vs_naive_and_polarization(fs, seed):
    G = FinAbGroup(fs)
    fr = gl.flasque_resolution(G)
    L = fr.T
    rng = np.random.default_rng(seed)
    subs = [H for H in subgroups(G)]
    H = subs[rng.integers(len(subs))]
    E = gl.invariants_basis(L, H)
    if E.shape[0] == 0:
        return
    a = rng.integers(-3, 4, E.shape[0]) @ E
    b = rng.integers(-3, 4, E.shape[0]) @ E
    k = int(rng.integers(-4, 5))
    q = lambda x: dc.qtr(L, H, x)
    tr = lambda x: dc.trace(L, H, x)[0]
    sq = lambda x, y: gl.sym_product(np.atleast_2d(x), np.atleast_2d(y))[0]
    assert np.array_equal(q(a), dc.qtr_naive(L, H, a))
    assert np.array_equal(q(k * a), k * k * q(a))
    assert np.array_equal(q(a + b), q(a) + q(b) + sq(tr(a), tr(b)) - dc.trace_products(L, H, a, b))
    assert np.array_equal(dc.trace_products(L, H, a, a), sq(tr(a), tr(a)) - 2 * q(a))


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 4), (4, 4), (2, 2, 2)])
def test_dec_generators_invariant(fs):
    fr = gl.flasque_resolution(FinAbGroup(fs))
    D = dc.dec_generators(fr.T)
    assert D.coords.shape == (D.generators.shape[0], D.invariants.shape[0])
    assert len(D.labels) == D.generators.shape[0]


@pytest.mark.parametrize("fs", [(2,), (3,), (2, 2), (3, 3), (2, 4)])
def test_dec_contains_qtr_of_random_elements(fs):
    G = FinAbGroup(fs)
    fr = gl.flasque_resolution(G)
    D = dc.dec_generators(fr.T)
    rng = np.random.default_rng(7)
    for H in subgroups(G):
        E = gl.invariants_basis(fr.T, H)
        for _ in range(3):
            if E.shape[0] == 0:
                break
            a = rng.integers(-5, 6, E.shape[0]) @ E
            assert D.contains(dc.qtr(fr.T, H, a))


@pytest.mark.parametrize("fs", [(2,), (3,), (6,), (2, 2), (3, 3), (2, 4)])
def test_permutation_lattices_decomposable(fs):
    G = FinAbGroup(fs)
    lats = [gl.permutation_lattice(G, H) for H in subgroups(G)]
    for L in lats:
        assert dc.s2_mod_dec(L).is_trivial
    for L1, L2 in zip(lats, lats[1:]):
        assert dc.s2_mod_dec(gl.direct_sum(L1, L2)).is_trivial


@pytest.mark.parametrize("fs,expected", [
    ((2,), []), ((3,), []), ((4,), []), ((2, 2), []), ((3, 3), []), ((2, 4), []), ((2, 2, 2), []),
])
def test_s2_mod_dec_small(fs, expected):
    fr = gl.flasque_resolution(FinAbGroup(fs))
    assert dc.s2_mod_dec(fr.T) == FgAbGroup.from_cyclics(expected)


def test_s2_mod_dec_333():
    fr = gl.flasque_resolution(FinAbGroup((3, 3, 3)))
    assert dc.s2_mod_dec(fr.T) == FgAbGroup.from_cyclics([3])


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 4)])
def test_mod_order_quotient_equals_full_cokernel(fs):
    # |G| S^2(A)^G lies in Dec, so reducing modulo |G| does not change the answer
    fr = gl.flasque_resolution(FinAbGroup(fs))
    D = dc.dec_generators(fr.T)
    full = zl.cokernel(D.coords, D.invariants.shape[0])
    assert full.free_rank == 0
    assert full == D.quotient()


def test_alternative_generators_same_answer():
    G = FinAbGroup((3, 3))
    a = dc.s2_mod_dec(gl.flasque_resolution(G).T)
    gens = [G.index((1, 0)), G.index((1, 1))]
    b = dc.s2_mod_dec(gl.flasque_resolution(G, gens=gens).T)
    assert a == b


@pytest.mark.parametrize("fs", [(2,), (3,), (2, 2), (3, 3), (2, 4)])
def test_h1_n_mod_delta_matches(fs):
    fr = gl.flasque_resolution(FinAbGroup(fs))
    assert dc.h1_n_mod_delta(fr) == dc.s2_mod_dec(fr.T)


# --- the modular path against the dense one ---------------------------------


@pytest.mark.parametrize("fs", [(2,), (4,), (6,), (2, 2), (3, 3), (2, 4), (2, 2, 2), (4, 4), (2, 2, 4), (3, 3, 3)])
def test_modular_matches_dense_on_flasque_lattice(fs):
    fr = gl.flasque_resolution(FinAbGroup(fs))
    dense = dc.s2_mod_dec(fr.T, method="dense")
    assert dc.s2_mod_dec(fr.T, cover=dc.flasque_cover(fr), method="modular") == dense
    assert dc.s2_mod_dec(fr.T, method="modular") == dense


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 4)])
def test_modular_on_lattices_with_nontrivial_quotient(fs):
    # W and the dual of T are not permutation-like; compare full answers
    fr = gl.flasque_resolution(FinAbGroup(fs))
    for L in [fr.W, gl.dual(fr.T), gl.direct_sum(fr.T, fr.T)]:
        assert dc.s2_mod_dec(L, method="modular") == dc.s2_mod_dec(L, method="dense")


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 4), (2, 2, 2)])
def test_modular_membership_matches_dense(fs):
    G = FinAbGroup(fs)
    fr = gl.flasque_resolution(G)
    D = dc.dec_generators(fr.T)
    M = dc.DecModular(fr.T, dc.flasque_cover(fr))
    rng = np.random.default_rng(11)
    inv = D.invariants
    V = rng.integers(-3, 4, (30, inv.shape[0])) @ inv
    V[:10] *= G.order  # these always lie in Dec
    assert M.contains(V).tolist() == [D.contains(v) for v in V]
    with pytest.raises(ValueError):
        M.contains(np.arange(inv.shape[1]))


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 4), (6,)])
def test_modular_quotient_of_permutation_sums(fs):
    G = FinAbGroup(fs)
    subs = subgroups(G)
    for H1 in subs:
        for H2 in subs:
            L = gl.direct_sum(gl.permutation_lattice(G, H1), gl.permutation_lattice(G, H2))
            assert dc.s2_mod_dec(L, method="modular").is_trivial


def test_auto_method_on_large_lattice():
    G = FinAbGroup((3, 9))
    fr = gl.flasque_resolution(G)
    assert dc.s2_mod_dec(fr.T, cover=dc.flasque_cover(fr)) == dc.s2_mod_dec(fr.T, method="dense")
    with pytest.raises(ValueError):
        dc.s2_mod_dec(fr.T, method="fast")


@pytest.mark.parametrize("fs", [(2, 2), (2, 4), (3, 3)])
def test_quotient_is_invariant_under_twisting(fs):
    # the justification for checking one subgroup pair per automorphism orbit
    from h3torus.groups import automorphism_generators, subgroup_orbits

    G = FinAbGroup(fs)
    subs = subgroups(G)
    fr = gl.flasque_resolution(G)
    assert len(subgroup_orbits(G, subs, pairs=True)) < len(subs) * (len(subs) + 1) // 2
    for phi in automorphism_generators(G):
        inv = np.argsort(phi)
        for H in subs[:: max(1, len(subs) // 4)]:
            L = gl.direct_sum(fr.T, gl.permutation_lattice(G, H))
            twisted = gl.MatrixLattice(G, np.asarray(L.mats)[inv])
            assert dc.s2_mod_dec(twisted, method="dense") == dc.s2_mod_dec(L, method="dense")
            # and the twist of Z[G/H] is Z[G/phi(H)]
            img = tuple(sorted(int(x) for x in phi[list(H.elements)]))
            P = gl.permutation_lattice(G, H)
            Q = gl.permutation_lattice(G, next(K for K in subs if K.elements == img))
            tw = gl.MatrixLattice(G, np.asarray(P.mats)[inv])
            assert [int(np.trace(m)) for m in tw.mats] == [int(np.trace(m)) for m in Q.mats]
