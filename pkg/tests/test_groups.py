import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from h3torus.groups import (FinAbGroup, TableGroup, abelian_groups_of_order, abelian_table, canonicalize_abelian,
                            commutator_subgroup, coset_reps, cyclic_subgroups, dihedral_group, parse_group,
                            quaternion_group, subgroups, symmetric_group)


def brute_subgroups(G, max_gens=3):
    """All subgroups generated by at most max_gens elements, by closure."""
    out = set()
    for k in range(max_gens + 1):
        for gens in itertools.combinations(G.elements, k):
            out.add(tuple(G.generated(list(gens))))
    return out


def test_canonicalize_examples():
    assert canonicalize_abelian([2, 3]).invariant_factors == (6,)
    assert canonicalize_abelian([3, 3]).invariant_factors == (3, 3)
    assert canonicalize_abelian([4, 2, 2]).invariant_factors == (2, 2, 4)
    with pytest.raises(ValueError):
        canonicalize_abelian([1, 3])


@given(st.lists(st.integers(2, 30), max_size=4))
def test_canonicalize_idempotent_and_order(fs):
    G = canonicalize_abelian(fs)
    assert canonicalize_abelian(list(G.invariant_factors)) == G
    assert G.order == int(np.prod(fs)) if fs else G.order == 1


def test_parse_group():
    assert parse_group("9,3").invariant_factors == (3, 9)
    assert parse_group("trivial").order == 1
    with pytest.raises(ValueError):
        parse_group("3,x")


def test_subgroup_examples():
    assert len(subgroups(FinAbGroup((4,)))) == 3
    assert sorted(H.order for H in subgroups(FinAbGroup((4,)))) == [1, 2, 4]
    assert len(subgroups(FinAbGroup((2, 2)))) == 5
    assert len(subgroups(FinAbGroup(()))) == 1


@pytest.mark.parametrize("p,k", [(2, 1), (2, 3), (3, 2), (5, 2), (2, 5)])
def test_cyclic_p_power_count(p, k):
    assert len(subgroups(FinAbGroup((p**k,)))) == k + 1


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_elementary_rank_two_count(p):
    assert len(subgroups(FinAbGroup((p, p)))) == p + 3


@pytest.mark.parametrize("fs", [(2, 4), (3, 9), (2, 2, 2), (2, 6), (4, 4), (2, 2, 4)])
def test_subgroups_match_brute_force(fs):
    G = FinAbGroup(fs)
    got = {tuple(H.elements) for H in subgroups(G)}
    assert len(got) == len(subgroups(G))
    assert got == brute_subgroups(G, len(fs))


@pytest.mark.parametrize("G", [symmetric_group(3), dihedral_group(4), quaternion_group()], ids=["S3", "D8", "Q8"])
def test_table_subgroups_brute(G):
    got = {tuple(H.elements) for H in subgroups(G)}
    assert got == brute_subgroups(G, 2)


def test_table_group_validation():
    with pytest.raises(ValueError):
        TableGroup(np.array([[0, 1], [0, 1]]))
    G = symmetric_group(3)
    assert G.order == 6 and not G.is_abelian


def test_coset_reps_examples():
    G = FinAbGroup((4,))
    H = [H for H in subgroups(G) if H.order == 2][0]
    assert coset_reps(G, H) == [0, 1]
    full = [H for H in subgroups(G) if H.order == 4][0]
    triv = [H for H in subgroups(G) if H.order == 1][0]
    assert coset_reps(G, full) == [G.identity]
    assert coset_reps(G, triv) == list(G.elements)


@pytest.mark.parametrize("G", [FinAbGroup((2, 6)), FinAbGroup((3, 3)), symmetric_group(3), dihedral_group(4)],
                         ids=["2,6", "3,3", "S3", "D8"])
def test_coset_reps_partition(G):
    for H in subgroups(G):
        reps = coset_reps(G, H)
        assert len(reps) * H.order == G.order
        cover = [G.mul(s, h) for s in reps for h in H.elements]
        assert sorted(cover) == list(G.elements)


def test_commutators():
    assert commutator_subgroup(abelian_table(FinAbGroup((2, 4)))).order == 1
    assert commutator_subgroup(symmetric_group(3)).order == 3
    C = commutator_subgroup(quaternion_group())
    Q = quaternion_group()
    assert C.order == 2
    # it is the centre
    z = [g for g in C.elements if g != Q.identity][0]
    assert all(Q.mul(z, g) == Q.mul(g, z) for g in Q.elements)


def test_abelian_groups_of_order():
    assert len(abelian_groups_of_order(16, 4)) == 5
    assert len(abelian_groups_of_order(16, 2)) == 3
    assert len(abelian_groups_of_order(81, 4)) == 5
    assert len(abelian_groups_of_order(72, 4)) == 6


def test_cyclic_subgroups_are_cyclic():
    G = FinAbGroup((2, 4))
    cs = cyclic_subgroups(G)
    assert all(C.is_cyclic() for C in cs)
    assert {tuple(C.elements) for C in cs} == {tuple(G.generated([g])) for g in G.elements}


def test_element_encoding_lexicographic():
    G = FinAbGroup((2, 4))
    assert [G.element(k) for k in range(G.order)] == list(itertools.product(range(2), range(4)))
    assert all(G.index(G.element(k)) == k for k in range(G.order))


@pytest.mark.parametrize("fs", [(2, 2), (2, 6), (3, 9), (2, 2, 4), (4, 4)])
def test_automorphism_generators(fs):
    from h3torus.groups import automorphism_generators

    G = FinAbGroup(fs)
    T = G.mul_table
    autos = automorphism_generators(G)
    assert autos
    for phi in autos:
        assert sorted(phi.tolist()) == list(range(G.order))
        assert np.array_equal(phi[T], T[np.ix_(phi, phi)])


def test_subgroup_orbits_elementary():
    from h3torus.groups import subgroup_orbits

    # GL_n(F_p) is transitive on subspaces of each dimension
    G = FinAbGroup((3, 3, 3))
    subs = subgroups(G)
    reps = subgroup_orbits(G, subs)
    assert sorted(subs[i].order for (i,) in reps) == [1, 3, 9, 27]
    # pairs of subspaces are classified by dimensions and dimension of the meet
    pairs = subgroup_orbits(G, subs, pairs=True)
    keys = set()
    for i, j in pairs:
        meet = len(set(subs[i].elements) & set(subs[j].elements))
        keys.add((subs[i].order, subs[j].order, meet))
    assert len(keys) == len(pairs)
