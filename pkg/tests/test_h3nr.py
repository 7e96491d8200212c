import json

import pytest
from hypothesis import given, settings, strategies as st

from h3torus import h3nr
from h3torus.classfield import LocalData
from h3torus.groups import FinAbGroup, abelian_groups_of_order, canonicalize_abelian
from h3torus.zlinalg import FgAbGroup


def Z(*orders):
    return FgAbGroup.from_cyclics(list(orders))


@pytest.mark.parametrize("fs,expected", [
    ((), []), ((5,), []), ((3, 3), []), ((2, 6), []),
    ((3, 3, 3), [3]), ((2, 2, 2), [2]), ((3, 9, 27), [3]),
    ((2, 2, 4, 4), [2, 2, 2, 2]),  # d_1 = 3 copies of C_1 = Z/2, d_2 = 1 copy of C_2 = Z/2
    ((3, 3, 3, 3), [3, 3, 3, 3]),
])
def test_closed_form_examples(fs, expected):
    assert h3nr.closed_form_coker(FinAbGroup(fs)) == Z(*expected)


def brute_closed_form(fs):
    """Direct count: C_i appears once for each pair j < k of later indices."""
    m = len(fs)
    orders = []
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                orders.append(fs[i])
    return Z(*orders)


@pytest.mark.parametrize("n", [4, 8, 9, 16, 27, 36])
def test_closed_form_pair_count(n):
    for G in abelian_groups_of_order(n, 4):
        assert h3nr.closed_form_coker(G) == brute_closed_form(G.invariant_factors)


@pytest.mark.parametrize("fs", [(2, 2), (3, 3), (2, 2, 2), (3, 3, 3), (2, 4, 4), (2, 2, 2, 2)])
def test_intermediate_form_matches(fs):
    G = FinAbGroup(fs)
    assert h3nr.intermediate_form(G) == h3nr.closed_form_coker(G)


def test_worked_examples():
    G2, G3 = FinAbGroup((3, 3)), FinAbGroup((3, 3, 3))
    r1 = h3nr.unramified_h3(G2, LocalData.from_degrees(9, [1, 3, 9]))
    assert r1.full_group.is_trivial
    r2 = h3nr.unramified_h3(G2, LocalData.from_degrees(9, [1, 3, 3]))
    assert r2.full_group == Z(3)
    r3 = h3nr.unramified_h3(G3, LocalData.from_degrees(27, [1, 3, 9]))
    assert r3.full_group == Z(3, 3)
    assert r3.p_parts == {3: Z(3, 3)}


def test_report_fields_and_json():
    r = h3nr.unramified_h3(FinAbGroup((2, 6)), Z(3))
    assert r.full_group is None
    assert r.two_part_status == h3nr.UNDETERMINED
    d = json.loads(json.dumps(r.to_json()))
    assert d["two_part"] is None and d["arithmetic_source"] == "supplied"
    assert set(d["p_parts"]) == {"3"}
    odd = h3nr.unramified_h3(FinAbGroup((3, 3)), None)
    assert odd.full_group is None and odd.arithmetic_source == "omitted"
    assert odd.two_part_status == "trivial"
    with_data = h3nr.unramified_h3(FinAbGroup((5, 5)), Z())
    assert with_data.full_group is not None and with_data.full_group.is_trivial


def test_validation():
    with pytest.raises(ValueError):
        h3nr.unramified_h3(FinAbGroup((3, 3)), LocalData.from_degrees(27, [3]))
    with pytest.raises(TypeError):
        h3nr.unramified_h3(FinAbGroup((3, 3)), 3)
    with pytest.raises(ValueError):
        h3nr.lattice_summand(FinAbGroup((3,)), "guess")


@pytest.mark.parametrize("fs", [(3, 3), (3, 3, 3), (5, 5)])
def test_lattice_methods_agree_on_odd_groups(fs):
    G = FinAbGroup(fs)
    base = h3nr.unramified_h3(G, Z(), "closed-form").p_parts
    for method in ("cup", "dec"):
        assert h3nr.unramified_h3(G, Z(), method).p_parts == base


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from([2, 3, 4, 5, 6, 9]), min_size=1, max_size=3), st.permutations(range(3)))
def test_invariant_under_reordering_of_factors(cyclics, perm):
    G = canonicalize_abelian(cyclics)
    shuffled = [cyclics[i] for i in perm if i < len(cyclics)]
    H = canonicalize_abelian(shuffled)
    assert G == H
    assert h3nr.closed_form_coker(G) == h3nr.closed_form_coker(H)
    assert h3nr.unramified_h3(G, Z(3)).to_json() == h3nr.unramified_h3(H, Z(3)).to_json()


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_brauer_of_square(n):
    G = FinAbGroup((n, n))
    assert h3nr.brauer_nr(G) == Z(n)
    assert h3nr.sha2_omega(G) == Z(n)


@pytest.mark.parametrize("fs", [(2,), (5,), (12,), (2, 4), (2, 2, 2)])
def test_brauer_two_routes(fs):
    G = FinAbGroup(fs)
    assert h3nr.brauer_nr(G) == h3nr.sha2_omega(G)
    if len(fs) == 1:
        assert h3nr.brauer_nr(G).is_trivial


def test_verify_lemmas_small():
    recs = h3nr.verify_lemmas(9)
    assert all(r.passed for r in recs), [r for r in recs if not r.passed]
    fams = {r.lemma for r in recs}
    assert len(fams) >= 6
    for fam in fams:
        assert len({r.group for r in recs if r.lemma == fam}) >= 4
    assert recs == sorted(recs, key=lambda r: (r.lemma, r.group))
    json.dumps([r.to_json() for r in recs])


def test_verify_lemmas_table_groups_and_empty():
    recs = h3nr.verify_lemmas(8, h3nr.VerifyOptions(include_table_groups=True),
                              families=["sym2-wedge2-two-torsion", "permutation-dec-vanishes"])
    groups = {r.group for r in recs}
    assert {"S3", "D8", "Q8"} <= groups
    assert all(r.passed for r in recs)
    assert h3nr.verify_lemmas(9, groups=[]) == []


def test_fault_injection_is_caught():
    recs = h3nr.verify_lemmas(9, h3nr.VerifyOptions(fault="n-sequence"), families=["n-sequence-exact"])
    # for |G| = 2 the exterior square of W is zero and there is nothing to corrupt
    assert [r.group for r in recs if r.passed] == ["2"]
    assert len(recs) >= 8
