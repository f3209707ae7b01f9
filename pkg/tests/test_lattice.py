import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import principals
from nmifc import lattice
from nmifc.generate import random_principal
from nmifc.lattice import (
    CNF_BOT, CNF_TOP, CONF, INTEG, NO_DELEGATIONS, Atom, Bot, Conj, Delegations, Disj, Join,
    Projection, Top, acts_for, canonical, equivalent, flow_join, flow_meet, flows_to,
    label_key, normalize, parse_principal, project, show, to_principal, view, voice,
)
from oracles import enumerate_principals, model_check, proof_search

P = parse_principal
a, b, c = Atom("a"), Atom("b"), Atom("c")


def oracle_flows(axioms, l, l2):
    return (proof_search(axioms, project(l2, CONF), project(l, CONF))
            and proof_search(axioms, project(l, INTEG), project(l2, INTEG)))


# -- normalize


def test_normalize_atom():
    nf = normalize(Atom("alice"))
    assert nf.conf == {frozenset({"alice"})}
    assert nf.integ == {frozenset({"alice"})}


def test_normalize_top_integrity_only():
    nf = normalize(P("top^<-"))
    assert nf.conf == CNF_BOT
    assert nf.integ == CNF_TOP


def test_normalize_join_of_conj():
    nf = normalize(Join(Conj(a, b), c))
    assert nf.conf == {frozenset({"a"}), frozenset({"b"}), frozenset({"c"})}
    assert nf.integ == {frozenset({"a", "c"}), frozenset({"b", "c"})}
    # both directions of acts-for agree with the proof-search oracle
    p = to_principal(nf)
    assert proof_search([], p, Join(Conj(a, b), c))
    assert proof_search([], Join(Conj(a, b), c), p)


@given(principals())
def test_normalize_idempotent_and_equivalent(p):
    q = to_principal(normalize(p))
    assert normalize(q) == normalize(p)
    assert acts_for(None, p, q) and acts_for(None, q, p)


@given(principals())
def test_normal_form_is_antichain(p):
    nf = normalize(p)
    for comp in (nf.conf, nf.integ):
        for x in comp:
            for y in comp:
                assert x == y or not x <= y


# -- acts_for


def test_top_acts_for_everything():
    assert acts_for(None, Top(), Conj(Atom("alice"), Atom("bob")))


def test_conj_and_disj_basics():
    alice, bob = Atom("alice"), Atom("bob")
    assert acts_for(None, Conj(alice, bob), alice)
    assert acts_for(None, alice, Disj(alice, bob))
    assert not acts_for(None, alice, Conj(alice, bob))


def test_delegation_projection():
    d = Delegations([("T", Atom("U"))])
    assert acts_for(d, P("T^->"), P("U^->"))
    assert proof_search([("T", Atom("U"))], P("T^->"), P("U^->"))
    assert not acts_for(None, P("T^->"), P("U^->"))


def test_delegation_chain_and_cycle():
    d = Delegations([("a", b), ("b", a)])
    assert equivalent(d, a, b)
    assert label_key(d, a) == label_key(d, b)
    d2 = Delegations([("a", b), ("b", c)])
    assert acts_for(d2, a, c)
    assert not acts_for(d2, c, a)


@pytest.mark.parametrize("limit", [5])
def test_small_exhaustive_sweep_matches_proof_search(limit):
    by_size = enumerate_principals(limit - 1)
    bad = []
    for sp in range(1, limit):
        for sq in range(1, limit - sp + 1):
            for p in by_size[sp]:
                for q in by_size[sq]:
                    if acts_for(None, p, q) != proof_search([], p, q):
                        bad.append((show(p), show(q)))
    assert bad == []


def test_sampled_delegations_match_both_oracles():
    rng = random.Random(11)
    for _ in range(2000):
        axioms = [(rng.choice("abc"), random_principal(rng, ("a", "b", "c"), rng.randint(1, 4)))
                  for _ in range(rng.randrange(3))]
        d = Delegations(axioms, "abc")
        p = random_principal(rng, ("a", "b", "c"), rng.randint(1, 6))
        q = random_principal(rng, ("a", "b", "c"), rng.randint(1, 6))
        got = acts_for(d, p, q)
        assert got == proof_search(axioms, p, q), (axioms, show(p), show(q))
        assert got == model_check(axioms, p, q), (axioms, show(p), show(q))


@given(principals())
def test_acts_for_reflexive(p):
    assert acts_for(None, p, p)


@given(principals(), principals(), principals())
def test_acts_for_transitive(p, q, r):
    if acts_for(None, p, q) and acts_for(None, q, r):
        assert acts_for(None, p, r)


@given(principals(), principals())
def test_label_key_matches_equivalence(p, q):
    d = Delegations([("a", b)])
    assert (label_key(d, p) == label_key(d, q)) == equivalent(d, p, q)


# -- flows_to and lattice operations


def test_flows_with_delegation():
    d = Delegations([("T", Atom("U"))])
    assert flows_to(d, P("U^->"), P("T^->"))
    assert not flows_to(d, P("T^->"), P("U^->"))


def test_flow_bottom_to_conf():
    assert flows_to(None, P("top^<-"), P("alice^->"))
    assert oracle_flows([], P("top^<-"), P("alice^->"))


@given(principals())
def test_flows_reflexive_and_extremes(l):
    assert flows_to(None, l, l)
    assert flows_to(None, lattice.FLOW_BOTTOM, l)
    assert flows_to(None, l, lattice.FLOW_TOP)


@given(principals(), principals())
def test_flows_decomposes_into_acts_for(l, l2):
    expected = acts_for(None, project(l2, CONF), project(l, CONF)) and acts_for(
        None, project(l, INTEG), project(l2, INTEG))
    assert flows_to(None, l, l2) == expected


def test_flow_join_is_least_over_small_labels():
    j = flow_join(P("a^->"), P("b^<-"))
    assert oracle_flows([], P("a^->"), j) and oracle_flows([], P("b^<-"), j)
    by_size = enumerate_principals(5)
    for size in range(1, 6):
        for l in by_size[size]:
            if flows_to(None, P("a^->"), l) and flows_to(None, P("b^<-"), l):
                assert flows_to(None, j, l), show(l)


@given(principals(), principals(), principals())
def test_join_and_meet_are_bounds(l, l2, l3):
    j, m = flow_join(l, l2), flow_meet(l, l2)
    assert flows_to(None, l, j) and flows_to(None, l2, j)
    assert flows_to(None, m, l) and flows_to(None, m, l2)
    if flows_to(None, l, l3) and flows_to(None, l2, l3):
        assert flows_to(None, j, l3)
    if flows_to(None, l3, l) and flows_to(None, l3, l2):
        assert flows_to(None, l3, m)


@given(principals())
def test_join_meet_identities(l):
    assert equivalent(None, flow_join(l, l), l)
    assert equivalent(None, flow_meet(P("top^->"), l), l)


# -- voice, view, project


@pytest.mark.parametrize("label, expected", [
    ("T^->", "T^<-"),
    ("(A & B)^->", "(A & B)^<-"),
    ("bot", "bot^<-"),
])
def test_voice(label, expected):
    assert equivalent(None, voice(P(label)), P(expected))


@pytest.mark.parametrize("label, expected", [
    ("T^<-", "T^->"),
    ("alice^-> & bob^<-", "bob^->"),
])
def test_view(label, expected):
    assert equivalent(None, view(P(label)), P(expected))


def test_view_of_voice_on_conf_labels():
    by_size = enumerate_principals(5)
    for size in range(1, 6):
        for l in by_size[size]:
            lc = project(l, CONF)
            back = view(voice(lc))
            assert proof_search([], back, lc) and proof_search([], lc, back), show(l)


def test_project_examples():
    assert equivalent(None, project(P("a & b^<-"), CONF), P("a^->"))
    assert proof_search([], project(P("a & b^<-"), CONF), P("a^->"))
    assert equivalent(None, project(Top(), INTEG), P("top^<-"))


@given(principals(), st.sampled_from((CONF, INTEG)))
def test_project_idempotent(p, aspect):
    once = project(p, aspect)
    assert normalize(project(once, aspect)) == normalize(once)


# -- concrete syntax and configuration files


@given(principals())
def test_show_parse_round_trip(p):
    assert parse_principal(show(p)) == p


def test_precedence():
    assert P("a & b | c") == Disj(Conj(a, b), c)
    assert P("a | b \\/ c") == Join(Disj(a, b), c)
    assert P("a & b^->") == Conj(a, Projection(b, CONF))
    assert P("(a & b)^<-") == Projection(Conj(a, b), INTEG)


def test_parse_errors_carry_position():
    with pytest.raises(lattice.ParseError) as info:
        P("a & ")
    assert info.value.line == 1


def test_config_round_trip(tmp_path):
    d = Delegations([("T", P("(A & B)^<-"))], ["A", "B", "T"])
    path = tmp_path / "lat.json"
    path.write_text(json.dumps(lattice.delegations_to_json(d)))
    d2 = lattice.load_lattice(path)
    assert acts_for(d2, P("T"), P("(A & B)^<-"))
    assert not acts_for(d2, P("T"), P("A^->"))


def test_no_delegations_default():
    assert acts_for(NO_DELEGATIONS, Bot(), Bot())
    assert canonical(P("a & a")) == a
