from hypothesis import given, settings
from hypothesis import strategies as st

from flafol.corpus import load_theory
from flafol.csc import (
    check_csc,
    context_union,
    csc_for_path,
    csc_refl,
    csc_rules_used,
    csc_union,
    enumerate_cscs,
    same_multiset,
)
from flafol.kernel import iter_nodes
from flafol.search import SearchConfig, generate_random_proofs
from flafol.syntax import GP, App, Belief, Rel, Sequent, belief_key
from flafol.text import parse_belief, parse_sequent

from .strategies import SIG

GENERATED = generate_random_proofs(SIG, SearchConfig(depth=6), 41, 60)


def _hospital():
    th = load_theory("hospital")
    bob, high = App("Bob"), App("lH")
    goal = Belief(Rel("CanWrite", (App("I1"), high)), GP(th.sig.default_label, ((bob, high),)))
    return th.sig, Sequent(tuple(th.context()), goal)


def test_reflexive_csc():
    sig, s = _hospital()
    d = csc_refl(s)
    assert check_csc(sig, d).valid and d.delta == s.context


def test_depth_zero_is_only_reflexivity():
    sig, s = _hospital()
    out = enumerate_cscs(sig, s, 0)
    assert len(out) == 1
    delta, d = out[0]
    assert delta == s.context and d.rule == "CSCRefl"


def test_hospital_or_branches_are_discovered():
    sig, s = _hospital()
    out = enumerate_cscs(sig, s, 2)
    i2_branch = Belief(Rel("CanWrite", (App("I2"), App("lH"))), s.goal.gp)
    i1_branch = Belief(Rel("CanWrite", (App("I1"), App("lH"))), s.goal.gp)
    via = {}
    for delta, d in out:
        assert check_csc(sig, d).valid
        for b in (i1_branch, i2_branch):
            if b in delta:
                via.setdefault(b, set()).update(csc_rules_used(d))
    assert "CSCOrL2" in via[i2_branch]
    assert "CSCOrL1" in via[i1_branch]


def test_union_of_branches_checks():
    sig, s = _hospital()
    out = enumerate_cscs(sig, s, 2)
    left = next(d for _, d in out if "CSCOrL1" in csc_rules_used(d))
    right = next(d for _, d in out if "CSCOrL2" in csc_rules_used(d))
    u = csc_union(left, right)
    assert check_csc(sig, u).valid
    assert same_multiset(u.delta, context_union(left.delta, right.delta))


def test_union_takes_per_belief_maxima():
    a = parse_belief("R(A) @ <>", SIG)
    b = parse_belief("R(B) @ <>", SIG)
    assert same_multiset(context_union((a, a, b), (a, b, b)), (a, a, b, b))


def test_atomic_sequent_has_only_structural_supercontexts():
    s = parse_sequent("{R(A) @ <>, S(B, L1) @ <>.[A:L1] |- R(B) @ <>}", SIG)
    distinct = {belief_key(b) for b in s.context}
    for delta, d in enumerate_cscs(SIG, s, 3):
        assert {belief_key(b) for b in delta} == distinct
        assert set(csc_rules_used(d)) <= {"CSCRefl", "CSCContraction", "CSCExchange", "CSCUnion"}
        assert check_csc(SIG, d).valid


def test_disjunction_free_sequent_never_branches():
    s = parse_sequent("{A says[L1] (R(A) & R(B)) @ <>, forall x:Principal. S(x, L2) @ <> |- R(C) @ <>}", SIG)
    for _, d in enumerate_cscs(SIG, s, 3):
        assert not {"CSCOrL1", "CSCOrL2"} & set(csc_rules_used(d))


@settings(max_examples=60)
@given(st.sampled_from(GENERATED), st.data())
def test_every_node_context_is_a_csc(p, data):
    path, node = data.draw(st.sampled_from(list(iter_nodes(p))))
    d = csc_for_path(p, path)
    assert same_multiset(d.delta, node.conclusion.context)
    assert d.sequent == p.conclusion
    assert check_csc(SIG, d).valid


@settings(max_examples=30)
@given(st.sampled_from(GENERATED), st.data())
def test_unions_of_node_cscs_check(p, data):
    nodes = list(iter_nodes(p))
    (a, _), (b, _) = data.draw(st.sampled_from(nodes)), data.draw(st.sampled_from(nodes))
    assert check_csc(SIG, csc_union(csc_for_path(p, a), csc_for_path(p, b))).valid
