import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flafol.corpus import load_proof, load_theory, proof_entries
from flafol.csc import csc_rules_used
from flafol.kernel import check_proof, make
from flafol.ni import Influence, NIError, Pruned, audit, audit_sf_only, check_witness
from flafol.render import ci_shape
from flafol.search import SearchConfig, bounded_prove, generate_random_proofs
from flafol.syntax import GP, TT, App, Belief, Sequent, has_or
from flafol.text import parse_belief, parse_proof
from flafol.trust import ci_nodes

from .strategies import LABELS, SIG

GENERATED = generate_random_proofs(SIG, SearchConfig(depth=6), 61, 60)


def _corpus(theory, name):
    th = load_theory(theory)
    return th, load_proof(next(e for e in proof_entries() if (e.theory, e.name) == (theory, name)))


def test_unused_assumption_is_pruned():
    ctx = (parse_belief("R(A) @ <>", SIG),)
    p = make(SIG, "TrueR", Sequent(ctx, Belief(TT(), GP(LABELS[0]))))
    w = audit(SIG, p, 0)
    assert isinstance(w, Pruned)
    assert w.proof.rule == "TrueR" and w.proof.conclusion.context == ()


def test_says_shift_is_reflexive_influence():
    th, p = _corpus("abstract", "says_shift")
    for fn in (lambda: audit(th.sig, p, 0), lambda: audit_sf_only(th.sig, p, 0, {})):
        w = fn()
        assert isinstance(w, Influence)
        assert w.g1 == w.g2 == GP(th.sig.default_label, ((App("Alice"), App("l")),))
        assert ci_shape(w.ci) == "SF-CI(ReflSF)"
        assert check_witness(th.sig, p.conclusion, 0, w).valid


def test_hospital_witness():
    th, p = _corpus("hospital", "i1_can_write")
    w = audit(th.sig, p, 1)
    assert isinstance(w, Influence)
    assert ci_shape(w.ci) == "TransCI(SF-CI(FwdSF), SF-CI(SelfRSF))"
    assert w.suffix == ()
    assert "CSCOrL2" in csc_rules_used(w.csc)
    # the branch assumption discovered by the case split is part of the supercontext
    branch = Belief(parse_belief("canwrite(I2, lH) @ <>", th.sig).formula, GP(th.sig.default_label, ((App("Bob"), App("lH")),)))
    assert branch in w.delta
    same = audit_sf_only(th.sig, p, 1, {})
    assert (same.g1, same.g2, ci_shape(same.ci)) == (w.g1, w.g2, ci_shape(w.ci))


def test_sql_endorsement_needs_a_discharge():
    th, p = _corpus("sql", "endorse_request")
    w = audit(th.sig, p, 2)
    assert "ImpCI" in {n.rule for n in ci_nodes(w.ci)}
    with pytest.raises(NIError) as err:
        audit_sf_only(th.sig, p, 2, {})
    assert err.value.reason == "ImplicationNotDischarged"


def test_discharged_implication_is_cut_away():
    text = """goal {R(A) ->[L0] (A says[L1] R(B)) @ <>, A says[L1] R(B) @ <>, R(A) @ <> |- A says[L1] R(B) @ <>}
(ImpL [i=0] (Ax [i=1]) (Ax [i=0]))"""
    p = parse_proof(text, SIG)
    assert check_proof(SIG, p).valid
    w = audit(SIG, p, 2)
    assert "ImpCI" in {n.rule for n in ci_nodes(w.ci)}
    ctx = p.conclusion.context
    lemma = bounded_prove(SIG, Sequent((ctx[1],), ctx[0]), SearchConfig(depth=4)).proof
    # once the implication is proved outright, R(A) is no longer needed at all
    sf = audit_sf_only(SIG, p, 2, {0: lemma})
    assert isinstance(sf, Pruned)
    assert check_witness(SIG, p.conclusion, 2, sf).valid
    assert all(b != ctx[2] for b in sf.proof.conclusion.context)


def test_discharged_implication_keeps_speaks_for_influence():
    text = """goal {R(A) ->[L0] (A says[L1] R(B)) @ <>, A says[L1] R(B) @ <>, A says[L1] R(B) @ <> |- A says[L1] R(B) @ <>}
(Ax [i=2])"""
    p = parse_proof(text, SIG)
    ctx = p.conclusion.context
    lemma = bounded_prove(SIG, Sequent((ctx[1],), ctx[0]), SearchConfig(depth=4)).proof
    w = audit_sf_only(SIG, p, 2, {0: lemma})
    assert isinstance(w, Influence)
    assert "ImpCI" not in {n.rule for n in ci_nodes(w.ci)}
    assert "CSCWeakening" in csc_rules_used(w.csc)
    assert w.csc.sequent == p.conclusion
    assert check_witness(SIG, p.conclusion, 2, w).valid


def test_invalid_input_is_rejected():
    p = parse_proof("goal {R(A) @ <> |- R(A) @ <>}\n(Ax [i=0])", SIG)
    with pytest.raises(NIError) as err:
        audit(SIG, p, 4)
    assert err.value.reason == "InputInvalid"


@settings(max_examples=80)
@given(st.sampled_from(GENERATED), st.data())
def test_witnesses_recheck(p, data):
    ctx = p.conclusion.context
    marked = data.draw(st.integers(0, len(ctx) - 1))
    w = audit(SIG, p, marked)
    assert check_witness(SIG, p.conclusion, marked, w).valid
    if isinstance(w, Pruned):
        assert w.proof.conclusion.goal == p.conclusion.goal
    elif not any(has_or(b.formula) for b in ctx):
        assert not {"CSCOrL1", "CSCOrL2"} & set(csc_rules_used(w.csc))


# High beliefs sit at L1; only L0 flows to L1, so nothing at L1 may change what is provable at L0.
LOW = ("A says[L0] R(A) @ <>", "flows(L0, L1) @ <>.[A:L0]", "flows(L0, L1) @ <>.[A:L1]")
BATTERY = [f"A says[L0] R({x}) @ <>" for x in "ABC"] + [f"A says[L0] S({x}, L0) @ <>" for x in "ABC"]
HIGH = [f"A says[L1] R({x}) @ <>" for x in "ABC"] + [f"A says[L1] S({x}, L0) @ <>" for x in "ABC"]


def _provable_low(high):
    ctx = tuple(parse_belief(s, SIG) for s in (*LOW, *high))
    out = set()
    for goal in BATTERY:
        s = Sequent(ctx, parse_belief(goal, SIG))
        if bounded_prove(SIG, s, SearchConfig(depth=5, timeout=10)).found:
            out.add(goal)
    return out


@settings(max_examples=15)
@given(st.lists(st.sampled_from(HIGH), max_size=3), st.lists(st.sampled_from(HIGH), max_size=3))
def test_high_beliefs_do_not_change_low_results(h1, h2):
    assert _provable_low(h1) == _provable_low(h2) == {"A says[L0] R(A) @ <>"}
