import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flafol.corpus import load_proof, load_theory, proof_entries
from flafol.kernel import Proof, check_proof, make
from flafol.ni import audit
from flafol.search import SearchConfig, bounded_prove, generate_cut_instances, generate_random_proofs, universe_of
from flafol.syntax import GP, TT, App, Belief, Implies, Rel, Says, Sequent, sequent_equal
from flafol.text import parse_proof
from flafol.transforms import (
    TransformError,
    classify_normal_form,
    eliminate_cut,
    extract_disjunct,
    normalize,
    odot_formula,
    odot_sequent,
    simulate,
    sf_eliminate,
    unsays_r,
)
from flafol.trust import SFDerivation, check_sf, refl_sf, var_sf_side

from .strategies import LABELS, PRINCIPALS, SIG

A, B = PRINCIPALS[0], PRINCIPALS[1]
L0, L1, L2 = LABELS
GENERATED = generate_random_proofs(SIG, SearchConfig(depth=6), 17, 80)
SAYS_GOALS = [p for p in generate_random_proofs(SIG, SearchConfig(depth=6), 23, 400) if isinstance(p.conclusion.goal.formula, Says)]


def proof(text):
    return parse_proof(text, SIG)


AX = "goal {R(A) @ <> |- R(A) @ <>}\n(Ax [i=0])"
# VarR at the root with an OrR1 child: a formula rule below a principal rule
OR_UNDER_VAR = """goal {R(A) @ <>.[A:L1], flows(L1, L0) @ <>.[A:L0] |- R(A) | R(B) @ <>.[A:L0]}
(VarR [k=0, t=L1] (OrR1 (Ax [i=0])) (Ax [i=1]))"""


def test_normal_form_tags_on_small_trees():
    assert classify_normal_form(proof(AX)).kind == "SecondNF"
    says = proof("goal {R(A) @ <>.[B:L1] |- B says[L1] R(A) @ <>}\n(SaysR (Ax [i=0]))")
    assert classify_normal_form(says).kind == "FirstNF"
    bad = proof(OR_UNDER_VAR)
    assert check_proof(SIG, bad).valid
    tag = classify_normal_form(bad)
    assert tag.kind == "NotNormal" and tag.path == ()


def test_normalize_permutes_principal_rule_upward():
    p = proof(OR_UNDER_VAR)
    n = normalize(SIG, p)
    assert check_proof(SIG, n).valid and n.conclusion == p.conclusion
    assert n.rule == "OrR1" and n.premises[0].rule == "VarR"
    assert classify_normal_form(n).kind == "FirstNF"


def test_normalize_leaves_axiom_alone():
    p = proof(AX)
    assert normalize(SIG, p) == p


@settings(max_examples=60)
@given(st.sampled_from(GENERATED))
def test_normalize_is_idempotent_on_tags(p):
    once = normalize(SIG, p)
    tag = classify_normal_form(once)
    assert tag.first_normal
    assert sequent_equal(once.conclusion, p.conclusion)
    assert classify_normal_form(normalize(SIG, once)).kind == tag.kind


def test_axiom_axiom_cut():
    lemma = proof(AX)
    use = proof("goal {R(A) @ <>, R(A) @ <> |- R(A) @ <>}\n(Ax [i=1])")
    out = eliminate_cut(SIG, lemma, use)
    assert out.rule == "Ax" and out.conclusion == lemma.conclusion


def test_cut_rejects_mismatched_context():
    lemma = proof(AX)
    use = proof("goal {R(B) @ <>, R(A) @ <> |- R(A) @ <>}\n(Ax [i=1])")
    with pytest.raises(TransformError) as err:
        eliminate_cut(SIG, lemma, use)
    assert err.value.reason == "ContextMismatch"


def test_cut_fuel_is_an_explicit_error():
    p1, p2 = generate_cut_instances(SIG, SearchConfig(depth=6), 3, 1)[0]
    with pytest.raises(TransformError) as err:
        eliminate_cut(SIG, p1, p2, fuel=0)
    assert err.value.reason == "FuelExhausted"


def test_unsays_cancels_says_right():
    p = proof("goal {R(A) @ <>.[B:L1] |- B says[L1] R(A) @ <>}\n(SaysR (Ax [i=0]))")
    out = unsays_r(SIG, p)
    assert out.rule == "Ax"
    assert out.conclusion.goal == Belief(Rel("R", (A,)), GP(L0, ((B, L1),)))


def test_unsays_on_friend_list():
    th = load_theory("friends")
    p = load_proof(next(e for e in proof_entries() if e.name == "cathy_at_friends"))
    out = unsays_r(th.sig, p)
    assert check_proof(th.sig, out).valid
    assert out.conclusion.goal.gp == GP(th.sig.default_label, ((App("Bob"), App("Friends")),))


def test_unsays_needs_a_says_goal():
    with pytest.raises(TransformError):
        unsays_r(SIG, proof(AX))


@settings(max_examples=80)
@given(st.sampled_from(SAYS_GOALS))
def test_unsays_on_generated_says_goals(p):
    out = unsays_r(SIG, p)
    f = p.conclusion.goal.formula
    assert check_proof(SIG, out).valid
    assert out.conclusion.goal == Belief(f.body, p.conclusion.goal.gp.push(f.principal, f.label))
    assert sequent_equal(Sequent(out.conclusion.context, p.conclusion.goal), p.conclusion)


def test_odot_examples():
    atom = Rel("R", (A,))
    assert odot_formula(B, L1, atom) == atom
    imp = Implies(atom, L2, Rel("R", (B,)))
    assert odot_formula(B, L1, imp) == Implies(Says(B, L1, atom), L2, Rel("R", (B,)))


def test_simulate_true_right():
    p = make(SIG, "TrueR", Sequent((), Belief(TT(), GP(L0, ((A, L2),)))))
    out = simulate(SIG, p, B, L1)
    assert out.rule == "TrueR"
    assert out.conclusion.goal.gp == GP(L0, ((B, L1), (A, L2)))


@settings(max_examples=60)
@given(st.sampled_from(GENERATED), st.sampled_from(PRINCIPALS), st.sampled_from(LABELS))
def test_simulate_matches_odot(p, q, lab):
    out = simulate(SIG, p, q, lab)
    assert check_proof(SIG, out).valid
    assert sequent_equal(out.conclusion, odot_sequent(q, lab, p.conclusion))


@settings(max_examples=40)
@given(st.integers(0, 10_000))
def test_cut_on_generated_instances(seed):
    p1, p2 = generate_cut_instances(SIG, SearchConfig(depth=6), seed, 1)[0]
    out = eliminate_cut(SIG, p1, p2)
    assert check_proof(SIG, out).valid
    assert sequent_equal(out.conclusion, Sequent(p1.conclusion.context, p2.conclusion.goal))


def test_sf_eliminate_reflexive_is_identity():
    p = proof(AX)
    d = refl_sf(p.conclusion.context, p.conclusion.goal.gp)
    assert sf_eliminate(SIG, p, d) == p


def test_sf_eliminate_variance_by_reflexivity():
    g = GP(L0, ((A, L1),))
    ctx = (Belief(Rel("R", (A,)), g),)
    p = make(SIG, "Ax", Sequent(ctx, ctx[0]), index=0)
    side = make(SIG, "FlowsToRefl", Sequent(ctx, var_sf_side(GP(L0), A, L1, L1)))
    d = SFDerivation("VarSF", ctx, g, g, (), (side,))
    assert check_sf(SIG, d).valid
    out = sf_eliminate(SIG, p, d)
    assert out.rule == "VarR" and out.premises[0] == p
    assert check_proof(SIG, out).valid


def test_sf_eliminate_hospital_forwarding():
    th = load_theory("hospital")
    p = load_proof(next(e for e in proof_entries() if e.name == "i1_can_write"))
    w = audit(th.sig, p, 1)
    fwd = w.ci.premises[0].sf
    assert fwd.rule == "FwdSF"
    s = Sequent(fwd.context, Belief(Rel("CanWrite", (App("I1"), App("lH"))), fwd.left))
    found = bounded_prove(th.sig, s, SearchConfig(depth=6, universe=universe_of(th.sig, s)))
    assert found.found
    out = sf_eliminate(th.sig, found.proof, fwd)
    assert check_proof(th.sig, out).valid
    assert out.conclusion.goal.gp == fwd.right
    assert fwd.right.stack == ((App("Bob"), App("lH")), (App("Bob"), App("lH")))


@pytest.mark.parametrize("name, want", [("cathy_decided", "left"), ("dave_decided", "right")])
def test_extract_disjunct_friend_list(name, want):
    th = load_theory("friends")
    p = load_proof(next(e for e in proof_entries() if e.name == name))
    side, sub = extract_disjunct(th.sig, p)
    assert side == want
    assert check_proof(th.sig, sub).valid
    assert sub.conclusion.goal.formula == getattr(p.conclusion.goal.formula, want)


def test_extract_disjunct_gives_up_on_case_analysis():
    th = load_theory("abstract")
    p = load_proof(next(e for e in proof_entries() if e.name == "or_commute"))
    assert extract_disjunct(th.sig, p) is None


def test_transforms_reject_invalid_input():
    broken = Proof("Ax", proof(AX).conclusion, (), 5)
    for fn in (lambda: normalize(SIG, broken), lambda: simulate(SIG, broken, A, L1)):
        with pytest.raises(TransformError) as err:
            fn()
        assert err.value.reason == "InputInvalid"
