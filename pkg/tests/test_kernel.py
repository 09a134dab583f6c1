import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flafol.corpus import load_proof, load_theory, proof_entries
from flafol.kernel import (
    PRINCIPAL_RULES,
    RULE_PARAMS,
    Proof,
    RuleError,
    check_proof,
    iter_nodes,
    proof_stats,
    replace_at,
    rule_schema,
)
from flafol.search import SearchConfig, generate_random_proofs
from flafol.syntax import GP, App, Belief, Forall, Rel, Sequent, Var
from flafol.text import parse_proof

from .strategies import SIG

L0 = GP(App("L0"))
GENERATED = generate_random_proofs(SIG, SearchConfig(depth=6), 5, 60)


def proof(text):
    return parse_proof(text, SIG)


def test_axiom_and_bad_index():
    assert check_proof(SIG, proof("goal {R(A) @ <> |- R(A) @ <>}\n(Ax [i=0])")).valid
    rep = check_proof(SIG, proof("goal {R(A) @ <> |- R(A) @ <>}\n(Ax [i=3])"))
    assert (rep.valid, rep.reason, rep.path) == (False, "AddressOutOfRange", ())


def test_implication_left_replaces_in_place():
    good = "goal {R(A) ->[L0] R(B) @ <>, R(A) @ <> |- R(B) @ <>}\n(ImpL [i=0] (Ax [i=0]) (Ax [i=0]))"
    assert check_proof(SIG, proof(good)).valid
    rep = check_proof(SIG, proof(good.replace("(Ax [i=0]))", "(Ax [i=1]))")))
    assert (rep.reason, rep.path) == ("RuleMismatch", (1,))


def test_forall_right_freshness():
    x = Var("x", "Principal")
    concl = Sequent((Belief(Rel("R", (x,)), L0),), Belief(Forall("x", "Principal", Rel("R", (x,))), L0))
    leaf = Proof("Ax", Sequent(concl.context, Belief(Rel("R", (x,)), L0)), (), 0)
    rep = check_proof(SIG, Proof("ForallR", concl, (leaf,), var="x"))
    assert rep.reason == "FreshnessViolation"


def test_primed_rules_only_in_lenient_mode():
    th = load_theory("abstract")
    e = next(e for e in proof_entries(rejected=True) if e.name == "says_over_impl")
    p = load_proof(e)
    assert check_proof(th.sig, p).reason == "UnknownRule"
    assert check_proof(th.sig, p, strict=False).valid


def test_hospital_statistics_are_frozen():
    th = load_theory("hospital")
    p = load_proof(next(e for e in proof_entries() if e.name == "i1_can_write"))
    stats = check_proof(th.sig, p).stats
    assert stats == {
        "nodes": 8,
        "depth": 4,
        "histogram": {"Ax": 4, "FwdL": 1, "OrL": 1, "SelfLIntro": 1, "SelfRIntro": 1},
    }


def test_schema_text_for_every_rule():
    for name in RULE_PARAMS:
        text = rule_schema(name)
        assert text.startswith(name)
    with pytest.raises(RuleError):
        rule_schema("Cut")


def test_generated_proofs_check():
    for p in GENERATED:
        rep = check_proof(SIG, p)
        assert rep.valid, rep
        assert rep.stats == proof_stats(p)


@settings(max_examples=150)
@given(st.sampled_from(GENERATED), st.data())
def test_changing_any_conclusion_is_caught(p, data):
    nodes = list(iter_nodes(p))
    path, node = data.draw(st.sampled_from(nodes))
    bogus = Belief(Rel("R", (App("C"),)), GP(App("L2"), ((App("B"), App("L2")),) * 3))
    broken = replace_at(p, path, Proof(node.rule, Sequent(node.conclusion.context, bogus), node.premises, node.index, node.pos, node.term, node.var))
    rep = check_proof(SIG, broken)
    assert not rep.valid
    # the failure is at the edited node or at its parent
    assert rep.path in (path, path[:-1])


@settings(max_examples=100)
@given(st.sampled_from(GENERATED), st.data())
def test_dropping_a_premise_is_caught(p, data):
    inner = [(path, n) for path, n in iter_nodes(p) if n.premises]
    if not inner:
        return
    path, node = data.draw(st.sampled_from(inner))
    rep = check_proof(SIG, replace_at(p, path, node.with_premises(node.premises[1:])))
    assert not rep.valid and rep.path == path and rep.reason == "RuleMismatch"


def test_principal_rule_set():
    assert PRINCIPAL_RULES == {"SelfLIntro", "SelfLElim", "SelfRIntro", "SelfRElim", "VarL", "VarR", "FwdL", "FwdR"}
