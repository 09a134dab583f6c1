import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flafol.corpus import load_theory
from flafol.kernel import check_proof
from flafol.search import (
    SearchConfig,
    bounded_prove,
    generate_cut_instances,
    generate_random_proofs,
    prove_or_none,
    universe_of,
)
from flafol.syntax import GP, And, Belief, Or, Rel, Sequent, sequent_equal
from flafol.text import parse_belief, parse_sequent

from .strategies import LABELS, PRINCIPALS, SIG


def test_negative_depth_is_rejected():
    with pytest.raises(ValueError):
        SearchConfig(depth=-1)


def test_found_proof_checks_and_matches_goal():
    s = parse_sequent("{R(A) @ <>, R(B) @ <> |- R(B) & (R(C) | R(A)) @ <>}", SIG)
    out = bounded_prove(SIG, s, SearchConfig(depth=4))
    assert out.status == "Found"
    assert check_proof(SIG, out.proof).valid
    assert sequent_equal(out.proof.conclusion, s)


def test_unprovable_goal_exhausts():
    s = parse_sequent("{R(A) @ <> |- R(B) @ <>}", SIG)
    out = bounded_prove(SIG, s, SearchConfig(depth=5))
    assert out.status == "ExhaustedBounds" and out.proof is None
    assert prove_or_none(SIG, s, depth=5) is None


def _friends_dave():
    th = load_theory("friends")
    text = "(Bob says[f(Dave)] IsFriend(Dave)) | (Bob says[f(Dave)] !IsFriend(Dave)) @ <>"
    s = Sequent(tuple(th.context()), parse_belief(text, th.sig))
    return th.sig, s


def test_tiny_timeout_reports_timed_out():
    sig, s = _friends_dave()
    out = bounded_prove(sig, s, SearchConfig(depth=7, universe=universe_of(sig, s), timeout=0.0))
    assert out.status == "TimedOut"


def test_call_budget_counts_as_exhausted():
    sig, s = _friends_dave()
    out = bounded_prove(sig, s, SearchConfig(depth=7, universe=universe_of(sig, s), timeout=None, max_calls=50))
    assert out.status == "ExhaustedBounds"
    assert out.explored == 51


def test_friend_list_alice_is_decided():
    th = load_theory("friends")
    text = "(Bob says[f(Alice)] IsFriend(Alice)) | (Bob says[f(Alice)] !IsFriend(Alice)) @ <>"
    s = Sequent(tuple(th.context()), parse_belief(text, th.sig))
    out = bounded_prove(th.sig, s, SearchConfig(depth=7, universe=universe_of(th.sig, s), timeout=60))
    assert out.found and check_proof(th.sig, out.proof).valid


def test_generators_are_deterministic():
    cfg = SearchConfig(depth=6)
    assert generate_random_proofs(SIG, cfg, 5, 8) == generate_random_proofs(SIG, cfg, 5, 8)
    assert generate_cut_instances(SIG, cfg, 5, 4) == generate_cut_instances(SIG, cfg, 5, 4)
    assert generate_random_proofs(SIG, cfg, 5, 8) != generate_random_proofs(SIG, cfg, 6, 8)


def test_cut_instances_share_context():
    for p1, p2 in generate_cut_instances(SIG, SearchConfig(depth=6), 9, 10):
        ctx = p1.conclusion.context
        assert p2.conclusion.context == ctx + (p1.conclusion.goal,)
        assert check_proof(SIG, p1).valid and check_proof(SIG, p2).valid


# Oracle: with only atoms at the root in the context, a positive and/or goal at the root is
# provable exactly when it evaluates to true with "true" meaning "present in the context".
ROOT = GP(LABELS[0])
ATOMS = [Rel("R", (p,)) for p in PRINCIPALS]
positive = st.recursive(
    st.sampled_from(ATOMS),
    lambda sub: st.builds(And, sub, sub) | st.builds(Or, sub, sub),
    max_leaves=5,
)


def _holds(phi, facts) -> bool:
    if isinstance(phi, And):
        return _holds(phi.left, facts) and _holds(phi.right, facts)
    if isinstance(phi, Or):
        return _holds(phi.left, facts) or _holds(phi.right, facts)
    return phi in facts


@settings(max_examples=80)
@given(st.lists(st.sampled_from(ATOMS), max_size=3, unique=True), positive)
def test_search_agrees_with_evaluation_oracle(facts, goal):
    s = Sequent(tuple(Belief(a, ROOT) for a in facts), Belief(goal, ROOT))
    out = bounded_prove(SIG, s, SearchConfig(depth=6, principal_rules=False))
    assert out.found == _holds(goal, set(facts))
    if out.found:
        assert check_proof(SIG, out.proof).valid
