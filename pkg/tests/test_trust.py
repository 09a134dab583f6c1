from hypothesis import given, settings

from flafol.corpus import load_proof, load_theory, proof_entries
from flafol.ni import audit
from flafol.search import SearchConfig
from flafol.syntax import GP, And, Belief, App, Exists, Forall, Implies, Or, Rel, Says, Var, substitute
from flafol.trust import (
    ci_nodes,
    check_ci,
    check_sf,
    g_set,
    refl_sf,
    search_ci,
    search_sf,
    sf_ci,
    trans_sf,
)

from .strategies import LABELS, PRINCIPALS, SIG, formulas, gps

A, B, C = PRINCIPALS
L0, L1, L2 = LABELS
ROOT = GP(L0)


def R(t):
    return Rel("R", (t,))


def test_g_set_atomic_and_says():
    assert list(g_set(R(A), ROOT)) == [ROOT]
    assert list(g_set(Says(B, L1, R(A)), ROOT)) == [ROOT.push(B, L1)]
    assert set(g_set(And(R(A), Says(B, L1, R(A))), ROOT)) == {ROOT, ROOT.push(B, L1)}


def test_g_set_implication_keeps_consequent_only():
    phi = Implies(Says(A, L1, R(A)), L0, Says(C, L2, R(C)))
    assert list(g_set(phi, ROOT)) == [ROOT.push(C, L2)]


def test_g_set_quantifier_is_generic():
    x = Var("x", "Principal")
    gs = g_set(Forall("x", "Principal", Says(x, L1, R(x))), ROOT)
    assert len(gs) == 1
    assert ROOT.push(A, L1) in gs
    assert ROOT.push(A, L2) not in gs
    # enumerating the generic over a 3-constant universe equals the union of the instances
    want = {g for t in PRINCIPALS for g in g_set(Says(t, L1, R(t)), ROOT)}
    assert set(gs.instances({"Principal": PRINCIPALS})) == want


def _leaves(phi) -> int:
    if isinstance(phi, (And, Or)):
        return _leaves(phi.left) + _leaves(phi.right)
    if isinstance(phi, Implies):
        return _leaves(phi.right)
    if isinstance(phi, (Forall, Exists, Says)):
        return _leaves(phi.body)
    return 1


@given(formulas(), gps())
def test_g_set_is_finite_and_bounded(phi, g):
    gs = g_set(phi, g)
    assert 1 <= len(gs) <= _leaves(phi)
    assert all(p.ground == g.ground and p.stack[: len(g.stack)] == g.stack for p in gs)


def _closed(phi, bound=()):
    """Instantiate every quantifier with A / L0 so membership is ground."""
    if isinstance(phi, (Forall, Exists)):
        t = A if phi.sort == "Principal" else L0
        return _closed(substitute(phi.body, Var(phi.var, phi.sort), t))
    return phi


@settings(max_examples=200)
@given(formulas(), gps())
def test_g_set_contains_instances(phi, g):
    # an instance of a quantified formula mentions a member of the generic set
    gs = g_set(phi, g)
    for h in g_set(_closed(phi), g):
        assert gs.match(h, SIG) is not None


def test_reflexive_sf_and_ci():
    d = refl_sf((), ROOT)
    assert check_sf(SIG, d).valid
    assert check_ci(SIG, sf_ci(d)).valid
    assert search_sf(SIG, (), ROOT, ROOT, 0).rule == "ReflSF"


def _hospital_delta():
    th = load_theory("hospital")
    p = load_proof(next(e for e in proof_entries() if e.name == "i1_can_write"))
    return th.sig, audit(th.sig, p, 1).delta


def test_hospital_speaks_for_in_discovered_context():
    sig, delta = _hospital_delta()
    bob, i2, high = App("Bob"), App("I2"), App("lH")
    g1 = GP(sig.default_label, ((bob, high), (i2, high)))
    mid = GP(sig.default_label, ((bob, high), (bob, high)))
    g2 = GP(sig.default_label, ((bob, high),))
    fwd = search_sf(sig, delta, g1, mid, 1)
    assert fwd is not None and fwd.rule == "FwdSF" and check_sf(sig, fwd).valid
    chain = search_sf(sig, delta, g1, g2, 3)
    assert chain is not None and check_sf(sig, chain).valid
    assert check_sf(sig, trans_sf(fwd, search_sf(sig, delta, mid, g2, 1))).valid
    assert check_ci(sig, sf_ci(chain)).valid


def test_hospital_without_the_branch_has_no_speaks_for():
    th = load_theory("hospital")
    bob, i2, high = App("Bob"), App("I2"), App("lH")
    g1 = GP(th.sig.default_label, ((bob, high), (i2, high)))
    assert search_sf(th.sig, tuple(th.context()), g1, GP(th.sig.default_label, ((bob, high),)), 4) is None


def test_private_friend_list_does_not_speak_for_public():
    th = load_theory("friends_restricted")
    bob = App("Bob")
    g1 = GP(th.sig.default_label, ((bob, App("Friends")),))
    g2 = GP(th.sig.default_label, ((bob, App("Public")),))
    assert search_sf(th.sig, tuple(th.context()), g1, g2, 4) is None


def test_endorsement_implication_influences():
    th = load_theory("sql")
    sysp = App("System")
    g1 = GP(th.sig.default_label, ((sysp, App("LInt")),))
    g2 = GP(th.sig.default_label, ((sysp, App("HInt")),))
    ctx = tuple(th.context())
    assert search_sf(th.sig, ctx, g1, g2, 4) is None
    # the quantified endorsement only acts once instantiated, as in the proof's supercontext
    assert search_ci(th.sig, ctx, g1, g2, 3) is None
    endorse = th.axiom("endorse_sanitized")
    inst = Belief(substitute(endorse.formula.body, Var("x", "Value"), App("req")), endorse.gp)
    d = search_ci(th.sig, ctx + (inst,), g1, g2, 3)
    assert d is not None and check_ci(th.sig, d).valid
    assert "ImpCI" in {n.rule for n in ci_nodes(d)}


def test_two_hop_implication_chain():
    from flafol.text import parse_belief

    ctx = tuple(
        parse_belief(s, SIG)
        for s in ("(A says[L1] R(A)) ->[L0] (B says[L2] R(B)) @ <>", "(B says[L2] R(B)) ->[L0] (C says[L0] R(C)) @ <>")
    )
    cfg = SearchConfig(depth=3, universe={"Principal": PRINCIPALS, "Label": LABELS})
    d = search_ci(SIG, ctx, ROOT.push(A, L1), ROOT.push(C, L0), 4, cfg)
    assert d is not None and check_ci(SIG, d).valid
    assert [n.rule for n in ci_nodes(d)].count("ImpCI") == 2


PERMISSIONS = (
    "flows(L1, L2) @ <>.[A:L2]",
    "canread(B, L1) @ <>.[A:L1]",
    "canwrite(A, L1) @ <>.[B:L1]",
)


@settings(max_examples=40)
@given(gps(1), gps(1))
def test_search_results_always_check(g1, g2):
    from flafol.text import parse_belief

    ctx = tuple(parse_belief(s, SIG) for s in PERMISSIONS)
    cfg = SearchConfig(depth=2, universe={"Principal": PRINCIPALS, "Label": LABELS})
    d = search_sf(SIG, ctx, g1, g2, 2, cfg)
    if d is not None:
        assert check_sf(SIG, d).valid and (d.left, d.right) == (g1, g2)
        assert check_ci(SIG, sf_ci(d)).valid
