"""Compatible supercontexts: contexts a proof of a sequent may pass through.

A CSC derivation is a path of proof-rule steps from the sequent to some other
sequent, ending in CSCRefl (or a union of such paths).  Steps that move a
belief through Var/Fwd rules carry kernel proofs of the permission premises.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace

from .kernel import PRINCIPAL_RULES, CheckReport, Proof, RuleError, check_proof, expected_premises
from .search import SearchConfig, bounded_prove, universe_of
from .syntax import (
    LABEL,
    PRINCIPAL,
    And,
    Belief,
    Exists,
    Forall,
    Implies,
    Or,
    Says,
    Sequent,
    Signature,
    belief_key,
    fresh_name,
    fv_sequent,
    sequent_equal,
)

# CSC rule -> (proof rule it follows, premise it enters)
CSC_RULES = {
    "CSCContraction": ("Contraction", 0),
    "CSCExchange": ("Exchange", 0),
    "CSCWeakening": ("Weakening", 0),
    "CSCAndL": ("AndL", 0),
    "CSCAndR1": ("AndR", 0),
    "CSCAndR2": ("AndR", 1),
    "CSCOrL1": ("OrL", 0),
    "CSCOrL2": ("OrL", 1),
    "CSCOrR1": ("OrR1", 0),
    "CSCOrR2": ("OrR2", 0),
    "CSCImpL1": ("ImpL", 1),
    "CSCImpL2": ("ImpL", 0),
    "CSCImpR": ("ImpR", 0),
    "CSCForallL": ("ForallL", 0),
    "CSCForallR": ("ForallR", 0),
    "CSCExistsL": ("ExistsL", 0),
    "CSCExistsR": ("ExistsR", 0),
    "CSCSaysL": ("SaysL", 0),
    "CSCSaysR": ("SaysR", 0),
    "CSCSelfLIntro": ("SelfLIntro", 0),
    "CSCSelfLElim": ("SelfLElim", 0),
    "CSCSelfRIntro": ("SelfRIntro", 0),
    "CSCSelfRElim": ("SelfRElim", 0),
    "CSCVarL": ("VarL", 0),
    "CSCVarR": ("VarR", 0),
    "CSCFwdL": ("FwdL", 0),
    "CSCFwdR": ("FwdR", 0),
}
BY_STEP = {v: k for k, v in CSC_RULES.items()}
# CSCSide enters a premise that proves a permission atom
SIDE_ENTRY = {"VarL", "VarR", "FwdL", "FwdR", "FlowsToTrans", "CRVar", "CWVar"}


@dataclass(frozen=True)
class CSCDerivation:
    rule: str
    delta: tuple
    sequent: Sequent
    premises: tuple = ()
    index: int | None = None
    pos: int | None = None
    term: object = None
    var: str | None = None
    sides: tuple = ()  # kernel proofs of the permission premises (CSCVar*/CSCFwd*)
    via: str | None = None  # CSCSide: the proof rule
    branch: int | None = None  # CSCSide: which premise


def context_union(a: tuple, b: tuple) -> tuple:
    """Multiset union keyed by (alpha class, principal), keeping the larger multiplicity."""
    have = Counter(belief_key(x) for x in a)
    out = list(a)
    used: Counter = Counter()
    for x in b:
        k = belief_key(x)
        used[k] += 1
        if used[k] > have[k]:
            out.append(x)
    return tuple(out)


def same_multiset(a: tuple, b: tuple) -> bool:
    return Counter(belief_key(x) for x in a) == Counter(belief_key(x) for x in b)


def csc_refl(s: Sequent) -> CSCDerivation:
    return CSCDerivation("CSCRefl", s.context, s)


def csc_union(d1: CSCDerivation, d2: CSCDerivation) -> CSCDerivation:
    return CSCDerivation("CSCUnion", context_union(d1.delta, d2.delta), d1.sequent, (d1, d2))


def _step(node: Proof, j: int, child: CSCDerivation) -> CSCDerivation:
    """The CSC step following proof node `node` into its premise j."""
    rule = node.rule
    kw = dict(index=node.index, pos=node.pos, term=node.term, var=node.var)
    if (rule, j) in BY_STEP:
        sides = tuple(node.premises[1:]) if rule in PRINCIPAL_RULES and rule[:3] in ("Var", "Fwd") else ()
        return CSCDerivation(BY_STEP[(rule, j)], child.delta, node.conclusion, (child,), sides=sides, **kw)
    if rule in SIDE_ENTRY:
        return CSCDerivation("CSCSide", child.delta, node.conclusion, (child,), via=rule, branch=j, **kw)
    raise RuleError("RuleMismatch", f"no compatible-supercontext step through {rule} premise {j}")


def csc_for_path(p: Proof, path) -> CSCDerivation:
    """Derivation of  (context at `path`) << (end sequent of p)."""
    nodes = [p]
    for j in path:
        nodes.append(nodes[-1].premises[j])
    d = csc_refl(nodes[-1].conclusion)
    for node, j in zip(reversed(nodes[:-1]), reversed(tuple(path))):
        d = _step(node, j, d)
    return d


def check_csc(sig: Signature, d: CSCDerivation) -> CheckReport:
    stack = [((), d)]
    while stack:
        path, n = stack.pop()
        fail = _check_node(sig, n, path)
        if fail is not None:
            return fail
        stack.extend((path + (j,), c) for j, c in enumerate(n.premises))
    return CheckReport(True)


def _check_node(sig, n: CSCDerivation, path) -> CheckReport | None:
    def bad(reason, msg):
        return CheckReport(False, path, reason, f"{n.rule}: {msg}")

    if n.rule == "CSCRefl":
        if n.premises or tuple(n.delta) != tuple(n.sequent.context):
            return bad("RuleMismatch", "the supercontext is not the sequent's context")
        return None
    if n.rule == "CSCUnion":
        if len(n.premises) != 2:
            return bad("RuleMismatch", "needs two premises")
        a, b = n.premises
        if not (sequent_equal(a.sequent, n.sequent) and sequent_equal(b.sequent, n.sequent)):
            return bad("RuleMismatch", "premises are about a different sequent")
        if not same_multiset(n.delta, context_union(a.delta, b.delta)):
            return bad("RuleMismatch", "the supercontext is not the union of the premises'")
        return None
    if n.rule == "CSCSide":
        rule, j = n.via, n.branch
        if rule not in SIDE_ENTRY or not isinstance(j, int) or (rule[:3] in ("Var", "Fwd") and j == 0):
            return bad("RuleMismatch", "CSCSide only enters permission premises")
    elif n.rule in CSC_RULES:
        rule, j = CSC_RULES[n.rule]
    else:
        return bad("UnknownRule", "not a compatible-supercontext rule")
    try:
        want = expected_premises(sig, rule, n.sequent, n.index, n.pos, n.term, n.var)
    except RuleError as e:
        return CheckReport(False, path, e.reason, f"{n.rule}: {e.message}")
    if len(n.premises) != 1 or j >= len(want):
        return bad("RuleMismatch", "wrong number of premises")
    child = n.premises[0]
    if not sequent_equal(child.sequent, want[j]):
        return bad("RuleMismatch", "premise is about the wrong sequent")
    if tuple(child.delta) != tuple(n.delta):
        return bad("ContextMismatch", "the supercontext changes across a step")
    if n.rule in ("CSCVarL", "CSCVarR", "CSCFwdL", "CSCFwdR"):
        side_want = want[1:]
        if len(n.sides) != len(side_want):
            return bad("RuleMismatch", "missing permission proofs")
        for k, (prf, s) in enumerate(zip(n.sides, side_want)):
            if not isinstance(prf, Proof) or not sequent_equal(prf.conclusion, s):
                return bad("RuleMismatch", f"side proof {k} proves the wrong sequent")
            rep = check_proof(sig, prf)
            if not rep.valid:
                return CheckReport(False, path, rep.reason, f"{n.rule}: side proof {k}: {rep.message}")
    return None


def csc_rules_used(d: CSCDerivation) -> Counter:
    out: Counter = Counter()
    stack = [d]
    while stack:
        n = stack.pop()
        out[n.rule] += 1
        stack.extend(n.premises)
    return out


# ---------------------------------------------------------------- enumeration


def _moves(sig: Signature, s: Sequent, universe: dict, sides_cfg: SearchConfig | None):
    """(rule, params, premise index, side proofs) for every CSC step out of s."""
    ctx, goal = s.context, s.goal
    phi = goal.formula
    busy = fv_sequent(s)
    for i, b in enumerate(ctx):
        f = b.formula
        yield "Contraction", dict(index=i), 0
        if i + 1 < len(ctx):
            yield "Exchange", dict(index=i), 0
        match f:
            case And():
                yield "AndL", dict(index=i), 0
            case Or():
                yield "OrL", dict(index=i), 0
                yield "OrL", dict(index=i), 1
            case Implies():
                yield "ImpL", dict(index=i), 0
                yield "ImpL", dict(index=i), 1
            case Forall(_, srt, _):
                for t in universe.get(srt, []):
                    yield "ForallL", dict(index=i, term=t), 0
            case Exists(x, _, _):
                yield "ExistsL", dict(index=i, var=fresh_name(x, busy)), 0
            case Says():
                yield "SaysL", dict(index=i), 0
    match phi:
        case And():
            yield "AndR", {}, 0
            yield "AndR", {}, 1
        case Or():
            yield "OrR1", {}, 0
            yield "OrR2", {}, 0
        case Implies():
            yield "ImpR", {}, 0
        case Forall(x, _, _):
            yield "ForallR", dict(var=fresh_name(x, busy)), 0
        case Exists(_, srt, _):
            for t in universe.get(srt, []):
                yield "ExistsR", dict(term=t), 0
        case Says():
            yield "SaysR", {}, 0
    if sides_cfg is None:
        return
    for i, b in enumerate(ctx):
        st = b.gp.stack
        for k in range(len(st)):
            yield "SelfLElim", dict(index=i, pos=k), 0
            if k + 1 < len(st) and st[k] == st[k + 1]:
                yield "SelfLIntro", dict(index=i, pos=k), 0
            for l2 in universe.get(LABEL, []):
                if l2 != st[k][1]:
                    yield "VarL", dict(index=i, pos=k, term=l2), 0
            for q in universe.get(PRINCIPAL, []):
                if q != st[k][0]:
                    yield "FwdL", dict(index=i, pos=k, term=q), 0
    st = goal.gp.stack
    for k in range(len(st)):
        yield "SelfRElim", dict(pos=k), 0
        if k + 1 < len(st) and st[k] == st[k + 1]:
            yield "SelfRIntro", dict(pos=k), 0
        for l2 in universe.get(LABEL, []):
            if l2 != st[k][1]:
                yield "VarR", dict(pos=k, term=l2), 0
        for q in universe.get(PRINCIPAL, []):
            if q != st[k][0]:
                yield "FwdR", dict(pos=k, term=q), 0


def enumerate_cscs(
    sig: Signature,
    s: Sequent,
    depth: int,
    universe: dict | None = None,
    sides: SearchConfig | None = None,
) -> list[tuple[tuple, CSCDerivation]]:
    """Supercontexts reachable in at most `depth` steps, one derivation per distinct multiset.

    Var/Fwd/Self steps are explored only when `sides` (a search configuration used to
    discharge permission premises) is given."""
    universe = universe if universe is not None else universe_of(sig, s)
    if sides is not None and not sides.universe:
        sides = replace(sides, universe=universe)
    found: dict = {}
    order: list = []

    def key(delta):
        return frozenset(Counter(belief_key(b) for b in delta).items())

    def visit(seq: Sequent, d_left: int, wrap):
        k = key(seq.context)
        if k not in found:
            found[k] = wrap(csc_refl(seq))
            order.append(k)
        if d_left == 0:
            return
        for rule, params, j in _moves(sig, seq, universe, sides):
            try:
                want = expected_premises(sig, rule, seq, params.get("index"), params.get("pos"), params.get("term"), params.get("var"))
            except RuleError:
                continue
            side_proofs: tuple = ()
            if rule in ("VarL", "VarR", "FwdL", "FwdR"):
                side_proofs = _prove_all(sig, want[1:], sides)
                if side_proofs is None:
                    continue
            node = Proof(rule, seq, (), params.get("index"), params.get("pos"), params.get("term"), params.get("var"))

            def wrap2(child, node=node, j=j, side_proofs=side_proofs, wrap=wrap):
                d = _step(node, j, child)
                return wrap(replace(d, sides=side_proofs) if side_proofs else d)

            visit(want[j], d_left - 1, wrap2)

    visit(s, depth, lambda d: d)
    return [(found[k].delta, found[k]) for k in order]


def _prove_all(sig, seqs, cfg: SearchConfig) -> tuple | None:
    out = []
    for q in seqs:
        res = bounded_prove(sig, q, cfg)
        if not res.found:
            return None
        out.append(res.proof)
    return tuple(out)
