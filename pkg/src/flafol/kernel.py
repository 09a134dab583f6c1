"""Explicit proof trees and the rule-by-rule checker."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator

from .syntax import (
    FF,
    LABEL,
    PRINCIPAL,
    TT,
    And,
    Belief,
    Exists,
    Forall,
    GP,
    Implies,
    Or,
    Rel,
    Says,
    Sequent,
    Signature,
    SortError,
    Term,
    Var,
    belief_equal,
    can_read,
    can_write,
    check_belief,
    flows,
    fv,
    fv_belief,
    fv_context,
    fv_gp,
    sequent_equal,
    sort_check,
    substitute,
    CAN_READ,
    CAN_WRITE,
    FLOWS_TO,
)

# parameter letters: i = context index, k = stack position, t = term, x = eigenvariable
RULE_PARAMS: dict[str, str] = {
    "Ax": "i",
    "Weakening": "i",
    "Contraction": "i",
    "Exchange": "i",
    "FalseL": "i",
    "TrueR": "",
    "AndL": "i",
    "AndR": "",
    "OrL": "i",
    "OrR1": "",
    "OrR2": "",
    "ImpL": "i",
    "ImpR": "",
    "ForallL": "it",
    "ForallR": "x",
    "ExistsL": "ix",
    "ExistsR": "t",
    "SaysL": "i",
    "SaysR": "",
    "SelfLIntro": "ik",
    "SelfLElim": "ik",
    "SelfRIntro": "k",
    "SelfRElim": "k",
    "VarL": "ikt",
    "VarR": "kt",
    "FwdL": "ikt",
    "FwdR": "kt",
    "FlowsToRefl": "",
    "FlowsToTrans": "t",
    "CRVar": "t",
    "CWVar": "t",
}
PRIMED_PARAMS = {"ImpL'": "i", "ImpR'": ""}
ALL_PARAMS = {**RULE_PARAMS, **PRIMED_PARAMS}

STRUCTURAL = {"Weakening", "Contraction", "Exchange"}
PERMISSION = {"FlowsToRefl", "FlowsToTrans", "CRVar", "CWVar"}
PRINCIPAL_RULES = {"SelfLIntro", "SelfLElim", "SelfRIntro", "SelfRElim", "VarL", "VarR", "FwdL", "FwdR"}
# rules that do not take a formula apart
NON_FORMULA = STRUCTURAL | PERMISSION | PRINCIPAL_RULES
LEFT_RULES = {r for r, ps in ALL_PARAMS.items() if ps.startswith("i")}


class RuleError(Exception):
    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.message = message


@dataclass(frozen=True)
class Proof:
    rule: str
    conclusion: Sequent
    premises: tuple = ()
    index: int | None = None
    pos: int | None = None
    term: Term | None = None
    var: str | None = None

    def params(self) -> dict:
        return {"index": self.index, "pos": self.pos, "term": self.term, "var": self.var}

    def with_premises(self, premises) -> "Proof":
        return Proof(self.rule, self.conclusion, tuple(premises), self.index, self.pos, self.term, self.var)


@dataclass
class CheckReport:
    valid: bool
    path: tuple | None = None
    reason: str | None = None
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "invalid"

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "path": list(self.path) if self.path is not None else None,
            "reason": self.reason,
            "message": self.message,
            "stats": self.stats,
        }


# ---------------------------------------------------------------- helpers


def _ctx_at(ctx: tuple, i, rule: str) -> Belief:
    if i is None or not isinstance(i, int) or not 0 <= i < len(ctx):
        raise RuleError("AddressOutOfRange", f"{rule}: context index {i} outside 0..{len(ctx) - 1}")
    return ctx[i]


def _stack_at(g: GP, k, rule: str, need: int = 1):
    if k is None or not isinstance(k, int) or not 0 <= k or k + need > len(g.stack):
        raise RuleError("AddressOutOfRange", f"{rule}: stack position {k} outside a stack of length {len(g.stack)}")
    return g.stack[k]


def _shape(cond: bool, rule: str, what: str) -> None:
    if not cond:
        raise RuleError("RuleMismatch", f"{rule}: {what}")


def _sorted_term(sig: Signature, t, want: str | None, rule: str) -> Term:
    if t is None:
        raise RuleError("RuleMismatch", f"{rule}: missing term parameter")
    try:
        got = sort_check(sig, {}, t)
    except SortError as e:
        raise RuleError("SortError", f"{rule}: {e.message}") from None
    if want is not None and got != want:
        raise RuleError("SortError", f"{rule}: term parameter has sort {got}, expected {want}")
    return t


def _replace(ctx: tuple, i: int, *beliefs: Belief) -> tuple:
    return ctx[:i] + tuple(beliefs) + ctx[i + 1 :]


def _without(ctx: tuple, i: int) -> tuple:
    return ctx[:i] + ctx[i + 1 :]


def _eigen(var, default: str) -> str:
    return default if var is None else var


# ---------------------------------------------------------------- schemas


def expected_premises(
    sig: Signature,
    rule: str,
    s: Sequent,
    index=None,
    pos=None,
    term=None,
    var=None,
    strict: bool = True,
) -> list[Sequent]:
    """Premise sequents demanded by `rule` for conclusion `s` and the given parameters."""
    if rule not in RULE_PARAMS and (strict or rule not in PRIMED_PARAMS):
        raise RuleError("UnknownRule", f"{rule} is not a rule of the proof system")
    ctx, goal = s.context, s.goal
    phi, g = goal.formula, goal.gp

    def seq(c, b):
        return Sequent(tuple(c), b)

    match rule:
        case "Ax":
            b = _ctx_at(ctx, index, rule)
            _shape(belief_equal(b, goal), rule, "indexed assumption does not match the goal")
            return []
        case "Weakening":
            _ctx_at(ctx, index, rule)
            return [seq(_without(ctx, index), goal)]
        case "Contraction":
            b = _ctx_at(ctx, index, rule)
            return [seq(ctx[: index + 1] + (b,) + ctx[index + 1 :], goal)]
        case "Exchange":
            a = _ctx_at(ctx, index, rule)
            b = _ctx_at(ctx, index + 1 if isinstance(index, int) else None, rule)
            return [seq(ctx[:index] + (b, a) + ctx[index + 2 :], goal)]
        case "FalseL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, FF), rule, "indexed assumption is not False")
            _shape(b.gp.is_prefix_of(g), rule, "goal principal does not extend the False assumption's principal")
            return []
        case "TrueR":
            _shape(isinstance(phi, TT), rule, "goal is not True")
            return []
        case "AndL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, And), rule, "indexed assumption is not a conjunction")
            f = b.formula
            return [seq(_replace(ctx, index, Belief(f.left, b.gp), Belief(f.right, b.gp)), goal)]
        case "AndR":
            _shape(isinstance(phi, And), rule, "goal is not a conjunction")
            return [seq(ctx, Belief(phi.left, g)), seq(ctx, Belief(phi.right, g))]
        case "OrL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, Or), rule, "indexed assumption is not a disjunction")
            f = b.formula
            return [
                seq(_replace(ctx, index, Belief(f.left, b.gp)), goal),
                seq(_replace(ctx, index, Belief(f.right, b.gp)), goal),
            ]
        case "OrR1" | "OrR2":
            _shape(isinstance(phi, Or), rule, "goal is not a disjunction")
            return [seq(ctx, Belief(phi.left if rule == "OrR1" else phi.right, g))]
        case "ImpL" | "ImpL'":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, Implies), rule, "indexed assumption is not an implication")
            f = b.formula
            test_at = GP(f.label) if rule == "ImpL" else b.gp
            return [
                seq(_without(ctx, index), Belief(f.left, test_at)),
                seq(_replace(ctx, index, Belief(f.right, b.gp)), goal),
            ]
        case "ImpR" | "ImpR'":
            _shape(isinstance(phi, Implies), rule, "goal is not an implication")
            assume_at = GP(phi.label) if rule == "ImpR" else g
            return [seq(ctx + (Belief(phi.left, assume_at),), Belief(phi.right, g))]
        case "ForallL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, Forall), rule, "indexed assumption is not universal")
            f = b.formula
            t = _sorted_term(sig, term, f.sort, rule)
            return [seq(_replace(ctx, index, Belief(substitute(f.body, Var(f.var, f.sort), t), b.gp)), goal)]
        case "ForallR":
            _shape(isinstance(phi, Forall), rule, "goal is not universal")
            y = _eigen(var, phi.var)
            if y in fv_context(ctx) | fv_gp(g) or (y != phi.var and y in fv(phi)):
                raise RuleError("FreshnessViolation", f"{rule}: eigenvariable {y} occurs free in the sequent")
            return [seq(ctx, Belief(substitute(phi.body, Var(phi.var, phi.sort), Var(y, phi.sort)), g))]
        case "ExistsL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, Exists), rule, "indexed assumption is not existential")
            f = b.formula
            y = _eigen(var, f.var)
            busy = fv_context(_without(ctx, index)) | fv_belief(goal) | fv_gp(b.gp)
            if y in busy or (y != f.var and y in fv(f)):
                raise RuleError("FreshnessViolation", f"{rule}: eigenvariable {y} occurs free in the sequent")
            inst = substitute(f.body, Var(f.var, f.sort), Var(y, f.sort))
            return [seq(_replace(ctx, index, Belief(inst, b.gp)), goal)]
        case "ExistsR":
            _shape(isinstance(phi, Exists), rule, "goal is not existential")
            t = _sorted_term(sig, term, phi.sort, rule)
            return [seq(ctx, Belief(substitute(phi.body, Var(phi.var, phi.sort), t), g))]
        case "SaysL":
            b = _ctx_at(ctx, index, rule)
            _shape(isinstance(b.formula, Says), rule, "indexed assumption is not a says formula")
            f = b.formula
            return [seq(_replace(ctx, index, Belief(f.body, b.gp.push(f.principal, f.label))), goal)]
        case "SaysR":
            _shape(isinstance(phi, Says), rule, "goal is not a says formula")
            return [seq(ctx, Belief(phi.body, g.push(phi.principal, phi.label)))]
        case "SelfLIntro":
            b = _ctx_at(ctx, index, rule)
            pair = _stack_at(b.gp, pos, rule, 2)
            _shape(pair == b.gp.stack[pos + 1], rule, "stack pairs at the split are not equal")
            h = GP(b.gp.ground, b.gp.stack[: pos + 1] + b.gp.stack[pos + 2 :])
            return [seq(_replace(ctx, index, Belief(b.formula, h)), goal)]
        case "SelfLElim":
            b = _ctx_at(ctx, index, rule)
            pair = _stack_at(b.gp, pos, rule)
            h = GP(b.gp.ground, b.gp.stack[: pos + 1] + (pair,) + b.gp.stack[pos + 1 :])
            return [seq(_replace(ctx, index, Belief(b.formula, h)), goal)]
        case "SelfRIntro":
            pair = _stack_at(g, pos, rule, 2)
            _shape(pair == g.stack[pos + 1], rule, "stack pairs at the split are not equal")
            return [seq(ctx, Belief(phi, GP(g.ground, g.stack[: pos + 1] + g.stack[pos + 2 :])))]
        case "SelfRElim":
            pair = _stack_at(g, pos, rule)
            return [seq(ctx, Belief(phi, GP(g.ground, g.stack[: pos + 1] + (pair,) + g.stack[pos + 1 :])))]
        case "VarL":
            b = _ctx_at(ctx, index, rule)
            p, l = _stack_at(b.gp, pos, rule)
            l2 = _sorted_term(sig, term, LABEL, rule)
            return [
                seq(_replace(ctx, index, Belief(b.formula, b.gp.replace(pos, (p, l2)))), goal),
                seq(ctx, Belief(flows(l, l2), b.gp.prefix(pos).push(p, l2))),
            ]
        case "VarR":
            p, l = _stack_at(g, pos, rule)
            l2 = _sorted_term(sig, term, LABEL, rule)
            return [
                seq(ctx, Belief(phi, g.replace(pos, (p, l2)))),
                seq(ctx, Belief(flows(l2, l), g.prefix(pos).push(p, l))),
            ]
        case "FwdL":
            b = _ctx_at(ctx, index, rule)
            p, l = _stack_at(b.gp, pos, rule)
            q = _sorted_term(sig, term, PRINCIPAL, rule)
            base = b.gp.prefix(pos)
            return [
                seq(_replace(ctx, index, Belief(b.formula, b.gp.replace(pos, (q, l)))), goal),
                seq(ctx, Belief(can_read(q, l), base.push(p, l))),
                seq(ctx, Belief(can_write(p, l), base.push(q, l))),
            ]
        case "FwdR":
            q, l = _stack_at(g, pos, rule)
            p = _sorted_term(sig, term, PRINCIPAL, rule)
            base = g.prefix(pos)
            return [
                seq(ctx, Belief(phi, g.replace(pos, (p, l)))),
                seq(ctx, Belief(can_read(q, l), base.push(p, l))),
                seq(ctx, Belief(can_write(p, l), base.push(q, l))),
            ]
        case "FlowsToRefl":
            _shape(_is_rel(phi, FLOWS_TO) and phi.args[0] == phi.args[1], rule, "goal is not l flows to l")
            return []
        case "FlowsToTrans":
            _shape(_is_rel(phi, FLOWS_TO), rule, "goal is not a flows-to judgement")
            m = _sorted_term(sig, term, LABEL, rule)
            a, c = phi.args
            return [seq(ctx, Belief(flows(a, m), g)), seq(ctx, Belief(flows(m, c), g))]
        case "CRVar":
            _shape(_is_rel(phi, CAN_READ), rule, "goal is not CanRead")
            l2 = _sorted_term(sig, term, LABEL, rule)
            p, l1 = phi.args
            return [seq(ctx, Belief(can_read(p, l2), g)), seq(ctx, Belief(flows(l1, l2), g))]
        case "CWVar":
            _shape(_is_rel(phi, CAN_WRITE), rule, "goal is not CanWrite")
            l2 = _sorted_term(sig, term, LABEL, rule)
            p, l1 = phi.args
            return [seq(ctx, Belief(can_write(p, l2), g)), seq(ctx, Belief(flows(l2, l1), g))]
    raise RuleError("UnknownRule", rule)


def _is_rel(phi, name: str) -> bool:
    return isinstance(phi, Rel) and phi.name == name


# ---------------------------------------------------------------- checking


def check_sequent_wf(sig: Signature, s: Sequent) -> None:
    """Raise RuleError(SortError) naming the first ill-sorted belief."""
    for i, b in enumerate(s.context):
        try:
            check_belief(sig, b)
        except SortError as e:
            raise RuleError("SortError", f"context[{i}]: {e}") from None
    try:
        check_belief(sig, s.goal)
    except SortError as e:
        raise RuleError("SortError", f"goal: {e}") from None


def iter_nodes(p: Proof, path: tuple = ()) -> Iterator[tuple[tuple, Proof]]:
    """Pre-order traversal yielding (path, node)."""
    stack = [(path, p)]
    while stack:
        path, node = stack.pop()
        yield path, node
        for j in range(len(node.premises) - 1, -1, -1):
            stack.append((path + (j,), node.premises[j]))


def proof_stats(p: Proof) -> dict:
    hist = Counter(node.rule for _, node in iter_nodes(p))
    return {"nodes": sum(hist.values()), "depth": proof_depth(p), "histogram": dict(sorted(hist.items()))}


def proof_depth(p: Proof) -> int:
    best = 0
    stack = [(p, 1)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for c in node.premises)
    return best


def check_node(sig: Signature, node: Proof, strict: bool = True) -> None:
    """Check one inference step; raise RuleError on failure."""
    want = expected_premises(sig, node.rule, node.conclusion, node.index, node.pos, node.term, node.var, strict)
    if len(want) != len(node.premises):
        raise RuleError("RuleMismatch", f"{node.rule}: expected {len(want)} premises, found {len(node.premises)}")
    for j, (w, child) in enumerate(zip(want, node.premises)):
        if not sequent_equal(w, child.conclusion):
            raise RuleError("RuleMismatch", f"{node.rule}: premise {j} does not match the rule schema")


def check_proof(sig: Signature, p: Proof, strict: bool = True) -> CheckReport:
    """Re-derive every node; the first failure in pre-order is reported."""
    stats = proof_stats(p)
    try:
        check_sequent_wf(sig, p.conclusion)
    except RuleError as e:
        return CheckReport(False, (), e.reason, e.message, stats)
    for path, node in iter_nodes(p):
        try:
            check_node(sig, node, strict)
        except RuleError as e:
            return CheckReport(False, path, e.reason, e.message, stats)
    return CheckReport(True, None, None, "", stats)


def is_valid(sig: Signature, p: Proof, strict: bool = True) -> bool:
    return check_proof(sig, p, strict).valid


# ---------------------------------------------------------------- construction helpers


def make(sig: Signature, rule: str, s: Sequent, premises=(), **params) -> Proof:
    """Build a node and verify that its children prove the schema's premises."""
    node = Proof(rule, s, tuple(premises), params.get("index"), params.get("pos"), params.get("term"), params.get("var"))
    check_node(sig, node, strict=params.get("strict", True))
    return node


def premises_of(sig: Signature, rule: str, s: Sequent, **params) -> list[Sequent]:
    return expected_premises(sig, rule, s, params.get("index"), params.get("pos"), params.get("term"), params.get("var"))


def node_at(p: Proof, path) -> Proof:
    for j in path:
        p = p.premises[j]
    return p


def replace_at(p: Proof, path, new: Proof) -> Proof:
    if not path:
        return new
    j = path[0]
    kids = list(p.premises)
    kids[j] = replace_at(kids[j], path[1:], new)
    return p.with_premises(kids)


# ---------------------------------------------------------------- schema text

_SCHEMAS = {
    "Ax": ("", "G, phi @ g |- phi @ g", "i = index of the matching assumption"),
    "Weakening": ("G |- psi @ g", "G, phi @ g' |- psi @ g", "i = index of the dropped assumption"),
    "Contraction": ("G, phi @ g, phi @ g |- psi @ g'", "G, phi @ g |- psi @ g'", "copy inserted right after index i"),
    "Exchange": ("G, phi @ g1, psi @ g2, G' |- chi @ g", "G, psi @ g2, phi @ g1, G' |- chi @ g", "swaps i and i+1"),
    "FalseL": ("", "G, False @ g |- phi @ g.g'", "g' is any extension"),
    "TrueR": ("", "G |- True @ g", ""),
    "AndL": ("G, phi @ g, psi @ g |- chi @ g'", "G, (phi & psi) @ g |- chi @ g'", ""),
    "AndR": ("G |- phi @ g  ;  G |- psi @ g", "G |- (phi & psi) @ g", ""),
    "OrL": (
        "G, phi @ g |- chi @ g'  ;  G, psi @ g |- chi @ g'",
        "G, (phi | psi) @ g |- chi @ g'",
        "case analysis on an assumed disjunction",
    ),
    "OrR1": ("G |- phi @ g", "G |- (phi | psi) @ g", ""),
    "OrR2": ("G |- psi @ g", "G |- (phi | psi) @ g", ""),
    "ImpL": ("G |- phi @ <l>  ;  G, psi @ g |- chi @ g'", "G, (phi ->[l] psi) @ g |- chi @ g'", ""),
    "ImpR": ("G, phi @ <l> |- psi @ g", "G |- (phi ->[l] psi) @ g", "hypothesis appended at the end"),
    "ForallL": ("G, phi[x:=t] @ g |- psi @ g'", "G, (forall x:S. phi) @ g |- psi @ g'", "t = witness"),
    "ForallR": ("G |- phi @ g", "G |- (forall x:S. phi) @ g", "x not free in G, g"),
    "ExistsL": ("G, phi @ g |- psi @ g'", "G, (exists x:S. phi) @ g |- psi @ g'", "x not free in G, psi, g, g'"),
    "ExistsR": ("G |- phi[x:=t] @ g", "G |- (exists x:S. phi) @ g", "t = witness"),
    "SaysL": ("G, phi @ g.[p:l] |- psi @ g'", "G, (p says[l] phi) @ g |- psi @ g'", ""),
    "SaysR": ("G |- phi @ g.[p:l]", "G |- (p says[l] phi) @ g", ""),
    "SelfLIntro": ("G, phi @ g.[p:l].g' |- psi @ g''", "G, phi @ g.[p:l].[p:l].g' |- psi @ g''", "k = |g|"),
    "SelfLElim": ("G, phi @ g.[p:l].[p:l].g' |- psi @ g''", "G, phi @ g.[p:l].g' |- psi @ g''", "k = |g|"),
    "SelfRIntro": ("G |- phi @ g.[p:l].g'", "G |- phi @ g.[p:l].[p:l].g'", "k = |g|"),
    "SelfRElim": ("G |- phi @ g.[p:l].[p:l].g'", "G |- phi @ g.[p:l].g'", "k = |g|"),
    "VarL": (
        "G, phi @ g.[p:l'].g' |- psi @ g''  ;  G, phi @ g.[p:l].g' |- flows(l, l') @ g.[p:l']",
        "G, phi @ g.[p:l].g' |- psi @ g''",
        "k = |g|, t = l'",
    ),
    "VarR": (
        "G |- phi @ g.[p:l'].g'  ;  G |- flows(l', l) @ g.[p:l]",
        "G |- phi @ g.[p:l].g'",
        "k = |g|, t = l'",
    ),
    "FwdL": (
        "G, phi @ g.[q:l].g' |- chi @ g''  ;  G, phi @ g.[p:l].g' |- canread(q, l) @ g.[p:l]"
        "  ;  G, phi @ g.[p:l].g' |- canwrite(p, l) @ g.[q:l]",
        "G, phi @ g.[p:l].g' |- chi @ g''",
        "k = |g|, t = q",
    ),
    "FwdR": (
        "G |- phi @ g.[p:l].g'  ;  G |- canread(q, l) @ g.[p:l]  ;  G |- canwrite(p, l) @ g.[q:l]",
        "G |- phi @ g.[q:l].g'",
        "p forwards to q; k = |g|, t = p",
    ),
    "FlowsToRefl": ("", "G |- flows(l, l) @ g", ""),
    "FlowsToTrans": ("G |- flows(l1, l2) @ g  ;  G |- flows(l2, l3) @ g", "G |- flows(l1, l3) @ g", "t = l2"),
    "CRVar": ("G |- canread(p, l2) @ g  ;  G |- flows(l1, l2) @ g", "G |- canread(p, l1) @ g", "t = l2"),
    "CWVar": ("G |- canwrite(p, l2) @ g  ;  G |- flows(l2, l1) @ g", "G |- canwrite(p, l1) @ g", "t = l2"),
}


def rule_schema(name: str) -> str:
    if name not in _SCHEMAS:
        raise RuleError("UnknownRule", f"{name} is not a kernel rule")
    above, below, note = _SCHEMAS[name]
    params = RULE_PARAMS[name]
    lines = [f"{name}  [params: {', '.join(params) if params else 'none'}]"]
    premises = [p.strip() for p in above.split(";")] if above else []
    lines.extend(f"  {p}" for p in premises)
    lines.append("  " + "-" * max(8, max((len(x) for x in premises + [below]), default=8)))
    lines.append(f"  {below}")
    if note:
        lines.append(f"  ({note})")
    return "\n".join(lines)
