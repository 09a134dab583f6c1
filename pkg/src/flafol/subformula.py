"""Signed subformulae: bounded derivation search and positivity."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .syntax import (
    FF,
    And,
    Exists,
    Forall,
    Formula,
    Implies,
    Or,
    Says,
    Var,
    alpha_equal,
    alpha_key,
    substitute,
)

PLUS, MINUS = "+", "-"


def flip(sign: str) -> str:
    return MINUS if sign == PLUS else PLUS


@dataclass(frozen=True)
class Signed:
    formula: Formula
    sign: str

    def __post_init__(self):
        if self.sign not in (PLUS, MINUS):
            raise ValueError(f"sign must be + or -, got {self.sign!r}")


@dataclass(frozen=True)
class SubDerivation:
    """A derivation of `lower <= upper`; `term` records a quantifier instance when used."""

    rule: str
    lower: Signed
    upper: Signed
    premises: tuple = ()
    term: object = None


def immediate(upper: Signed, universe: dict) -> list[tuple[str, Signed, object]]:
    """One-step signed subformulae of `upper`.  `universe` maps sort -> list of terms."""
    phi, s = upper.formula, upper.sign
    out: list[tuple[str, Signed, object]] = []
    match phi:
        case Or(a, b):
            out += [("OrLeft", Signed(a, s), None), ("OrRight", Signed(b, s), None)]
        case And(a, b):
            out += [("AndLeft", Signed(a, s), None), ("AndRight", Signed(b, s), None)]
        case Implies(a, _, b):
            out += [("ImpPremise", Signed(a, flip(s)), None), ("ImpConclusion", Signed(b, s), None)]
        case Says(_, _, body):
            out.append(("Says", Signed(body, s), None))
        case Forall(x, srt, body) | Exists(x, srt, body):
            instantiating = (isinstance(phi, Forall) and s == MINUS) or (isinstance(phi, Exists) and s == PLUS)
            rule = ("Forall" if isinstance(phi, Forall) else "Exists") + ("Neg" if s == MINUS else "Pos")
            if instantiating:
                for t in universe.get(srt, ()):
                    out.append((rule, Signed(substitute(body, Var(x, srt), t), s), t))
            else:
                # the body with its binder free; variable renamings are alpha-variants of the binder
                out.append((rule, Signed(body, s), None))
                for t in universe.get(srt, ()):
                    if isinstance(t, Var) and t.name != x:
                        out.append((rule, Signed(substitute(body, Var(x, srt), t), s), t))
    return out


def signed_subformula(a: Signed, b: Signed, universe: dict | None = None, bound: int = 32) -> SubDerivation | None:
    """Search for a derivation of a <= b using at most `bound` single steps."""
    universe = universe or {}
    target = (alpha_key(a.formula), a.sign)
    start = (alpha_key(b.formula), b.sign)
    parent: dict = {start: None}
    nodes = {start: b}
    queue = deque([(b, 0)])
    while queue:
        cur, depth = queue.popleft()
        key = (alpha_key(cur.formula), cur.sign)
        if key == target:
            return _chain(key, parent, nodes, a)
        if depth >= bound:
            continue
        for rule, child, term in immediate(cur, universe):
            ck = (alpha_key(child.formula), child.sign)
            if ck in parent:
                continue
            parent[ck] = (key, rule, term)
            nodes[ck] = child
            queue.append((child, depth + 1))
    return None


def _chain(key, parent, nodes, a: Signed) -> SubDerivation:
    steps = []
    while parent[key] is not None:
        up, rule, term = parent[key]
        steps.append(SubDerivation(rule, nodes[key], nodes[up], (), term))
        key = up
    if not steps:
        return SubDerivation("Refl", a, a)
    deriv = steps[-1]
    for step in reversed(steps[:-1]):
        deriv = SubDerivation("Trans", step.lower, deriv.upper, (step, deriv))
    return deriv


def check_subderivation(d: SubDerivation, universe: dict | None = None) -> bool:
    universe = universe or {}
    if d.rule == "Refl":
        return d.lower.sign == d.upper.sign and alpha_equal(d.lower.formula, d.upper.formula)
    if d.rule == "Trans":
        p, q = d.premises
        return (
            check_subderivation(p, universe)
            and check_subderivation(q, universe)
            and p.lower.sign == d.lower.sign
            and alpha_equal(p.lower.formula, d.lower.formula)
            and q.upper.sign == d.upper.sign
            and alpha_equal(q.upper.formula, d.upper.formula)
            and p.upper.sign == q.lower.sign
            and alpha_equal(p.upper.formula, q.lower.formula)
        )
    for rule, child, _ in immediate(d.upper, _with_term(universe, d)):
        if rule == d.rule and child.sign == d.lower.sign and alpha_equal(child.formula, d.lower.formula):
            return True
    return False


def _with_term(universe: dict, d: SubDerivation) -> dict:
    phi = d.upper.formula
    if d.term is None or not isinstance(phi, (Forall, Exists)):
        return universe
    return {phi.sort: [d.term]}


def has_negative_false(phi: Formula, sign: str) -> bool:
    match phi:
        case FF():
            return sign == MINUS
        case And(a, b) | Or(a, b):
            return has_negative_false(a, sign) or has_negative_false(b, sign)
        case Implies(a, _, b):
            return has_negative_false(a, flip(sign)) or has_negative_false(b, sign)
        case Forall(_, _, body) | Exists(_, _, body) | Says(_, _, body):
            return has_negative_false(body, sign)
    return False


def is_positive(phi: Formula) -> bool:
    """True when False never occurs negatively in `phi` read as an assumption."""
    return not has_negative_false(phi, MINUS)


def all_signed_subformulae(b: Signed, universe: dict | None = None, limit: int = 10_000) -> list[Signed]:
    seen = {(alpha_key(b.formula), b.sign): b}
    queue = deque([b])
    while queue and len(seen) < limit:
        cur = queue.popleft()
        for _, child, _ in immediate(cur, universe or {}):
            k = (alpha_key(child.formula), child.sign)
            if k not in seen:
                seen[k] = child
                queue.append(child)
    return list(seen.values())


def proof_universe(sig, p) -> dict:
    """Sort -> terms (closed terms and variables) occurring anywhere in proof p."""
    from .kernel import iter_nodes
    from .syntax import App, formula_terms, subterms

    out: dict[str, list] = {}
    seen = set()
    for _, node in iter_nodes(p):
        s = node.conclusion
        for b in (*s.context, s.goal):
            terms = list(formula_terms(b.formula)) + list(b.gp.terms())
            if node.term is not None:
                terms.append(node.term)
            for t in terms:
                for u in subterms(t):
                    if u in seen:
                        continue
                    seen.add(u)
                    srt = u.sort if isinstance(u, Var) else sig.functions[u.fn][1] if isinstance(u, App) else None
                    if srt is not None:
                        out.setdefault(srt, []).append(u)
    return out


def left_property_violations(sig, p) -> list[tuple[tuple, int]]:
    """(path, index) of every node assumption that is not a negative signed subformula
    of the root goal (read positively) or of a root assumption (read negatively)."""
    from .kernel import iter_nodes

    universe = proof_universe(sig, p)
    root = p.conclusion
    reach = set()
    for top in [Signed(root.goal.formula, PLUS)] + [Signed(b.formula, MINUS) for b in root.context]:
        reach.update((alpha_key(x.formula), x.sign) for x in all_signed_subformulae(top, universe, limit=100_000))
    bad = []
    for path, node in iter_nodes(p):
        for i, b in enumerate(node.conclusion.context):
            if (alpha_key(b.formula), MINUS) not in reach:
                bad.append((path, i))
    return bad
