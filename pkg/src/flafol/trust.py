"""Speaks-for and can-influence between generalized principals.

Both relations are represented as explicit derivation trees that carry every
kernel proof their side conditions need, so checking never searches.  The
G-operator collects the generalized principals a belief talks about; quantified
variables become generic variables (names starting with '?') that match any
well-sorted term.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace

from .kernel import CheckReport, Proof, check_proof
from .search import SearchConfig, bounded_prove, universe_of
from .syntax import (
    GP,
    LABEL,
    PRINCIPAL,
    And,
    App,
    Belief,
    Exists,
    Forall,
    Implies,
    Or,
    Says,
    Sequent,
    Signature,
    Term,
    Var,
    TT,
    can_read,
    can_write,
    flows,
    sequent_equal,
    sort_check,
    substitute,
)

GENERIC = "?"


class TrustError(Exception):
    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.message = message


# ---------------------------------------------------------------- the G operator


def is_generic(t: Term) -> bool:
    return isinstance(t, Var) and t.name.startswith(GENERIC)


@dataclass(frozen=True)
class GPSet:
    """Finite set of generalized-principal patterns."""

    patterns: tuple

    def __iter__(self):
        return iter(self.patterns)

    def __len__(self):
        return len(self.patterns)

    def match(self, g: GP, sig: Signature | None = None) -> dict | None:
        """A substitution for generic variables making some pattern equal to g, or None."""
        for pat in self.patterns:
            s = match_gp(pat, g, sig)
            if s is not None:
                return s
        return None

    def __contains__(self, g: GP) -> bool:
        return self.match(g) is not None

    def instances(self, universe: dict) -> list[GP]:
        """Every concrete member whose generic variables range over `universe` (sort -> terms)."""
        out, seen = [], set()
        for pat in self.patterns:
            gens = sorted({t for t in pat.terms() if is_generic(t)}, key=lambda v: v.name)
            choices = [universe.get(v.sort, []) for v in gens]
            for combo in itertools.product(*choices):
                g = instantiate_gp(pat, dict(zip((v.name for v in gens), combo)))
                if g not in seen:
                    seen.add(g)
                    out.append(g)
        return out


def g_set(phi, g: GP) -> GPSet:
    """The generalized principals a belief phi @ g mentions."""
    counter = itertools.count(1)
    out: list[GP] = []

    def go(f, h: GP):
        match f:
            case Says(p, lab, body):
                go(body, h.push(p, lab))
            case And(a, b) | Or(a, b):
                go(a, h)
                go(b, h)
            case Implies(_, _, b):
                go(b, h)
            case Forall(x, s, body) | Exists(x, s, body):
                go(substitute(body, Var(x, s), Var(f"{GENERIC}{next(counter)}", s)), h)
            case _:
                if h not in out:
                    out.append(h)

    go(phi, g)
    return GPSet(tuple(out))


def _term_sort(t: Term, sig: Signature | None) -> str | None:
    if isinstance(t, Var):
        return t.sort
    if sig is None:
        return None
    try:
        return sort_check(sig, {}, t)
    except Exception:
        return None


def _match_term(pat: Term, t: Term, s: dict, sig) -> bool:
    if is_generic(pat):
        if pat.name in s:
            return s[pat.name] == t
        srt = _term_sort(t, sig)
        if srt is not None and srt != pat.sort:
            return False
        s[pat.name] = t
        return True
    if isinstance(pat, Var) or isinstance(t, Var):
        return pat == t
    return pat.fn == t.fn and len(pat.args) == len(t.args) and all(
        _match_term(a, b, s, sig) for a, b in zip(pat.args, t.args)
    )


def match_gp(pat: GP, g: GP, sig: Signature | None = None) -> dict | None:
    if len(pat.stack) != len(g.stack):
        return None
    s: dict = {}
    pairs = [(pat.ground, g.ground)] + [(a, b) for x, y in zip(pat.stack, g.stack) for a, b in zip(x, y)]
    return s if all(_match_term(a, b, s, sig) for a, b in pairs) else None


def _inst_term(t: Term, s: dict) -> Term:
    if is_generic(t):
        return s.get(t.name, t)
    if isinstance(t, App):
        return App(t.fn, tuple(_inst_term(a, s) for a in t.args))
    return t


def instantiate_gp(pat: GP, s: dict) -> GP:
    return GP(_inst_term(pat.ground, s), tuple((_inst_term(p, s), _inst_term(l, s)) for p, l in pat.stack))


def some_member(gs: GPSet, sig: Signature) -> tuple[GP, dict]:
    """A concrete member of gs: generics become the first declared constant of their sort."""
    pat = gs.patterns[0]
    s = {}
    for t in pat.terms():
        if is_generic(t) and t.name not in s:
            consts = sig.constants(t.sort)
            s[t.name] = consts[0] if consts else Var(t.name[1:] + "_" + t.sort.lower(), t.sort)
    return instantiate_gp(pat, s), s


# ---------------------------------------------------------------- speaks for


@dataclass(frozen=True)
class SFDerivation:
    rule: str  # ReflSF ExtSF SelfLSF SelfRSF VarSF FwdSF TransSF
    context: tuple | None
    left: GP
    right: GP
    premises: tuple = ()
    sides: tuple = ()  # kernel proofs: VarSF one, FwdSF two


SF_RULES = ("ReflSF", "ExtSF", "SelfLSF", "SelfRSF", "VarSF", "FwdSF", "TransSF")


def refl_sf(ctx, g: GP) -> SFDerivation:
    return SFDerivation("ReflSF", ctx, g, g)


def ext_sf(d: SFDerivation, pairs) -> SFDerivation:
    for pair in pairs:
        d = SFDerivation("ExtSF", d.context, d.left.push(*pair), d.right.push(*pair), (d,))
    return d


def trans_sf(d1: SFDerivation, d2: SFDerivation) -> SFDerivation:
    if d1.rule == "ReflSF":
        return d2
    if d2.rule == "ReflSF":
        return d1
    return SFDerivation("TransSF", d1.context, d1.left, d2.right, (d1, d2))


def var_sf_side(g: GP, p: Term, l2: Term, l: Term) -> Belief:
    """Side condition of  g.[p:l] SF g.[p:l2]."""
    return Belief(flows(l, l2), g.push(p, l2))


def fwd_sf_sides(g: GP, p: Term, q: Term, l: Term) -> tuple[Belief, Belief]:
    """Side conditions of  g.[p:l] SF g.[q:l]."""
    return Belief(can_read(q, l), g.push(p, l)), Belief(can_write(p, l), g.push(q, l))


def _last(g: GP):
    return g.stack[-1] if g.stack else None


def _sf_premises(d: SFDerivation) -> tuple[list, list]:
    """Expected (sub-judgements, side sequents) for node d; raises TrustError on a shape error."""
    a, b, ctx = d.left, d.right, d.context

    def need(cond, what):
        if not cond:
            raise TrustError("RuleMismatch", f"{d.rule}: {what}")

    match d.rule:
        case "ReflSF":
            need(a == b, "the two sides differ")
            return [], []
        case "ExtSF":
            need(a.stack and b.stack and a.stack[-1] == b.stack[-1], "the sides do not end in the same pair")
            return [(GP(a.ground, a.stack[:-1]), GP(b.ground, b.stack[:-1]))], []
        case "SelfLSF":
            need(a.stack and b.stack == a.stack + (a.stack[-1],), "right side is not the left side with its last pair repeated")
            return [], []
        case "SelfRSF":
            need(b.stack and a.stack == b.stack + (b.stack[-1],), "left side is not the right side with its last pair repeated")
            return [], []
        case "VarSF":
            need(a.stack and b.stack and a.ground == b.ground and a.stack[:-1] == b.stack[:-1], "sides differ before the last pair")
            (p, l), (p2, l2) = a.stack[-1], b.stack[-1]
            need(p == p2, "the principals of the last pairs differ")
            return [], [Sequent(ctx, var_sf_side(GP(a.ground, a.stack[:-1]), p, l2, l))]
        case "FwdSF":
            need(a.stack and b.stack and a.ground == b.ground and a.stack[:-1] == b.stack[:-1], "sides differ before the last pair")
            (p, l), (q, l2) = a.stack[-1], b.stack[-1]
            need(l == l2, "the labels of the last pairs differ")
            cr, cw = fwd_sf_sides(GP(a.ground, a.stack[:-1]), p, q, l)
            return [], [Sequent(ctx, cr), Sequent(ctx, cw)]
        case "TransSF":
            need(len(d.premises) == 2, "needs two premises")
            mid = d.premises[0].right
            return [(a, mid), (mid, b)], []
    raise TrustError("UnknownRule", f"{d.rule} is not a speaks-for rule")


def _check_sides(sig, d, want: list, path) -> CheckReport | None:
    if len(d.sides) != len(want):
        return CheckReport(False, path, "RuleMismatch", f"{d.rule}: expected {len(want)} side proofs")
    for j, (prf, s) in enumerate(zip(d.sides, want)):
        if not isinstance(prf, Proof) or not sequent_equal(prf.conclusion, s):
            return CheckReport(False, path, "RuleMismatch", f"{d.rule}: side proof {j} does not prove the side condition")
        rep = check_proof(sig, prf)
        if not rep.valid:
            return CheckReport(False, path, rep.reason, f"{d.rule}: side proof {j}: {rep.message}")
    return None


def check_sf(sig: Signature, d: SFDerivation, path: tuple = ()) -> CheckReport:
    stack = [(path, d)]
    while stack:
        path, node = stack.pop()
        try:
            subs, sides = _sf_premises(node)
        except TrustError as e:
            return CheckReport(False, path, e.reason, e.message)
        if len(node.premises) != len(subs):
            return CheckReport(False, path, "RuleMismatch", f"{node.rule}: expected {len(subs)} premises")
        for j, (child, (l, r)) in enumerate(zip(node.premises, subs)):
            if not isinstance(child, SFDerivation) or (child.left, child.right) != (l, r):
                return CheckReport(False, path + (j,), "RuleMismatch", f"{node.rule}: premise {j} has the wrong judgement")
            if child.context != node.context:
                return CheckReport(False, path + (j,), "ContextMismatch", "premise context differs")
        bad = _check_sides(sig, node, sides, path)
        if bad:
            return bad
        stack.extend((path + (j,), c) for j, c in enumerate(node.premises))
    return CheckReport(True)


# ---------------------------------------------------------------- can influence


@dataclass(frozen=True)
class CIDerivation:
    rule: str  # SF-CI ExtCI TransCI ImpCI
    context: tuple | None
    left: GP
    right: GP
    premises: tuple = ()
    sf: SFDerivation | None = None
    ext: tuple = ()
    index: int | None = None
    implication: Belief | None = field(default=None, compare=False)  # used before the context is fixed


def sf_ci(d: SFDerivation) -> CIDerivation:
    return CIDerivation("SF-CI", d.context, d.left, d.right, sf=d)


def ext_ci(d: CIDerivation, pairs) -> CIDerivation:
    pairs = tuple(pairs)
    if not pairs:
        return d
    return CIDerivation("ExtCI", d.context, d.left.extend(pairs), d.right.extend(pairs), (d,), ext=pairs)


def trans_ci(d1: CIDerivation, d2: CIDerivation) -> CIDerivation:
    for a, b in ((d1, d2), (d2, d1)):
        if a.rule == "SF-CI" and a.sf.rule == "ReflSF":
            return b
    return CIDerivation("TransCI", d1.context, d1.left, d2.right, (d1, d2))


def imp_ci(ctx, index: int | None, imp: Belief, g1: GP, g2: GP) -> CIDerivation:
    return CIDerivation("ImpCI", ctx, g1, g2, index=index, implication=imp)


def ci_nodes(d: CIDerivation):
    stack = [d]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n.premises)


def sf_nodes(d: SFDerivation):
    stack = [d]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n.premises)


def check_ci(sig: Signature, d: CIDerivation) -> CheckReport:
    stack = [((), d)]
    while stack:
        path, node = stack.pop()
        ctx = node.context
        if ctx is None:
            return CheckReport(False, path, "ContextMismatch", "derivation has no context")
        subs: list = []
        match node.rule:
            case "SF-CI":
                sf = node.sf
                if sf is None or (sf.left, sf.right) != (node.left, node.right) or sf.context != ctx:
                    return CheckReport(False, path, "RuleMismatch", "SF-CI: embedded speaks-for judgement differs")
                rep = check_sf(sig, sf, path + ("sf",))
                if not rep.valid:
                    return rep
            case "ExtCI":
                n = len(node.ext)
                if n == 0 or node.left.stack[-n:] != node.ext or node.right.stack[-n:] != node.ext:
                    return CheckReport(False, path, "RuleMismatch", "ExtCI: sides do not end in the extension")
                subs = [(GP(node.left.ground, node.left.stack[:-n]), GP(node.right.ground, node.right.stack[:-n]))]
            case "TransCI":
                if len(node.premises) != 2:
                    return CheckReport(False, path, "RuleMismatch", "TransCI needs two premises")
                mid = node.premises[0].right
                subs = [(node.left, mid), (mid, node.right)]
            case "ImpCI":
                i = node.index
                if not isinstance(i, int) or not 0 <= i < len(ctx) or not isinstance(ctx[i].formula, Implies):
                    return CheckReport(False, path, "RuleMismatch", "ImpCI: index does not address an implication")
                imp = ctx[i]
                f = imp.formula
                if g_set(f.left, GP(f.label)).match(node.left, sig) is None:
                    return CheckReport(False, path, "RuleMismatch", "ImpCI: left side is not in G of the premise")
                if g_set(f.right, imp.gp).match(node.right, sig) is None:
                    return CheckReport(False, path, "RuleMismatch", "ImpCI: right side is not in G of the consequent")
            case _:
                return CheckReport(False, path, "UnknownRule", f"{node.rule} is not a can-influence rule")
        if len(node.premises) != len(subs):
            return CheckReport(False, path, "RuleMismatch", f"{node.rule}: expected {len(subs)} premises")
        for j, (child, (l, r)) in enumerate(zip(node.premises, subs)):
            if (child.left, child.right) != (l, r):
                return CheckReport(False, path + (j,), "RuleMismatch", f"{node.rule}: premise {j} has the wrong judgement")
            if child.context != ctx:
                return CheckReport(False, path + (j,), "ContextMismatch", "premise context differs")
            stack.append((path + (j,), child))
    return CheckReport(True)


def with_context(d, ctx: tuple, refit):
    """Re-home a derivation built without a context: set every node's context to ctx,
    refit side proofs with `refit(proof, ctx)` and resolve ImpCI indices."""
    if isinstance(d, SFDerivation):
        return replace(
            d,
            context=ctx,
            premises=tuple(with_context(c, ctx, refit) for c in d.premises),
            sides=tuple(refit(p, ctx) for p in d.sides),
        )
    index = d.index
    if d.rule == "ImpCI" and d.implication is not None:
        index = _locate(ctx, d.implication)
    return replace(
        d,
        context=ctx,
        index=index,
        premises=tuple(with_context(c, ctx, refit) for c in d.premises),
        sf=None if d.sf is None else with_context(d.sf, ctx, refit),
    )


def _locate(ctx, b: Belief) -> int:
    from .syntax import belief_equal

    for i, c in enumerate(ctx):
        if belief_equal(c, b):
            return i
    raise TrustError("ContextMismatch", "implication not present in the context")


# ---------------------------------------------------------------- search


@dataclass
class _Sides:
    """Memoized side-condition prover."""

    sig: Signature
    ctx: tuple
    cfg: SearchConfig
    memo: dict = field(default_factory=dict)

    def prove(self, b: Belief) -> Proof | None:
        if b not in self.memo:
            out = bounded_prove(self.sig, Sequent(self.ctx, b), self.cfg)
            self.memo[b] = out.proof if out.found else None
        return self.memo[b]


def _side_cfg(sig, ctx, cfg: SearchConfig | None) -> SearchConfig:
    if cfg is None:
        cfg = SearchConfig(depth=4, timeout=5.0)
    if not cfg.universe:
        cfg = replace(cfg, universe=universe_of(sig, Sequent(tuple(ctx), Belief(TT(), GP(sig.default_label)))))
    return cfg


def _terms(cfg: SearchConfig, sort: str, *gps: GP) -> list:
    out = list(cfg.universe.get(sort, []))
    for g in gps:
        for p, l in g.stack:
            t = p if sort == PRINCIPAL else l
            if t not in out:
                out.append(t)
    return out


def sf_steps(g: GP, sides: _Sides, principals, labels, max_len: int):
    """One-step speaks-for moves out of g: (target, derivation) pairs in a fixed order."""
    ctx = sides.ctx
    for k, (p, l) in enumerate(g.stack):
        base, rest = g.prefix(k), g.stack[k + 1 :]
        for l2 in labels:
            if l2 == l:
                continue
            side = sides.prove(var_sf_side(base, p, l2, l))
            if side is not None:
                d = SFDerivation("VarSF", ctx, base.push(p, l), base.push(p, l2), sides=(side,))
                yield GP(g.ground, base.stack + ((p, l2),) + rest), ext_sf(d, rest)
        for q in principals:
            if q == p:
                continue
            cr, cw = fwd_sf_sides(base, p, q, l)
            s1 = sides.prove(cr)
            s2 = sides.prove(cw) if s1 is not None else None
            if s2 is not None:
                d = SFDerivation("FwdSF", ctx, base.push(p, l), base.push(q, l), sides=(s1, s2))
                yield GP(g.ground, base.stack + ((q, l),) + rest), ext_sf(d, rest)
        if len(g.stack) < max_len:
            d = SFDerivation("SelfLSF", ctx, base.push(p, l), base.push(p, l).push(p, l))
            yield GP(g.ground, base.stack + ((p, l), (p, l)) + rest), ext_sf(d, rest)
        if rest and rest[0] == (p, l):
            d = SFDerivation("SelfRSF", ctx, base.push(p, l).push(p, l), base.push(p, l))
            yield GP(g.ground, base.stack + ((p, l),) + rest[1:]), ext_sf(d, rest[1:])


def search_sf(
    sig: Signature, ctx, g1: GP, g2: GP, depth: int, cfg: SearchConfig | None = None
) -> SFDerivation | None:
    """Breadth-first search for  ctx |- g1 SF g2  using at most `depth` steps."""
    ctx = tuple(ctx)
    if g1 == g2:
        return refl_sf(ctx, g1)
    cfg = _side_cfg(sig, ctx, cfg)
    sides = _Sides(sig, ctx, cfg)
    principals = _terms(cfg, PRINCIPAL, g1, g2)
    labels = _terms(cfg, LABEL, g1, g2)
    max_len = max(len(g1.stack), len(g2.stack)) + 1
    seen = {g1: None}
    frontier = [g1]
    for _ in range(depth):
        nxt = []
        for g in frontier:
            for h, d in sf_steps(g, sides, principals, labels, max_len):
                if h in seen:
                    continue
                seen[h] = (g, d)
                if h == g2:
                    return _unwind(seen, h, lambda a, b: trans_sf(a, b))
                nxt.append(h)
        frontier = nxt
    return None


def _unwind(seen: dict, h, join):
    steps = []
    while seen[h] is not None:
        g, d = seen[h]
        steps.append(d)
        h = g
    steps.reverse()
    out = steps[0]
    for d in steps[1:]:
        out = join(out, d)
    return out


def imp_steps(sig: Signature, ctx, g: GP, universe: dict, max_len: int):
    """ImpCI moves out of g (extended by ExtCI with whatever suffix g carries beyond the matched prefix)."""
    for i, b in enumerate(ctx):
        f = b.formula
        if not isinstance(f, Implies):
            continue
        srcs = g_set(f.left, GP(f.label))
        dsts = g_set(f.right, b.gp).instances(universe)
        for n in range(len(g.stack) + 1):
            head = GP(g.ground, g.stack[:n])
            if srcs.match(head, sig) is None:
                continue
            rest = g.stack[n:]
            for d in dsts:
                if len(d.stack) + len(rest) > max_len:
                    continue
                yield d.extend(rest), ext_ci(imp_ci(ctx, i, b, head, d), rest)


def gp_universe(ground: Term, principals, labels, max_stack: int) -> list[GP]:
    pairs = [(p, l) for p in principals for l in labels]
    out = []
    for n in range(max_stack + 1):
        out.extend(GP(ground, st) for st in itertools.product(pairs, repeat=n))
    return out


class InfluenceGraph:
    """CanInfl edges between generalized principals of bounded stack depth."""

    def __init__(self, sig: Signature, ctx, cfg: SearchConfig | None = None, max_stack: int = 2, principals=None, labels=None):
        self.sig, self.ctx = sig, tuple(ctx)
        self.cfg = _side_cfg(sig, self.ctx, cfg)
        self.sides = _Sides(sig, self.ctx, self.cfg)
        self.max_stack = max_stack
        self.principals = list(principals) if principals is not None else _terms(self.cfg, PRINCIPAL)
        self.labels = list(labels) if labels is not None else _terms(self.cfg, LABEL)
        self.universe = dict(self.cfg.universe)
        self.universe[PRINCIPAL] = self.principals
        self.universe[LABEL] = self.labels
        self._edges: dict = {}

    def edges(self, g: GP) -> list:
        if g not in self._edges:
            out = [(h, sf_ci(d)) for h, d in sf_steps(g, self.sides, self.principals, self.labels, self.max_stack)]
            out += list(imp_steps(self.sig, self.ctx, g, self.universe, self.max_stack))
            self._edges[g] = out
        return self._edges[g]

    def search(self, g1: GP, g2: GP, depth: int | None = None) -> CIDerivation | None:
        if g1 == g2:
            return sf_ci(refl_sf(self.ctx, g1))
        seen = {g1: None}
        frontier = [g1]
        steps = 0
        while frontier and (depth is None or steps < depth):
            steps += 1
            nxt = []
            for g in frontier:
                for h, d in self.edges(g):
                    if h in seen:
                        continue
                    seen[h] = (g, d)
                    if h == g2:
                        return _unwind(seen, h, trans_ci)
                    nxt.append(h)
            frontier = nxt
        return None

    def reachable(self, g1: GP) -> set:
        seen = {g1}
        todo = deque([g1])
        while todo:
            g = todo.popleft()
            for h, _ in self.edges(g):
                if h not in seen:
                    seen.add(h)
                    todo.append(h)
        return seen


def search_ci(
    sig: Signature, ctx, g1: GP, g2: GP, depth: int, cfg: SearchConfig | None = None, max_stack: int | None = None
) -> CIDerivation | None:
    """Breadth-first search for  ctx |- g1 CanInfl g2  through at most `depth` edges."""
    bound = max_stack if max_stack is not None else max(len(g1.stack), len(g2.stack)) + 1
    graph = InfluenceGraph(sig, ctx, cfg, bound, *_gp_terms(sig, ctx, cfg, g1, g2))
    return graph.search(g1, g2, depth)


def _gp_terms(sig, ctx, cfg, g1, g2):
    cfg = _side_cfg(sig, tuple(ctx), cfg)
    return _terms(cfg, PRINCIPAL, g1, g2), _terms(cfg, LABEL, g1, g2)


def can_influence_closure(sig: Signature, ctx, gps, cfg: SearchConfig | None = None, max_stack: int = 2, principals=None, labels=None) -> set:
    """All pairs (g1, g2) over `gps` with g1 CanInfl g2 derivable through principals of stack depth <= max_stack."""
    graph = InfluenceGraph(sig, ctx, cfg, max_stack, principals, labels)
    gps = list(gps)
    inside = set(gps)
    out = set()
    for g in gps:
        out.update((g, h) for h in graph.reachable(g) if h in inside)
    return out
