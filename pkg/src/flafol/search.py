"""Bounded backward proof search and random proof generation.

Invertible rules (AndL, OrL, ExistsL, SaysL, AndR, ImpR, ForallR, SaysR) are applied
eagerly and do not consume depth.  Every other rule application, including the
closing leaves, costs one unit of depth on its branch.  Once a principal-stack
rule (Self/Var/Fwd) is used, the main branch above it only uses principal-stack
rules and leaves, mirroring the normal-form shape; side conditions are searched
without that restriction.
"""

from __future__ import annotations

import random
import time
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

from .kernel import Proof, check_proof, make
from .syntax import (
    FF,
    LABEL,
    PRINCIPAL,
    TT,
    And,
    App,
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
    Term,
    Var,
    alpha_id,
    all_var_names,
    belief_equal,
    belief_key,
    closed_terms_of,
    fresh_name,
    fv_sequent,
    sort_check,
    substitute,
    term_vars,
    CAN_READ,
    CAN_WRITE,
    FLOWS_TO,
)

FOUND, EXHAUSTED, TIMED_OUT = "Found", "ExhaustedBounds", "TimedOut"


@dataclass
class SearchConfig:
    depth: int = 8
    universe: dict = field(default_factory=dict)  # sort -> list of ground terms
    structural: bool = True
    timeout: float | None = 30.0
    principal_rules: bool = True
    fresh_prefix: str = "e"
    max_calls: int | None = None  # deterministic work budget; exceeding it counts as exhausting the bounds

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")


@dataclass
class SearchOutcome:
    status: str
    proof: Proof | None = None
    explored: int = 0

    @property
    def found(self) -> bool:
        return self.status == FOUND


class _Timeout(Exception):
    pass


class _Budget(Exception):
    pass


def universe_of(sig: Signature, s: Sequent | None = None, extra=()) -> dict:
    """Declared constants plus the closed terms occurring in `s`, grouped by sort."""
    out: dict[str, list] = {}
    seen = set()

    def add(t):
        if t in seen or any(True for _ in term_vars(t)):
            return
        try:
            srt = sort_check(sig, {}, t)
        except Exception:
            return
        seen.add(t)
        out.setdefault(srt, []).append(t)

    for c in sig.constants():
        add(c)
    if s is not None:
        for b in (*s.context, s.goal):
            for t in closed_terms_of(b.formula):
                add(t)
            for t in b.gp.terms():
                add(t)
    for t in extra:
        add(t)
    return out


# -- relevance: which assumptions can contribute an atom the goal (transitively) needs.
# Variables act as wildcards, so the analysis over-approximates.


def _unify(a: Term, b: Term) -> bool:
    if isinstance(a, Var) or isinstance(b, Var):
        return True
    return a.fn == b.fn and len(a.args) == len(b.args) and all(map(_unify, a.args, b.args))


def _gp_prefix(q: GP, g: GP) -> bool:
    return (
        _unify(q.ground, g.ground)
        and len(q.stack) <= len(g.stack)
        and all(_unify(p1, p2) and _unify(l1, l2) for (p1, l1), (p2, l2) in zip(q.stack, g.stack))
    )


@lru_cache(maxsize=1 << 15)
def _needs(phi, gp: GP) -> tuple:
    match phi:
        case Rel():
            return ((phi, gp),)
        case FF():
            return ((phi, gp),)
        case And(a, b) | Or(a, b):
            return _needs(a, gp) + _needs(b, gp)
        case Implies(_, _, b) | Forall(_, _, b) | Exists(_, _, b):
            return _needs(b, gp)
        case Says(p, l, b):
            return _needs(b, gp.push(p, l))
    return ()


@lru_cache(maxsize=1 << 15)
def _produces(phi, gp: GP) -> tuple:
    """(atom, gp, needs-to-unlock) triples obtainable by taking `phi` apart on the left."""
    match phi:
        case Rel() | FF():
            return ((phi, gp, ()),)
        case And(a, b) | Or(a, b):
            return _produces(a, gp) + _produces(b, gp)
        case Forall(_, _, b) | Exists(_, _, b):
            return _produces(b, gp)
        case Says(p, l, b):
            return _produces(b, gp.push(p, l))
        case Implies(a, l, b):
            extra = _needs(a, GP(l))
            return tuple((x, g, reqs + extra) for x, g, reqs in _produces(b, gp))
    return ()


def _ground(t: Term) -> bool:
    return not any(True for _ in term_vars(t))


class _Reach:
    """Which (principal, label) pairs can be rewritten into which by principal-stack rules.

    Built from the permission atoms a context can produce, read without their
    principals and with variables as wildcards.  Explosion from False is not
    counted as a way to discharge a side condition.
    """

    def __init__(self, atoms: frozenset, labels, principals):
        self.flows = [x.args for x in atoms if x.name == FLOWS_TO]
        self.reads = [x.args for x in atoms if x.name == CAN_READ]
        self.writes = [x.args for x in atoms if x.name == CAN_WRITE]
        self.labels = list(labels)
        self.principals = list(principals)
        self.memo: dict = {}

    def _steps(self, pair, labels, principals):
        p, l = pair
        for l2 in labels:
            if l2 != l and any(_unify(a, l) and _unify(b, l2) for a, b in self.flows):
                yield (p, l2)
        if any(_unify(a, p) for a, _ in self.writes):
            for q in principals:
                if q != p and any(_unify(a, q) for a, _ in self.reads):
                    yield (q, l)

    def pair(self, x, y) -> bool:
        if x == y or not all(map(_ground, (*x, *y))):
            return True
        key = (x, y)
        if key not in self.memo:
            labels = self.labels + [y[1]]
            principals = self.principals + [y[0]]
            seen, todo = {x}, [x]
            while todo and y not in seen:
                for z in self._steps(todo.pop(), labels, principals):
                    if z not in seen:
                        seen.add(z)
                        todo.append(z)
            self.memo[key] = y in seen
        return self.memo[key]

    def stack(self, h: tuple, g: tuple, prefix: bool) -> bool:
        """A monotone alignment of `h` onto `g` (or onto a prefix of `g`) through reachable pairs."""
        if not h:
            return prefix or not g
        if not g:
            return False
        m, n = len(h), len(g)
        row = [False] * n
        for i in range(m):
            new = [False] * n
            for j in range(n):
                if i == 0 and j == 0:
                    before = True
                else:
                    before = (j > 0 and (new[j - 1] or row[j - 1])) or row[j]
                new[j] = before and self.pair(h[i], g[j])
            row = new
        return any(row) if prefix else row[-1]


def _hits(atom, agp: GP, need, reach: "_Reach | None") -> bool:
    want, ngp = need
    if not _unify(agp.ground, ngp.ground):
        return False
    if isinstance(atom, FF):
        return _gp_prefix(agp, ngp) if reach is None else reach.stack(agp.stack, ngp.stack, True)
    if not (
        isinstance(want, Rel)
        and atom.name == want.name
        and len(atom.args) == len(want.args)
        and all(map(_unify, atom.args, want.args))
    ):
        return False
    if reach is None:
        return len(agp.stack) == len(ngp.stack) and _gp_prefix(agp, ngp)
    return reach.stack(agp.stack, ngp.stack, False)


_ANY_L, _ANY_P = Var("_l", LABEL), Var("_p", PRINCIPAL)
_PERMISSION_NEEDS = tuple(
    (Rel(n, args), GP(_ANY_L)) for n, args in ((FLOWS_TO, (_ANY_L, _ANY_L)), (CAN_READ, (_ANY_P, _ANY_L)), (CAN_WRITE, (_ANY_P, _ANY_L)))
)


def _key(ctx, goal, phase2: bool):
    # exact beliefs rather than alpha classes: cheaper, and a missed memo hit only costs time
    return (frozenset(Counter(ctx).items()), goal, phase2)


class Searcher:
    def __init__(self, sig: Signature, cfg: SearchConfig):
        self.sig = sig
        self.cfg = cfg
        self.deadline = None if cfg.timeout is None else time.monotonic() + cfg.timeout
        self.failed: dict = {}
        self.reaches: dict = {}
        self.calls = 0

    # -- bookkeeping
    def _tick(self):
        self.calls += 1
        if self.cfg.max_calls is not None and self.calls > self.cfg.max_calls:
            raise _Budget()
        if self.deadline is not None and self.calls % 256 == 0 and time.monotonic() > self.deadline:
            raise _Timeout()

    def _terms(self, sort: str, ctx, goal) -> list[Term]:
        base = list(self.cfg.universe.get(sort, ()))
        names = fv_sequent(Sequent(tuple(ctx), goal))
        extra = []
        if names:
            for b in (*ctx, goal):
                from .syntax import formula_terms

                for t in (*formula_terms(b.formula), *b.gp.terms()):
                    if isinstance(t, Var) and t.name in names and t.sort == sort and t not in extra:
                        extra.append(t)
        extra.sort(key=lambda v: v.name)
        return base + [v for v in extra if v not in base]

    def _relevance(self, ctx, goal):
        """Indices of useful assumptions and the accumulated needs."""
        needs = list(_needs(goal.formula, goal.gp))
        phi = goal.formula
        permission_goal = isinstance(phi, Rel) and phi.name in (FLOWS_TO, CAN_READ, CAN_WRITE)
        if permission_goal:
            needs.extend(_PERMISSION_NEEDS)
        prods = [_produces(b.formula, b.gp) for b in ctx]
        reach = self._reach(prods)
        marked: set[int] = set()
        self._mark(prods, needs, reach, marked)
        # side conditions of stack rules only matter once some assumption can reach the goal
        if marked and self.cfg.principal_rules and not permission_goal:
            needs.extend(_PERMISSION_NEEDS)
            self._mark(prods, needs, reach, marked)
        return marked, needs, reach

    @staticmethod
    def _mark(prods, needs: list, reach, marked: set) -> None:
        changed = True
        while changed:
            changed = False
            for i, ps in enumerate(prods):
                if i in marked:
                    continue
                for atom, agp, reqs in ps:
                    if any(_hits(atom, agp, n, reach) for n in needs):
                        marked.add(i)
                        needs.extend(reqs)
                        changed = True
                        break

    def _reach(self, prods) -> _Reach | None:
        if not self.cfg.principal_rules:
            return None
        atoms = frozenset(
            a for ps in prods for a, _, _ in ps if isinstance(a, Rel) and a.name in (FLOWS_TO, CAN_READ, CAN_WRITE)
        )
        if atoms not in self.reaches:
            u = self.cfg.universe
            self.reaches[atoms] = _Reach(atoms, u.get(LABEL, ()), u.get(PRINCIPAL, ()))
        return self.reaches[atoms]

    def _useful(self, b: Belief, needs, reach) -> bool:
        return any(_hits(a, g, n, reach) for a, g, _ in _produces(b.formula, b.gp) for n in needs)

    def _fresh(self, ctx, goal) -> str:
        avoid = fv_sequent(Sequent(tuple(ctx), goal)) | set(self.sig.functions)
        n = 0
        while f"{self.cfg.fresh_prefix}{n}" in avoid:
            n += 1
        return f"{self.cfg.fresh_prefix}{n}"

    def _node(self, rule, ctx, goal, premises=(), **params) -> Proof:
        return make(self.sig, rule, Sequent(tuple(ctx), goal), premises, **params)

    # -- main entry
    def prove(self, ctx: tuple, goal: Belief, depth: int, phase2: bool = False) -> Proof | None:
        self._tick()
        key = _key(ctx, goal, phase2)
        if self.failed.get(key, -1) >= depth:
            return None
        res = self._prove(tuple(ctx), goal, depth, phase2)
        if res is None:
            self.failed[key] = max(depth, self.failed.get(key, -1))
        return res

    def _prove(self, ctx: tuple, goal: Belief, depth: int, phase2: bool) -> Proof | None:
        if not phase2:
            eager = self._eager(ctx, goal, depth)
            if eager is not False:
                return eager
        if depth <= 0:
            return None
        leaf = self._close(ctx, goal)
        if leaf is not None:
            return leaf
        d = depth - 1
        phi, g = goal.formula, goal.gp
        if not phase2:
            for p in self._right_choices(ctx, goal, d):
                if p is not None:
                    return p
            for p in self._left_choices(ctx, goal, d):
                if p is not None:
                    return p
        for p in self._permission_choices(ctx, goal, d):
            if p is not None:
                return p
        if self.cfg.principal_rules:
            for p in self._principal_choices(ctx, goal, d):
                if p is not None:
                    return p
        return None

    # -- eager invertible steps; returns False when none applies
    def _eager(self, ctx, goal, depth):
        for i, b in enumerate(ctx):
            f = b.formula
            match f:
                case And(a, c):
                    sub = self.prove(ctx[:i] + (Belief(a, b.gp), Belief(c, b.gp)) + ctx[i + 1 :], goal, depth)
                    return None if sub is None else self._node("AndL", ctx, goal, [sub], index=i)
                case Says(p, l, body):
                    sub = self.prove(ctx[:i] + (Belief(body, b.gp.push(p, l)),) + ctx[i + 1 :], goal, depth)
                    return None if sub is None else self._node("SaysL", ctx, goal, [sub], index=i)
                case Exists(x, s, body):
                    y = self._fresh(ctx, goal)
                    inst = Belief(substitute(body, Var(x, s), Var(y, s)), b.gp)
                    sub = self.prove(ctx[:i] + (inst,) + ctx[i + 1 :], goal, depth)
                    return None if sub is None else self._node("ExistsL", ctx, goal, [sub], index=i, var=y)
                case Or(a, c):
                    left = self.prove(ctx[:i] + (Belief(a, b.gp),) + ctx[i + 1 :], goal, depth)
                    if left is None:
                        return None
                    right = self.prove(ctx[:i] + (Belief(c, b.gp),) + ctx[i + 1 :], goal, depth)
                    return None if right is None else self._node("OrL", ctx, goal, [left, right], index=i)
        phi, g = goal.formula, goal.gp
        match phi:
            case Implies(a, l, c):
                sub = self.prove(ctx + (Belief(a, GP(l)),), Belief(c, g), depth)
                return None if sub is None else self._node("ImpR", ctx, goal, [sub])
            case Forall(x, s, body):
                y = self._fresh(ctx, goal)
                sub = self.prove(ctx, Belief(substitute(body, Var(x, s), Var(y, s)), g), depth)
                return None if sub is None else self._node("ForallR", ctx, goal, [sub], var=y)
            case Says(p, l, body):
                sub = self.prove(ctx, Belief(body, g.push(p, l)), depth)
                return None if sub is None else self._node("SaysR", ctx, goal, [sub])
            case And(a, c):
                left = self.prove(ctx, Belief(a, g), depth)
                if left is None:
                    return None
                right = self.prove(ctx, Belief(c, g), depth)
                return None if right is None else self._node("AndR", ctx, goal, [left, right])
        return False

    def _close(self, ctx, goal) -> Proof | None:
        for i, b in enumerate(ctx):
            if belief_equal(b, goal):
                return self._node("Ax", ctx, goal, index=i)
        phi = goal.formula
        if isinstance(phi, TT):
            return self._node("TrueR", ctx, goal)
        for i, b in enumerate(ctx):
            if isinstance(b.formula, FF) and b.gp.is_prefix_of(goal.gp):
                return self._node("FalseL", ctx, goal, index=i)
        if isinstance(phi, Rel) and phi.name == FLOWS_TO and phi.args[0] == phi.args[1]:
            return self._node("FlowsToRefl", ctx, goal)
        return None

    def _right_choices(self, ctx, goal, d):
        phi, g = goal.formula, goal.gp
        if isinstance(phi, Or):
            for rule, part in (("OrR1", phi.left), ("OrR2", phi.right)):
                sub = self.prove(ctx, Belief(part, g), d)
                yield None if sub is None else self._node(rule, ctx, goal, [sub])
        if isinstance(phi, Exists):
            for t in self._terms(phi.sort, ctx, goal):
                sub = self.prove(ctx, Belief(substitute(phi.body, Var(phi.var, phi.sort), t), g), d)
                yield None if sub is None else self._node("ExistsR", ctx, goal, [sub], term=t)

    def _with_copy(self, ctx, i):
        """Context and index to act on: a fresh copy right after `i` when contraction is allowed."""
        if self.cfg.structural:
            return ctx[: i + 1] + (ctx[i],) + ctx[i + 1 :], i + 1
        return ctx, i

    def _wrap_copy(self, ctx, goal, i, sub: Proof) -> Proof:
        if self.cfg.structural:
            return self._node("Contraction", ctx, goal, [sub], index=i)
        return sub

    def _left_choices(self, ctx, goal, d):
        present = {belief_key(b) for b in ctx}
        marked, needs, reach = self._relevance(ctx, goal)
        for i, b in enumerate(ctx):
            f = b.formula
            if isinstance(f, Implies) and i in marked:
                cons = Belief(f.right, b.gp)
                if belief_key(cons) in present:
                    continue
                c2, j = self._with_copy(ctx, i)
                test = self.prove(c2[:j] + c2[j + 1 :], Belief(f.left, GP(f.label)), d)
                if test is None:
                    yield None
                    continue
                rest = self.prove(c2[:j] + (cons,) + c2[j + 1 :], goal, d)
                if rest is None:
                    yield None
                    continue
                node = self._node("ImpL", c2, goal, [test, rest], index=j)
                yield self._wrap_copy(ctx, goal, i, node)
        for i, b in enumerate(ctx):
            f = b.formula
            if isinstance(f, Forall) and i in marked:
                for t in self._terms(f.sort, ctx, goal):
                    inst = Belief(substitute(f.body, Var(f.var, f.sort), t), b.gp)
                    if belief_key(inst) in present or not self._useful(inst, needs, reach):
                        continue
                    c2, j = self._with_copy(ctx, i)
                    sub = self.prove(c2[:j] + (inst,) + c2[j + 1 :], goal, d)
                    if sub is None:
                        yield None
                        continue
                    node = self._node("ForallL", c2, goal, [sub], index=j, term=t)
                    yield self._wrap_copy(ctx, goal, i, node)

    def _permission_choices(self, ctx, goal, d):
        phi, g = goal.formula, goal.gp
        if not isinstance(phi, Rel) or phi.name not in (FLOWS_TO, CAN_READ, CAN_WRITE):
            return
        labels = self._terms(LABEL, ctx, goal)
        a, c = phi.args
        for m in labels:
            if phi.name == FLOWS_TO:
                if m in (a, c):
                    continue
                first, second = Belief(Rel(FLOWS_TO, (a, m)), g), Belief(Rel(FLOWS_TO, (m, c)), g)
                rule = "FlowsToTrans"
            elif phi.name == CAN_READ:
                if m == c:
                    continue
                first, second = Belief(Rel(CAN_READ, (a, m)), g), Belief(Rel(FLOWS_TO, (c, m)), g)
                rule = "CRVar"
            else:
                if m == c:
                    continue
                first, second = Belief(Rel(CAN_WRITE, (a, m)), g), Belief(Rel(FLOWS_TO, (m, c)), g)
                rule = "CWVar"
            p1 = self.prove(ctx, first, d)
            if p1 is None:
                yield None
                continue
            p2 = self.prove(ctx, second, d)
            yield None if p2 is None else self._node(rule, ctx, goal, [p1, p2], term=m)

    def _principal_choices(self, ctx, goal, d):
        phi, g = goal.formula, goal.gp
        reach = self._reach([_produces(b.formula, b.gp) for b in ctx])
        relevant = [
            i
            for i, b in enumerate(ctx)
            if b.gp.ground == g.ground
            and (
                (isinstance(b.formula, FF) and reach.stack(b.gp.stack, g.stack, True))
                or (alpha_id(b.formula) == alpha_id(phi) and reach.stack(b.gp.stack, g.stack, False))
            )
        ]
        if not relevant:
            return
        labels = self._terms(LABEL, ctx, goal)
        principals = self._terms(PRINCIPAL, ctx, goal)
        # right-hand rules on the goal's stack
        st = g.stack
        for k in range(len(st) - 1):
            if st[k] == st[k + 1]:
                sub = self.prove(ctx, Belief(phi, GP(g.ground, st[: k + 1] + st[k + 2 :])), d, True)
                yield None if sub is None else self._node("SelfRIntro", ctx, goal, [sub], pos=k)
        for k, (p, l) in enumerate(st):
            for l2 in labels:
                if l2 == l:
                    continue
                main = self.prove(ctx, Belief(phi, g.replace(k, (p, l2))), d, True)
                if main is None:
                    yield None
                    continue
                side = self.prove(ctx, Belief(Rel(FLOWS_TO, (l2, l)), g.prefix(k).push(p, l)), d)
                yield None if side is None else self._node("VarR", ctx, goal, [main, side], pos=k, term=l2)
            for p2 in principals:
                if p2 == p:
                    continue
                yield self._fwd_right(ctx, goal, k, p2, d)
        # left-hand rules on assumptions that could close the goal
        for i in relevant:
            b = ctx[i]
            h = b.gp.stack
            for k in range(len(h) - 1):
                if h[k] == h[k + 1]:
                    nb = Belief(b.formula, GP(b.gp.ground, h[: k + 1] + h[k + 2 :]))
                    sub = self.prove(ctx[:i] + (nb,) + ctx[i + 1 :], goal, d, True)
                    yield None if sub is None else self._node("SelfLIntro", ctx, goal, [sub], index=i, pos=k)
            for k, (p, l) in enumerate(h):
                for l2 in labels:
                    if l2 == l:
                        continue
                    nb = Belief(b.formula, b.gp.replace(k, (p, l2)))
                    main = self.prove(ctx[:i] + (nb,) + ctx[i + 1 :], goal, d, True)
                    if main is None:
                        yield None
                        continue
                    side = self.prove(ctx, Belief(Rel(FLOWS_TO, (l, l2)), b.gp.prefix(k).push(p, l2)), d)
                    yield None if side is None else self._node("VarL", ctx, goal, [main, side], index=i, pos=k, term=l2)
                for q in principals:
                    if q == p:
                        continue
                    yield self._fwd_left(ctx, goal, i, k, q, d)
        # duplicating a pair is only useful ahead of a forward step
        for k in range(len(st)):
            sub = self.prove(ctx, Belief(phi, GP(g.ground, st[: k + 1] + (st[k],) + st[k + 1 :])), d, True)
            yield None if sub is None else self._node("SelfRElim", ctx, goal, [sub], pos=k)
        for i in relevant:
            b = ctx[i]
            h = b.gp.stack
            for k in range(len(h)):
                nb = Belief(b.formula, GP(b.gp.ground, h[: k + 1] + (h[k],) + h[k + 1 :]))
                sub = self.prove(ctx[:i] + (nb,) + ctx[i + 1 :], goal, d, True)
                yield None if sub is None else self._node("SelfLElim", ctx, goal, [sub], index=i, pos=k)

    def _fwd_right(self, ctx, goal, k, p, d):
        phi, g = goal.formula, goal.gp
        q, l = g.stack[k]
        base = g.prefix(k)
        main = self.prove(ctx, Belief(phi, g.replace(k, (p, l))), d, True)
        if main is None:
            return None
        cr = self.prove(ctx, Belief(Rel(CAN_READ, (q, l)), base.push(p, l)), d)
        if cr is None:
            return None
        cw = self.prove(ctx, Belief(Rel(CAN_WRITE, (p, l)), base.push(q, l)), d)
        return None if cw is None else self._node("FwdR", ctx, goal, [main, cr, cw], pos=k, term=p)

    def _fwd_left(self, ctx, goal, i, k, q, d):
        b = ctx[i]
        p, l = b.gp.stack[k]
        base = b.gp.prefix(k)
        nb = Belief(b.formula, b.gp.replace(k, (q, l)))
        main = self.prove(ctx[:i] + (nb,) + ctx[i + 1 :], goal, d, True)
        if main is None:
            return None
        cr = self.prove(ctx, Belief(Rel(CAN_READ, (q, l)), base.push(p, l)), d)
        if cr is None:
            return None
        cw = self.prove(ctx, Belief(Rel(CAN_WRITE, (p, l)), base.push(q, l)), d)
        return None if cw is None else self._node("FwdL", ctx, goal, [main, cr, cw], index=i, pos=k, term=q)


def bounded_prove(sig: Signature, s: Sequent, cfg: SearchConfig | None = None) -> SearchOutcome:
    """Iterative deepening up to cfg.depth.  ExhaustedBounds is not a disproof."""
    cfg = cfg or SearchConfig(universe=universe_of(sig, s))
    searcher = Searcher(sig, cfg)
    try:
        for d in range(cfg.depth + 1):
            p = searcher.prove(tuple(s.context), s.goal, d)
            if p is not None:
                if not check_proof(sig, p).valid:  # pragma: no cover - the searcher builds through the kernel
                    raise AssertionError("search produced an invalid proof")
                return SearchOutcome(FOUND, p, searcher.calls)
    except _Timeout:
        return SearchOutcome(TIMED_OUT, None, searcher.calls)
    except _Budget:
        pass
    return SearchOutcome(EXHAUSTED, None, searcher.calls)


def prove_or_none(sig: Signature, s: Sequent, depth: int = 6, universe: dict | None = None, **kw) -> Proof | None:
    cfg = SearchConfig(depth=depth, universe=universe if universe is not None else universe_of(sig, s), **kw)
    out = bounded_prove(sig, s, cfg)
    return out.proof


# ---------------------------------------------------------------- random proofs


def small_signature(principals: int = 3, labels: int = 3) -> Signature:
    """Principals A, B, C..., labels L0, L1... (L0 is the default ground label), relations R(P) and S(P, L)."""
    funcs = {chr(ord("A") + i): ((), PRINCIPAL) for i in range(principals)}
    funcs.update({f"L{i}": ((), LABEL) for i in range(labels)})
    return Signature(
        functions=funcs,
        relations={"R": (PRINCIPAL,), "S": (PRINCIPAL, LABEL)},
        default_label=App("L0"),
    )


class _Forms:
    """Random syntax over a signature and a finite term universe."""

    def __init__(self, sig: Signature, universe: dict, rng: random.Random, relations=None):
        self.sig, self.u, self.rng = sig, universe, rng
        names = relations if relations is not None else sorted(sig.relations)
        self.rels = [r for r in names if all(self.u.get(srt) for srt in sig.relations[r])]
        self.labels = list(self.u.get(LABEL, ()))
        self.principals = list(self.u.get(PRINCIPAL, ()))

    def atom(self) -> Rel:
        r = self.rng.choice(self.rels)
        return Rel(r, tuple(self.rng.choice(self.u[srt]) for srt in self.sig.relations[r]))

    def label(self) -> Term:
        return self.rng.choice(self.labels)

    def gp(self, max_stack: int = 1) -> GP:
        ground = self.sig.default_label or self.label()
        stack = tuple((self.rng.choice(self.principals), self.label()) for _ in range(self.rng.randint(0, max_stack)))
        return GP(ground, stack)

    def formula(self, depth: int):
        if depth <= 0 or self.rng.random() < 0.3:
            roll = self.rng.random()
            return FF() if roll < 0.04 else TT() if roll < 0.07 else self.atom()
        k = self.rng.randrange(6)
        if k == 0:
            return And(self.formula(depth - 1), self.formula(depth - 1))
        if k == 1:
            return Or(self.formula(depth - 1), self.formula(depth - 1))
        if k == 2:
            return Implies(self.formula(depth - 1), self.label(), self.formula(depth - 1))
        if k == 3:
            return Says(self.rng.choice(self.principals), self.label(), self.formula(depth - 1))
        body = self.formula(depth - 1)
        gen = _generalize(self.sig, body, self.rng, Forall if k == 4 else Exists)
        return gen if gen is not None else body


def _generalize(sig: Signature, phi, rng: random.Random, quant):
    """Abstract one constant argument of an atom in `phi` into a fresh bound variable."""
    spots = [(r, j) for r in _atoms(phi) for j, a in enumerate(r.args) if isinstance(a, App) and not a.args]
    if not spots:
        return None
    r, j = rng.choice(spots)
    x = fresh_name("x", all_var_names(phi))
    v = Var(x, sig.relations[r.name][j])
    return quant(x, v.sort, _replace_arg(phi, r, j, v))


def _atoms(phi):
    match phi:
        case Rel():
            yield phi
        case And(a, b) | Or(a, b) | Implies(a, _, b):
            yield from _atoms(a)
            yield from _atoms(b)
        case Forall(_, _, b) | Exists(_, _, b) | Says(_, _, b):
            yield from _atoms(b)


def _replace_arg(phi, target: Rel, j: int, v: Var):
    """Replace argument j of the first atom identical to `target`."""
    done = [False]

    def go(f):
        if done[0]:
            return f
        match f:
            case Rel():
                if f == target:
                    done[0] = True
                    args = list(f.args)
                    args[j] = v
                    return Rel(f.name, tuple(args))
                return f
            case And(a, b):
                return And(go(a), go(b))
            case Or(a, b):
                return Or(go(a), go(b))
            case Implies(a, l, b):
                return Implies(go(a), l, go(b))
            case Says(p, l, b):
                return Says(p, l, go(b))
            case Forall(x, srt, b):
                return Forall(x, srt, go(b))
            case Exists(x, srt, b):
                return Exists(x, srt, go(b))
        return f

    return go(phi)


def _forward(forms: _Forms, ctx: tuple, steps: int, start: Belief | None = None) -> Belief:
    """A belief derivable from `ctx` by `steps` random forward rule applications."""
    rng = forms.rng
    derived = list(ctx)
    last = start
    for n in range(steps):
        b = last if (n == 0 and start is not None) else rng.choice(derived)
        f, g = b.formula, b.gp
        options = [
            Belief(Or(f, forms.formula(1)), g),
            Belief(Or(forms.formula(1), f), g),
            Belief(Implies(forms.formula(1), forms.label(), f), g),
        ]
        match f:
            case And(x, y):
                options += [Belief(x, g), Belief(y, g)]
            case Says(p, l, x):
                options.append(Belief(x, g.push(p, l)))
            case Forall(x, srt, body):
                options += [Belief(substitute(body, Var(x, srt), t), g) for t in forms.u.get(srt, ())]
            case Implies(x, l, y):
                if any(belief_equal(d, Belief(x, GP(l))) for d in derived):
                    options += [Belief(y, g)] * 3
        if g.stack:
            p, l = g.stack[-1]
            options.append(Belief(Says(p, l, f), GP(g.ground, g.stack[:-1])))
        mates = [d for d in derived if d.gp == g]
        if mates:
            options.append(Belief(And(f, rng.choice(mates).formula), g))
        ex = _generalize(forms.sig, f, rng, Exists)
        if ex is not None:
            options.append(Belief(ex, g))
        last = rng.choice(options)
        derived.append(last)
    return last


def _decorate(sig: Signature, p: Proof, rng: random.Random) -> Proof:
    """Insert a SelfRIntro/SelfRElim detour at a random node whose goal has a non-empty stack."""
    from .kernel import iter_nodes, replace_at

    spots = [(path, node) for path, node in iter_nodes(p) if node.conclusion.goal.gp.stack]
    if not spots or rng.random() < 0.5:
        return p
    path, node = rng.choice(spots)
    s = node.conclusion
    g = s.goal.gp
    k = rng.randrange(len(g.stack))
    doubled = Sequent(s.context, Belief(s.goal.formula, GP(g.ground, g.stack[: k + 1] + g.stack[k:])))
    mid = make(sig, "SelfRIntro", doubled, [node], pos=k)
    return replace_at(p, path, make(sig, "SelfRElim", s, [mid], pos=k))


def _search_cfg(cfg: SearchConfig, universe: dict) -> SearchConfig:
    return SearchConfig(
        depth=cfg.depth,
        universe=universe,
        structural=cfg.structural,
        timeout=None,
        principal_rules=cfg.principal_rules,
        max_calls=cfg.max_calls or 4000,
    )


def generate_random_proofs(
    sig: Signature, cfg: SearchConfig, seed: int, n: int, relations=None, decorate: bool = True
) -> list[Proof]:
    """`n` valid proofs of randomly derived goals; identical output for identical arguments.

    Random contexts are drawn over `cfg.universe` (or the declared constants), a goal is
    built by forward rule applications, and the proof is recovered with budgeted search.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = random.Random(seed)
    universe = cfg.universe or universe_of(sig)
    forms = _Forms(sig, universe, rng, relations)
    scfg = _search_cfg(cfg, universe)
    out: list[Proof] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 100 * n + 100:
            raise RuntimeError(f"only {len(out)} of {n} random goals were provable within the bounds")
        ctx = tuple(Belief(forms.formula(2), forms.gp()) for _ in range(rng.randint(1, 3)))
        goal = _forward(forms, ctx, rng.randint(1, 4))
        res = bounded_prove(sig, Sequent(ctx, goal), scfg)
        if res.found:
            out.append(_decorate(sig, res.proof, rng) if decorate else res.proof)
    return out


def generate_cut_instances(
    sig: Signature, cfg: SearchConfig, seed: int, n: int, max_depth: int = 6, relations=None
) -> list[tuple[Proof, Proof]]:
    """Pairs (p1 : G |- A, p2 : G, A |- C) with A appended last; both of depth <= max_depth."""
    from .kernel import proof_depth

    rng = random.Random(seed)
    universe = cfg.universe or universe_of(sig)
    forms = _Forms(sig, universe, rng, relations)
    scfg = _search_cfg(cfg, universe)
    out: list[tuple[Proof, Proof]] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 200 * n + 100:
            raise RuntimeError(f"only {len(out)} of {n} cut instances were found within the bounds")
        ctx = tuple(Belief(forms.formula(2), forms.gp()) for _ in range(rng.randint(1, 3)))
        cut = _forward(forms, ctx, rng.randint(1, 3))
        r1 = bounded_prove(sig, Sequent(ctx, cut), scfg)
        if not r1.found:
            continue
        goal = _forward(forms, ctx + (cut,), rng.randint(1, 3), start=cut)
        r2 = bounded_prove(sig, Sequent(ctx + (cut,), goal), scfg)
        if not r2.found:
            continue
        p1, p2 = _decorate(sig, r1.proof, rng), _decorate(sig, r2.proof, rng)
        if max(proof_depth(p1), proof_depth(p2)) <= max_depth:
            out.append((p1, p2))
    return out
