"""Admissible rules as proof transformations: normal forms, cut elimination,
UnsaysR, simulation under a principal and speaks-for elimination.

Normalization and cut elimination work on `Node` trees.  A `Node` does not store
its context: contexts only grow (left rules keep the assumption they act on), so
weakening and contraction are free.  `export` turns a Node tree back into a
kernel proof for a concrete context, inserting Contraction where an assumption
is used again after a left rule consumed it, and renaming eigenvariables that
would clash with the context.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .kernel import (
    PRINCIPAL_RULES,
    Proof,
    RuleError,
    check_proof,
    expected_premises,
    iter_nodes,
    make,
)
from .syntax import (
    FF,
    GP,
    And,
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
    all_var_names,
    belief_equal,
    belief_key,
    context_equal,
    fresh_name,
    fv_belief,
    fv_term,
    substitute,
    substitute_belief,
    term_subst,
)

FORMULA_RULES = {
    "AndL", "AndR", "OrL", "OrR1", "OrR2", "ImpL", "ImpR",
    "ForallL", "ForallR", "ExistsL", "ExistsR", "SaysL", "SaysR",
}  # fmt: skip
PERMISSION_STEPS = {"FlowsToTrans", "CRVar", "CWVar"}
NON_FORMULA_RULES = PRINCIPAL_RULES | PERMISSION_STEPS
LEFT_PRINCIPAL = {"SelfLIntro", "SelfLElim", "VarL", "FwdL"}
RIGHT_PRINCIPAL = {"SelfRIntro", "SelfRElim", "VarR", "FwdR"}
LEFT_FORMULA = {"AndL", "OrL", "ImpL", "ForallL", "ExistsL", "SaysL"}
RIGHT_FORMULA = FORMULA_RULES - LEFT_FORMULA
STRUCTURAL_RULES = {"Weakening", "Contraction", "Exchange"}
# a left principal rule turns an assumption into what its right dual needs as premise
DUAL = {"VarL": "VarR", "FwdL": "FwdR", "SelfLIntro": "SelfRElim", "SelfLElim": "SelfRIntro"}
DUAL.update({v: k for k, v in DUAL.items()})


class TransformError(Exception):
    """`reason` is one of InputInvalid, ContextMismatch, FuelExhausted, InternalError."""

    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.message = message


# ---------------------------------------------------------------- normal form tags


@dataclass(frozen=True)
class NormalFormTag:
    kind: str  # FirstNF | SecondNF | NotNormal
    path: tuple | None = None

    def __str__(self) -> str:
        return self.kind if self.path is None else f"{self.kind}({'.'.join(map(str, self.path)) or 'root'})"

    @property
    def first_normal(self) -> bool:
        """SecondNF trees meet the first-normal-form condition vacuously."""
        return self.kind in ("FirstNF", "SecondNF")


def _second_nf(p: Proof, memo: dict) -> bool:
    key = id(p)
    if key not in memo:
        memo[key] = p.rule not in FORMULA_RULES and all(_second_nf(c, memo) for c in p.premises)
    return memo[key]


def classify_normal_form(p: Proof) -> NormalFormTag:
    """SecondNF: no formula rule anywhere.  FirstNF: every Self/Var/Fwd/permission node
    has only SecondNF subtrees.  Leaves and structural rules are neutral."""
    memo: dict = {}
    if _second_nf(p, memo):
        return NormalFormTag("SecondNF")
    for path, node in iter_nodes(p):
        if node.rule in NON_FORMULA_RULES and not all(_second_nf(c, memo) for c in node.premises):
            return NormalFormTag("NotNormal", path)
    return NormalFormTag("FirstNF")


# ---------------------------------------------------------------- context-free trees


@dataclass(frozen=True, eq=False)
class Node:
    rule: str
    goal: Belief
    premises: tuple = ()
    on: Belief | None = None  # the assumption a left rule acts on
    pos: int | None = None
    term: Term | None = None
    var: str | None = None

    def but(self, **kw) -> "Node":
        return replace(self, **kw)


def _same(a: Belief, b: Belief) -> bool:
    return belief_equal(a, b)


def products(n: Node) -> list[list[Belief]]:
    """Beliefs each premise adds to the context of `n`."""
    b, r = n.on, n.rule
    if r == "ImpR":
        f = n.goal.formula
        return [[Belief(f.left, GP(f.label))]]
    if b is None:
        return [[] for _ in n.premises]
    f, h = b.formula, b.gp
    match r:
        case "AndL":
            return [[Belief(f.left, h), Belief(f.right, h)]]
        case "OrL":
            return [[Belief(f.left, h)], [Belief(f.right, h)]]
        case "ImpL":
            return [[], [Belief(f.right, h)]]
        case "ForallL":
            return [[Belief(substitute(f.body, Var(f.var, f.sort), n.term), h)]]
        case "ExistsL":
            return [[Belief(substitute(f.body, Var(f.var, f.sort), Var(n.var, f.sort)), h)]]
        case "SaysL":
            return [[Belief(f.body, h.push(f.principal, f.label))]]
        case "SelfLIntro" | "SelfLElim" | "VarL" | "FwdL":
            return [[_moved(r, b, n.pos, n.term)]] + [[] for _ in n.premises[1:]]
    return [[] for _ in n.premises]


def _moved(rule: str, b: Belief, k: int, t) -> Belief:
    """The assumption `b` after the left principal rule `rule` at stack position k."""
    st = b.gp.stack
    match rule:
        case "SelfLIntro":
            st = st[: k + 1] + st[k + 2 :]
        case "SelfLElim":
            st = st[: k + 1] + (st[k],) + st[k + 1 :]
        case "VarL":
            st = st[:k] + ((st[k][0], t),) + st[k + 1 :]
        case "FwdL":
            st = st[:k] + ((t, st[k][1]),) + st[k + 1 :]
    return Belief(b.formula, GP(b.gp.ground, st))


def _continuing(n: Node) -> list[int]:
    """Premises whose goal is the node's goal (the main line of a left rule)."""
    if n.rule == "ImpL":
        return [1]
    if n.rule in LEFT_PRINCIPAL:
        return [0]
    return list(range(len(n.premises)))


def import_proof(p: Proof) -> Node:
    """Drop structural rules and record the assumption each left rule acts on."""
    if p.rule in STRUCTURAL_RULES:
        return import_proof(p.premises[0])
    ctx, goal = p.conclusion.context, p.conclusion.goal
    kids = tuple(import_proof(c) for c in p.premises)
    on = ctx[p.index] if p.index is not None and p.rule not in ("Ax",) else None
    var = p.var
    if var is None and p.rule == "ForallR":
        var = goal.formula.var
    if var is None and p.rule == "ExistsL":
        var = on.formula.var
    return Node(p.rule, goal, kids, on, p.pos, p.term, var)


class _Memo:
    """Per-run caches keyed by node identity."""

    def __init__(self):
        self.refs: dict = {}
        self.names: dict = {}
        self.snf: dict = {}
        self.keep: list = []  # keeps memoized nodes alive so ids stay unique

    def _pin(self, n):
        self.keep.append(n)

    def refs_of(self, n: Node) -> frozenset:
        k = id(n)
        if k not in self.refs:
            out = set()
            if n.on is not None:
                out.add(belief_key(n.on))
            if n.rule == "Ax":
                out.add(belief_key(n.goal))
            for c in n.premises:
                out |= self.refs_of(c)
            self.refs[k] = frozenset(out)
            self._pin(n)
        return self.refs[k]

    def names_of(self, n: Node) -> frozenset:
        k = id(n)
        if k not in self.names:
            out = set(_belief_names(n.goal))
            if n.on is not None:
                out |= _belief_names(n.on)
            if n.term is not None:
                out |= fv_term(n.term)
            if n.var is not None:
                out.add(n.var)
            for c in n.premises:
                out |= self.names_of(c)
            self.names[k] = frozenset(out)
            self._pin(n)
        return self.names[k]

    def second_nf(self, n: Node) -> bool:
        k = id(n)
        if k not in self.snf:
            self.snf[k] = n.rule not in FORMULA_RULES and all(self.second_nf(c) for c in n.premises)
            self._pin(n)
        return self.snf[k]


def _belief_names(b: Belief) -> set:
    out = set(all_var_names(b.formula))
    for t in b.gp.terms():
        out |= fv_term(t)
    return out


def _subst_term(t, x: Var, s):
    return None if t is None else term_subst(t, x, s)


def subst_node(n: Node, x: Var, t: Term, memo: _Memo) -> Node:
    """Replace free `x` by `t` throughout; eigenvariables that would capture are renamed first."""
    if x.name not in memo.names_of(n):
        return n
    if n.var is not None and n.rule in ("ForallR", "ExistsL"):
        if n.var in fv_term(t):
            n = rename_eigen(n, fresh_name(n.var, set(memo.names_of(n)) | fv_term(t) | {x.name}), memo)
        rebinding = n.var == x.name
    else:
        rebinding = False
    goal = substitute_belief(n.goal, x, t)
    on = None if n.on is None else substitute_belief(n.on, x, t)
    kids = n.premises if rebinding else tuple(subst_node(c, x, t, memo) for c in n.premises)
    return n.but(goal=goal, on=on, term=_subst_term(n.term, x, t), premises=kids)


def rename_eigen(n: Node, new: str, memo: _Memo) -> Node:
    old = n.var
    sort = n.goal.formula.sort if n.rule == "ForallR" else n.on.formula.sort
    kids = tuple(subst_node(c, Var(old, sort), Var(new, sort), memo) for c in n.premises)
    return n.but(var=new, premises=kids)


def _fresh_eigen(n: Node, avoid: set, memo: _Memo) -> Node:
    """Rename the eigenvariable of a ForallR/ExistsL node away from `avoid`."""
    if n.rule not in ("ForallR", "ExistsL") or n.var not in avoid:
        return n
    return rename_eigen(n, fresh_name(n.var, set(avoid) | set(memo.names_of(n))), memo)


# ---------------------------------------------------------------- export


def _find(ctx: tuple, b: Belief) -> int:
    for i in range(len(ctx) - 1, -1, -1):
        if _same(ctx[i], b):
            return i
    raise TransformError("InternalError", "an assumption used by the transformed proof is not in its context")


def export(sig: Signature, n: Node, ctx: tuple, memo: _Memo | None = None) -> Proof:
    """A kernel proof of ctx |- n.goal following the Node tree."""
    memo = memo or _Memo()
    return _emit(sig, n, tuple(ctx), memo)


def _ctx_fv(ctx: tuple) -> set:
    out: set = set()
    for b in ctx:
        out |= fv_belief(b)
    return out


def _emit(sig, n: Node, ctx: tuple, memo: _Memo) -> Proof:
    s = Sequent(ctx, n.goal)
    r = n.rule
    try:
        if r == "Ax":
            return make(sig, "Ax", s, index=_find(ctx, n.goal))
        if r == "FalseL":
            return make(sig, "FalseL", s, index=_find(ctx, n.on))
        if r in ("ForallR", "ExistsL"):
            busy = _ctx_fv(ctx) | fv_belief(n.goal)
            if n.on is not None:
                busy |= fv_belief(n.on)
            n = _fresh_eigen(n, busy, memo)
        if n.on is None:
            want = expected_premises(sig, r, s, pos=n.pos, term=n.term, var=n.var)
            kids = [_emit(sig, c, w.context, memo) for c, w in zip(n.premises, want)]
            return make(sig, r, s, kids, pos=n.pos, term=n.term, var=n.var)
        i = _find(ctx, n.on)
        again = any(belief_key(n.on) in memo.refs_of(c) for c in n.premises)
        c2, j = (ctx[: i + 1] + (ctx[i],) + ctx[i + 1 :], i + 1) if again else (ctx, i)
        s2 = Sequent(c2, n.goal)
        want = expected_premises(sig, r, s2, index=j, pos=n.pos, term=n.term, var=n.var)
        kids = [_emit(sig, c, w.context, memo) for c, w in zip(n.premises, want)]
        node = make(sig, r, s2, kids, index=j, pos=n.pos, term=n.term, var=n.var)
        return make(sig, "Contraction", s, [node], index=i) if again else node
    except RuleError as e:
        raise TransformError("InternalError", f"{r}: {e}") from None


# ---------------------------------------------------------------- normalization


class _Engine:
    def __init__(self, fuel: int | None = None):
        self.memo = _Memo()
        self.fuel = fuel

    def tick(self):
        if self.fuel is not None:
            self.fuel -= 1
            if self.fuel < 0:
                raise TransformError("FuelExhausted", "cut elimination ran out of fuel")

    # -- normalization
    def norm(self, n: Node) -> Node:
        if not n.premises:
            return n
        return self.fix(n.but(premises=tuple(self.norm(c) for c in n.premises)))

    def fix(self, n: Node) -> Node:
        """`n` with normalized premises -> normalized."""
        self.tick()
        if n.rule not in NON_FORMULA_RULES or all(self.memo.second_nf(c) for c in n.premises):
            return n
        sides = range(len(n.premises)) if n.rule in PERMISSION_STEPS else range(1, len(n.premises))
        for j in sides:
            if not self.memo.second_nf(n.premises[j]):
                return self.pull_down(n, j)
        return self.permute(n, n.premises[0])

    def pull_down(self, n: Node, j: int) -> Node:
        """Premise j proves an atom and starts with a left rule: move that rule below `n`."""
        s = n.premises[j]
        assert s.rule in LEFT_FORMULA, s.rule
        s = _fresh_eigen(s, set(self.memo.names_of(n)), self.memo)
        kids = list(s.premises)
        for m in _continuing(s):
            kids[m] = self.fix(n.but(premises=n.premises[:j] + (kids[m],) + n.premises[j + 1 :]))
        return s.but(goal=n.goal, premises=tuple(kids))

    def permute(self, n: Node, f: Node) -> Node:
        """Move the formula rule `f` (root of n's main premise) below the principal rule `n`."""
        assert f.rule in FORMULA_RULES, f.rule
        f = _fresh_eigen(f, set(self.memo.names_of(n)), self.memo)
        sides = n.premises[1:]
        kids = list(f.premises)
        if n.rule in RIGHT_PRINCIPAL:
            targets = range(len(kids)) if f.rule in RIGHT_FORMULA else _continuing(f)
            for m in targets:
                c = kids[m]
                kids[m] = self.fix(n.but(goal=_lift_goal(n.goal, f.goal, c.goal), premises=(c,) + sides))
            return f.but(goal=n.goal, premises=tuple(kids))
        # left principal rule on n.on producing b2
        b, b2 = n.on, _moved(n.rule, n.on, n.pos, n.term)
        if f.on is not None and _same(f.on, b2):
            prods_new = products(f.but(on=b))
            for m, c in enumerate(kids):
                for q_old, q_new in zip(prods_new[m], products(f)[m]):
                    if belief_key(q_new) in self.memo.refs_of(c):
                        c = self.fix(n.but(on=q_old, goal=c.goal, premises=(c,) + sides))
                if belief_key(b2) in self.memo.refs_of(c):
                    c = self.fix(n.but(goal=c.goal, premises=(c,) + sides))
                kids[m] = c
            return f.but(on=b, goal=n.goal, premises=tuple(kids))
        for m, c in enumerate(kids):
            if belief_key(b2) in self.memo.refs_of(c):
                kids[m] = self.fix(n.but(goal=c.goal, premises=(c,) + sides))
        return f.but(goal=n.goal, premises=tuple(kids))

    # -- cut elimination
    def uses(self, n: Node, a: Belief) -> bool:
        return belief_key(a) in self.memo.refs_of(n)

    def cut(self, p1: Node, a: Belief, p2: Node) -> Node:
        """From p1 : G |- a and p2 : G, a |- C build a proof of G |- C."""
        self.tick()
        if not self.uses(p2, a):
            return p2
        r = p2.rule
        if r == "Ax" and _same(p2.goal, a):
            return p1
        if p2.on is not None and _same(p2.on, a):
            if r in LEFT_PRINCIPAL:
                main, sides = p2.premises[0], p2.premises[1:]
                sides0 = tuple(self.cut(p1, a, s) for s in sides)
                a2 = _moved(r, a, p2.pos, p2.term)
                p1d = Node(DUAL[r], a2, (p1,) + sides0, None, p2.pos, _dual_term(r, a, p2.pos, p2.term))
                main0 = self.cut(p1, a, main)
                return self.cut(p1d, a2, main0)
            if r == "FalseL":
                return self.ff_extend(p1, p2.goal)
            return self.key(p1, a, p2)
        p2 = _fresh_eigen(p2, set(self.memo.names_of(p1)), self.memo)
        return p2.but(premises=tuple(self.cut(p1, a, c) for c in p2.premises))

    def key(self, p1: Node, a: Belief, p2: Node) -> Node:
        """p2 takes `a` apart with a logical left rule."""
        if p1.rule in NON_FORMULA_RULES and not self.memo.second_nf(p1):
            p1 = self.norm(p1)
        r1 = p1.rule
        if r1 == "Ax":
            return p2
        if r1 == "FalseL":
            return self.ff_cut(p1.on, a, p2)
        if r1 in RIGHT_PRINCIPAL:
            return self.transfer(p1, a, p2)
        if r1 in LEFT_FORMULA or r1 in LEFT_PRINCIPAL:
            p1 = _fresh_eigen(p1, set(self.memo.names_of(p2)), self.memo)
            kids = list(p1.premises)
            for m in _continuing(p1):
                kids[m] = self.cut(kids[m], a, p2)
            return p1.but(goal=p2.goal, premises=tuple(kids))
        return self.principal(p1, a, p2)

    def principal(self, p1: Node, a: Belief, p2: Node) -> Node:
        r1, r2 = p1.rule, p2.rule
        rest = [self.cut(p1, a, c) for c in p2.premises]
        prods = products(p2)
        match (r1, r2):
            case ("AndR", "AndL"):
                qa, qb = prods[0]
                return self.cut(p1.premises[0], qa, self.cut(p1.premises[1], qb, rest[0]))
            case ("OrR1", "OrL"):
                return self.cut(p1.premises[0], prods[0][0], rest[0])
            case ("OrR2", "OrL"):
                return self.cut(p1.premises[0], prods[1][0], rest[1])
            case ("ImpR", "ImpL"):
                test = rest[0]
                hyp = products(p1)[0][0]
                body = self.cut(test, hyp, p1.premises[0])
                return self.cut(body, prods[1][0], rest[1])
            case ("ForallR", "ForallL"):
                f = a.formula
                inst = subst_node(p1.premises[0], Var(p1.var, f.sort), p2.term, self.memo)
                return self.cut(inst, prods[0][0], rest[0])
            case ("ExistsR", "ExistsL"):
                f = a.formula
                body = subst_node(rest[0], Var(p2.var, f.sort), p1.term, self.memo)
                q = Belief(substitute(f.body, Var(f.var, f.sort), p1.term), a.gp)
                return self.cut(p1.premises[0], q, body)
            case ("SaysR", "SaysL"):
                return self.cut(p1.premises[0], prods[0][0], rest[0])
        raise TransformError("InternalError", f"no principal reduction for {r1} against {r2}")

    def transfer(self, p1: Node, a: Belief, p2: Node) -> Node:
        """p1 uses no formula rule: replay its right principal steps as left steps under p2."""
        self.tick()
        r1 = p1.rule
        if r1 == "Ax":
            return p2
        if r1 == "FalseL":
            return self.ff_cut(p1.on, a, p2)
        if r1 in RIGHT_PRINCIPAL:
            main, sides = p1.premises[0], p1.premises[1:]
            a_prev = main.goal
            dual = DUAL[r1]
            p2s = Node(dual, p2.goal, (p2,) + sides, a_prev, p1.pos, _dual_term(r1, a, p1.pos, p1.term))
            return self.transfer(main, a_prev, p2s)
        if r1 in LEFT_PRINCIPAL:
            kids = list(p1.premises)
            kids[0] = self.transfer(kids[0], a, p2)
            return p1.but(goal=p2.goal, premises=tuple(kids))
        raise TransformError("InternalError", f"unexpected {r1} in a formula-free proof")

    def ff_extend(self, p1: Node, goal: Belief) -> Node:
        """p1 proves False at a prefix of goal's principal: prove goal the same way."""
        self.tick()
        r, h = p1.rule, p1.goal.gp
        if r == "Ax":
            return Node("FalseL", goal, (), p1.goal)
        if r == "FalseL":
            return Node("FalseL", goal, (), p1.on)
        if r in RIGHT_PRINCIPAL:
            main = p1.premises[0]
            g2 = GP(goal.gp.ground, main.goal.gp.stack + goal.gp.stack[len(h.stack) :])
            inner = self.ff_extend(main, Belief(goal.formula, g2))
            return Node(r, goal, (inner,) + p1.premises[1:], None, p1.pos, p1.term)
        if r in LEFT_FORMULA or r in LEFT_PRINCIPAL:
            p1 = _fresh_eigen(p1, _belief_names(goal), self.memo)
            kids = list(p1.premises)
            for m in _continuing(p1):
                kids[m] = self.ff_extend(kids[m], goal)
            return p1.but(goal=goal, premises=tuple(kids))
        raise TransformError("InternalError", f"{r} cannot prove False")

    def ff_cut(self, ff: Belief, a: Belief, p2: Node) -> Node:
        """`ff` (False at a prefix of a's principal) is assumed; remove every use of `a` from p2."""
        self.tick()
        if not self.uses(p2, a):
            return p2
        r = p2.rule
        if r == "Ax" and _same(p2.goal, a):
            return Node("FalseL", p2.goal, (), ff)
        if p2.on is not None and _same(p2.on, a):
            if r == "FalseL":
                return Node("FalseL", p2.goal, (), ff)
            prods = products(p2)
            if r in LEFT_PRINCIPAL:
                sides = tuple(self.ff_cut(ff, a, s) for s in p2.premises[1:])
                moved = prods[0][0]
                out = self.ff_cut(ff, a, p2.premises[0])
                if ff.gp.is_prefix_of(moved.gp):
                    return self.ff_cut(ff, moved, out)
                ff2 = _moved(r, ff, p2.pos, p2.term)
                inner = self.ff_cut(ff2, moved, out)
                return Node(r, p2.goal, (inner,) + sides, ff, p2.pos, p2.term)
            m = 0 if r == "OrL" else _continuing(p2)[0]
            out = self.ff_cut(ff, a, p2.premises[m])
            for q in prods[m]:
                out = self.ff_cut(ff, q, out)
            return out
        p2 = _fresh_eigen(p2, _belief_names(ff), self.memo)
        return p2.but(premises=tuple(self.ff_cut(ff, a, c) for c in p2.premises))


def _lift_goal(concl: Belief, f_goal: Belief, c_goal: Belief) -> Belief:
    """Goal of a premise c of f after moving a right principal rule from below f to above it.

    f's goal sits at the principal rule's premise principal g'; c's goal extends g' (or is
    unrelated, for an ImpL test); the lifted goal extends the principal rule's conclusion."""
    g_prem, g_conc = f_goal.gp, concl.gp
    h = c_goal.gp
    extra = h.stack[len(g_prem.stack) :]
    return Belief(c_goal.formula, GP(g_conc.ground, g_conc.stack + extra))


def _dual_term(rule: str, b: Belief, k, t):
    """Term parameter of the dual rule that undoes `rule` applied to `b` at position k."""
    if rule in ("VarL", "VarR"):
        return b.gp.stack[k][1]
    if rule in ("FwdL", "FwdR"):
        return b.gp.stack[k][0]
    return None


# ---------------------------------------------------------------- public operations


def _require_valid(sig: Signature, p: Proof, what: str) -> None:
    rep = check_proof(sig, p)
    if not rep.valid:
        raise TransformError("InputInvalid", f"{what} does not check: {rep.reason} at {rep.path}: {rep.message}")


def _finish(sig: Signature, out: Proof, want: Sequent, what: str) -> Proof:
    rep = check_proof(sig, out)
    if not rep.valid:
        raise TransformError("InternalError", f"{what} produced an invalid proof: {rep.reason} at {rep.path}")
    if not (context_equal(out.conclusion.context, want.context) and _same(out.conclusion.goal, want.goal)):
        raise TransformError("InternalError", f"{what} changed the end sequent")
    return out


def normalize(sig: Signature, p: Proof) -> Proof:
    """An equivalent proof in first (or second) normal form with the same end sequent."""
    _require_valid(sig, p, "input proof")
    eng = _Engine()
    n = eng.norm(import_proof(p))
    out = export(sig, n, p.conclusion.context, eng.memo)
    return _finish(sig, out, p.conclusion, "normalize")


DEFAULT_FUEL = 1_000_000


def eliminate_cut(sig: Signature, p1: Proof, p2: Proof, index: int | None = None, fuel: int = DEFAULT_FUEL) -> Proof:
    """Given p1 : G |- a and p2 : G', a |- C where G' is G with `a` inserted at `index`
    (default: last), return a cut-free proof of G |- C."""
    _require_valid(sig, p1, "p1")
    _require_valid(sig, p2, "p2")
    gamma, a = p1.conclusion.context, p1.conclusion.goal
    ctx2 = p2.conclusion.context
    i = len(ctx2) - 1 if index is None else index
    if not 0 <= i < len(ctx2):
        raise TransformError("ContextMismatch", f"cut index {i} outside p2's context")
    if not _same(ctx2[i], a):
        raise TransformError("ContextMismatch", "p2's context does not hold the cut belief at the cut index")
    if not context_equal(ctx2[:i] + ctx2[i + 1 :], gamma):
        raise TransformError("ContextMismatch", "p2's context without the cut belief differs from p1's context")
    eng = _Engine(fuel)
    n1 = eng.norm(import_proof(p1))
    n2 = eng.norm(import_proof(p2))
    out = export(sig, eng.cut(n1, a, n2), gamma, eng.memo)
    return _finish(sig, out, Sequent(gamma, p2.conclusion.goal), "eliminate_cut")


def unsays_r(sig: Signature, p: Proof, fuel: int = DEFAULT_FUEL) -> Proof:
    """From a proof of G |- (q says[l] phi) @ g, a proof of G |- phi @ g.[q:l].

    Cuts p against SaysL over Ax and eliminates the cut."""
    _require_valid(sig, p, "input proof")
    gamma, goal = p.conclusion.context, p.conclusion.goal
    f = goal.formula
    if not isinstance(f, Says):
        raise TransformError("InputInvalid", "the proof does not end in a says formula")
    inner = Belief(f.body, goal.gp.push(f.principal, f.label))
    i = len(gamma)
    ax = make(sig, "Ax", Sequent(gamma + (inner,), inner), index=i)
    opener = make(sig, "SaysL", Sequent(gamma + (goal,), inner), [ax], index=i)
    return eliminate_cut(sig, p, opener, i, fuel)


def extract_disjunct(sig: Signature, p: Proof) -> tuple[str, Proof] | None:
    """Best effort: ("left"|"right", proof of that disjunct) when every branch of the
    proof, read down through rules that keep the goal, ends in the same OrR."""
    if not isinstance(p.conclusion.goal.formula, Or):
        raise TransformError("InputInvalid", "the proof does not end in a disjunction")
    _require_valid(sig, p, "input proof")
    for q in (p, normalize(sig, p)):
        for side in ("left", "right"):
            out = _narrow(sig, q, side)
            if out is not None:
                return side, out
    return None


def _narrow(sig: Signature, p: Proof, side: str) -> Proof | None:
    goal = p.conclusion.goal
    f = goal.formula
    if p.rule == ("OrR1" if side == "left" else "OrR2"):
        return p.premises[0]
    if p.rule in RIGHT_FORMULA or p.rule in ("Ax", "TrueR"):
        return None
    kids = []
    for c in p.premises:
        if c.conclusion.goal.formula == f:
            c = _narrow(sig, c, side)
            if c is None:
                return None
        kids.append(c)
    target = Belief(f.left if side == "left" else f.right, goal.gp)
    try:
        return make(sig, p.rule, Sequent(p.conclusion.context, target), kids, index=p.index, pos=p.pos, term=p.term, var=p.var)
    except RuleError:
        return None


# ---------------------------------------------------------------- simulation


def odot_formula(q: Term, l: Term, phi):
    """<q:l> (.) phi: implications get `q says[l]` in front of their premise; says is entered."""
    match phi:
        case Implies(a, lab, b):
            return Implies(Says(q, l, odot_formula(q, l, a)), lab, odot_formula(q, l, b))
        case And(a, b):
            return And(odot_formula(q, l, a), odot_formula(q, l, b))
        case Or(a, b):
            return Or(odot_formula(q, l, a), odot_formula(q, l, b))
        case Forall(x, s, body):
            return Forall(x, s, odot_formula(q, l, body))
        case Exists(x, s, body):
            return Exists(x, s, odot_formula(q, l, body))
        case Says(p, lab, body):
            return Says(p, lab, odot_formula(q, l, body))
    return phi


def odot_belief(q: Term, l: Term, b: Belief) -> Belief:
    return Belief(odot_formula(q, l, b.formula), GP(b.gp.ground, ((q, l),) + b.gp.stack))


def odot_sequent(q: Term, l: Term, s: Sequent) -> Sequent:
    return Sequent(tuple(odot_belief(q, l, b) for b in s.context), odot_belief(q, l, s.goal))


def simulate(sig: Signature, p: Proof, q: Term, l: Term) -> Proof:
    """A proof of <q:l> (.) G |- <q:l> (.) (phi @ g) from a proof of G |- phi @ g."""
    _require_valid(sig, p, "input proof")
    if (fv_term(q) | fv_term(l)) & _binders(p):
        raise TransformError("InputInvalid", "the principal and label must not mention variables bound in the proof")
    out = _simulate(sig, p, q, l)
    return _finish(sig, out, odot_sequent(q, l, p.conclusion), "simulate")


def _binders(p: Proof) -> set:
    out = set()
    for _, node in iter_nodes(p):
        if node.rule in ("ForallR", "ExistsL"):
            out.add(node.var)
        for b in (*node.conclusion.context, node.conclusion.goal):
            out |= all_var_names(b.formula) - fv_belief(b)
    return out


def _simulate(sig: Signature, p: Proof, q: Term, l: Term) -> Proof:
    s = odot_sequent(q, l, p.conclusion)
    kids = [_simulate(sig, c, q, l) for c in p.premises]
    r = p.rule
    pos = p.pos + 1 if p.pos is not None else None
    if r == "ImpR":
        f = s.goal.formula
        hyp = Belief(f.left, GP(f.label))
        opened = make(sig, "SaysL", Sequent(s.context + (hyp,), Belief(f.right, s.goal.gp)), kids, index=len(s.context))
        return make(sig, "ImpR", s, [opened])
    if r == "ImpL":
        f = s.context[p.index].formula
        rest = s.context[: p.index] + s.context[p.index + 1 :]
        test = make(sig, "SaysR", Sequent(rest, Belief(f.left, GP(f.label))), [kids[0]])
        return make(sig, "ImpL", s, [test, kids[1]], index=p.index)
    return make(sig, r, s, kids, index=p.index, pos=pos, term=p.term, var=p.var)


# ---------------------------------------------------------------- speaks-for elimination


def sf_eliminate(sig: Signature, p: Proof, d) -> Proof:
    """From p : G |- phi @ g1 and a speaks-for derivation of g1 SF g2 in G, a proof of G |- phi @ g2."""
    from .trust import check_sf

    _require_valid(sig, p, "input proof")
    rep = check_sf(sig, d)
    if not rep.valid:
        raise TransformError("InputInvalid", f"speaks-for derivation does not check: {rep.reason}: {rep.message}")
    if not context_equal(d.context, p.conclusion.context):
        raise TransformError("InputInvalid", "the speaks-for derivation lives in a different context")
    if d.left != p.conclusion.goal.gp:
        raise TransformError("InputInvalid", "the speaks-for derivation does not start at the proof's principal")
    out = _sf_elim(sig, p, d, ())
    want = Sequent(p.conclusion.context, Belief(p.conclusion.goal.formula, d.right))
    return _finish(sig, out, want, "sf_eliminate")


def _sf_elim(sig: Signature, p: Proof, d, suffix: tuple) -> Proof:
    ctx, phi = p.conclusion.context, p.conclusion.goal.formula
    goal = Sequent(ctx, Belief(phi, d.right.extend(suffix)))
    k = len(d.right.stack) - 1
    match d.rule:
        case "ReflSF":
            return p
        case "ExtSF":
            return _sf_elim(sig, p, d.premises[0], (d.left.stack[-1],) + suffix)
        case "TransSF":
            return _sf_elim(sig, _sf_elim(sig, p, d.premises[0], suffix), d.premises[1], suffix)
        case "SelfLSF":
            return make(sig, "SelfRIntro", goal, [p], pos=k - 1)
        case "SelfRSF":
            return make(sig, "SelfRElim", goal, [p], pos=k)
        case "VarSF":
            return make(sig, "VarR", goal, [p, *d.sides], pos=k, term=d.left.stack[-1][1])
        case "FwdSF":
            return make(sig, "FwdR", goal, [p, *d.sides], pos=k, term=d.left.stack[-1][0])
    raise TransformError("InputInvalid", f"unknown speaks-for rule {d.rule}")
