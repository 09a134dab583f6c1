"""Non-interference auditing.

Given a proof of  G, phi @ g1 |- psi @ g2  and the index of phi @ g1, `audit` either
rebuilds the proof without that assumption or explains how it reaches the goal:
a compatible supercontext D, members g1' of G(phi @ g1) and g2' of G(psi @ g2),
a suffix g1'' and a derivation of  D |- g1'.g1'' CanInfl g2'.

The walk tracks every belief derived from the marked one.  Each tracked belief
carries an origin describing, for any member e of its G-set, a can-influence
chain from the marked belief's G-set to e.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .csc import CSCDerivation, check_csc, csc_for_path, csc_refl, csc_union, same_multiset
from .kernel import STRUCTURAL, CheckReport, Proof, check_proof
from .syntax import GP, Belief, Sequent, Signature, belief_equal, belief_key, context_equal, has_implies
from .transforms import TransformError, eliminate_cut, export, import_proof, Node
from .trust import (
    CIDerivation,
    SFDerivation,
    check_ci,
    ci_nodes,
    ext_ci,
    ext_sf,
    g_set,
    imp_ci,
    refl_sf,
    sf_ci,
    some_member,
    trans_ci,
    with_context,
)


class NIError(Exception):
    """`reason` is InputInvalid or ImplicationNotDischarged."""

    def __init__(self, reason: str, message: str):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.message = message


@dataclass(frozen=True)
class Pruned:
    proof: Proof


@dataclass(frozen=True)
class Influence:
    delta: tuple
    csc: CSCDerivation
    g1: GP  # member of G(phi @ g1)
    g2: GP  # member of G(psi @ g2)
    suffix: tuple  # g1''
    ci: CIDerivation
    g1_subst: dict  # generic-variable instantiation making g1 a member
    g2_subst: dict


# ---------------------------------------------------------------- origins


@dataclass(frozen=True)
class _Flow:
    g1: GP
    suffix: tuple
    ci: CIDerivation  # context-free until the supercontext is known
    g2: GP
    paths: frozenset


class _Root:
    pass


@dataclass(frozen=True)
class _Same:
    parent: object


@dataclass(frozen=True)
class _Step:
    parent: object
    sf: SFDerivation  # from the parent's principal prefix to the product's
    path: tuple


@dataclass(frozen=True)
class _Imp:
    test: _Flow
    implication: Belief
    path: tuple


@dataclass(frozen=True)
class _Side:
    side: _Flow


def _resolve(o, e: GP) -> _Flow:
    """A chain from the marked belief's G-set to e, a member of the tracked belief's G-set."""
    match o:
        case _Root():
            return _Flow(e, (), sf_ci(refl_sf(None, e)), e, frozenset())
        case _Same(parent):
            return _resolve(parent, e)
        case _Step(parent, sf, path):
            n = len(sf.right.stack)
            assert e.stack[:n] == sf.right.stack, "step does not prefix the member"
            rest = e.stack[n:]
            f = _resolve(parent, sf.left.extend(rest))
            return _Flow(f.g1, f.suffix, trans_ci(f.ci, sf_ci(ext_sf(sf, rest))), e, f.paths | {path})
        case _Imp(test, imp, path):
            ci = trans_ci(test.ci, imp_ci(None, None, imp, test.g2, e))
            return _Flow(test.g1, test.suffix, ci, e, test.paths | {path})
        case _Side(side):
            return _extend(side, e)
    raise AssertionError(o)


def _extend(f: _Flow, e: GP) -> _Flow:
    """f ends at a prefix of e; extend both sides by the rest of e."""
    n = len(f.g2.stack)
    assert f.g2.ground == e.ground and e.stack[:n] == f.g2.stack, "influence target is not a prefix"
    ext = e.stack[n:]
    return _Flow(f.g1, f.suffix + ext, ext_ci(f.ci, ext), e, f.paths)


def _then(f: _Flow, sf: SFDerivation, path: tuple) -> _Flow:
    """Continue f (ending at sf.left.rest) with the speaks-for step sf."""
    n = len(sf.left.stack)
    assert f.g2.stack[:n] == sf.left.stack
    rest = f.g2.stack[n:]
    return _Flow(f.g1, f.suffix, trans_ci(f.ci, sf_ci(ext_sf(sf, rest))), sf.right.extend(rest), f.paths | {path})


# ---------------------------------------------------------------- the walk


_LEFT_ONE = {"AndL": 2, "ForallL": 1, "ExistsL": 1, "SaysL": 1, "SelfLIntro": 1, "SelfLElim": 1, "VarL": 1, "FwdL": 1}


def _shift(T: dict, i: int, n: int) -> dict:
    """Tracking after replacing index i by n beliefs (i itself is dropped)."""
    return {(k if k < i else k + n - 1): o for k, o in T.items() if k != i}


def _left_step(rule: str, b: Belief, k: int, term, sides: tuple) -> SFDerivation:
    """Speaks-for step matching a left principal rule applied to b at position k."""
    st = b.gp.stack
    base = b.gp.prefix(k)
    p, l = st[k]
    match rule:
        case "SelfLIntro":
            return SFDerivation("SelfRSF", None, base.push(p, l).push(p, l), base.push(p, l))
        case "SelfLElim":
            return SFDerivation("SelfLSF", None, base.push(p, l), base.push(p, l).push(p, l))
        case "VarL":
            return SFDerivation("VarSF", None, base.push(p, l), base.push(p, term), sides=sides)
        case "FwdL":
            return SFDerivation("FwdSF", None, base.push(p, l), base.push(term, l), sides=sides)
    raise AssertionError(rule)


def _right_step(rule: str, g: GP, k: int, term, sides: tuple) -> SFDerivation:
    """Speaks-for step from a right principal rule's premise principal to its conclusion's."""
    st = g.stack
    base = g.prefix(k)
    p, l = st[k]
    match rule:
        case "SelfRIntro":
            return SFDerivation("SelfLSF", None, base.push(p, l), base.push(p, l).push(p, l))
        case "SelfRElim":
            return SFDerivation("SelfRSF", None, base.push(p, l).push(p, l), base.push(p, l))
        case "VarR":
            return SFDerivation("VarSF", None, base.push(p, term), base.push(p, l), sides=sides)
        case "FwdR":
            return SFDerivation("FwdSF", None, base.push(term, l), base.push(p, l), sides=sides)
    raise AssertionError(rule)


class _Walker:
    def __init__(self, sig: Signature):
        self.sig = sig

    def member(self, b: Belief) -> GP:
        return some_member(g_set(b.formula, b.gp), self.sig)[0]

    def walk(self, node: Proof, path: tuple, T: dict):
        """('pruned', Node) when no tracked belief is needed, else ('flow', _Flow)."""
        r, ctx, goal = node.rule, node.conclusion.context, node.conclusion.goal
        i = node.index
        kids = node.premises
        if r == "Ax":
            if i in T:
                f = _resolve(T[i], self.member(goal))
                return "flow", _Flow(f.g1, f.suffix, f.ci, f.g2, f.paths | {path})
            return "pruned", Node("Ax", goal)
        if r == "FalseL":
            if i in T:
                f = _extend(_resolve(T[i], ctx[i].gp), self.member(goal))
                return "flow", _Flow(f.g1, f.suffix, f.ci, f.g2, f.paths | {path})
            return "pruned", Node("FalseL", goal, (), ctx[i])
        if not kids:
            return "pruned", Node(r, goal)
        if r in STRUCTURAL:
            if r == "Weakening":
                T0 = _shift(T, i, 0)
            elif r == "Contraction":
                T0 = {(k if k <= i else k + 1): o for k, o in T.items()}
                if i in T:
                    T0[i + 1] = T[i]
            else:
                swap = {i: i + 1, i + 1: i}
                T0 = {swap.get(k, k): o for k, o in T.items()}
            return self.walk(kids[0], path + (0,), T0)
        if i is not None:
            return self.left(node, path, T)
        return self.right(node, path, T)

    def _g3(self, node: Proof, premises, on=None) -> Node:
        var = node.var
        goal = node.conclusion.goal
        if var is None and node.rule == "ForallR":
            var = goal.formula.var
        if var is None and node.rule == "ExistsL":
            var = on.formula.var
        return Node(node.rule, goal, tuple(premises), on, node.pos, node.term, var)

    def left(self, node: Proof, path: tuple, T: dict):
        r, ctx, i = node.rule, node.conclusion.context, node.index
        b, kids = ctx[i], node.premises
        tracked = i in T
        if r == "OrL":
            T0 = _shift(T, i, 1)
            if tracked:
                T0[i] = _Same(T[i])
            res = [self.walk(c, path + (j,), T0) for j, c in enumerate(kids)]
            for tag, val in res:
                if tag == "flow":
                    return tag, val
            if tracked:
                return res[0]
            return "pruned", self._g3(node, [v for _, v in res], b)
        if r == "ImpL":
            T_test = _shift(T, i, 0)
            T_main = _shift(T, i, 1)
            test = None
            if tracked:
                T_main[i] = _Same(T[i])
            else:
                test = self.walk(kids[0], path + (0,), T_test)
                if test[0] == "flow":
                    T_main[i] = _Imp(test[1], b, path)
            main = self.walk(kids[1], path + (1,), T_main)
            if main[0] == "flow" or tracked or test[0] == "flow":
                return main
            return "pruned", self._g3(node, [test[1], main[1]], b)
        n = _LEFT_ONE[r]
        T0 = _shift(T, i, n)
        side_res = []
        if r in ("VarL", "FwdL", "SelfLIntro", "SelfLElim"):
            if tracked:
                T0[i] = _Step(T[i], _left_step(r, b, node.pos, node.term, kids[1:]), path)
            else:
                side_res = [self.walk(c, path + (j,), T) for j, c in enumerate(kids[1:], 1)]
                origin = self._side_origin(node, path, side_res)
                if origin is not None:
                    T0[i] = origin
        elif tracked:
            for k in range(n):
                T0[i + k] = _Same(T[i])
        main = self.walk(kids[0], path + (0,), T0)
        if main[0] == "flow" or tracked or i in T0:
            return main
        return "pruned", self._g3(node, [main[1]] + [v for _, v in side_res], b)

    def _side_origin(self, node: Proof, path, side_res):
        for j, (tag, f) in enumerate(side_res, 1):
            if tag != "flow":
                continue
            if node.rule == "FwdL" and j == 1:
                b = node.conclusion.context[node.index]
                step = _left_step("FwdL", b, node.pos, node.term, node.premises[1:])
                return _Step(_Side(f), step, path)
            return _Side(_Flow(f.g1, f.suffix, f.ci, f.g2, f.paths | {path}))
        return None

    def right(self, node: Proof, path: tuple, T: dict):
        r, goal, kids = node.rule, node.conclusion.goal, node.premises
        res = []
        for j, c in enumerate(kids):
            tag, val = self.walk(c, path + (j,), T)
            if tag == "flow":
                return "flow", self._lift(node, path, j, val)
            res.append(val)
        return "pruned", self._g3(node, res)

    def _lift(self, node: Proof, path, j: int, f: _Flow) -> _Flow:
        """An influence on premise j's goal turned into one on the node's goal."""
        r, goal = node.rule, node.conclusion.goal
        if r not in ("SelfRIntro", "SelfRElim", "VarR", "FwdR"):
            return f
        step = _right_step(r, goal.gp, node.pos, node.term, node.premises[1:])
        if j == 0:
            return _then(f, step, path)
        h = f.g2
        if h.ground == goal.gp.ground and goal.gp.stack[: len(h.stack)] == h.stack:
            g = _extend(f, self.member(goal))
            return _Flow(g.g1, g.suffix, g.ci, g.g2, g.paths | {path})
        g = _extend(f, self.member(node.premises[0].conclusion.goal))
        return _then(g, step, path)


# ---------------------------------------------------------------- entry points


def _validate(sig: Signature, p: Proof, marked: int) -> None:
    rep = check_proof(sig, p)
    if not rep.valid:
        raise NIError("InputInvalid", f"proof does not check: {rep.reason} at {rep.path}")
    if not isinstance(marked, int) or not 0 <= marked < len(p.conclusion.context):
        raise NIError("InputInvalid", f"marked index {marked} is outside the context")


def _refit(sig):
    def go(prf: Proof, ctx: tuple) -> Proof:
        if context_equal(prf.conclusion.context, ctx):
            return prf
        return export(sig, import_proof(prf), ctx)

    return go


def audit(sig: Signature, p: Proof, marked: int):
    """Pruned(proof without the marked assumption) or Influence(...)."""
    _validate(sig, p, marked)
    ctx = p.conclusion.context
    kind, val = _Walker(sig).walk(p, (), {marked: _Root()})
    if kind == "pruned":
        rest = ctx[:marked] + ctx[marked + 1 :]
        try:
            out = export(sig, val, rest)
        except TransformError as e:
            raise NIError("InputInvalid", f"could not rebuild the pruned proof: {e.message}") from None
        return Pruned(out)
    f: _Flow = val
    d = csc_refl(p.conclusion)
    for q in sorted(f.paths):
        d = csc_union(d, csc_for_path(p, q))
    delta = d.delta
    ci = with_context(f.ci, delta, _refit(sig))
    marked_b, goal = ctx[marked], p.conclusion.goal
    s1 = g_set(marked_b.formula, marked_b.gp).match(f.g1, sig)
    s2 = g_set(goal.formula, goal.gp).match(f.g2, sig)
    w = Influence(delta, d, f.g1, f.g2, f.suffix, ci, s1 or {}, s2 or {})
    rep = check_witness(sig, p.conclusion, marked, w)
    if not rep.valid:
        raise AssertionError(f"audit produced an invalid witness: {rep.reason}: {rep.message}")
    return w


def check_witness(sig: Signature, s: Sequent, marked: int, w) -> CheckReport:
    """Re-check every component of an audit result against the audited sequent."""
    ctx = s.context
    if isinstance(w, Pruned):
        rep = check_proof(sig, w.proof)
        if not rep.valid:
            return rep
        # weakening is admissible, so a proof from fewer assumptions is just as good
        want = ctx[:marked] + ctx[marked + 1 :]
        if not (_sub_multiset(w.proof.conclusion.context, want) and belief_equal(w.proof.conclusion.goal, s.goal)):
            return CheckReport(False, (), "RuleMismatch", "pruned proof ends in the wrong sequent")
        return CheckReport(True)
    rep = check_csc(sig, w.csc)
    if not rep.valid:
        return rep
    if not (context_equal(w.csc.sequent.context, ctx) and belief_equal(w.csc.sequent.goal, s.goal)):
        return CheckReport(False, (), "RuleMismatch", "supercontext derivation is about another sequent")
    if not same_multiset(w.csc.delta, w.delta):
        return CheckReport(False, (), "ContextMismatch", "supercontext differs from its derivation")
    b = ctx[marked]
    if g_set(b.formula, b.gp).match(w.g1, sig) is None:
        return CheckReport(False, (), "RuleMismatch", "g1' is not in G of the marked belief")
    if g_set(s.goal.formula, s.goal.gp).match(w.g2, sig) is None:
        return CheckReport(False, (), "RuleMismatch", "g2' is not in G of the goal")
    if w.ci.context != w.delta or w.ci.left != w.g1.extend(w.suffix) or w.ci.right != w.g2:
        return CheckReport(False, (), "RuleMismatch", "can-influence derivation proves the wrong judgement")
    return check_ci(sig, w.ci)


def audit_sf_only(sig: Signature, p: Proof, marked: int, discharges: dict):
    """`audit` for contexts whose implications are all provable.

    `discharges` maps the index of every assumption containing an implication (other
    than the marked one) to a proof of it from the implication-free rest of the context.  The
    implications are cut away first, so the resulting influence uses speaks-for only."""
    _validate(sig, p, marked)
    ctx = p.conclusion.context
    imps = [i for i, b in enumerate(ctx) if i != marked and has_implies(b.formula)]
    missing = [i for i in imps if i not in discharges]
    if missing:
        raise NIError("ImplicationNotDischarged", f"no proof supplied for the implication assumption at index {missing[0]}")
    base = tuple(b for k, b in enumerate(ctx) if k != marked and k not in imps)
    cur, mk, steps = p, marked, []
    for i in sorted(imps, reverse=True):
        prf = discharges[i]
        rep = check_proof(sig, prf)
        if not rep.valid or not belief_equal(prf.conclusion.goal, ctx[i]):
            raise NIError("InputInvalid", f"the proof supplied for index {i} does not prove that implication")
        if not _sub_multiset(prf.conclusion.context, base):
            raise NIError("InputInvalid", f"the proof supplied for index {i} uses more than the implication-free context")
        here = cur.conclusion.context
        rest = here[:i] + here[i + 1 :]
        try:
            cur = eliminate_cut(sig, _refit(sig)(prf, rest), cur, i)
        except TransformError as e:
            raise NIError("InputInvalid", f"discharging index {i} failed: {e.message}") from None
        steps.append((here, i))
        mk -= 1 if i < mk else 0
    w = audit(sig, cur, mk)
    if isinstance(w, Pruned):
        return w
    if any(n.rule == "ImpCI" for n in ci_nodes(w.ci)):
        raise NIError("ImplicationNotDischarged", "the influence relies on an implication derived inside the proof")
    d = w.csc
    for here, i in reversed(steps):
        d = CSCDerivation("CSCWeakening", d.delta, Sequent(here, p.conclusion.goal), (d,), index=i)
    return Influence(w.delta, d, w.g1, w.g2, w.suffix, w.ci, w.g1_subst, w.g2_subst)


def _sub_multiset(small, big) -> bool:
    need = Counter(belief_key(b) for b in small)
    have = Counter(belief_key(b) for b in big)
    return all(have[k] >= v for k, v in need.items())
