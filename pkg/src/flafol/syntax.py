"""Object syntax: signatures, sorted terms, formulae, generalized principals,
beliefs and sequents, plus substitution and alpha-equivalence."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Union

PRINCIPAL = "Principal"
LABEL = "Label"
FLOWS_TO = "FlowsTo"
CAN_READ = "CanRead"
CAN_WRITE = "CanWrite"
PERMISSIONS = {
    FLOWS_TO: (LABEL, LABEL),
    CAN_READ: (PRINCIPAL, LABEL),
    CAN_WRITE: (PRINCIPAL, LABEL),
}


class SortError(Exception):
    """Ill-sorted or unknown syntax.  `kind` is UnknownSymbol, ArityMismatch or SortMismatch."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message


def _cached_hash(cls):
    """Syntax trees are immutable and hashed constantly; remember each node's hash."""
    structural = cls.__hash__

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = structural(self)
            object.__setattr__(self, "_hash", h)
            return h

    cls.__hash__ = __hash__
    return cls


# ---------------------------------------------------------------- terms


@_cached_hash
@dataclass(frozen=True)
class Var:
    name: str
    sort: str


@_cached_hash
@dataclass(frozen=True)
class App:
    fn: str
    args: tuple = ()


Term = Union[Var, App]


def const(name: str) -> App:
    return App(name, ())


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    else:
        for a in t.args:
            yield from term_vars(a)


def term_subst(t: Term, x: Var, s: Term) -> Term:
    if isinstance(t, Var):
        return s if t == x else t
    if not t.args:
        return t
    return App(t.fn, tuple(term_subst(a, x, s) for a in t.args))


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


# ---------------------------------------------------------------- formulae


@_cached_hash
@dataclass(frozen=True)
class Rel:
    name: str
    args: tuple = ()


@_cached_hash
@dataclass(frozen=True)
class TT:
    pass


@_cached_hash
@dataclass(frozen=True)
class FF:
    pass


@_cached_hash
@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Implies:
    left: "Formula"
    label: Term
    right: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Forall:
    var: str
    sort: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Exists:
    var: str
    sort: str
    body: "Formula"


@_cached_hash
@dataclass(frozen=True)
class Says:
    principal: Term
    label: Term
    body: "Formula"


Formula = Union[Rel, TT, FF, And, Or, Implies, Forall, Exists, Says]
Quant = (Forall, Exists)


def flows(a: Term, b: Term) -> Rel:
    return Rel(FLOWS_TO, (a, b))


def can_read(p: Term, l: Term) -> Rel:
    return Rel(CAN_READ, (p, l))


def can_write(p: Term, l: Term) -> Rel:
    return Rel(CAN_WRITE, (p, l))


def negate(phi: Formula, label: Term) -> Implies:
    return Implies(phi, label, FF())


# ---------------------------------------------------------------- principals, beliefs, sequents


@_cached_hash
@dataclass(frozen=True)
class GP:
    """A ground label followed by a stack of (principal, label) pairs, innermost last."""

    ground: Term
    stack: tuple = ()

    def push(self, p: Term, l: Term) -> "GP":
        return GP(self.ground, self.stack + ((p, l),))

    def extend(self, pairs: Iterable) -> "GP":
        return GP(self.ground, self.stack + tuple(pairs))

    def prefix(self, k: int) -> "GP":
        return GP(self.ground, self.stack[:k])

    def replace(self, k: int, pair) -> "GP":
        return GP(self.ground, self.stack[:k] + (tuple(pair),) + self.stack[k + 1 :])

    def is_prefix_of(self, other: "GP") -> bool:
        n = len(self.stack)
        return self.ground == other.ground and other.stack[:n] == self.stack

    def terms(self) -> Iterator[Term]:
        yield self.ground
        for p, l in self.stack:
            yield p
            yield l


@_cached_hash
@dataclass(frozen=True)
class Belief:
    formula: Formula
    gp: GP


@dataclass(frozen=True)
class Sequent:
    context: tuple
    goal: Belief


# ---------------------------------------------------------------- signatures


@dataclass
class Signature:
    sorts: set = field(default_factory=lambda: {PRINCIPAL, LABEL})
    functions: dict = field(default_factory=dict)
    relations: dict = field(default_factory=lambda: dict(PERMISSIONS))
    default_label: Term | None = None

    def __post_init__(self):
        self.sorts = set(self.sorts) | {PRINCIPAL, LABEL}
        for name, arity in PERMISSIONS.items():
            if name in self.relations and tuple(self.relations[name]) != arity:
                raise SortError("SortMismatch", f"built-in relation {name} cannot be redeclared")
            self.relations[name] = arity
        for name, (args, res) in self.functions.items():
            for s in (*args, res):
                if s not in self.sorts:
                    raise SortError("UnknownSymbol", f"sort {s} used by function {name} is not declared")
        for name, args in self.relations.items():
            for s in args:
                if s not in self.sorts:
                    raise SortError("UnknownSymbol", f"sort {s} used by relation {name} is not declared")

    def constants(self, sort: str | None = None) -> list[App]:
        return [
            App(n, ())
            for n, (args, res) in sorted(self.functions.items())
            if not args and (sort is None or res == sort)
        ]


def sort_check(sig: Signature, env: dict, t: Term) -> str:
    """Return the sort of `t`, raising SortError at the first ill-sorted subterm."""
    if isinstance(t, Var):
        declared = env.get(t.name, t.sort)
        if declared != t.sort:
            raise SortError("SortMismatch", f"variable {t.name} has sort {declared}, used at {t.sort}")
        if t.sort not in sig.sorts:
            raise SortError("UnknownSymbol", f"unknown sort {t.sort} for variable {t.name}")
        return t.sort
    if t.fn not in sig.functions:
        raise SortError("UnknownSymbol", f"unknown function symbol {t.fn}")
    argsorts, res = sig.functions[t.fn]
    if len(argsorts) != len(t.args):
        raise SortError("ArityMismatch", f"{t.fn} expects {len(argsorts)} arguments, got {len(t.args)}")
    for want, a in zip(argsorts, t.args):
        got = sort_check(sig, env, a)
        if got != want:
            raise SortError("SortMismatch", f"argument of {t.fn} has sort {got}, expected {want}")
    return res


def _expect(sig, env, t, want, where):
    got = sort_check(sig, env, t)
    if got != want:
        raise SortError("SortMismatch", f"{where} has sort {got}, expected {want}")


def check_formula(sig: Signature, env: dict, phi: Formula) -> None:
    match phi:
        case Rel(name, args):
            if name not in sig.relations:
                raise SortError("UnknownSymbol", f"unknown relation {name}")
            want = sig.relations[name]
            if len(want) != len(args):
                raise SortError("ArityMismatch", f"{name} expects {len(want)} arguments, got {len(args)}")
            for i, (s, a) in enumerate(zip(want, args)):
                _expect(sig, env, a, s, f"argument {i + 1} of {name}")
        case TT() | FF():
            pass
        case And(a, b) | Or(a, b):
            check_formula(sig, env, a)
            check_formula(sig, env, b)
        case Implies(a, l, b):
            _expect(sig, env, l, LABEL, "implication label")
            check_formula(sig, env, a)
            check_formula(sig, env, b)
        case Forall(x, s, body) | Exists(x, s, body):
            if s not in sig.sorts:
                raise SortError("UnknownSymbol", f"unknown sort {s}")
            check_formula(sig, {**env, x: s}, body)
        case Says(p, l, body):
            _expect(sig, env, p, PRINCIPAL, "says principal")
            _expect(sig, env, l, LABEL, "says label")
            check_formula(sig, env, body)
        case _:
            raise SortError("UnknownSymbol", f"not a formula: {phi!r}")


def check_gp(sig: Signature, env: dict, g: GP) -> None:
    _expect(sig, env, g.ground, LABEL, "ground label")
    for p, l in g.stack:
        _expect(sig, env, p, PRINCIPAL, "stack principal")
        _expect(sig, env, l, LABEL, "stack label")


def check_belief(sig: Signature, b: Belief, env: dict | None = None) -> None:
    check_formula(sig, env or {}, b.formula)
    check_gp(sig, env or {}, b.gp)


# ---------------------------------------------------------------- free variables


def fv_term(t: Term) -> set[str]:
    return {v.name for v in term_vars(t)}


@lru_cache(maxsize=1 << 16)
def fv(phi: Formula) -> frozenset[str]:
    match phi:
        case Rel(_, args):
            return frozenset().union(*(fv_term(a) for a in args))
        case TT() | FF():
            return frozenset()
        case And(a, b) | Or(a, b):
            return fv(a) | fv(b)
        case Implies(a, l, b):
            return fv(a) | fv_term(l) | fv(b)
        case Forall(x, _, body) | Exists(x, _, body):
            return fv(body) - {x}
        case Says(p, l, body):
            return fv_term(p) | fv_term(l) | fv(body)
    raise TypeError(phi)


def fv_gp(g: GP) -> set[str]:
    out: set[str] = set()
    for t in g.terms():
        out |= fv_term(t)
    return out


@lru_cache(maxsize=1 << 16)
def fv_belief(b: Belief) -> frozenset[str]:
    return fv(b.formula) | frozenset(fv_gp(b.gp))


def fv_context(ctx: Iterable[Belief]) -> set[str]:
    out: set[str] = set()
    for b in ctx:
        out |= fv_belief(b)
    return out


def fv_sequent(s: Sequent) -> set[str]:
    return fv_context(s.context) | fv_belief(s.goal)


def all_var_names(phi: Formula) -> set[str]:
    """Free and bound variable names occurring anywhere in `phi`."""
    match phi:
        case Forall(x, _, body) | Exists(x, _, body):
            return {x} | all_var_names(body)
        case And(a, b) | Or(a, b):
            return all_var_names(a) | all_var_names(b)
        case Implies(a, l, b):
            return all_var_names(a) | fv_term(l) | all_var_names(b)
        case Says(p, l, body):
            return fv_term(p) | fv_term(l) | all_var_names(body)
    return fv(phi)


def fresh_name(base: str, avoid: set[str]) -> str:
    name = base
    while name in avoid:
        name += "'"
    return name


# ---------------------------------------------------------------- substitution


def substitute(phi: Formula, x: Var, t: Term) -> Formula:
    """Capture-avoiding substitution phi[x := t]; binders are primed when they would capture."""
    if isinstance(t, (Var, App)) and _sort_of(t) not in (None, x.sort):
        raise SortError("SortMismatch", f"cannot substitute a {_sort_of(t)} term for {x.name}:{x.sort}")
    return _subst(phi, x, t, fv_term(t))


def _sort_of(t: Term) -> str | None:
    return t.sort if isinstance(t, Var) else None


def _subst(phi: Formula, x: Var, t: Term, tvars: set[str]) -> Formula:
    match phi:
        case Rel(name, args):
            return Rel(name, tuple(term_subst(a, x, t) for a in args))
        case TT() | FF():
            return phi
        case And(a, b):
            return And(_subst(a, x, t, tvars), _subst(b, x, t, tvars))
        case Or(a, b):
            return Or(_subst(a, x, t, tvars), _subst(b, x, t, tvars))
        case Implies(a, l, b):
            return Implies(_subst(a, x, t, tvars), term_subst(l, x, t), _subst(b, x, t, tvars))
        case Says(p, l, body):
            return Says(term_subst(p, x, t), term_subst(l, x, t), _subst(body, x, t, tvars))
        case Forall(y, s, body) | Exists(y, s, body):
            if y == x.name or x.name not in fv(body):
                return phi
            if y in tvars:
                z = fresh_name(y, tvars | all_var_names(body) | {x.name})
                body = _subst(body, Var(y, s), Var(z, s), {z})
                y = z
            return type(phi)(y, s, _subst(body, x, t, tvars))
    raise TypeError(phi)


def substitute_belief(b: Belief, x: Var, t: Term) -> Belief:
    g = GP(term_subst(b.gp.ground, x, t), tuple((term_subst(p, x, t), term_subst(l, x, t)) for p, l in b.gp.stack))
    return Belief(substitute(b.formula, x, t), g)


# ---------------------------------------------------------------- alpha-equivalence


def alpha_equal(a: Formula, b: Formula) -> bool:
    return _alpha(a, b, {}, {})


def _term_eq(s: Term, t: Term, left: dict, right: dict) -> bool:
    if isinstance(s, Var) and isinstance(t, Var):
        ls, rt = left.get(s.name), right.get(t.name)
        if ls is None and rt is None:
            return s == t
        return ls is not None and ls == rt
    if isinstance(s, App) and isinstance(t, App):
        return s.fn == t.fn and len(s.args) == len(t.args) and all(
            _term_eq(x, y, left, right) for x, y in zip(s.args, t.args)
        )
    return False


def _alpha(a, b, left: dict, right: dict) -> bool:
    match a, b:
        case Rel(n1, a1), Rel(n2, a2):
            return n1 == n2 and len(a1) == len(a2) and all(_term_eq(x, y, left, right) for x, y in zip(a1, a2))
        case TT(), TT():
            return True
        case FF(), FF():
            return True
        case And(x1, y1), And(x2, y2):
            return _alpha(x1, x2, left, right) and _alpha(y1, y2, left, right)
        case Or(x1, y1), Or(x2, y2):
            return _alpha(x1, x2, left, right) and _alpha(y1, y2, left, right)
        case Implies(x1, l1, y1), Implies(x2, l2, y2):
            return (
                _term_eq(l1, l2, left, right)
                and _alpha(x1, x2, left, right)
                and _alpha(y1, y2, left, right)
            )
        case Says(p1, l1, x1), Says(p2, l2, x2):
            return _term_eq(p1, p2, left, right) and _term_eq(l1, l2, left, right) and _alpha(x1, x2, left, right)
        case (Forall(v1, s1, x1), Forall(v2, s2, x2)) | (Exists(v1, s1, x1), Exists(v2, s2, x2)):
            if s1 != s2:
                return False
            depth = len(left)
            return _alpha(x1, x2, {**left, v1: depth}, {**right, v2: depth})
    return False


@lru_cache(maxsize=1 << 16)
def _alpha_key_top(phi: Formula) -> tuple:
    return _alpha_key(phi, ())


def alpha_key(phi: Formula, bound: tuple = ()) -> tuple:
    """A hashable canonical form: bound variables become binder depths."""
    return _alpha_key_top(phi) if not bound else _alpha_key(phi, bound)


def _alpha_key(phi: Formula, bound: tuple) -> tuple:

    def tk(t: Term):
        if isinstance(t, Var):
            for i in range(len(bound) - 1, -1, -1):
                if bound[i] == t.name:
                    return ("#", len(bound) - 1 - i)
            return ("v", t.name, t.sort)
        return ("f", t.fn, tuple(tk(a) for a in t.args))

    match phi:
        case Rel(n, args):
            return ("R", n, tuple(tk(a) for a in args))
        case TT():
            return ("T",)
        case FF():
            return ("F",)
        case And(a, b):
            return ("&", _alpha_key(a, bound), _alpha_key(b, bound))
        case Or(a, b):
            return ("|", _alpha_key(a, bound), _alpha_key(b, bound))
        case Implies(a, l, b):
            return (">", _alpha_key(a, bound), tk(l), _alpha_key(b, bound))
        case Says(p, l, body):
            return ("S", tk(p), tk(l), _alpha_key(body, bound))
        case Forall(x, s, body):
            return ("A", s, _alpha_key(body, bound + (x,)))
        case Exists(x, s, body):
            return ("E", s, _alpha_key(body, bound + (x,)))
    raise TypeError(phi)


def belief_equal(a: Belief, b: Belief) -> bool:
    return a.gp == b.gp and alpha_equal(a.formula, b.formula)


_ALPHA_IDS: dict = {}


@lru_cache(maxsize=1 << 16)
def alpha_id(phi: Formula) -> int:
    """A small integer shared by exactly the alpha-equivalent formulae seen in this process."""
    return _ALPHA_IDS.setdefault(alpha_key(phi), len(_ALPHA_IDS))


def belief_key(b: Belief) -> tuple:
    return (alpha_id(b.formula), b.gp)


def context_equal(a, b) -> bool:
    return len(a) == len(b) and all(belief_equal(x, y) for x, y in zip(a, b))


def sequent_equal(a: Sequent, b: Sequent) -> bool:
    return context_equal(a.context, b.context) and belief_equal(a.goal, b.goal)


# ---------------------------------------------------------------- traversal helpers


def formula_terms(phi: Formula) -> Iterator[Term]:
    """Every term occurrence (including subterms) in `phi`, bound variables included."""
    match phi:
        case Rel(_, args):
            for a in args:
                yield from subterms(a)
        case And(a, b) | Or(a, b):
            yield from formula_terms(a)
            yield from formula_terms(b)
        case Implies(a, l, b):
            yield from subterms(l)
            yield from formula_terms(a)
            yield from formula_terms(b)
        case Says(p, l, body):
            yield from subterms(p)
            yield from subterms(l)
            yield from formula_terms(body)
        case Forall(_, _, body) | Exists(_, _, body):
            yield from formula_terms(body)


def closed_terms_of(phi: Formula, bound: frozenset = frozenset()) -> Iterator[Term]:
    """Term occurrences of `phi` that mention no variable bound inside `phi`."""
    match phi:
        case Forall(x, _, body) | Exists(x, _, body):
            yield from closed_terms_of(body, bound | {x})
        case And(a, b) | Or(a, b):
            yield from closed_terms_of(a, bound)
            yield from closed_terms_of(b, bound)
        case _:
            for t in formula_terms_shallow(phi):
                for s in subterms(t):
                    if not (fv_term(s) & bound):
                        yield s
            match phi:
                case Implies(a, _, b):
                    yield from closed_terms_of(a, bound)
                    yield from closed_terms_of(b, bound)
                case Says(_, _, body):
                    yield from closed_terms_of(body, bound)


def formula_terms_shallow(phi: Formula) -> tuple:
    match phi:
        case Rel(_, args):
            return args
        case Implies(_, l, _):
            return (l,)
        case Says(p, l, _):
            return (p, l)
    return ()


def size(phi: Formula) -> int:
    match phi:
        case And(a, b) | Or(a, b) | Implies(a, _, b):
            return 1 + size(a) + size(b)
        case Forall(_, _, body) | Exists(_, _, body) | Says(_, _, body):
            return 1 + size(body)
    return 1


def has_or(phi: Formula) -> bool:
    match phi:
        case Or():
            return True
        case And(a, b) | Implies(a, _, b):
            return has_or(a) or has_or(b)
        case Forall(_, _, body) | Exists(_, _, body) | Says(_, _, body):
            return has_or(body)
    return False


def has_implies(phi: Formula) -> bool:
    match phi:
        case Implies():
            return True
        case And(a, b) | Or(a, b):
            return has_implies(a) or has_implies(b)
        case Forall(_, _, body) | Exists(_, _, body) | Says(_, _, body):
            return has_implies(body)
    return False
