"""ASCII surface syntax: tokenizer, parsers for theories and proofs, canonical formatter.

Formula grammar, loosest binding first::

    formula  := disj ( '->' '[' term ']' formula )?
    disj     := conj ( '|' conj )*
    conj     := unary ( '&' unary )*
    unary    := '!' unary | ('forall' | 'exists') ident ':' Sort '.' formula | primary
    primary  := '(' formula ')' | 'true' | 'false' | Rel '(' terms ')' | term 'says' '[' term ']' unary
    belief   := formula '@' '<' term? '>' ( '.' '[' term ':' term ']' )*
    sequent  := '{' ( belief ( ',' belief )* )? '|-' belief '}'
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .kernel import ALL_PARAMS, Proof, RuleError, expected_premises
from .syntax import (
    CAN_READ,
    CAN_WRITE,
    FF,
    FLOWS_TO,
    GP,
    LABEL,
    PERMISSIONS,
    TT,
    And,
    App,
    Belief,
    Exists,
    Forall,
    Implies,
    Or,
    Rel,
    Says,
    Sequent,
    Signature,
    SortError,
    Term,
    Var,
    check_belief,
    fv_sequent,
    sort_check,
)

KEYWORDS = {"forall", "exists", "says", "true", "false"}
PERMISSION_WORDS = {"flows": FLOWS_TO, "canread": CAN_READ, "canwrite": CAN_WRITE}
RESERVED = KEYWORDS | set(PERMISSION_WORDS)


class ParseError(Exception):
    """A located diagnostic.  `kind` is SyntaxError, SortError, DuplicateName, UnknownSymbol or UnknownRule."""

    def __init__(self, kind: str, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {kind}: {message}")
        self.kind = kind
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, sym, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\f\v]+)|(?P<nl>\n)|(?P<comment>\#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)|(?P<int>[0-9]+)"
    r"|(?P<sym>->|\|-|[()\[\]{}<>,:.@;=!&|])"
)


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError("SyntaxError", f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind in ("ident", "int", "sym"):
                toks.append(Token(kind, s, line, col))
            col += len(s)
        i = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


@dataclass
class Theory:
    sig: Signature
    axioms: list = field(default_factory=list)  # (name, Belief)
    sort_order: list = field(default_factory=list)

    def context(self) -> tuple:
        return tuple(b for _, b in self.axioms)

    def axiom(self, name: str) -> Belief:
        for n, b in self.axioms:
            if n == name:
                return b
        raise KeyError(name)


class Parser:
    def __init__(self, text: str, sig: Signature | None = None, free: dict | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.sig = sig or Signature()
        self.free: dict[str, str] = dict(free or {})
        self.scope: list[tuple[str, str]] = []

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, n: int = 1) -> Token:
        return self.toks[min(self.i + n, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, msg: str, tok: Token | None = None, kind: str = "SyntaxError"):
        tok = tok or self.tok
        return ParseError(kind, msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {shown!r}")
        return self.advance()

    def integer(self) -> int:
        if self.tok.kind != "int":
            raise self.error(f"expected an integer, found {self.tok.text or 'end of input'!r}")
        return int(self.advance().text)

    # -- terms
    def term(self) -> Term:
        start = self.ident("a term")
        name = start.text
        if name in RESERVED:
            raise self.error(f"keyword {name!r} cannot be used as a term", start)
        if self.at("("):
            self.advance()
            args = []
            if not self.at(")"):
                args.append(self.term())
                while self.at(","):
                    self.advance()
                    args.append(self.term())
            self.expect(")")
            if name not in self.sig.functions:
                raise self.error(f"unknown function symbol {name}", start, "UnknownSymbol")
            t = App(name, tuple(args))
        else:
            t = self._resolve(name, start)
        try:
            sort_check(self.sig, {}, t)
        except SortError as e:
            raise self.error(e.message, start, "SortError") from None
        return t

    def _resolve(self, name: str, tok: Token) -> Term:
        for bound, sort in reversed(self.scope):
            if bound == name:
                return Var(name, sort)
        if name in self.free:
            return Var(name, self.free[name])
        if name in self.sig.functions:
            return App(name, ())
        raise self.error(f"unknown symbol {name}", tok, "UnknownSymbol")

    def typed_term(self, sort: str) -> Term:
        tok = self.tok
        t = self.term()
        got = sort_check(self.sig, {}, t)
        if got != sort:
            raise self.error(f"expected a term of sort {sort}, found {got}", tok, "SortError")
        return t

    # -- formulae
    def formula(self):
        left = self.disj()
        if self.at("->"):
            self.advance()
            self.expect("[")
            label = self.typed_term(LABEL)
            self.expect("]")
            return Implies(left, label, self.formula())
        return left

    def disj(self):
        left = self.conj()
        while self.at("|"):
            self.advance()
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.unary()
        while self.at("&"):
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self):
        if self.at("!"):
            tok = self.advance()
            body = self.unary()
            if self.sig.default_label is None:
                raise self.error("'!' needs a default_ground_label declaration", tok)
            return Implies(body, self.sig.default_label, FF())
        if self.at("forall") or self.at("exists"):
            q = self.advance().text
            var = self.ident("a bound variable").text
            if var in RESERVED:
                raise self.error(f"keyword {var!r} cannot be bound")
            self.expect(":")
            stok = self.ident("a sort")
            if stok.text not in self.sig.sorts:
                raise self.error(f"unknown sort {stok.text}", stok, "UnknownSymbol")
            self.expect(".")
            self.scope.append((var, stok.text))
            try:
                body = self.formula()
            finally:
                self.scope.pop()
            return (Forall if q == "forall" else Exists)(var, stok.text, body)
        return self.primary()

    def primary(self):
        tok = self.tok
        if self.at("("):
            self.advance()
            f = self.formula()
            self.expect(")")
            return f
        if self.at("true"):
            self.advance()
            return TT()
        if self.at("false"):
            self.advance()
            return FF()
        if tok.kind != "ident":
            raise self.error(f"expected a formula, found {tok.text or 'end of input'!r}")
        rel = PERMISSION_WORDS.get(tok.text)
        if rel is None and tok.text in self.sig.relations and not self._bound_or_free(tok.text):
            rel = tok.text
        if rel is not None:
            self.advance()
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.term())
                while self.at(","):
                    self.advance()
                    args.append(self.term())
            self.expect(")")
            want = self.sig.relations[rel]
            if len(want) != len(args):
                raise self.error(f"{rel} expects {len(want)} arguments, got {len(args)}", tok, "SortError")
            for j, (s, a) in enumerate(zip(want, args)):
                got = sort_check(self.sig, {}, a)
                if got != s:
                    raise self.error(f"argument {j + 1} of {rel} has sort {got}, expected {s}", tok, "SortError")
            return Rel(rel, tuple(args))
        p = self.term()
        if sort_check(self.sig, {}, p) != "Principal":
            raise self.error("the speaker of says must be a Principal", tok, "SortError")
        if not self.at("says"):
            raise self.error(f"expected 'says' after a principal, found {self.tok.text or 'end of input'!r}")
        self.advance()
        self.expect("[")
        label = self.typed_term(LABEL)
        self.expect("]")
        return Says(p, label, self.unary())

    def _bound_or_free(self, name: str) -> bool:
        return name in self.free or any(n == name for n, _ in self.scope)

    # -- principals, beliefs, sequents
    def gp(self) -> GP:
        lt = self.expect("<")
        if self.at(">"):
            if self.sig.default_label is None:
                raise self.error("'<>' needs a default_ground_label declaration", lt)
            ground = self.sig.default_label
        else:
            ground = self.typed_term(LABEL)
        self.expect(">")
        stack = []
        while self.at(".") and self.peek().text == "[":
            self.advance()
            self.advance()
            p = self.typed_term("Principal")
            self.expect(":")
            l = self.typed_term(LABEL)
            self.expect("]")
            stack.append((p, l))
        return GP(ground, tuple(stack))

    def belief(self) -> Belief:
        tok = self.tok
        f = self.formula()
        self.expect("@")
        b = Belief(f, self.gp())
        try:
            check_belief(self.sig, b)
        except SortError as e:
            raise self.error(e.message, tok, "SortError") from None
        return b

    def sequent(self) -> Sequent:
        self.expect("{")
        ctx = []
        if not self.at("|-"):
            ctx.append(self.belief())
            while self.at(","):
                self.advance()
                ctx.append(self.belief())
        self.expect("|-")
        goal = self.belief()
        self.expect("}")
        return Sequent(tuple(ctx), goal)

    def end(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after end of input")


# ---------------------------------------------------------------- theories


def parse_theory(text: str) -> Theory:
    p = Parser(text)
    sig = p.sig
    theory = Theory(sig)
    names: set[str] = set()
    saw_any = False
    while p.tok.kind != "eof":
        saw_any = True
        kw = p.ident("a declaration keyword")
        match kw.text:
            case "sort":
                t = p.ident("a sort name")
                if t.text in sig.sorts:
                    raise p.error(f"sort {t.text} is already declared", t, "DuplicateName")
                sig.sorts.add(t.text)
                theory.sort_order.append(t.text)
            case "func":
                t = p.ident("a function name")
                _fresh_symbol(p, t, sig, names)
                args = []
                if p.at("("):
                    p.advance()
                    if not p.at(")"):
                        args.append(_sort_name(p, sig))
                        while p.at(","):
                            p.advance()
                            args.append(_sort_name(p, sig))
                    p.expect(")")
                p.expect(":")
                res = _sort_name(p, sig)
                sig.functions[t.text] = (tuple(args), res)
                names.add(t.text)
            case "rel":
                t = p.ident("a relation name")
                if t.text in PERMISSIONS or t.text in PERMISSION_WORDS:
                    raise p.error(f"{t.text} is a built-in permission and cannot be redeclared", t, "DuplicateName")
                _fresh_symbol(p, t, sig, names)
                p.expect("(")
                args = []
                if not p.at(")"):
                    args.append(_sort_name(p, sig))
                    while p.at(","):
                        p.advance()
                        args.append(_sort_name(p, sig))
                p.expect(")")
                sig.relations[t.text] = tuple(args)
                names.add(t.text)
            case "default_ground_label":
                if sig.default_label is not None:
                    raise p.error("default_ground_label declared twice", kw, "DuplicateName")
                sig.default_label = p.typed_term(LABEL)
            case "axiom":
                t = p.ident("an axiom name")
                if any(n == t.text for n, _ in theory.axioms):
                    raise p.error(f"axiom {t.text} is already declared", t, "DuplicateName")
                p.expect(":")
                theory.axioms.append((t.text, p.belief()))
            case other:
                raise p.error(f"unknown declaration {other!r}", kw)
    if not saw_any:
        raise p.error("empty theory")
    return theory


def _sort_name(p: Parser, sig: Signature) -> str:
    t = p.ident("a sort name")
    if t.text not in sig.sorts:
        raise p.error(f"unknown sort {t.text}", t, "UnknownSymbol")
    return t.text


def _fresh_symbol(p: Parser, t: Token, sig: Signature, names: set) -> None:
    if t.text in RESERVED:
        raise p.error(f"keyword {t.text!r} cannot be declared", t)
    if t.text in names or t.text in sig.functions or t.text in sig.relations:
        raise p.error(f"symbol {t.text} is already declared", t, "DuplicateName")


# ---------------------------------------------------------------- proofs


def parse_proof(text: str, sig: Signature) -> Proof:
    """Parse a proof file: `var` declarations, `goal <sequent>`, then the tree."""
    p = Parser(text, sig)
    while p.at("var"):
        p.advance()
        name = p.ident("a variable name")
        if name.text in RESERVED or name.text in sig.functions:
            raise p.error(f"variable {name.text} clashes with a declared symbol", name, "DuplicateName")
        if name.text in p.free:
            raise p.error(f"variable {name.text} is declared twice", name, "DuplicateName")
        p.expect(":")
        p.free[name.text] = _sort_name(p, sig)
    p.expect("goal")
    goal = p.sequent()
    proof = _proof_node(p, goal)
    p.end()
    return proof


def _proof_node(p: Parser, want: Sequent | None, root: bool = True) -> Proof:
    open_tok = p.expect("(")
    rtok = p.ident("a rule name")
    rule = rtok.text
    if rule not in ALL_PARAMS:
        raise p.error(f"unknown rule {rule}", rtok, "UnknownRule")
    # a child's stated sequent is kept even when it disagrees with its parent; the checker reports that
    params: dict = {}
    if p.at("["):
        p.advance()
        while not p.at("]"):
            key = p.ident("a parameter name")
            if key.text not in ALL_PARAMS[rule]:
                raise p.error(f"rule {rule} takes no parameter {key.text!r}", key)
            if key.text in params:
                raise p.error(f"parameter {key.text} given twice", key, "DuplicateName")
            p.expect("=")
            match key.text:
                case "i" | "k":
                    params[key.text] = p.integer()
                case "t":
                    params["t"] = p.term()
                case "x":
                    v = p.ident("an eigenvariable")
                    params["x"] = v.text
            if p.at(","):
                p.advance()
        p.advance()
    missing = [c for c in ALL_PARAMS[rule] if c not in params and c != "x"]
    if missing:
        raise p.error(f"rule {rule} needs parameters {', '.join(missing)}", rtok)
    conclusion = want
    if p.at("{"):
        stok = p.tok
        stated = p.sequent()
        if root and want is not None and stated != want:
            raise p.error("stated sequent differs from the sequent required here", stok)
        conclusion = stated
    if conclusion is None:
        raise p.error("cannot infer the sequent of this node; write it out", open_tok)
    kw = dict(index=params.get("i"), pos=params.get("k"), term=params.get("t"), var=params.get("x"))
    children_want: list | None
    try:
        children_want = expected_premises(p.sig, rule, conclusion, strict=False, **kw)
    except RuleError:
        children_want = None
    kids = []
    while p.at("("):
        j = len(kids)
        w = children_want[j] if children_want is not None and j < len(children_want) else None
        kids.append(_proof_node(p, w, root=False))
    p.expect(")")
    return Proof(rule, conclusion, tuple(kids), kw["index"], kw["pos"], kw["term"], kw["var"])


# ---------------------------------------------------------------- formatting


def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.fn
    return f"{t.fn}({', '.join(format_term(a) for a in t.args)})"


_PERM_OUT = {v: k for k, v in PERMISSION_WORDS.items()}


def format_formula(phi, default: Term | None = None, prec: int = 0) -> str:
    def wrap(s: str, mine: int) -> str:
        return f"({s})" if mine < prec else s

    match phi:
        case Rel(name, args):
            return f"{_PERM_OUT.get(name, name)}({', '.join(format_term(a) for a in args)})"
        case TT():
            return "true"
        case FF():
            return "false"
        case Implies(a, l, FF()) if default is not None and l == default:
            return wrap("!" + format_formula(a, default, 4), 4)
        case Implies(a, l, b):
            return wrap(f"{format_formula(a, default, 2)} ->[{format_term(l)}] {format_formula(b, default, 1)}", 1)
        case Or(a, b):
            return wrap(f"{format_formula(a, default, 2)} | {format_formula(b, default, 3)}", 2)
        case And(a, b):
            return wrap(f"{format_formula(a, default, 3)} & {format_formula(b, default, 4)}", 3)
        case Says(p, l, body):
            return wrap(f"{format_term(p)} says[{format_term(l)}] {format_formula(body, default, 4)}", 4)
        case Forall(x, s, body) | Exists(x, s, body):
            q = "forall" if isinstance(phi, Forall) else "exists"
            # quantifier bodies extend to the right, so any operand position needs parentheses
            return f"{q} {x}:{s}. {format_formula(body, default, 0)}" if prec == 0 else (
                f"({q} {x}:{s}. {format_formula(body, default, 0)})"
            )
    raise TypeError(phi)


def format_gp(g: GP, default: Term | None = None) -> str:
    ground = "<>" if default is not None and g.ground == default else f"<{format_term(g.ground)}>"
    return ground + "".join(f".[{format_term(p)}:{format_term(l)}]" for p, l in g.stack)


def format_belief(b: Belief, default: Term | None = None) -> str:
    return f"{format_formula(b.formula, default)} @ {format_gp(b.gp, default)}"


def format_sequent(s: Sequent, default: Term | None = None) -> str:
    ctx = ", ".join(format_belief(b, default) for b in s.context)
    goal = format_belief(s.goal, default)
    return f"{{{ctx} |- {goal}}}" if ctx else f"{{|- {goal}}}"


def _format_params(node: Proof) -> str:
    parts = []
    if node.index is not None:
        parts.append(f"i={node.index}")
    if node.pos is not None:
        parts.append(f"k={node.pos}")
    if node.term is not None:
        parts.append(f"t={format_term(node.term)}")
    if node.var is not None:
        parts.append(f"x={node.var}")
    return f" [{' '.join(parts)}]" if parts else ""


def format_proof(p: Proof, sig: Signature) -> str:
    """Canonical proof file text: free-variable declarations, goal, then the indented tree."""
    d = sig.default_label
    free: dict[str, str] = {}
    _collect_free(p, free)
    lines = [f"var {n} : {s}" for n, s in sorted(free.items())]
    lines.append(f"goal {format_sequent(p.conclusion, d)}")
    _format_tree(p, d, 0, lines, root=True)
    return "\n".join(lines) + "\n"


def _collect_free(p: Proof, out: dict) -> None:
    from .kernel import iter_nodes
    from .syntax import term_vars, formula_terms

    for _, node in iter_nodes(p):
        s = node.conclusion
        names = fv_sequent(s)
        if not names:
            continue
        for b in (*s.context, s.goal):
            for t in (*formula_terms(b.formula), *b.gp.terms()):
                for v in term_vars(t):
                    if v.name in names:
                        out[v.name] = v.sort
        if node.term is not None:
            for v in term_vars(node.term):
                out[v.name] = v.sort


def _format_tree(p: Proof, d, depth: int, lines: list, root: bool = False) -> None:
    pad = "  " * depth
    head = f"{pad}({p.rule}{_format_params(p)}"
    if not root:
        head += f" {format_sequent(p.conclusion, d)}"
    if not p.premises:
        lines.append(head + ")")
        return
    lines.append(head)
    for c in p.premises:
        _format_tree(c, d, depth + 1, lines)
    lines[-1] += ")"


def format_theory(th: Theory) -> str:
    sig = th.sig
    d = sig.default_label
    lines = [f"sort {s}" for s in th.sort_order]
    for name, (args, res) in sig.functions.items():
        lines.append(f"func {name}({', '.join(args)}) : {res}" if args else f"func {name} : {res}")
    for name, args in sig.relations.items():
        if name not in PERMISSIONS:
            lines.append(f"rel {name}({', '.join(args)})")
    if d is not None:
        lines.append(f"default_ground_label {format_term(d)}")
    for name, b in th.axioms:
        lines.append(f"axiom {name}: {format_belief(b, d)}")
    return "\n".join(lines) + "\n"


def parse_sequent(text: str, sig: Signature, free: dict | None = None) -> Sequent:
    p = Parser(text, sig, free)
    s = p.sequent()
    p.end()
    return s


def parse_belief(text: str, sig: Signature, free: dict | None = None) -> Belief:
    p = Parser(text, sig, free)
    b = p.belief()
    p.end()
    return b


def parse_formula(text: str, sig: Signature, free: dict | None = None):
    p = Parser(text, sig, free)
    f = p.formula()
    p.end()
    return f


def parse_term(text: str, sig: Signature, free: dict | None = None) -> Term:
    p = Parser(text, sig, free)
    t = p.term()
    p.end()
    return t
