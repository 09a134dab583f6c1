"""Hypothesis strategies over the small test signature (principals A-C, labels L0-L2)."""

from hypothesis import strategies as st

from flafol.search import small_signature
from flafol.syntax import FF, GP, TT, And, App, Belief, Exists, Forall, Implies, Or, Rel, Says, Sequent, Var

SIG = small_signature()
PRINCIPALS = [App(x) for x in "ABC"]
LABELS = [App(f"L{i}") for i in range(3)]
VAR_NAMES = ["x", "y", "z"]


def terms(sort: str, scope: tuple) -> st.SearchStrategy:
    pool = PRINCIPALS if sort == "Principal" else LABELS
    bound = [Var(n, s) for n, s in scope if s == sort]
    return st.sampled_from(pool + bound)


def atoms(scope: tuple) -> st.SearchStrategy:
    p, lab = terms("Principal", scope), terms("Label", scope)
    return st.one_of(
        st.builds(lambda a: Rel("R", (a,)), p),
        st.builds(lambda a, b: Rel("S", (a, b)), p, lab),
        st.builds(lambda a, b: Rel("FlowsTo", (a, b)), lab, lab),
        st.builds(lambda a, b: Rel("CanRead", (a, b)), p, lab),
        st.just(TT()),
        st.just(FF()),
    )


def formulas(depth: int = 3, scope: tuple = ()) -> st.SearchStrategy:
    if depth == 0:
        return atoms(scope)
    sub = st.deferred(lambda: formulas(depth - 1, scope))

    def binder(cls):
        def make(name_sort):
            name, sort = name_sort
            inner = tuple(v for v in scope if v[0] != name) + ((name, sort),)
            return formulas(depth - 1, inner).map(lambda body: cls(name, sort, body))

        return st.tuples(st.sampled_from(VAR_NAMES), st.sampled_from(["Principal", "Label"])).flatmap(make)

    return st.one_of(
        atoms(scope),
        st.builds(And, sub, sub),
        st.builds(Or, sub, sub),
        st.builds(Implies, sub, terms("Label", scope), sub),
        st.builds(Says, terms("Principal", scope), terms("Label", scope), sub),
        binder(Forall),
        binder(Exists),
    )


def gps(max_stack: int = 2) -> st.SearchStrategy:
    pair = st.tuples(st.sampled_from(PRINCIPALS), st.sampled_from(LABELS))
    return st.builds(GP, st.just(LABELS[0]), st.lists(pair, max_size=max_stack).map(tuple))


def beliefs(depth: int = 3) -> st.SearchStrategy:
    return st.builds(Belief, formulas(depth), gps())


def sequents(depth: int = 2) -> st.SearchStrategy:
    return st.builds(Sequent, st.lists(beliefs(depth), max_size=3).map(tuple), beliefs(depth))
