"""Command-line interface.

Exit status: 0 success/valid, 1 invalid or not found, 2 usage or parse error.
With --json every command prints one JSON object per line carrying at least
`verdict`, `path`, `reason` and `stats`.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus
from .csc import csc_rules_used, enumerate_cscs
from .kernel import RuleError, check_proof, proof_stats, rule_schema
from .ni import Influence, NIError, audit, audit_sf_only
from .render import ci_shape, format_ci, format_csc
from .report import Row, write_report
from .search import SearchConfig, bounded_prove, universe_of
from .syntax import Sequent
from .text import (
    ParseError,
    Theory,
    format_belief,
    format_gp,
    format_proof,
    format_theory,
    parse_belief,
    parse_proof,
    parse_sequent,
    parse_term,
    parse_theory,
)
from .transforms import TransformError, eliminate_cut, normalize, sf_eliminate, simulate, unsays_r
from .trust import search_sf

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Out:
    """Either human-readable text or line-delimited JSON records."""

    def __init__(self, as_json: bool):
        self.as_json = as_json

    def record(self, verdict: str, text: str = "", path=None, reason=None, stats=None, **extra) -> None:
        if self.as_json:
            rec = {"verdict": verdict, "path": None if path is None else list(path), "reason": reason, "stats": stats or {}}
            rec.update(extra)
            click.echo(json.dumps(rec, sort_keys=True, default=str))
        elif text:
            click.echo(text)


def _fail_usage(out: Out, message: str, reason: str = "UsageError"):
    if out.as_json:
        out.record("error", reason=reason, message=message)
    else:
        click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise click.UsageError(f"cannot read {path}: {e.strerror}") from None


def _theory(out: Out, source: str | None) -> Theory:
    if source is None:
        _fail_usage(out, "--theory is required (a .thy file or a bundled theory name)")
    if source in corpus.theory_names() and not Path(source).exists():
        return corpus.load_theory(source)
    try:
        return parse_theory(_read(source))
    except ParseError as e:
        _fail_usage(out, f"{source}:{e}", e.kind)


def _proof(out: Out, th: Theory, path: str):
    try:
        return parse_proof(_read(path), th.sig)
    except ParseError as e:
        _fail_usage(out, f"{path}:{e}", e.kind)


def _sequent(out: Out, th: Theory, text: str, axioms: bool) -> Sequent:
    if Path(text).is_file():
        text = Path(text).read_text()
    try:
        s = parse_sequent(text.strip(), th.sig)
    except ParseError as e:
        _fail_usage(out, str(e), e.kind)
    if axioms:
        s = Sequent(th.context() + s.context, s.goal)
    return s


def _universe(out: Out, th: Theory, path: str | None, s: Sequent) -> dict:
    """A universe file has lines `Sort: term, term, ...`; without one the sequent's terms are used."""
    if path is None:
        return universe_of(th.sig, s)
    uni: dict = {}
    for n, line in enumerate(_read(path).splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sort, sep, rest = line.partition(":")
        if not sep or sort.strip() not in th.sig.sorts:
            _fail_usage(out, f"{path}:{n}: expected 'Sort: term, ...' with a declared sort")
        try:
            uni[sort.strip()] = [parse_term(t.strip(), th.sig) for t in rest.split(",") if t.strip()]
        except ParseError as e:
            _fail_usage(out, f"{path}:{n}: {e}", e.kind)
    return uni


def _emit_proof(out: Out, th: Theory, p, dest: str | None, verdict: str = "ok", **extra) -> None:
    text = format_proof(p, th.sig)
    if dest:
        Path(dest).write_text(text)
    out.record(verdict, "" if dest else text.rstrip("\n"), stats=proof_stats(p), **extra)


json_flag = click.option("--json", "as_json", is_flag=True, help="Print line-delimited JSON records.")
theory_opt = click.option("--theory", "-t", "theory", help="Theory file, or the name of a bundled theory.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Check, search, transform and audit flow-limited authorization proofs."""


@main.command()
@click.argument("proofs", nargs=-1)
@theory_opt
@click.option("--corpus", "use_corpus", is_flag=True, help="Check every bundled proof.")
@click.option("--lenient", is_flag=True, help="Accept the primed implication rules.")
@json_flag
def check(proofs, theory, use_corpus, lenient, as_json):
    """Check proof files against a theory's signature."""
    out = Out(as_json)
    items = []
    if use_corpus:
        items += [(e.label, corpus.load_theory(e.theory), corpus.load_proof(e)) for e in corpus.proof_entries()]
    if proofs:
        th = _theory(out, theory)
        items += [(f, th, _proof(out, th, f)) for f in proofs]
    if not items:
        _fail_usage(out, "nothing to check: give proof files or --corpus")
    ok = True
    for name, th, p in items:
        rep = check_proof(th.sig, p, strict=not lenient)
        ok &= rep.valid
        if rep.valid:
            text = f"{name}: valid ({rep.stats['nodes']} nodes)"
        else:
            text = f"{name}: invalid at {list(rep.path)}: {rep.reason}: {rep.message}"
        out.record("valid" if rep.valid else "invalid", text, rep.path, rep.reason, rep.stats, file=name)
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


@main.command("audit")
@click.argument("proof")
@theory_opt
@click.option("--mark", type=int, required=True, help="Index of the audited assumption in the root context.")
@click.option("--sf-only", is_flag=True, help="Cut away provable implications and demand a speaks-for-only witness.")
@click.option("--discharge", multiple=True, metavar="INDEX=FILE", help="Proof of the implication at INDEX (with --sf-only).")
@json_flag
def audit_cmd(proof, theory, mark, sf_only, discharge, as_json):
    """Explain how an assumption influences a proof's conclusion, or remove it."""
    out = Out(as_json)
    th = _theory(out, theory)
    p = _proof(out, th, proof)
    d = th.sig.default_label
    try:
        if sf_only:
            proofs = {}
            for item in discharge:
                idx, sep, f = item.partition("=")
                if not sep or not idx.strip().isdigit():
                    _fail_usage(out, f"--discharge expects INDEX=FILE, got {item!r}")
                proofs[int(idx)] = _proof(out, th, f)
            w = audit_sf_only(th.sig, p, mark, proofs)
        else:
            w = audit(th.sig, p, mark)
    except NIError as e:
        out.record("error", f"{e.reason}: {e.message}", reason=e.reason)
        sys.exit(EXIT_FAIL)
    if not isinstance(w, Influence):
        _emit_proof(out, th, w.proof, None, "pruned")
        if not as_json:
            click.echo("# the marked assumption is not needed")
        sys.exit(EXIT_OK)
    stats = {
        "g1": format_gp(w.g1, d),
        "g2": format_gp(w.g2, d),
        "suffix": _pairs(w.suffix),
        "ci": ci_shape(w.ci),
        "delta": len(w.delta),
        "csc_rules": dict(csc_rules_used(w.csc)),
    }
    lines = [
        "influence",
        f"  g1'  = {stats['g1']}",
        f"  g1'' = {stats['suffix'] or '(empty)'}",
        f"  g2'  = {stats['g2']}",
        f"  ci   = {stats['ci']}",
        "  supercontext:",
        *(f"    {format_belief(b, d)}" for b in w.delta),
        "  can-influence derivation:",
        format_ci(w.ci, d, 2),
        "  supercontext derivation:",
        format_csc(w.csc, d, 2),
    ]
    out.record("influence", "\n".join(lines), stats=stats)
    sys.exit(EXIT_OK)


def _pairs(pairs) -> str:
    from .text import format_term

    return "".join(f".[{format_term(p)}:{format_term(l)}]" for p, l in pairs)


@main.command()
@click.argument("sequent")
@theory_opt
@click.option("--axioms", is_flag=True, help="Prepend the theory's axioms to the sequent's context.")
@click.option("--depth", default=6, show_default=True, help="Maximum proof depth.")
@click.option("--universe", "universe_file", help="File of `Sort: term, ...` lines used for instantiation.")
@click.option("--timeout", default=30.0, show_default=True, help="Seconds before giving up.")
@click.option("--output", "-o", help="Write the proof here instead of stdout.")
@json_flag
def search(sequent, theory, axioms, depth, universe_file, timeout, output, as_json):
    """Bounded proof search for SEQUENT (literal text or a file)."""
    out = Out(as_json)
    th = _theory(out, theory)
    s = _sequent(out, th, sequent, axioms)
    cfg = SearchConfig(depth=depth, universe=_universe(out, th, universe_file, s), timeout=timeout)
    res = bounded_prove(th.sig, s, cfg)
    if res.found:
        _emit_proof(out, th, res.proof, output, "found", explored=res.explored)
        sys.exit(EXIT_OK)
    out.record("not_found", f"{res.status} after {res.explored} goals", reason=res.status, stats={"explored": res.explored})
    sys.exit(EXIT_FAIL)


@main.command()
@click.argument("sequent")
@theory_opt
@click.option("--axioms", is_flag=True, help="Prepend the theory's axioms to the sequent's context.")
@click.option("--depth", default=3, show_default=True, help="Number of supercontext steps.")
@click.option("--sides", is_flag=True, help="Also follow Var/Fwd/Self steps, discharging permissions by search.")
@json_flag
def csc(sequent, theory, axioms, depth, sides, as_json):
    """List compatible supercontexts of SEQUENT."""
    out = Out(as_json)
    th = _theory(out, theory)
    s = _sequent(out, th, sequent, axioms)
    d = th.sig.default_label
    cfg = SearchConfig(depth=4, timeout=5.0) if sides else None
    found = enumerate_cscs(th.sig, s, depth, sides=cfg)
    for n, (delta, deriv) in enumerate(found):
        rules = dict(csc_rules_used(deriv))
        text = f"[{n}] " + ", ".join(format_belief(b, d) for b in delta)
        out.record("csc", text, stats={"size": len(delta), "rules": rules}, delta=[format_belief(b, d) for b in delta])
    sys.exit(EXIT_OK)


@main.group()
def transform():
    """Proof-to-proof transformations."""


def _run_transform(out: Out, th: Theory, fn, output):
    try:
        p = fn()
    except TransformError as e:
        out.record("error", f"{e.reason}: {e.message}", reason=e.reason)
        sys.exit(EXIT_FAIL)
    _emit_proof(out, th, p, output)
    sys.exit(EXIT_OK)


output_opt = click.option("--output", "-o", help="Write the proof here instead of stdout.")


@transform.command("unsays")
@click.argument("proof")
@theory_opt
@output_opt
@json_flag
def t_unsays(proof, theory, output, as_json):
    """From a proof of  p says[l] phi @ g  build one of  phi @ g.[p:l]."""
    out = Out(as_json)
    th = _theory(out, theory)
    p = _proof(out, th, proof)
    _run_transform(out, th, lambda: unsays_r(th.sig, p), output)


@transform.command("normalize")
@click.argument("proof")
@theory_opt
@output_opt
@json_flag
def t_normalize(proof, theory, output, as_json):
    """Move principal and permission rules above the formula rules."""
    out = Out(as_json)
    th = _theory(out, theory)
    p = _proof(out, th, proof)
    _run_transform(out, th, lambda: normalize(th.sig, p), output)


@transform.command("cut")
@click.argument("lemma")
@click.argument("proof")
@theory_opt
@click.option("--index", type=int, help="Context index of the lemma in PROOF (default: first match).")
@output_opt
@json_flag
def t_cut(lemma, proof, theory, index, output, as_json):
    """Eliminate a cut of LEMMA against the assumption it proves in PROOF."""
    out = Out(as_json)
    th = _theory(out, theory)
    p1, p2 = _proof(out, th, lemma), _proof(out, th, proof)
    _run_transform(out, th, lambda: eliminate_cut(th.sig, p1, p2, index), output)


@transform.command("simulate")
@click.argument("proof")
@theory_opt
@click.option("--principal", required=True, help="The simulating principal q.")
@click.option("--label", required=True, help="The label l of the simulation.")
@output_opt
@json_flag
def t_simulate(proof, theory, principal, label, output, as_json):
    """Re-prove the sequent inside  <q:l>."""
    out = Out(as_json)
    th = _theory(out, theory)
    p = _proof(out, th, proof)
    try:
        q, l = parse_term(principal, th.sig), parse_term(label, th.sig)
    except ParseError as e:
        _fail_usage(out, str(e), e.kind)
    _run_transform(out, th, lambda: simulate(th.sig, p, q, l), output)


@transform.command("sf-elim")
@click.argument("proof")
@theory_opt
@click.option("--to", "target", required=True, help="Target principal, e.g. '<>.[Bob:l]'.")
@click.option("--depth", default=4, show_default=True, help="Speaks-for search depth.")
@output_opt
@json_flag
def t_sf_elim(proof, theory, target, depth, output, as_json):
    """Move the goal to a principal its own principal speaks for."""
    out = Out(as_json)
    th = _theory(out, theory)
    p = _proof(out, th, proof)
    try:
        g2 = parse_belief(f"true @ {target}", th.sig).gp
    except ParseError as e:
        _fail_usage(out, str(e), e.kind)
    d = search_sf(th.sig, p.conclusion.context, p.conclusion.goal.gp, g2, depth)
    if d is None:
        out.record("not_found", "no speaks-for derivation found", reason="NotFound")
        sys.exit(EXIT_FAIL)
    _run_transform(out, th, lambda: sf_eliminate(th.sig, p, d), output)


@main.command()
@click.argument("files", nargs=-1, required=True)
@theory_opt
@click.option("--check", "check_only", is_flag=True, help="Exit 1 if a file is not in canonical form.")
@click.option("--in-place", "-i", is_flag=True, help="Rewrite the files.")
@json_flag
def fmt(files, theory, check_only, in_place, as_json):
    """Print theory or proof files in canonical form."""
    out = Out(as_json)
    th = None
    changed = False
    for f in files:
        text = _read(f)
        try:
            if _looks_like_proof(text):
                th = th or _theory(out, theory)
                canon = format_proof(parse_proof(text, th.sig), th.sig)
            else:
                canon = format_theory(parse_theory(text))
        except ParseError as e:
            _fail_usage(out, f"{f}:{e}", e.kind)
        same = canon == text
        changed |= not same
        if in_place and not same:
            Path(f).write_text(canon)
        if check_only or in_place:
            out.record("canonical" if same else "changed", f"{f}: {'canonical' if same else 'reformatted' if in_place else 'not canonical'}", file=f)
        else:
            out.record("ok", canon.rstrip("\n"), file=f, canonical=canon)
    sys.exit(EXIT_FAIL if check_only and changed else EXIT_OK)


def _looks_like_proof(text: str) -> bool:
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().split(" ", 1)[0]
        if word:
            return word in ("goal", "var")
    return False


@main.command()
@click.argument("rule")
@json_flag
def explain(rule, as_json):
    """Show the schema of a kernel rule."""
    out = Out(as_json)
    try:
        text = rule_schema(rule)
    except RuleError as e:
        out.record("error", f"{e.reason}: {e.message}", reason=e.reason)
        sys.exit(EXIT_FAIL)
    out.record("ok", text, schema=text)


@main.command()
@click.argument("proofs", nargs=-1)
@theory_opt
@click.option("--corpus", "use_corpus", is_flag=True, help="Include every bundled proof.")
@click.option("--out", "out_dir", default="report", show_default=True, help="Directory for report.tsv and rules.png.")
@json_flag
def report(proofs, theory, use_corpus, out_dir, as_json):
    """Tabulate proof statistics and plot a rule-usage histogram."""
    out = Out(as_json)
    items = []
    if use_corpus:
        items += [(e.label, corpus.load_theory(e.theory), corpus.load_proof(e)) for e in corpus.proof_entries()]
    if proofs:
        th = _theory(out, theory)
        items += [(f, th, _proof(out, th, f)) for f in proofs]
    if not items:
        _fail_usage(out, "nothing to report: give proof files or --corpus")
    rows = []
    for name, th, p in items:
        rep = check_proof(th.sig, p)
        st = proof_stats(p)
        rows.append(Row(name, "valid" if rep.valid else "invalid", st["nodes"], st["depth"], st["histogram"]))
    table, png = write_report(rows, Path(out_dir))
    if as_json:
        for r in rows:
            out.record(r.verdict, stats={"nodes": r.nodes, "depth": r.depth, "histogram": r.histogram}, file=r.name)
    else:
        click.echo(table.read_text().rstrip("\n"))
    click.echo(f"wrote {table} and {png}", err=True)
    sys.exit(EXIT_OK if all(r.verdict == "valid" for r in rows) else EXIT_FAIL)


if __name__ == "__main__":
    main()
