"""Indented text for speaks-for, can-influence and compatible-supercontext derivations."""

from __future__ import annotations

from .csc import CSCDerivation
from .syntax import GP, Term
from .text import format_belief, format_gp, format_term
from .trust import CIDerivation, SFDerivation


def _gp(g: GP, d) -> str:
    return format_gp(g, d)


def format_sf(x: SFDerivation, default: Term | None = None, depth: int = 0) -> str:
    pad = "  " * depth
    head = f"{pad}{x.rule}: {_gp(x.left, default)} SF {_gp(x.right, default)}"
    lines = [head]
    for side in x.sides:
        lines.append(f"{pad}  side {format_belief(side.conclusion.goal, default)} ({_size(side)} nodes)")
    lines.extend(format_sf(c, default, depth + 1) for c in x.premises)
    return "\n".join(lines)


def format_ci(x: CIDerivation, default: Term | None = None, depth: int = 0) -> str:
    pad = "  " * depth
    lines = [f"{pad}{x.rule}: {_gp(x.left, default)} CanInfl {_gp(x.right, default)}"]
    if x.rule == "ImpCI":
        lines[0] += f" [i={x.index}]"
    if x.rule == "ExtCI":
        lines[0] += " [ext=" + "".join(f".[{format_term(p)}:{format_term(l)}]" for p, l in x.ext) + "]"
    if x.sf is not None:
        lines.append(format_sf(x.sf, default, depth + 1))
    lines.extend(format_ci(c, default, depth + 1) for c in x.premises)
    return "\n".join(lines)


def format_csc(x: CSCDerivation, default: Term | None = None, depth: int = 0) -> str:
    pad = "  " * depth
    params = [f"{k}={v}" for k, v in (("i", x.index), ("k", x.pos), ("via", x.via), ("branch", x.branch)) if v is not None]
    if x.term is not None:
        params.append(f"t={format_term(x.term)}")
    lines = [f"{pad}{x.rule}" + (f" [{' '.join(params)}]" if params else "") + f": |delta|={len(x.delta)}"]
    lines.extend(format_csc(c, default, depth + 1) for c in x.premises)
    return "\n".join(lines)


def ci_shape(x: CIDerivation) -> str:
    """Compact shape such as TransCI(SF-CI(FwdSF), SF-CI(SelfRSF))."""
    if x.rule == "SF-CI":
        return f"SF-CI({x.sf.rule})"
    if x.rule == "ImpCI":
        return "ImpCI"
    return f"{x.rule}(" + ", ".join(ci_shape(c) for c in x.premises) + ")"


def _size(p) -> int:
    from .kernel import proof_stats

    return proof_stats(p)["nodes"]
