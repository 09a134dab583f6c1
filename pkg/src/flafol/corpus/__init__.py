"""Bundled example theories and proofs.

Each subdirectory holds one `theory.thy` plus the proofs (`*.prf`) stated in its
signature.  Proofs under `rejected/` are deliberately invalid: they use rules
outside the calculus or their naive renamings.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from pathlib import Path

from ..kernel import Proof
from ..text import Theory, parse_proof, parse_theory

ROOT = Path(__file__).parent


@dataclass(frozen=True)
class Entry:
    theory: str
    name: str
    path: Path
    rejected: bool = False

    @property
    def label(self) -> str:
        return f"{self.theory}/{'rejected/' if self.rejected else ''}{self.name}"


def theory_names() -> list[str]:
    return sorted(d.name for d in ROOT.iterdir() if (d / "theory.thy").is_file())


@cache
def load_theory(name: str) -> Theory:
    return parse_theory((ROOT / name / "theory.thy").read_text())


def proof_entries(rejected: bool = False) -> list[Entry]:
    out = []
    for t in theory_names():
        for f in sorted((ROOT / t).glob("*.prf")):
            out.append(Entry(t, f.stem, f))
        if rejected:
            for f in sorted((ROOT / t / "rejected").glob("*.prf")):
                out.append(Entry(t, f.stem, f, True))
    return out


def load_proof(e: Entry) -> Proof:
    return parse_proof(e.path.read_text(), load_theory(e.theory).sig)


def valid_proofs() -> list[tuple[Entry, Theory, Proof]]:
    return [(e, load_theory(e.theory), load_proof(e)) for e in proof_entries()]


def all_files() -> list[Path]:
    return sorted(ROOT.glob("*/theory.thy")) + [e.path for e in proof_entries(rejected=True)]
