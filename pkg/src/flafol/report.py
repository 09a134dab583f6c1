"""Proof statistics as a tab-separated table plus a rule-usage bar chart."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


@dataclass(frozen=True)
class Row:
    name: str
    verdict: str
    nodes: int
    depth: int
    histogram: dict


FIELDS = ("name", "verdict", "nodes", "depth", "rules")


def write_table(rows: list[Row], path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(FIELDS)
        for r in rows:
            rules = " ".join(f"{k}={v}" for k, v in sorted(r.histogram.items()))
            w.writerow((r.name, r.verdict, r.nodes, r.depth, rules))
    return path


def plot_histogram(rows: list[Row], path: Path, title: str = "Rule usage") -> Path:
    total = Counter()
    for r in rows:
        total.update(r.histogram)
    names = sorted(total, key=lambda k: (-total[k], k))
    fig, ax = plt.subplots(figsize=(7, max(2.0, 0.3 * len(names) + 1)))
    ax.barh(names[::-1], [total[n] for n in names[::-1]], color="#4c72b0")
    ax.set_xlabel("occurrences")
    ax.set_title(f"{title} ({len(rows)} proofs)")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_report(rows: list[Row], out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    return write_table(rows, out_dir / "report.tsv"), plot_histogram(rows, out_dir / "rules.png")
