"""Writing synthesized suites and witness bundles to disk.

A suite directory holds numbered execution files with their litmus
renderings, a tab-separated ``summary.tsv`` and two PNG figures.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import dot, litmus  # noqa: E402
from .execution import Execution, serialize  # noqa: E402
from .synth import SuiteRow, txn_histogram  # noqa: E402

SUMMARY_FIELDS = ("arch", "events", "forbid", "allow")


def _write_members(folder: Path, xs: Sequence[Execution]) -> list[Path]:
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, x in enumerate(xs):
        stem = folder / f"{i:04d}"
        stem.with_suffix(".exec").write_text(serialize(x))
        t = litmus.to_litmus(x, name=f"{folder.name}{i:04d}")
        stem.with_suffix(".litmus").write_text(t.to_text())
        paths.append(stem.with_suffix(".exec"))
    return paths


def write_summary(path: Path, rows: Sequence[SuiteRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([r.arch, r.events, r.forbid, r.allow])


def read_summary(path) -> list[SuiteRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh, delimiter="\t")
        return [SuiteRow(r["arch"], int(r["events"]), int(r["forbid"]), int(r["allow"])) for r in rd]


def plot_counts(rows: Sequence[SuiteRow], path: Path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = [r.events for r in rows]
    width = 0.38
    ax.bar([x - width / 2 for x in xs], [r.forbid for r in rows], width, label="Forbid")
    ax.bar([x + width / 2 for x in xs], [r.allow for r in rows], width, label="Allow")
    ax.set_xlabel("|E|")
    ax.set_ylabel("tests")
    ax.set_xticks(xs)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_txn_histogram(forbid: Sequence[Execution], path: Path, title: str = "") -> None:
    hist = txn_histogram(forbid)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([str(k) for k in hist], list(hist.values()))
    ax.set_xlabel("transactions per test")
    ax.set_ylabel("% of Forbid tests")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def write_suite(out: os.PathLike, model_name: str, forbid: Sequence[Execution],
                allow: Sequence[Execution], rows: Sequence[SuiteRow]) -> dict[str, Path]:
    """Write a suite to ``out``; returns the paths of the summary and figures."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_members(out / "forbid", forbid)
    _write_members(out / "allow", allow)
    paths = {"summary": out / "summary.tsv", "counts": out / "counts.png",
             "txns": out / "txn_histogram.png"}
    write_summary(paths["summary"], rows)
    plot_counts(rows, paths["counts"], title=model_name)
    plot_txn_histogram(forbid, paths["txns"], title=model_name)
    return paths


def write_witness(out: os.PathLike, w) -> dict[str, Path]:
    """Serialized X and Y, the pi pairs, verdicts, litmus renderings and DOT."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "x": out / "x.exec", "y": out / "y.exec", "pi": out / "pi.tsv",
        "x_litmus": out / "x.litmus", "y_litmus": out / "y.litmus", "dot": out / "witness.dot",
        "verdicts": out / "verdicts.txt",
    }
    paths["x"].write_text(serialize(w.x))
    paths["y"].write_text(serialize(w.y))
    with open(paths["pi"], "w", newline="") as fh:
        wr = csv.writer(fh, delimiter="\t", lineterminator="\n")
        wr.writerow(("x", "y"))
        for a, b in w.pi.pairs():
            wr.writerow((w.x.names[a], w.y.names[b]))
    for side, x in (("x_litmus", w.x), ("y_litmus", w.y)):
        try:
            paths[side].write_text(litmus.to_litmus(x).to_text())
        except ValueError as exc:  # lock calls have no litmus form
            paths[side].write_text(f"# no litmus rendering: {exc}\n")
    paths["dot"].write_text(dot.witness_to_dot(w))
    paths["verdicts"].write_text(w.summary() + "\n")
    return paths
