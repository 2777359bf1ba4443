"""Per-sample scoring of transcripts and the task × context accuracy report."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..qa.templates import TASKS  # noqa: E402
from .baselines import BaselineEstimate  # noqa: E402
from .parse import AnswerParseError, from_gold, parse_answer  # noqa: E402
from .rules import ScoringRule, score_sample  # noqa: E402


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    task: str
    context_s: float
    correct: bool
    diagnostic: str = "ok"  # ok | missing_marker | unparseable | missing_transcript


def score_transcript(record: Mapping[str, Any], transcript: str | None, rule: ScoringRule = ScoringRule()) -> SampleScore:
    gold = from_gold(record["gold"])
    key = (record["id"], record["task"], float(record["context_s"]))
    if transcript is None:
        return SampleScore(*key, False, "missing_transcript")
    try:
        pred = parse_answer(transcript, gold.kind)
    except AnswerParseError as exc:
        return SampleScore(*key, False, exc.reason)
    return SampleScore(*key, score_sample(pred, gold, rule))


def score_records(
    records: Iterable[Mapping[str, Any]],
    transcripts: Mapping[str, str],
    rule: ScoringRule = ScoringRule(),
) -> list[SampleScore]:
    return [score_transcript(rec, transcripts.get(rec["id"]), rule) for rec in records]


@dataclass
class ScoreReport:
    contexts: list[float]
    tasks: list[str]
    cells: dict[tuple[str, float], dict[str, float]]  # accuracy %, n, correct
    baselines: dict[str, BaselineEstimate]
    rule: str
    missing: list[tuple[str, float]] = field(default_factory=list)
    diagnostics: dict[str, int] = field(default_factory=dict)
    classification: dict[str, dict[str, float]] = field(default_factory=dict)

    def accuracy(self, task: str, ctx: float) -> float | None:
        cell = self.cells.get((task, ctx))
        return None if cell is None else cell["accuracy"]

    def average(self, ctx: float) -> float | None:
        values = [self.cells[(t, ctx)]["accuracy"] for t in self.tasks if (t, ctx) in self.cells]
        return float(np.mean(values)) if values else None

    def baseline_average(self) -> float | None:
        values = [self.baselines[t].percent for t in self.tasks if t in self.baselines]
        return float(np.mean(values)) if values else None

    def to_json(self) -> dict[str, Any]:
        return {
            "rule": self.rule,
            "contexts_s": self.contexts,
            "tasks": self.tasks,
            "cells": [
                {"task": t, "context_s": c, **self.cells[(t, c)]}
                for t in self.tasks
                for c in self.contexts
                if (t, c) in self.cells
            ],
            "average": {f"{c:g}": self.average(c) for c in self.contexts},
            "baselines": {t: b.to_json() for t, b in self.baselines.items()},
            "baseline_average": self.baseline_average(),
            "missing_cells": [{"task": t, "context_s": c} for t, c in self.missing],
            "diagnostics": self.diagnostics,
            "classification": self.classification,
        }

    def _rows(self) -> list[list[str]]:
        def fmt(v: float | None) -> str:
            return "missing" if v is None else f"{v:.1f}"

        header = ["task", "rand_pct"] + [f"{c:g}s" for c in self.contexts]
        rows = [header]
        for t in self.tasks:
            b = self.baselines.get(t)
            rand = "" if b is None else (f"{b.percent:.1f}" if b.method == "closed-form" else f"~{b.percent:.1f}")
            rows.append([t, rand] + [fmt(self.accuracy(t, c)) for c in self.contexts])
        avg = self.baseline_average()
        rows.append(["average", "" if avg is None else f"~{avg:.1f}"] + [fmt(self.average(c)) for c in self.contexts])
        return rows

    def to_text(self) -> str:
        rows = self._rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.insert(len(lines) - 1, "-" * len(lines[0]))
        if self.missing:
            lines.append("missing cells: " + ", ".join(f"{t}@{c:g}s" for t, c in self.missing))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self._rows())
        return buf.getvalue()

    def render_figure(self, path: str | Path) -> None:
        grid = np.full((len(self.tasks), len(self.contexts)), np.nan)
        for i, t in enumerate(self.tasks):
            for j, c in enumerate(self.contexts):
                acc = self.accuracy(t, c)
                grid[i, j] = np.nan if acc is None else acc
        with plt.rc_context({"svg.hashsalt": "tshaystack", "svg.fonttype": "none"}):
            fig, ax = plt.subplots(figsize=(1.2 * len(self.contexts) + 3, 0.45 * len(self.tasks) + 1.5))
            im = ax.imshow(grid, vmin=0, vmax=100, cmap="viridis", aspect="auto")
            ax.set_xticks(range(len(self.contexts)), [f"{c:g}s" for c in self.contexts])
            ax.set_yticks(range(len(self.tasks)), self.tasks)
            for i in range(grid.shape[0]):
                for j in range(grid.shape[1]):
                    text = "n/a" if np.isnan(grid[i, j]) else f"{grid[i, j]:.0f}"
                    ax.text(j, i, text, ha="center", va="center", color="white", fontsize=8)
            fig.colorbar(im, ax=ax, label="accuracy %")
            fig.tight_layout()
            fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
            plt.close(fig)

    def write(self, out_dir: str | Path, stem: str = "report") -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {k: out / f"{stem}.{k}" for k in ("json", "txt", "csv", "svg")}
        paths["json"].write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        paths["txt"].write_text(self.to_text())
        paths["csv"].write_text(self.to_csv())
        self.render_figure(paths["svg"])
        return paths


def aggregate(
    scores: Sequence[SampleScore],
    baselines: Mapping[str, BaselineEstimate] | None = None,
    tasks: Sequence[str] | None = None,
    contexts: Sequence[float] | None = None,
    rule: ScoringRule = ScoringRule(),
) -> ScoreReport:
    """Accuracy per (task, context). Requested cells without scores are listed as missing and left out of averages."""
    tasks = list(tasks) if tasks is not None else [t for t in TASKS if any(s.task == t for s in scores)]
    contexts = sorted(contexts) if contexts is not None else sorted({s.context_s for s in scores})
    cells: dict[tuple[str, float], dict[str, float]] = {}
    diagnostics: dict[str, int] = {}
    for s in scores:
        cell = cells.setdefault((s.task, s.context_s), {"n": 0, "correct": 0})
        cell["n"] += 1
        cell["correct"] += int(s.correct)
        diagnostics[s.diagnostic] = diagnostics.get(s.diagnostic, 0) + 1
    for cell in cells.values():
        cell["accuracy"] = 100.0 * cell["correct"] / cell["n"]
    missing = [(t, c) for t in tasks for c in contexts if (t, c) not in cells]
    if missing:
        warnings.warn(f"{len(missing)} task/context cells have no scored samples and are excluded from averages")
    return ScoreReport(list(contexts), tasks, cells, dict(baselines or {}), str(rule), missing, diagnostics)
