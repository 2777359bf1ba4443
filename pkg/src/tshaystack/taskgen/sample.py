"""Benchmark items and their ground-truth timelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..insertion import InsertionRecord
from ..labels import CLASS_INDEX, CLASSES, UNANNOTATED


@dataclass(frozen=True)
class Segment:
    activity: str
    start: int  # sample index, inclusive
    end: int  # sample index, exclusive
    inserted: bool


def build_timeline(codes: np.ndarray, insertions: Sequence[InsertionRecord]) -> list[Segment]:
    """Run-length segments of the window after overwriting needle spans.

    Each insertion stays its own segment even when it touches same-class material.
    """
    n = len(codes)
    labels = np.asarray(codes, dtype=np.int16).copy()
    owner = np.full(n, -1, dtype=np.int32)
    for k, rec in enumerate(insertions):
        labels[rec.start : rec.end] = CLASS_INDEX[rec.activity]
        owner[rec.start : rec.end] = k
    change = np.flatnonzero((labels[1:] != labels[:-1]) | (owner[1:] != owner[:-1])) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n]))
    return [
        Segment(
            CLASSES[labels[s]] if labels[s] >= 0 else UNANNOTATED,
            int(s),
            int(e),
            bool(owner[s] >= 0),
        )
        for s, e in zip(starts, ends)
    ]


def index_to_ms(index: int, rate: float) -> int:
    return int(round(index * 1000.0 / rate))


@dataclass
class HaystackSample:
    id: str
    task: str
    context_s: float
    rate: float
    series: np.ndarray  # (3, n)
    timeline: list[Segment]
    question: str
    gold: dict[str, Any]
    answer_text: str
    template_id: int
    query: dict[str, Any]
    participant: str
    start_clock_ms: int
    seeds: dict[str, int] = field(default_factory=dict)
    split: str = "train"
    needles: list[InsertionRecord] = field(default_factory=list)
    rationale: str | None = None

    @property
    def length(self) -> int:
        return int(self.series.shape[1])

    def timeline_json(self) -> list[dict[str, Any]]:
        return [
            {
                "class": seg.activity,
                "start_ms": index_to_ms(seg.start, self.rate),
                "end_ms": index_to_ms(seg.end, self.rate),
                "inserted": seg.inserted,
            }
            for seg in self.timeline
        ]

    def to_record(self, series_ref: str = "") -> dict[str, Any]:
        rec = {
            "id": self.id,
            "task": self.task,
            "context_s": self.context_s,
            "rate": self.rate,
            "length": self.length,
            "split": self.split,
            "question": self.question,
            "gold": self.gold,
            "answer_text": self.answer_text,
            "timeline": self.timeline_json(),
            "template_id": self.template_id,
            "query": self.query,
            "participant": self.participant,
            "start_clock_ms": self.start_clock_ms,
            "seeds": self.seeds,
            "needles": [
                {"class": r.activity, "start": r.start, "end": r.end, "source": r.source_participant}
                for r in self.needles
            ],
            "series_ref": series_ref,
        }
        if self.rationale is not None:
            rec["rationale"] = self.rationale
        return rec
