"""Shared, read-only generation state: recordings of one split, their bout index, background sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..boutindex import BoutIndex, NeedleUnavailable, index_corpus, sample_needle
from ..ingest import Recording
from ..insertion import BlendSpec, InsertionRecord, _blend_into, default_blend_window, min_gap_samples
from ..labels import CLASSES, UNANNOTATED, regime_of
from .config import TaskConfig


class Resample(RuntimeError):
    """The drawn background cannot host this sample; draw another."""


@dataclass
class Background:
    participant: str
    offset: int
    series: np.ndarray  # (3, n), owned copy
    codes: np.ndarray  # (n,), owned copy
    start_clock: int

    @property
    def classes(self) -> set[str]:
        return {CLASSES[c] for c in np.unique(self.codes) if c >= 0}

    @property
    def majority(self) -> str | None:
        valid = self.codes[self.codes >= 0]
        if not len(valid):
            return None
        return CLASSES[int(np.bincount(valid).argmax())]


@dataclass
class GenContext:
    recordings: dict[str, Recording]
    index: BoutIndex
    rate: float
    context_s: float
    _codes: dict[str, np.ndarray] = field(default_factory=dict)
    _pure_runs: dict[int, list[tuple[str, int, int, str]]] = field(default_factory=dict)

    @classmethod
    def from_recordings(cls, recordings: Sequence[Recording], context_s: float) -> "GenContext":
        rates = {r.rate for r in recordings}
        if len(rates) != 1:
            raise ValueError(f"recordings mix sampling rates {sorted(rates)}")
        recs = {r.participant_id: r for r in recordings}
        return cls(recs, index_corpus(recordings), float(rates.pop()), context_s)

    def with_context(self, context_s: float) -> "GenContext":
        return GenContext(self.recordings, self.index, self.rate, context_s, self._codes, {})

    @property
    def length(self) -> int:
        return int(round(self.context_s * self.rate))

    def codes(self, pid: str) -> np.ndarray:
        if pid not in self._codes:
            self._codes[pid] = self.recordings[pid].label_codes()
        return self._codes[pid]

    # -- backgrounds -------------------------------------------------------
    def _window(self, pid: str, offset: int) -> Background:
        rec = self.recordings[pid]
        n = self.length
        clock = (rec.start_clock + int(round(offset * 1000.0 / self.rate))) % 86_400_000
        return Background(pid, offset, rec.channels[:, offset : offset + n].copy(), self.codes(pid)[offset : offset + n].copy(), clock)

    def any_background(self, rng: np.random.Generator) -> Background:
        n = self.length
        pids = [p for p in sorted(self.recordings) if self.recordings[p].length >= n]
        if not pids:
            raise NeedleUnavailable(f"no recording spans {n} samples")
        weights = np.array([self.recordings[p].length - n + 1 for p in pids], dtype=np.float64)
        pid = pids[int(rng.choice(len(pids), p=weights / weights.sum()))]
        offset = int(rng.integers(self.recordings[pid].length - n + 1))
        return self._window(pid, offset)

    def _runs(self) -> list[tuple[str, int, int, str]]:
        """Maximal fully-annotated single-regime runs that can hold a whole window."""
        n = self.length
        if n not in self._pure_runs:
            runs = []
            for pid in sorted(self.recordings):
                codes = self.codes(pid)
                reg = np.full(len(codes), -1, dtype=np.int8)
                for k, name in enumerate(CLASSES):
                    reg[codes == k] = 0 if regime_of(name) == "sedentary" else 1
                change = np.flatnonzero(reg[1:] != reg[:-1]) + 1
                starts = np.concatenate(([0], change))
                ends = np.concatenate((change, [len(reg)]))
                for s, e in zip(starts, ends):
                    if reg[s] >= 0 and e - s >= n:
                        runs.append((pid, int(s), int(e), "sedentary" if reg[s] == 0 else "active"))
            self._pure_runs[n] = runs
        return self._pure_runs[n]

    def pure_background(self, rng: np.random.Generator, regime: str | None = None) -> tuple[Background, str]:
        """Window drawn uniformly among those whose annotations all share one regime."""
        n = self.length
        runs = [r for r in self._runs() if regime is None or r[3] == regime]
        if not runs:
            raise NeedleUnavailable(f"no regime-pure stretch of {n} samples")
        counts = np.array([e - s - n + 1 for _, s, e, _ in runs], dtype=np.float64)
        pid, s, e, reg = runs[int(rng.choice(len(runs), p=counts / counts.sum()))]
        return self._window(pid, s + int(rng.integers(e - s - n + 1))), reg

    # -- needles -----------------------------------------------------------
    def needle_length(self, cfg: TaskConfig, rng: np.random.Generator) -> int:
        lo, hi = cfg.needle_frac
        return max(1, int(round(rng.uniform(lo, hi) * self.length)))

    def needle_bounds(self, cfg: TaskConfig) -> tuple[int, int]:
        lo, hi = cfg.needle_frac
        return max(1, math.ceil(lo * self.length)), max(1, math.floor(hi * self.length))

    def min_gap(self, cfg: TaskConfig) -> int:
        return min_gap_samples(self.length, cfg.gap_ratio, cfg.gap_cap)

    def available(self, activity: str, length: int) -> bool:
        return bool(self.index.at_least(activity, length))

    def insert(
        self,
        bg: Background,
        activity: str,
        start: int,
        length: int,
        cfg: TaskConfig,
        rng: np.random.Generator,
    ) -> InsertionRecord:
        """Draw a needle of ``activity`` and blend it into ``bg.series`` in place."""
        needle, src = sample_needle(self.index, activity, length, rng, self.recordings)
        spec = BlendSpec(default_blend_window(length, cfg.blend_cap), start, length)
        spec.check(bg.series.shape[1])
        _blend_into(bg.series, needle, spec, align=True)
        return InsertionRecord(activity, start, start + length, src.participant_id)


def label_of(code: int) -> str:
    return CLASSES[code] if code >= 0 else UNANNOTATED
