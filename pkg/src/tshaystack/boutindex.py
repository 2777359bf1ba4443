"""Activity bouts, the per-class bout index, and majority-vote classification slices."""

from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import Recording, SplitAssignment
from .labels import CLASSES


class NeedleUnavailable(LookupError):
    """No bout qualifies for the requested class/length/participant constraints."""


@dataclass(frozen=True, order=True)
class Bout:
    participant_id: str
    activity: str
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ValueError(f"empty bout [{self.start}, {self.end})")

    @property
    def duration(self) -> int:
        return self.end - self.start


def merge_bouts(rec: Recording) -> list[Bout]:
    """Fuse touching annotations of the same class into maximal bouts."""
    bouts: list[Bout] = []
    cur = None
    for s, e, c in rec.annotations:
        if cur is not None and cur[2] == c and cur[1] == s:
            cur = (cur[0], e, c)
            continue
        if cur is not None:
            bouts.append(Bout(rec.participant_id, cur[2], cur[0], cur[1]))
        cur = (s, e, c)
    if cur is not None:
        bouts.append(Bout(rec.participant_id, cur[2], cur[0], cur[1]))
    return bouts


class BoutIndex:
    """Bouts grouped by class and sorted ascending by duration."""

    def __init__(self, by_class: Mapping[str, Sequence[Bout]]):
        self._bouts: dict[str, list[Bout]] = {}
        self._durations: dict[str, list[int]] = {}
        for cls, bouts in by_class.items():
            if not bouts:
                continue
            ordered = sorted(bouts, key=lambda b: (b.duration, b.participant_id, b.start))
            self._bouts[cls] = ordered
            self._durations[cls] = [b.duration for b in ordered]

    def __contains__(self, cls: str) -> bool:
        return cls in self._bouts

    def classes(self) -> list[str]:
        return sorted(self._bouts)

    def counts(self) -> dict[str, int]:
        return {c: len(b) for c, b in sorted(self._bouts.items())}

    def bouts(self, cls: str) -> list[Bout]:
        return list(self._bouts.get(cls, ()))

    def at_least(self, cls: str, min_duration: int) -> list[Bout]:
        """Bouts of ``cls`` lasting ``min_duration`` samples or more (binary search)."""
        if cls not in self._bouts:
            return []
        i = bisect.bisect_left(self._durations[cls], min_duration)
        return self._bouts[cls][i:]

    def to_json(self) -> dict[str, list[dict]]:
        return {
            cls: [{"participant": b.participant_id, "start": b.start, "end": b.end} for b in bouts]
            for cls, bouts in sorted(self._bouts.items())
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Iterable[Mapping]]) -> "BoutIndex":
        return cls({c: [Bout(d["participant"], c, int(d["start"]), int(d["end"])) for d in items] for c, items in data.items()})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "BoutIndex":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_index(bouts: Iterable[Bout]) -> BoutIndex:
    grouped: dict[str, list[Bout]] = defaultdict(list)
    for b in bouts:
        grouped[b.activity].append(b)
    return BoutIndex(grouped)


def index_corpus(recordings: Iterable[Recording]) -> BoutIndex:
    return build_index(b for rec in recordings for b in merge_bouts(rec))


def sample_needle(
    index: BoutIndex,
    activity: str,
    length: int,
    rng: np.random.Generator,
    recordings: Mapping[str, Recording] | None = None,
    exclude_participant: str | None = None,
    participants: frozenset[str] | None = None,
) -> tuple[np.ndarray | None, Bout]:
    """Pick a qualifying bout uniformly and crop a ``length``-sample window at a uniform offset.

    Returns the cropped (3, length) series (``None`` if ``recordings`` is not given)
    and a ``Bout`` describing the cropped span.
    """
    candidates = [
        b
        for b in index.at_least(activity, length)
        if b.participant_id != exclude_participant and (participants is None or b.participant_id in participants)
    ]
    if not candidates:
        raise NeedleUnavailable(f"needle unavailable: no {activity!r} bout of >= {length} samples")
    src = candidates[int(rng.integers(len(candidates)))]
    offset = int(rng.integers(src.duration - length + 1))
    crop = Bout(src.participant_id, activity, src.start + offset, src.start + offset + length)
    series = None
    if recordings is not None:
        series = recordings[src.participant_id].channels[:, crop.start : crop.end]
    return series, crop


def coverage(codes: np.ndarray) -> tuple[str | None, float]:
    """Dominant class of a window of label codes and its fraction; unannotated never wins."""
    n = len(codes)
    counts = np.bincount(codes[codes >= 0].astype(np.int64), minlength=len(CLASSES))
    if n == 0 or counts.sum() == 0:
        return None, 0.0
    best = int(np.argmax(counts))
    return CLASSES[best], counts[best] / n


def majority_label(codes: np.ndarray, threshold: float = 0.6) -> str | None:
    """Class covering at least ``threshold`` of the window, else None."""
    if not 0.5 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0.5, 1]")
    cls, frac = coverage(codes)
    return cls if cls is not None and frac >= threshold else None


@dataclass(frozen=True)
class ClassWindow:
    participant_id: str
    start: int
    length: int
    label: str | None
    coverage: float


@dataclass
class SliceResult:
    windows: list[ClassWindow]
    pool_size: int
    method: str  # "random" when subsampled to budget, "full" otherwise


def _pool(recs: Iterable[Recording], context_len: int, threshold: float) -> list[ClassWindow]:
    pool = []
    for rec in sorted(recs, key=lambda r: r.participant_id):
        codes = rec.label_codes()
        n_win = rec.length // context_len
        if n_win == 0:
            continue
        tiles = codes[: n_win * context_len].reshape(n_win, context_len)
        counts = np.zeros((n_win, len(CLASSES)), dtype=np.int64)
        for k in range(len(CLASSES)):
            counts[:, k] = (tiles == k).sum(axis=1)
        best = counts.argmax(axis=1)
        frac = counts[np.arange(n_win), best] / context_len
        for w in np.flatnonzero(frac >= threshold):
            pool.append(ClassWindow(rec.participant_id, int(w) * context_len, context_len, CLASSES[best[w]], float(frac[w])))
    return pool


def slice_classification(
    recs: Sequence[Recording],
    split: SplitAssignment,
    context_len: int,
    budget: Mapping[str, int] = {"train": 80_000, "val": 15_000, "test": 15_000},
    seed: int = 42,
    threshold: float = 0.6,
) -> dict[str, SliceResult]:
    """Tile non-overlapping windows per participant, keep majority-labelled ones, cap to budget."""
    if context_len < 1:
        raise ValueError("context_len must be >= 1")
    out = {}
    for i, name in enumerate(("train", "val", "test")):
        members = split.of(name)
        pool = _pool((r for r in recs if r.participant_id in members), context_len, threshold)
        cap = int(budget[name])
        if len(pool) > cap:
            rng = np.random.default_rng([seed, i])
            keep = np.sort(rng.permutation(len(pool))[:cap])
            out[name] = SliceResult([pool[j] for j in keep], len(pool), "random")
        else:
            out[name] = SliceResult(pool, len(pool), "full")
    return out
