"""Benchmark-wide generation: the task × context × split grid with order-independent seeding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from ..cli.seeds import derive_sample_seed, derive_seed
from ..ingest import Recording, SplitAssignment
from ..qa.templates import TASKS
from .config import TaskSet
from .context import GenContext
from .generators import GENERATORS
from .sample import HaystackSample

CONTEXTS_S: tuple[float, ...] = (2.56, 10.0, 100.0, 900.0, 3600.0, 7200.0)
SPLIT_COUNTS: dict[str, int] = {"train": 1000, "val": 150, "test": 150}


@dataclass(frozen=True, order=True)
class SampleKey:
    task: str
    context_s: float
    split: str
    index: int

    @property
    def id(self) -> str:
        return f"{self.task}-{self.context_s:g}s-{self.split}-{self.index:05d}"


def plan_cells(
    tasks: Sequence[str] = TASKS,
    contexts: Sequence[float] = CONTEXTS_S,
    counts: Mapping[str, int] = SPLIT_COUNTS,
) -> list[SampleKey]:
    """Every sample a run will emit, in canonical order."""
    unknown = set(tasks) - set(TASKS)
    if unknown:
        raise ValueError(f"unknown tasks {sorted(unknown)}")
    return [
        SampleKey(task, float(ctx), split, i)
        for task in tasks
        for ctx in contexts
        for split, n in counts.items()
        for i in range(int(n))
    ]


def stratum(master_seed: int, key: SampleKey, counts: Mapping[str, int]) -> float:
    """Position of ``key`` in a seeded permutation of its whole (task, context) cell, as a bin midpoint in (0, 1).

    Splits are laid end to end in ``counts`` order, so balanced quantities hold over the cell
    and approximately within each split.
    """
    sizes = {split: int(n) for split, n in counts.items()}
    offset = 0
    for split, n in sizes.items():
        if split == key.split:
            break
        offset += n
    total = sum(sizes.values())
    perm = np.random.default_rng(derive_seed(master_seed, key.task, f"{key.context_s:g}", "strata")).permutation(total)
    return (int(perm[offset + key.index]) + 0.5) / total


class Generation:
    """Per-split generation contexts, built lazily and shared read-only across samples."""

    def __init__(
        self,
        recordings: Iterable[Recording],
        splits: SplitAssignment,
        master_seed: int,
        task_set: TaskSet | None = None,
        counts: Mapping[str, int] = SPLIT_COUNTS,
    ):
        self.recordings = list(recordings)
        self.splits = splits
        self.master_seed = int(master_seed)
        self.task_set = task_set or TaskSet()
        self.counts = dict(counts)
        self._base: dict[str, GenContext] = {}
        self._ctx: dict[tuple[str, float], GenContext] = {}

    def context(self, split: str, context_s: float) -> GenContext:
        if (split, context_s) not in self._ctx:
            if split not in self._base:
                members = self.splits.of(split)
                recs = [r for r in self.recordings if r.participant_id in members]
                if not recs:
                    raise ValueError(f"split {split!r} has no recordings")
                self._base[split] = GenContext.from_recordings(recs, context_s)
            self._ctx[(split, context_s)] = self._base[split].with_context(context_s)
        return self._ctx[(split, context_s)]

    def sample(self, key: SampleKey) -> HaystackSample:
        seed = derive_sample_seed(self.master_seed, key.task, key.context_s, key.split, key.index)
        u = stratum(self.master_seed, key, self.counts)
        gen = GENERATORS[key.task]
        out = gen(self.context(key.split, key.context_s), self.task_set.configs[key.task], np.random.default_rng(seed), u=u)
        out.id = key.id
        out.split = key.split
        out.seeds = {"master": self.master_seed, "sample": seed}
        return out


def gen_dataset(
    recordings: Iterable[Recording],
    splits: SplitAssignment,
    master_seed: int,
    tasks: Sequence[str] = TASKS,
    contexts: Sequence[float] = CONTEXTS_S,
    counts: Mapping[str, int] = SPLIT_COUNTS,
    task_set: TaskSet | None = None,
) -> Iterator[HaystackSample]:
    gen = Generation(recordings, splits, master_seed, task_set, counts)
    for key in plan_cells(tasks, contexts, counts):
        yield gen.sample(key)
