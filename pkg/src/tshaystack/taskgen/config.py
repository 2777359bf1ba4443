"""Per-task generation parameters. Defaults give the standard benchmark grid."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..qa.templates import TASKS

ANSWER_KINDS: dict[str, str] = {
    "existence": "boolean",
    "localization": "time_range",
    "counting": "integer",
    "ordering": "boolean",
    "state_query": "category",
    "antecedent": "category",
    "comparison": "time_range",
    "multi_hop": "time_range",
    "anomaly_detection": "compound",
    "anomaly_localization": "compound",
}


@dataclass(frozen=True)
class TaskConfig:
    task: str
    needle_frac: tuple[float, float]
    background: str = "any"  # any | pure | mixed
    distractors: tuple[int, int] | None = None
    bouts: tuple[int, int] | None = None
    min_duration_diff_frac: float | None = None
    k_weights: tuple[float, ...] | None = None
    opposite_distractors: tuple[int, int] = (0, 2)
    adjacency_gap: int | None = None
    states: tuple[int, int] | None = None
    min_state_frac: float | None = None
    margin_frac: float = 0.02
    gap_ratio: float = 0.02
    gap_cap: int = 100
    position: str = "random"  # random | beginning | middle | end
    blend_cap: int = 25

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        lo, hi = self.needle_frac
        if not 0 < lo <= hi < 1:
            raise ValueError(f"{self.task}: needle fractions must satisfy 0 < lo <= hi < 1")
        for name in ("min_duration_diff_frac", "min_state_frac"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ValueError(f"{self.task}: {name} must lie in (0, 1)")
        if not 0 <= self.margin_frac < 0.5 or not 0 <= self.gap_ratio < 1:
            raise ValueError(f"{self.task}: margin and gap ratios must be fractions")
        for name in ("distractors", "bouts", "states", "opposite_distractors"):
            rng = getattr(self, name)
            if rng is not None and not 0 <= rng[0] <= rng[1]:
                raise ValueError(f"{self.task}: {name} range is empty")
        if self.k_weights is not None and abs(sum(self.k_weights) - 1.0) > 1e-9:
            raise ValueError(f"{self.task}: K weights must sum to 1")
        if self.background not in ("any", "pure", "mixed"):
            raise ValueError(f"{self.task}: unknown background requirement {self.background!r}")
        if self.position not in ("random", "beginning", "middle", "end"):
            raise ValueError(f"{self.task}: unknown position mode {self.position!r}")

    @property
    def answer_kind(self) -> str:
        return ANSWER_KINDS[self.task]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "TaskConfig":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"{self.task}: unknown task config keys {sorted(unknown)}")
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
        return dataclasses.replace(self, **fixed)


DEFAULT_TASK_CONFIGS: dict[str, TaskConfig] = {
    "existence": TaskConfig("existence", (0.02, 0.10), distractors=(1, 3)),
    "localization": TaskConfig("localization", (0.02, 0.10), distractors=(1, 3)),
    "counting": TaskConfig("counting", (0.02, 0.08), bouts=(1, 5)),
    "ordering": TaskConfig("ordering", (0.02, 0.10)),
    "state_query": TaskConfig("state_query", (0.01, 0.05), background="mixed", states=(2, 5), min_state_frac=0.20),
    "antecedent": TaskConfig("antecedent", (0.02, 0.08), adjacency_gap=10),
    "comparison": TaskConfig("comparison", (0.02, 0.08), bouts=(2, 4), min_duration_diff_frac=0.02),
    "multi_hop": TaskConfig("multi_hop", (0.02, 0.06), k_weights=(0.4, 0.4, 0.2)),
    "anomaly_detection": TaskConfig("anomaly_detection", (0.03, 0.15), background="pure", distractors=(1, 3)),
    "anomaly_localization": TaskConfig("anomaly_localization", (0.03, 0.15), background="pure", distractors=(1, 3)),
}


@dataclass(frozen=True)
class TaskSet:
    configs: dict[str, TaskConfig] = field(default_factory=lambda: dict(DEFAULT_TASK_CONFIGS))

    @classmethod
    def from_overrides(cls, overrides: Mapping[str, Mapping[str, Any]] | None) -> "TaskSet":
        configs = dict(DEFAULT_TASK_CONFIGS)
        for task, values in (overrides or {}).items():
            if task not in configs:
                raise ValueError(f"unknown task {task!r} in task overrides")
            configs[task] = configs[task].with_overrides(values)
        return cls(configs)
