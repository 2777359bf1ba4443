"""Run configuration: YAML in, validated dataclass, effective config out."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..ingest import SynthSpec
from ..qa.templates import TASKS
from ..score.rules import ScoringRule
from ..taskgen.config import TaskSet
from ..taskgen.dataset import CONTEXTS_S, SPLIT_COUNTS
from ..validate.detectability import ValidationConfig

SPLITS = ("train", "val", "test")


class ConfigError(ValueError):
    pass


def _synth_fields() -> set[str]:
    return {f.name for f in dataclasses.fields(SynthSpec)} - {"classes"}


@dataclass
class SliceConfig:
    context_s: float = 10.0
    budget: dict[str, int] = field(default_factory=lambda: {"train": 80_000, "val": 15_000, "test": 15_000})
    threshold: float = 0.6
    seed: int = 42


@dataclass
class RunConfig:
    corpus: str | None = None
    synth: dict[str, Any] = field(default_factory=dict)
    label_map: str | None = None
    rate: float | None = None
    seed: int = 0
    contexts: list[float] = field(default_factory=lambda: list(CONTEXTS_S))
    tasks: list[str] = field(default_factory=lambda: list(TASKS))
    task_overrides: dict[str, dict[str, Any]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=lambda: dict(SPLIT_COUNTS))
    split_fractions: list[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    split_seed: int = 0
    rule: str = "iou:0.5"
    out: str = "out"
    jobs: int = 1
    plots: bool = False
    baseline_draws: int = 20_000
    validation: dict[str, Any] = field(default_factory=dict)
    slice: dict[str, Any] = field(default_factory=dict)
    annotate: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        self.check()

    def check(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if not self.contexts or any(not (isinstance(c, (int, float)) and math.isfinite(c) and c > 0) for c in self.contexts):
            raise ConfigError("contexts must be a non-empty list of positive seconds")
        self.contexts = [float(c) for c in self.contexts]
        unknown = set(self.tasks) - set(TASKS)
        if unknown or not self.tasks:
            raise ConfigError(f"unknown or empty task list: {sorted(unknown)}")
        if set(self.counts) != set(SPLITS) or any(not isinstance(v, int) or v < 1 for v in self.counts.values()):
            raise ConfigError("counts must give a positive integer for each of train, val, test")
        if len(self.split_fractions) != 3 or min(self.split_fractions) <= 0 or abs(sum(self.split_fractions) - 1) > 1e-9:
            raise ConfigError("split_fractions must be three positive numbers summing to 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.rate is not None and self.rate <= 0:
            raise ConfigError("rate must be positive")
        bad = set(self.synth) - _synth_fields()
        if bad:
            raise ConfigError(f"unknown synth keys {sorted(bad)}")
        try:
            ScoringRule.parse(self.rule)
            self.task_set()
            self.validation_config()
            self.slice_config()
            if self.corpus is None:
                self.synth_spec()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def task_set(self) -> TaskSet:
        return TaskSet.from_overrides(self.task_overrides)

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(**self.synth)

    def scoring_rule(self) -> ScoringRule:
        return ScoringRule.parse(self.rule)

    def validation_config(self) -> ValidationConfig:
        known = {f.name for f in dataclasses.fields(ValidationConfig)}
        bad = set(self.validation) - known
        if bad:
            raise ConfigError(f"unknown validation keys {sorted(bad)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in self.validation.items()}
        return ValidationConfig(**values)

    def slice_config(self) -> SliceConfig:
        bad = set(self.slice) - {f.name for f in dataclasses.fields(SliceConfig)}
        if bad:
            raise ConfigError(f"unknown slice keys {sorted(bad)}")
        cfg = SliceConfig(**self.slice)
        if cfg.context_s <= 0 or not 0.5 < cfg.threshold <= 1 or set(cfg.budget) != set(SPLITS):
            raise ConfigError("slice needs a positive context, a threshold in (0.5, 1] and a budget per split")
        return cfg

    def split_counts(self, n: int) -> list[int]:
        """Participants per split by largest remainder; each split keeps at least one when possible."""
        raw = [f * n for f in self.split_fractions]
        counts = [int(math.floor(x)) for x in raw]
        for i in sorted(range(3), key=lambda i: counts[i] - raw[i])[: n - sum(counts)]:
            counts[i] += 1
        for i in range(3):
            if counts[i] == 0 and n >= 3:
                counts[i] = 1
                counts[max(range(3), key=lambda j: counts[j])] -= 1
        return counts

    def effective(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        if self.corpus is None:
            spec = self.synth_spec()
            out["synth"] = {k: getattr(spec, k) for k in sorted(_synth_fields())}
        out["validation"] = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self.validation_config()).items()}
        out["slice"] = dataclasses.asdict(self.slice_config())
        out["task_overrides"] = {
            t: {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(c).items()}
            for t, c in self.task_set().configs.items()
            if t in self.tasks
        }
        return out


def config_from_mapping(data: Mapping[str, Any] | None) -> RunConfig:
    data = dict(data or {})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return config_from_mapping(data)


def dump_effective(cfg: RunConfig, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(yaml.safe_dump(cfg.effective(), sort_keys=True))
