"""Accuracy of an answerer that guesses uniformly, per task.

Tasks with a finite answer set have exact values. Time-range tasks are estimated by
Monte-Carlo: gold intervals follow the generator's placement process, guesses are a
uniformly placed interval whose length follows the task's needle-length range.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..insertion import PlacementInfeasible, place_bouts
from ..labels import CLASSES
from ..taskgen.config import DEFAULT_TASK_CONFIGS, TaskConfig
from ..taskgen.generators import _distinct_lengths, _k_from_u, _unique_extremum
from .parse import ParsedAnswer
from .rules import ScoringRule, range_matches

MONTE_CARLO_TASKS = ("localization", "comparison", "multi_hop", "anomaly_localization")


@dataclass(frozen=True)
class BaselineEstimate:
    task: str
    percent: float
    ci_low: float
    ci_high: float
    method: str  # closed-form | monte-carlo
    n: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def closed_form(task: str, cfg: TaskConfig | None = None) -> float | None:
    cfg = cfg or DEFAULT_TASK_CONFIGS[task]
    if task in ("existence", "ordering", "anomaly_detection"):
        return 50.0
    if task == "counting":
        return 100.0 / (cfg.bouts[1] - cfg.bouts[0] + 1)
    if task in ("state_query", "antecedent"):
        return 100.0 / len(CLASSES)
    return None


class _Sim:
    # simulates on a grid of one sample per millisecond
    def __init__(self, cfg: TaskConfig, n: int, rng: np.random.Generator):
        self.cfg, self.n, self.rng = cfg, n, rng
        self.gap = min(int(round(cfg.gap_ratio * n)), cfg.gap_cap)
        self.lo = max(1, math.ceil(cfg.needle_frac[0] * n))
        self.hi = max(1, math.floor(cfg.needle_frac[1] * n))

    def length(self) -> int:
        lo, hi = self.cfg.needle_frac
        return max(1, int(round(self.rng.uniform(lo, hi) * self.n)))

    def layout(self, count: int) -> list[tuple[int, int]]:
        lengths = [self.length() for _ in range(count)]
        starts = place_bouts(lengths, self.n, self.cfg.margin_frac, self.gap, self.rng)
        return [(s, s + m) for s, m in zip(starts, lengths)]

    def guess(self) -> tuple[int, int]:
        m = self.length()
        s = int(self.rng.integers(self.n - m + 1))
        return s, s + m

    def gold(self, task: str) -> tuple[int, int] | None:
        cfg, rng = self.cfg, self.rng
        if task == "localization":
            ivs = self.layout(1 + int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1)))
            return ivs[int(rng.integers(len(ivs)))]
        if task == "anomaly_localization":
            if rng.random() < 0.5:
                return None
            ivs = self.layout(1 + int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1)))
            return ivs[int(rng.integers(len(ivs)))]
        if task == "multi_hop":
            k = _k_from_u(cfg.k_weights, float(rng.random()))
            same = int(rng.integers(k, len(cfg.k_weights) + 1))
            opposite = int(rng.integers(cfg.opposite_distractors[0], cfg.opposite_distractors[1] + 1))
            ivs = self.layout(same + 1 + opposite)
            if rng.random() < 0.5:  # after: opposite side first, then anchor
                return ivs[opposite + k]
            return ivs[same - k]
        if task == "comparison":
            diff = max(1, math.ceil(cfg.min_duration_diff_frac * self.n))
            extremum = ("longest", "shortest")[int(rng.integers(2))]
            without = bool(rng.integers(2))
            k = int(rng.integers(cfg.bouts[0], min(cfg.bouts[1], 1 + (self.hi - self.lo) // diff) + 1))
            for _ in range(1000):
                lengths = _distinct_lengths(self.lo, self.hi, k, diff, rng)
                starts = place_bouts(lengths, self.n, cfg.margin_frac, self.gap, rng)
                ivs = [(s, s + m) for s, m in zip(starts, lengths)]
                if without:
                    edges = [0] + [x for iv in ivs for x in iv] + [self.n]
                    ivs = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
                if _unique_extremum([e - s for s, e in ivs], extremum, diff):
                    pick = max if extremum == "longest" else min
                    return pick(ivs, key=lambda iv: iv[1] - iv[0])
            raise PlacementInfeasible("comparison simulation never produced a unique extremum")
        raise ValueError(f"{task} has a closed-form baseline")


def random_baseline(
    task: str,
    cfg: TaskConfig | None = None,
    n_mc: int = 20_000,
    seed: int = 0,
    rule: ScoringRule = ScoringRule(),
    context_ms: int = 10_000,
) -> BaselineEstimate:
    """``context_ms`` sets the window length; only tolerance rules depend on it."""
    cfg = cfg or DEFAULT_TASK_CONFIGS[task]
    exact = closed_form(task, cfg)
    if exact is not None:
        return BaselineEstimate(task, exact, exact, exact, "closed-form")
    if n_mc < 10_000:
        raise ValueError("Monte-Carlo baselines need at least 10,000 draws")
    rng = np.random.default_rng(seed)
    sim = _Sim(cfg, context_ms, rng)
    hits = 0
    for _ in range(n_mc):
        gold = sim.gold(task)
        if task == "anomaly_localization":
            says_yes = rng.random() < 0.5
            if gold is None:
                hits += not says_yes
                continue
            if not says_yes:
                continue
        guess = sim.guess()
        hits += range_matches(
            ParsedAnswer("time_range", start_ms=guess[0], end_ms=guess[1]),
            ParsedAnswer("time_range", start_ms=gold[0], end_ms=gold[1]),
            rule,
        )
    lo, hi = wilson_interval(hits, n_mc)
    return BaselineEstimate(task, 100.0 * hits / n_mc, 100.0 * lo, 100.0 * hi, "monte-carlo", n_mc)
