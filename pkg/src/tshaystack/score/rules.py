"""Correctness rules for each answer kind."""

from __future__ import annotations

from dataclasses import dataclass

from ..qa.clock import MS_PER_DAY
from .parse import ParsedAnswer


class KindMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ScoringRule:
    """Time-range matching: interval IoU at least ``iou``, or both endpoints within ``tolerance_s``."""

    mode: str = "iou"  # iou | tolerance
    iou: float = 0.5
    tolerance_s: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("iou", "tolerance"):
            raise ValueError(f"unknown scoring rule {self.mode!r}")
        if not 0 < self.iou <= 1:
            raise ValueError("IoU threshold must lie in (0, 1]")
        if self.tolerance_s < 0:
            raise ValueError("tolerance must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "ScoringRule":
        """``iou``, ``iou:0.3``, ``tolerance:2`` or ``tol:2``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        try:
            if name == "iou":
                return cls("iou", float(arg) if arg else 0.5)
            if name in ("tolerance", "tol"):
                return cls("tolerance", tolerance_s=float(arg) if arg else 1.0)
        except ValueError as exc:
            raise ValueError(f"bad scoring rule {text!r}: {exc}") from None
        raise ValueError(f"unknown scoring rule {text!r}")

    def __str__(self) -> str:
        return f"iou:{self.iou:g}" if self.mode == "iou" else f"tolerance:{self.tolerance_s:g}"


def _unwrap(start: int, end: int) -> tuple[int, int]:
    return (start, end) if end >= start else (start, end + MS_PER_DAY)


def interval_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else float(a == b)


def range_matches(pred: ParsedAnswer, gold: ParsedAnswer, rule: ScoringRule) -> bool:
    g = _unwrap(gold.start_ms, gold.end_ms)
    p = _unwrap(pred.start_ms, pred.end_ms)
    # place the prediction on the day closest to the gold interval
    shift = round((g[0] - p[0]) / MS_PER_DAY) * MS_PER_DAY
    p = (p[0] + shift, p[1] + shift)
    if rule.mode == "iou":
        return interval_iou(p, g) >= rule.iou
    tol = rule.tolerance_s * 1000.0
    return abs(p[0] - g[0]) <= tol and abs(p[1] - g[1]) <= tol


def _norm(text: str) -> str:
    return " ".join(str(text).lower().strip().rstrip(".").split())


def score_sample(pred: ParsedAnswer, gold: ParsedAnswer, rule: ScoringRule = ScoringRule()) -> bool:
    if pred.kind != gold.kind:
        raise KindMismatch(f"prediction is {pred.kind}, gold is {gold.kind}")
    kind = gold.kind
    if kind == "boolean":
        return bool(pred.value) == bool(gold.value)
    if kind == "integer":
        return int(pred.value) == int(gold.value)
    if kind == "category":
        return _norm(pred.value) == _norm(gold.value)
    if kind == "time_range":
        return range_matches(pred, gold, rule)
    if bool(pred.value) != bool(gold.value):
        return False
    if not gold.value:
        return True
    if pred.category is not None and gold.category is not None and _norm(pred.category) != _norm(gold.category):
        return False
    if gold.has_range:
        return pred.has_range and range_matches(pred, gold, rule)
    return True
