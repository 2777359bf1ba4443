"""Needle insertion: per-channel mean alignment, cosine-blended overwrite, and bout placement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PlacementInfeasible(ValueError):
    """The requested intervals, gaps and margins do not fit the background."""


@dataclass(frozen=True)
class BlendSpec:
    window: int  # samples blended at each edge, inside the replaced span
    position: int
    length: int

    def check(self, background_length: int) -> None:
        if self.length < 1:
            raise ValueError("needle length must be >= 1")
        if not 0 <= self.window <= self.length / 2:
            raise ValueError(f"blend window {self.window} must lie in [0, {self.length / 2}]")
        if self.position < 0 or self.position + self.length > background_length:
            raise ValueError(
                f"needle [{self.position}, {self.position + self.length}) exceeds background of {background_length}"
            )


@dataclass(frozen=True)
class InsertionRecord:
    activity: str
    start: int
    end: int
    source_participant: str
    inserted: bool = True


def default_blend_window(needle_length: int, cap: int = 25) -> int:
    return min(cap, needle_length // 4)


def mean_align(needle: np.ndarray, target_window: np.ndarray) -> np.ndarray:
    """Shift each channel of ``needle`` so its mean equals that of ``target_window``."""
    needle = np.asarray(needle, dtype=np.float64)
    target_window = np.asarray(target_window, dtype=np.float64)
    if needle.size == 0 or target_window.size == 0:
        raise ValueError("mean_align needs non-empty inputs")
    shift = target_window.mean(axis=-1, keepdims=True) - needle.mean(axis=-1, keepdims=True)
    return needle + shift


def _cospi(x: float) -> float:
    # cos(pi*x) for x in [0, 1], exact at 0, 1/2 and 1
    if x <= 0.25:
        return math.cos(math.pi * x)
    if x < 0.75:
        return math.sin(math.pi * (0.5 - x))
    return -math.cos(math.pi * (1.0 - x))


def blend_weight(t: float, w: float) -> float:
    """Needle weight at offset ``t`` into a blend window of ``w`` samples: 0 at t=0, 1 at t=w."""
    if w < 1:
        raise ValueError("blend window must be >= 1 sample")
    if not 0 <= t <= w:
        raise ValueError(f"offset {t} outside blend window [0, {w}]")
    return 0.5 * (1.0 - _cospi(t / w))


def blend_profile(length: int, window: int) -> np.ndarray:
    """Needle weights across a replaced span: rising edge, flat interior at 1, mirrored falling edge."""
    alpha = np.ones(length)
    if window > 0:
        ramp = np.array([blend_weight(t, window) for t in range(window)])
        alpha[:window] = ramp
        alpha[length - window :] = ramp[::-1]
    return alpha


def insert_needle(
    background: np.ndarray,
    needle: np.ndarray,
    spec: BlendSpec,
    activity: str = "",
    source_participant: str = "",
    align: bool = True,
) -> tuple[np.ndarray, InsertionRecord]:
    """Overwrite ``background[:, pos:pos+len]`` with the (aligned) needle, cosine-blended at both edges.

    The output has the same length as ``background``; samples outside the span are untouched.
    """
    background = np.asarray(background, dtype=np.float64)
    needle = np.asarray(needle, dtype=np.float64)
    if needle.shape[-1] != spec.length:
        raise ValueError(f"needle has {needle.shape[-1]} samples, spec says {spec.length}")
    spec.check(background.shape[-1])
    out = background.copy()
    _blend_into(out, needle, spec, align)
    return out, InsertionRecord(activity, spec.position, spec.position + spec.length, source_participant)


def _blend_into(series: np.ndarray, needle: np.ndarray, spec: BlendSpec, align: bool = True) -> None:
    # in-place variant of insert_needle; caller has validated spec
    lo, hi = spec.position, spec.position + spec.length
    target = series[:, lo:hi]
    piece = mean_align(needle, target) if align else np.asarray(needle, dtype=np.float64)
    if spec.window == 0:
        series[:, lo:hi] = piece
    else:
        alpha = blend_profile(spec.length, spec.window)
        series[:, lo:hi] = (1.0 - alpha) * target + alpha * piece


def _composition(total: int, parts: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random vector of ``parts`` non-negative ints summing to ``total`` (stars and bars)."""
    if parts == 1:
        return np.array([total])
    bars = np.sort(rng.choice(total + parts - 1, size=parts - 1, replace=False))
    edges = np.concatenate(([-1], bars, [total + parts - 1]))
    return np.diff(edges) - 1


def place_bouts(
    lengths: Sequence[int],
    bg_length: int,
    margin_frac: float,
    min_gap: int,
    rng: np.random.Generator,
    position: str = "random",
) -> list[int]:
    """Start indices for intervals laid out left to right in the given order.

    Every interval keeps ``ceil(margin_frac * bg_length)`` samples from both edges and
    ``min_gap`` samples from its neighbours. With ``position="random"`` the layout is
    drawn uniformly from all feasible layouts; ``beginning``/``middle``/``end`` confine
    the leading slack to the first/middle/last third of its range.
    """
    lengths = [int(x) for x in lengths]
    n = len(lengths)
    if n == 0:
        return []
    if min(lengths) < 1:
        raise ValueError("interval lengths must be >= 1")
    margin = math.ceil(margin_frac * bg_length)
    slack = bg_length - 2 * margin - sum(lengths) - (n - 1) * min_gap
    if slack < 0:
        raise PlacementInfeasible(
            f"placement infeasible: {n} intervals totalling {sum(lengths)} samples with gap {min_gap} "
            f"and margin {margin} exceed background of {bg_length}"
        )
    if position == "random":
        extra = _composition(slack, n + 1, rng)
    else:
        thirds = {"beginning": (0, 1), "middle": (1, 2), "end": (2, 3)}
        if position not in thirds:
            raise ValueError(f"unknown needle position mode {position!r}")
        a, b = thirds[position]
        lo, hi = (slack * a) // 3, (slack * b) // 3
        lead = int(rng.integers(lo, hi + 1))
        extra = np.concatenate(([lead], _composition(slack - lead, n, rng)))
    starts = []
    cursor = margin
    for i, length in enumerate(lengths):
        cursor += int(extra[i])
        starts.append(cursor)
        cursor += length + min_gap
    return starts


def min_gap_samples(context_len: int, ratio: float = 0.02, cap: int = 100) -> int:
    return min(int(round(ratio * context_len)), cap)
