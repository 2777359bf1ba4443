"""Classifier test for insertion artifacts.

Negatives are untouched single-activity windows; positives are single-activity
windows carrying one same-activity needle from another participant. A detector
scoring near AUC 0.5 means the insertion leaves no learnable trace. The raw
control disables mean alignment and blending to show the detector has power.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from ..boutindex import BoutIndex, NeedleUnavailable, index_corpus, sample_needle
from ..ingest import Recording
from ..insertion import BlendSpec, default_blend_window, insert_needle, place_bouts
from .gbdt import fit_ensemble

log = logging.getLogger(__name__)


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based (Mann-Whitney) ROC AUC; tied scores count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


@dataclass
class DetectabilitySet:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    context_len: int
    needle_frac_range: tuple[float, float]
    meta_train: list[dict] = field(default_factory=list)
    meta_test: list[dict] = field(default_factory=list)


def _eligible_classes(index: BoutIndex, context_len: int, needle_min: int) -> list[str]:
    out = []
    for cls in index.classes():
        hosts = {b.participant_id for b in index.at_least(cls, context_len)}
        donors = {b.participant_id for b in index.at_least(cls, needle_min)}
        if any(d != h for h in hosts for d in donors):
            out.append(cls)
    return out


def _draw(
    n: int,
    recordings: dict[str, Recording],
    index: BoutIndex,
    classes: list[str],
    context_len: int,
    frac_range: tuple[float, float],
    rng: np.random.Generator,
    align: bool,
    blend: bool,
    blend_cap: int,
) -> tuple[np.ndarray, np.ndarray, list[dict]]:
    X = np.empty((n, 3 * context_len))
    y = np.zeros(n, dtype=np.int64)
    y[: n // 2] = 1
    meta = []
    for i in range(n):
        for _attempt in range(100):
            cls = classes[int(rng.integers(len(classes)))]
            window, host = sample_needle(index, cls, context_len, rng, recordings)
            if not y[i]:
                X[i] = window.ravel()
                meta.append({"label": 0, "activity": cls, "host": host.participant_id})
                break
            length = max(1, int(round(rng.uniform(*frac_range) * context_len)))
            try:
                needle, src = sample_needle(
                    index, cls, length, rng, recordings, exclude_participant=host.participant_id
                )
            except NeedleUnavailable:
                continue
            (pos,) = place_bouts([length], context_len, 0.02, 0, rng)
            w = default_blend_window(length, blend_cap) if blend else 0
            series, rec = insert_needle(window, needle, BlendSpec(w, pos, length), cls, src.participant_id, align=align)
            X[i] = series.ravel()
            meta.append(
                {"label": 1, "activity": cls, "host": host.participant_id, "donor": src.participant_id,
                 "start": rec.start, "end": rec.end, "frac": length / context_len}
            )
            break
        else:
            raise NeedleUnavailable("insufficient cross-participant material for detectability set")
    order = rng.permutation(n)
    return X[order], y[order], [meta[j] for j in order]


def build_detectability_set(
    corpus: Sequence[Recording],
    context_len: int,
    n_train: int = 5000,
    n_test: int = 500,
    needle_frac_range: tuple[float, float] = (0.02, 0.08),
    seed: int = 0,
    align: bool = True,
    blend: bool = True,
    blend_cap: int = 25,
    index: BoutIndex | None = None,
) -> DetectabilitySet:
    if n_train % 2 or n_test % 2:
        raise ValueError("split sizes must be even for exact class balance")
    recordings = {r.participant_id: r for r in corpus}
    index = index or index_corpus(corpus)
    needle_min = max(1, int(round(needle_frac_range[0] * context_len)))
    classes = _eligible_classes(index, context_len, needle_min)
    if not classes:
        raise NeedleUnavailable("insufficient cross-participant material for detectability set")
    rng = np.random.default_rng(seed)
    args = (recordings, index, classes, context_len, needle_frac_range)
    Xtr, ytr, mtr = _draw(n_train, *args, rng, align, blend, blend_cap)
    Xte, yte, mte = _draw(n_test, *args, rng, align, blend, blend_cap)
    return DetectabilitySet(Xtr, ytr, Xte, yte, context_len, needle_frac_range, mtr, mte)


@dataclass
class ValidationConfig:
    contexts_s: tuple[float, ...] = (2.0, 3.0)
    n_train: int = 5000
    n_test: int = 500
    needle_frac_range: tuple[float, float] = (0.02, 0.08)
    trees: int = 100
    depth: int = 6
    learning_rate: float = 0.1
    blend_cap: int = 25
    seed: int = 0
    blend_caps_sweep: tuple[int, ...] = ()


def _score_set(ds: DetectabilitySet, cfg: ValidationConfig) -> float:
    model = fit_ensemble(ds.X_train, ds.y_train, cfg.trees, cfg.depth, cfg.learning_rate)
    return auc(model.decision_function(ds.X_test), ds.y_test)


def run_validation(corpus: Sequence[Recording], cfg: ValidationConfig = ValidationConfig()) -> list[dict]:
    """Blended-insertion AUC and raw-insertion control AUC per context length."""
    rates = {r.rate for r in corpus}
    if len(rates) != 1:
        raise ValueError(f"corpus mixes sampling rates {sorted(rates)}")
    rate = rates.pop()
    index = index_corpus(corpus)
    rows = []
    for ctx_s in cfg.contexts_s:
        ctx = int(round(ctx_s * rate))
        t0 = time.perf_counter()
        common = dict(n_train=cfg.n_train, n_test=cfg.n_test, needle_frac_range=cfg.needle_frac_range,
                      seed=cfg.seed, blend_cap=cfg.blend_cap, index=index)
        blended = _score_set(build_detectability_set(corpus, ctx, **common), cfg)
        raw = _score_set(build_detectability_set(corpus, ctx, align=False, blend=False, **common), cfg)
        row = {
            "context_s": ctx_s,
            "auc_blended": blended,
            "auc_raw_control": raw,
            "n_train": cfg.n_train,
            "n_test": cfg.n_test,
            "seed": cfg.seed,
        }
        if cfg.blend_caps_sweep:
            row["auc_by_blend_cap"] = {
                str(cap): _score_set(build_detectability_set(corpus, ctx, **{**common, "blend_cap": cap}), cfg)
                for cap in cfg.blend_caps_sweep
            }
        log.info("context %.2fs: blended AUC %.3f, raw AUC %.3f (%.1fs)", ctx_s, blended, raw, time.perf_counter() - t0)
        rows.append(row)
    return rows
