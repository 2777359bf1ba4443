"""The ten task generators.

Each generator draws a background, inserts needles, fills a question template and
builds the gold answer from its own bookkeeping. Anything that cannot be satisfied
by the current background raises, and :func:`_with_retries` draws a new one.

``u`` is an optional stratification variable in [0, 1). Dataset generation passes a
per-cell permuted value so balanced quantities (yes/no, counts, K) hit their target
proportions exactly within each cell; direct calls draw it from ``rng``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..boutindex import NeedleUnavailable, sample_needle
from ..insertion import (
    InsertionRecord,
    PlacementInfeasible,
    _composition,
    blend_profile,
    default_blend_window,
    place_bouts,
)
from ..labels import CLASS_INDEX, CLASSES, other_regime, regime_members
from ..qa.templates import ORDINALS, builtin_pack, instantiate_template
from . import answers
from .config import DEFAULT_TASK_CONFIGS, TaskConfig
from .context import Background, GenContext, Resample
from .sample import HaystackSample, build_timeline, index_to_ms

MAX_ATTEMPTS = 50

Generator = Callable[..., HaystackSample]


def _with_retries(build: Callable[[np.random.Generator], HaystackSample], rng: np.random.Generator, task: str):
    last: Exception | None = None
    for _ in range(MAX_ATTEMPTS):
        try:
            return build(rng)
        except (NeedleUnavailable, PlacementInfeasible, Resample) as exc:
            last = exc
    raise type(last)(f"{task}: gave up after {MAX_ATTEMPTS} backgrounds; last error: {last}") from last


def _u(rng: np.random.Generator, u: float | None) -> float:
    return float(rng.random()) if u is None else float(u)


def _pick(rng: np.random.Generator, items, k: int = 1) -> list:
    items = list(items)
    if len(items) < k:
        raise Resample(f"need {k} candidates, have {len(items)}")
    return [items[i] for i in rng.choice(len(items), size=k, replace=False)]


def _free_classes(ctx: GenContext, bg: Background, pool=CLASSES) -> list[str]:
    # classes absent from the background window and present in the bout index
    present = bg.classes
    return [c for c in CLASSES if c in pool and c not in present and c in ctx.index]


def _lengths(ctx: GenContext, cfg: TaskConfig, rng: np.random.Generator, n: int) -> list[int]:
    return [ctx.needle_length(cfg, rng) for _ in range(n)]


def _layout(
    ctx: GenContext,
    bg: Background,
    cfg: TaskConfig,
    rng: np.random.Generator,
    items: list[tuple[str, int]],
) -> list[InsertionRecord]:
    """Place ``(activity, length)`` items left to right and insert them."""
    starts = place_bouts([n for _, n in items], ctx.length, cfg.margin_frac, ctx.min_gap(cfg), rng, cfg.position)
    return [ctx.insert(bg, act, s, n, cfg, rng) for (act, n), s in zip(items, starts)]


def _question(task: str, rng: np.random.Generator, slots: dict) -> tuple[str, int]:
    pack = builtin_pack(task)
    tpl = pack[int(rng.integers(len(pack)))]
    return instantiate_template(tpl, slots), tpl.template_id


def _clock_range(ctx: GenContext, bg: Background, start: int, end: int) -> dict:
    return answers.time_range(bg.start_clock + index_to_ms(start, ctx.rate), bg.start_clock + index_to_ms(end, ctx.rate))


def _finish(
    ctx: GenContext,
    task: str,
    bg: Background,
    needles: list[InsertionRecord],
    rng: np.random.Generator,
    slots: dict,
    query: dict,
    gold: dict,
    regime: str | None = None,
) -> HaystackSample:
    question, tid = _question(task, rng, slots)
    needles = sorted(needles, key=lambda r: r.start)
    return HaystackSample(
        id="",
        task=task,
        context_s=ctx.context_s,
        rate=ctx.rate,
        series=bg.series,
        timeline=build_timeline(bg.codes, needles),
        question=question,
        gold=gold,
        answer_text=answers.render_answer(gold, regime),
        template_id=tid,
        query=query,
        participant=bg.participant,
        start_clock_ms=bg.start_clock,
        needles=needles,
    )


def _cfg(task: str, cfg: TaskConfig | None) -> TaskConfig:
    cfg = cfg or DEFAULT_TASK_CONFIGS[task]
    if cfg.task != task:
        raise ValueError(f"config for {cfg.task!r} passed to the {task} generator")
    return cfg


# -- tasks 1 and 2 ------------------------------------------------------------
def _regime_with_free(ctx: GenContext, bg: Background, rng: np.random.Generator, need: int) -> tuple[str, list[str]]:
    options = []
    for regime in ("sedentary", "active"):
        free = _free_classes(ctx, bg, regime_members(regime))
        if len(free) >= need:
            options.append((regime, free))
    if not options:
        raise Resample("no regime has enough classes absent from the background")
    return options[int(rng.integers(len(options)))]


def gen_existence(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("existence", cfg)
    rng = rng if rng is not None else np.random.default_rng()
    positive = _u(rng, u) < 0.5

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        regime, free = _regime_with_free(ctx, bg, rng, 2)
        n_dis = int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1))
        n_dis = max(cfg.distractors[0], min(n_dis, len(free) - 1))
        chosen = _pick(rng, free, n_dis + 1)
        query, distractors = chosen[0], chosen[1:]
        acts = distractors + ([query] if positive else [])
        rng.shuffle(acts)
        needles = _layout(ctx, bg, cfg, rng, list(zip(acts, _lengths(ctx, cfg, rng, len(acts)))))
        return _finish(ctx, "existence", bg, needles, rng, {"activity": query}, {"activity": query, "regime": regime}, answers.boolean(positive))

    return _with_retries(build, rng, "existence")


def gen_localization(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("localization", cfg)
    rng = rng if rng is not None else np.random.default_rng()

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        regime, free = _regime_with_free(ctx, bg, rng, 2)
        n_dis = int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1))
        n_dis = max(cfg.distractors[0], min(n_dis, len(free) - 1))
        chosen = _pick(rng, free, n_dis + 1)
        target = chosen[0]
        acts = list(chosen)
        rng.shuffle(acts)
        needles = _layout(ctx, bg, cfg, rng, list(zip(acts, _lengths(ctx, cfg, rng, len(acts)))))
        hit = next(r for r in needles if r.activity == target)
        gold = _clock_range(ctx, bg, hit.start, hit.end)
        return _finish(ctx, "localization", bg, needles, rng, {"activity": target}, {"activity": target, "regime": regime}, gold)

    return _with_retries(build, rng, "localization")


# -- tasks 3 and 4 ------------------------------------------------------------
def gen_counting(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("counting", cfg)
    rng = rng if rng is not None else np.random.default_rng()
    lo, hi = cfg.bouts
    count = lo + min(int(_u(rng, u) * (hi - lo + 1)), hi - lo)

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        (target,) = _pick(rng, _free_classes(ctx, bg))
        needles = _layout(ctx, bg, cfg, rng, [(target, n) for n in _lengths(ctx, cfg, rng, count)])
        return _finish(ctx, "counting", bg, needles, rng, {"activity": target}, {"activity": target}, answers.integer(count))

    return _with_retries(build, rng, "counting")


def gen_ordering(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("ordering", cfg)
    rng = rng if rng is not None else np.random.default_rng()
    a_first = _u(rng, u) < 0.5

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        a, b = _pick(rng, _free_classes(ctx, bg), 2)
        order = [a, b] if a_first else [b, a]
        needles = _layout(ctx, bg, cfg, rng, list(zip(order, _lengths(ctx, cfg, rng, 2))))
        slots = {"activity_a": a, "activity_b": b}
        return _finish(ctx, "ordering", bg, needles, rng, slots, dict(slots), answers.boolean(a_first))

    return _with_retries(build, rng, "ordering")


# -- task 5 -------------------------------------------------------------------
def _natural_states(bg: Background, cfg: TaskConfig, n: int) -> list[tuple[str, int, int]] | None:
    codes = bg.codes
    change = np.flatnonzero(codes[1:] != codes[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n]))
    lo, hi = cfg.states
    min_len = math.ceil(cfg.min_state_frac * n)
    if not lo <= len(starts) <= hi or codes.min() < 0 or (ends - starts).min() < min_len:
        return None
    return [(CLASSES[codes[s]], int(s), int(e)) for s, e in zip(starts, ends)]


def _synth_states(ctx: GenContext, bg: Background, cfg: TaskConfig, rng: np.random.Generator) -> list[tuple[str, int, int]]:
    """Replace ``bg`` by concatenated same-participant bout crops, cosine-crossfaded at the joins."""
    n = ctx.length
    min_len = math.ceil(cfg.min_state_frac * n)
    hi = min(cfg.states[1], n // min_len)
    if hi < cfg.states[0]:
        raise PlacementInfeasible(f"{cfg.states[0]} states of >= {min_len} samples do not fit {n}")
    k = int(rng.integers(cfg.states[0], hi + 1))
    lengths = [min_len + int(x) for x in _composition(n - k * min_len, k, rng)]
    join = default_blend_window(min_len, cfg.blend_cap)
    own = frozenset({bg.participant})
    acts: list[str] = []
    pieces = []
    for j, length in enumerate(lengths):
        need = length + (join if j < k - 1 else 0)
        options = [c for c in CLASSES if c != (acts[-1] if acts else None) and ctx.index.at_least(c, need)]
        options = [c for c in options if any(b.participant_id == bg.participant for b in ctx.index.at_least(c, need))]
        (act,) = _pick(rng, options)
        crop, _ = sample_needle(ctx.index, act, need, rng, ctx.recordings, participants=own)
        acts.append(act)
        pieces.append(np.asarray(crop, dtype=np.float64))
    series = np.empty((3, n))
    codes = np.empty(n, dtype=np.int16)
    states = []
    pos = 0
    for j, (act, length, piece) in enumerate(zip(acts, lengths, pieces)):
        series[:, pos : pos + length] = piece[:, :length]
        if j > 0 and join > 0:
            # previous crop carries ``join`` extra samples that fade out under this one
            tail = pieces[j - 1][:, lengths[j - 1] : lengths[j - 1] + join]
            alpha = blend_profile(2 * join, join)[:join]
            series[:, pos : pos + join] = (1.0 - alpha) * tail + alpha * piece[:, :join]
        codes[pos : pos + length] = CLASS_INDEX[act]
        states.append((act, pos, pos + length))
        pos += length
    bg.series = series
    bg.codes = codes
    return states


def gen_state_query(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("state_query", cfg)
    rng = rng if rng is not None else np.random.default_rng()

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        states = _natural_states(bg, cfg, ctx.length) or _synth_states(ctx, bg, cfg, rng)
        state, rs, re_ = states[int(rng.integers(len(states)))]
        used = {s for s, _, _ in states}
        (event,) = _pick(rng, [c for c in CLASSES if c not in used and c in ctx.index])
        length = ctx.needle_length(cfg, rng)
        pad = max(1, ctx.min_gap(cfg))
        room = (re_ - pad) - (rs + pad) - length
        if room < 0:
            raise PlacementInfeasible(f"needle of {length} does not fit strictly inside a {re_ - rs}-sample state")
        start = rs + pad + int(rng.integers(room + 1))
        needles = [ctx.insert(bg, event, start, length, cfg, rng)]
        query = {"event": event, "states": [s for s, _, _ in states]}
        return _finish(ctx, "state_query", bg, needles, rng, {"event": event}, query, answers.category(state))

    return _with_retries(build, rng, "state_query")


# -- task 6 -------------------------------------------------------------------
def gen_antecedent(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("antecedent", cfg)
    rng = rng if rng is not None else np.random.default_rng()

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        ante, target = _pick(rng, _free_classes(ctx, bg), 2)
        la, lt = _lengths(ctx, cfg, rng, 2)
        gap = cfg.adjacency_gap
        (start,) = place_bouts([la + gap + lt], ctx.length, cfg.margin_frac, 0, rng, cfg.position)
        needles = [ctx.insert(bg, ante, start, la, cfg, rng), ctx.insert(bg, target, start + la + gap, lt, cfg, rng)]
        query = {"target": target, "antecedent": ante}
        return _finish(ctx, "antecedent", bg, needles, rng, {"target": target}, query, answers.category(ante))

    return _with_retries(build, rng, "antecedent")


# -- task 7 -------------------------------------------------------------------
def _distinct_lengths(lo: int, hi: int, k: int, diff: int, rng: np.random.Generator) -> list[int]:
    """``k`` lengths in [lo, hi], pairwise at least ``diff`` apart, uniform over such sets; shuffled."""
    slack = hi - lo - (k - 1) * diff
    if slack < 0:
        raise PlacementInfeasible(f"{k} lengths {diff} apart do not fit [{lo}, {hi}]")
    offsets = np.sort(rng.integers(0, slack + 1, size=k))
    values = [lo + int(o) + i * diff for i, o in enumerate(offsets)]
    rng.shuffle(values)
    return values


def _unique_extremum(spans: list[int], pick: str, diff: int) -> bool:
    ordered = sorted(spans, reverse=pick == "longest")
    return len(ordered) == 1 or abs(ordered[0] - ordered[1]) >= diff


def gen_comparison(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("comparison", cfg)
    rng = rng if rng is not None else np.random.default_rng()
    variant = min(int(_u(rng, u) * 4), 3)
    extremum = ("longest", "shortest")[variant // 2]
    polarity = ("with", "without")[variant % 2]
    diff = max(1, math.ceil(cfg.min_duration_diff_frac * ctx.length))

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        (act,) = _pick(rng, _free_classes(ctx, bg))
        lo, hi = ctx.needle_bounds(cfg)
        k_hi = min(cfg.bouts[1], 1 + (hi - lo) // diff)
        if k_hi < cfg.bouts[0]:
            raise PlacementInfeasible(f"no room for {cfg.bouts[0]} lengths {diff} apart in [{lo}, {hi}]")
        k = int(rng.integers(cfg.bouts[0], k_hi + 1))
        lengths = _distinct_lengths(lo, hi, k, diff, rng)
        starts = place_bouts(lengths, ctx.length, cfg.margin_frac, ctx.min_gap(cfg), rng, cfg.position)
        ivs = [(s, s + n) for s, n in zip(starts, lengths)]
        if polarity == "without":
            edges = [0] + [x for iv in ivs for x in iv] + [ctx.length]
            ivs = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
        if not _unique_extremum([e - s for s, e in ivs], extremum, diff):
            raise Resample("extremum gap is not unique by the required margin")
        pick = max if extremum == "longest" else min
        s, e = pick(ivs, key=lambda iv: iv[1] - iv[0])
        needles = [ctx.insert(bg, act, st, n, cfg, rng) for st, n in zip(starts, lengths)]
        slots = {"extremum": extremum, "polarity": polarity, "activity": act}
        return _finish(ctx, "comparison", bg, needles, rng, slots, dict(slots), _clock_range(ctx, bg, s, e))

    return _with_retries(build, rng, "comparison")


# -- task 8 -------------------------------------------------------------------
def _k_from_u(weights: tuple[float, ...], u: float) -> int:
    return min(int(np.searchsorted(np.cumsum(weights), u, side="right")) + 1, len(weights))


def gen_multihop(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    cfg = _cfg("multi_hop", cfg)
    rng = rng if rng is not None else np.random.default_rng()
    k = _k_from_u(cfg.k_weights, _u(rng, u))
    k_max = len(cfg.k_weights)

    def build(rng: np.random.Generator) -> HaystackSample:
        bg = ctx.any_background(rng)
        target, anchor = _pick(rng, _free_classes(ctx, bg), 2)
        direction = ("before", "after")[int(rng.integers(2))]
        same = int(rng.integers(k, k_max + 1))
        opposite = int(rng.integers(cfg.opposite_distractors[0], cfg.opposite_distractors[1] + 1))
        near = [target] * same
        far = [target] * opposite
        order = far + [anchor] + near if direction == "after" else near + [anchor] + far
        needles = _layout(ctx, bg, cfg, rng, list(zip(order, _lengths(ctx, cfg, rng, len(order)))))
        a = order.index(anchor)
        hit = needles[a + k] if direction == "after" else needles[a - k]
        slots = {"K": ORDINALS[k], "target": target, "direction": direction, "anchor": anchor}
        query = {"K": k, "target": target, "direction": direction, "anchor": anchor}
        return _finish(ctx, "multi_hop", bg, needles, rng, slots, query, _clock_range(ctx, bg, hit.start, hit.end))

    return _with_retries(build, rng, "multi_hop")


# -- tasks 9 and 10 -----------------------------------------------------------
def _anomaly(task: str, ctx: GenContext, cfg: TaskConfig, rng: np.random.Generator, positive: bool) -> HaystackSample:
    def build(rng: np.random.Generator) -> HaystackSample:
        regime = ("sedentary", "active")[int(rng.integers(2))]
        bg, regime = ctx.pure_background(rng, regime)
        pool = _free_classes(ctx, bg, regime_members(regime))
        if not pool:
            raise Resample(f"every {regime} class already occurs in the background")
        n_dis = int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1))
        acts = [pool[int(i)] for i in rng.integers(len(pool), size=n_dis)]
        odd = None
        if positive:
            (odd,) = _pick(rng, [c for c in CLASSES if c in regime_members(other_regime(regime)) and c in ctx.index])
            acts.append(odd)
        rng.shuffle(acts)
        needles = _layout(ctx, bg, cfg, rng, list(zip(acts, _lengths(ctx, cfg, rng, len(acts)))))
        if not positive:
            gold = answers.compound(False)
        elif task == "anomaly_detection":
            gold = answers.compound(True, odd)
        else:
            hit = next(r for r in needles if r.activity == odd)
            span = _clock_range(ctx, bg, hit.start, hit.end)
            gold = answers.compound(True, odd, (span["start_ms"], span["end_ms"]))
        return _finish(ctx, task, bg, needles, rng, {}, {"regime": regime}, gold, regime)

    return _with_retries(build, rng, task)


def gen_anomaly_detection(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    rng = rng if rng is not None else np.random.default_rng()
    return _anomaly("anomaly_detection", ctx, _cfg("anomaly_detection", cfg), rng, _u(rng, u) < 0.5)


def gen_anomaly_localization(ctx: GenContext, cfg: TaskConfig | None = None, rng: np.random.Generator | None = None, u: float | None = None) -> HaystackSample:
    rng = rng if rng is not None else np.random.default_rng()
    return _anomaly("anomaly_localization", ctx, _cfg("anomaly_localization", cfg), rng, _u(rng, u) < 0.5)


GENERATORS: dict[str, Generator] = {
    "existence": gen_existence,
    "localization": gen_localization,
    "counting": gen_counting,
    "ordering": gen_ordering,
    "state_query": gen_state_query,
    "antecedent": gen_antecedent,
    "comparison": gen_comparison,
    "multi_hop": gen_multihop,
    "anomaly_detection": gen_anomaly_detection,
    "anomaly_localization": gen_anomaly_localization,
}
