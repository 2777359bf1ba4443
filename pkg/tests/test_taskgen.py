from __future__ import annotations

import math
from collections import Counter

import numpy as np
import pytest

from tshaystack.boutindex import NeedleUnavailable
from tshaystack.labels import CLASSES, regime_of
from tshaystack.qa.templates import TASKS
from tshaystack.taskgen.answers import recompute_gold
from tshaystack.taskgen.config import DEFAULT_TASK_CONFIGS, TaskConfig, TaskSet
from tshaystack.taskgen.dataset import CONTEXTS_S, Generation, SampleKey, plan_cells, stratum
from tshaystack.taskgen.generators import (
    GENERATORS,
    _distinct_lengths,
    _k_from_u,
    gen_antecedent,
    gen_comparison,
    gen_existence,
    gen_localization,
    gen_state_query,
)

EXCLUSIVE = ("existence", "localization", "counting", "ordering", "antecedent", "comparison", "multi_hop")


def _samples(generation, task, n=40, ctx=10.0):
    return [generation.sample(SampleKey(task, ctx, "train", i)) for i in range(n)]


def _background_classes(sample):
    return {s.activity for s in sample.timeline if not s.inserted}


def test_plan_size_and_order():
    keys = plan_cells()
    assert len(keys) == 78_000
    assert len({k.id for k in keys}) == 78_000
    assert Counter(k.split for k in keys) == {"train": 60_000, "val": 9_000, "test": 9_000}
    assert keys[0] == SampleKey("existence", 2.56, "train", 0)
    assert {k.context_s for k in keys} == set(CONTEXTS_S)
    with pytest.raises(ValueError):
        plan_cells(["bogus"])


def test_strata_are_a_permutation_of_the_cell():
    counts = {"train": 20, "val": 5, "test": 5}
    us = sorted(stratum(3, SampleKey("counting", 10.0, s, i), counts) for s, n in counts.items() for i in range(n))
    assert us == [(i + 0.5) / 30 for i in range(30)]


def test_desk_cells_exactly_balanced(corpus, splits):
    counts = {"train": 20, "val": 5, "test": 5}
    gen = Generation(corpus, splits, master_seed=8, counts=counts)
    keys = [SampleKey("existence", 10.0, s, i) for s, n in counts.items() for i in range(n)]
    assert sum(gen.sample(k).gold["value"] for k in keys) == 15


@pytest.mark.parametrize("task", TASKS)
@pytest.mark.parametrize("ctx", [2.56, 10.0, 100.0])
def test_gold_matches_independent_recomputation(generation, task, ctx):
    for sample in _samples(generation, task, 15, ctx):
        rec = sample.to_record()
        assert recompute_gold(rec) == sample.gold
        assert sample.series.shape == (3, round(ctx * 50))
        assert np.isfinite(sample.series).all()


@pytest.mark.parametrize("task", ["existence", "ordering", "anomaly_detection", "anomaly_localization"])
def test_yes_no_balance_in_cell(generation, task):
    # stratified: exactly half within a full cell
    values = [generation.sample(SampleKey(task, 2.56, "train", i)).gold["value"] for i in range(1000)]
    assert abs(np.mean(values) - 0.5) <= 0.04


def test_unstratified_existence_balance(ctx10):
    rng = np.random.default_rng(0)
    values = [gen_existence(ctx10.with_context(2.56), rng=rng).gold["value"] for _ in range(1000)]
    assert abs(np.mean(values) - 0.5) <= 0.04


def test_counting_and_k_frequencies(corpus, splits):
    gen = Generation(corpus, splits, master_seed=5, counts={"train": 5000, "val": 1, "test": 1})
    counts = Counter(gen.sample(SampleKey("counting", 2.56, "train", i)).gold["value"] for i in range(5000))
    assert set(counts) == {1, 2, 3, 4, 5}
    assert all(abs(c / 5000 - 0.2) <= 0.02 for c in counts.values())
    ks = Counter(_k_from_u((0.4, 0.4, 0.2), stratum(5, SampleKey("multi_hop", 2.56, "train", i), {"train": 5000, "val": 1, "test": 1})) for i in range(5000))
    for k, w in zip((1, 2, 3), (0.4, 0.4, 0.2)):
        assert abs(ks[k] / 5000 - w) <= 0.02


def test_k_from_u_boundaries():
    w = (0.4, 0.4, 0.2)
    assert [_k_from_u(w, u) for u in (0.0, 0.399, 0.4, 0.799, 0.8, 0.999)] == [1, 1, 2, 2, 3, 3]


@pytest.mark.parametrize("task", EXCLUSIVE)
def test_inserted_classes_absent_from_background(generation, task):
    for sample in _samples(generation, task):
        inserted = {r.activity for r in sample.needles}
        assert not inserted & _background_classes(sample)
        if task in ("existence", "ordering", "counting"):
            named = {v for k, v in sample.query.items() if k.startswith("activity")}
            assert not named & _background_classes(sample)


@pytest.mark.parametrize("task", TASKS)
def test_needle_lengths_within_fractions(generation, task):
    cfg = DEFAULT_TASK_CONFIGS[task]
    for sample in _samples(generation, task, 20, 100.0):
        n = sample.length
        for r in sample.needles:
            frac = (r.end - r.start) / n
            assert cfg.needle_frac[0] - 1 / n <= frac <= cfg.needle_frac[1] + 1 / n
            assert r.source_participant


@pytest.mark.parametrize("task", ["existence", "localization", "counting", "comparison", "multi_hop", "anomaly_detection"])
def test_needles_respect_margins_and_gaps(generation, task):
    for sample in _samples(generation, task, 20, 100.0):
        n = sample.length
        margin = math.ceil(0.02 * n)
        gap = min(round(0.02 * n), 100)
        ns = sample.needles
        assert ns[0].start >= margin and ns[-1].end <= n - margin
        assert all(b.start - a.end >= gap for a, b in zip(ns, ns[1:]))


def test_existence_structure(generation):
    for sample in _samples(generation, "existence", 60):
        q = sample.query["activity"]
        acts = [r.activity for r in sample.needles]
        assert acts.count(q) == int(sample.gold["value"])
        distractors = [a for a in acts if a != q]
        assert 1 <= len(distractors) <= 3 and len(set(distractors)) == len(distractors)
        assert {regime_of(a) for a in acts} | {regime_of(q)} == {sample.query["regime"]}


def test_localization_target_unique(generation):
    for sample in _samples(generation, "localization", 60):
        target = sample.query["activity"]
        assert sum(s.activity == target for s in sample.timeline) == 1
        assert 2 <= len(sample.needles) <= 4


def test_counting_matches_needles(generation):
    for sample in _samples(generation, "counting", 60):
        acts = {r.activity for r in sample.needles}
        assert acts == {sample.query["activity"]} and len(sample.needles) == sample.gold["value"]


def test_ordering_truth(generation):
    for sample in _samples(generation, "ordering", 40):
        first = sample.needles[0].activity
        assert sample.gold["value"] == (first == sample.query["activity_a"])


def test_state_query_containment(generation, ctx10):
    samples = _samples(generation, "state_query", 40) + [gen_state_query(ctx10, rng=np.random.default_rng(i)) for i in range(20)]
    for sample in samples:
        (needle,) = sample.needles
        i = next(k for k, s in enumerate(sample.timeline) if s.inserted)
        before, after = sample.timeline[i - 1], sample.timeline[i + 1]
        assert before.activity == after.activity == sample.gold["value"]
        assert needle.activity not in sample.query["states"]
        states = [s for s in sample.timeline if not s.inserted]
        assert 2 <= len(sample.query["states"]) <= 5
        assert all(a != b for a, b in zip(sample.query["states"], sample.query["states"][1:]))
        assert sample.gold["value"] in sample.query["states"]
        assert len(states) == len(sample.query["states"]) + 1


def test_antecedent_adjacency(generation, ctx10):
    for sample in _samples(generation, "antecedent", 40) + [gen_antecedent(ctx10, rng=np.random.default_rng(1))]:
        a, t = sample.needles
        assert t.start - a.end == 10
        assert (a.activity, t.activity) == (sample.gold["value"], sample.query["target"])


def _runs(mask):
    out, start = [], None
    for i, m in enumerate(list(mask) + [False]):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i))
            start = None
    return out


def test_comparison_against_brute_force(generation):
    variants = Counter()
    for sample in _samples(generation, "comparison", 80, 100.0):
        q = sample.query
        n = sample.length
        mask = np.zeros(n, dtype=bool)
        for r in sample.needles:
            mask[r.start : r.end] = True
        if q["polarity"] == "with":
            spans = _runs(mask)
        else:
            # complementary gaps, zero-length ones included at the edges
            edges = [0] + [x for r in sample.needles for x in (r.start, r.end)] + [n]
            spans = list(zip(edges[::2], edges[1::2]))
        widths = sorted((e - s for s, e in spans), reverse=q["extremum"] == "longest")
        best = widths[0]
        diff = math.ceil(0.02 * n)
        assert len(widths) == 1 or abs(widths[0] - widths[1]) >= diff
        (hit,) = [sp for sp in spans if sp[1] - sp[0] == best]
        base = sample.start_clock_ms
        assert sample.gold["start_ms"] == (base + round(hit[0] * 1000 / sample.rate)) % 86_400_000
        assert sample.gold["end_ms"] == (base + round(hit[1] * 1000 / sample.rate)) % 86_400_000
        lengths = sorted(r.end - r.start for r in sample.needles)
        assert 2 <= len(lengths) <= 4 and all(b - a >= diff for a, b in zip(lengths, lengths[1:]))
        variants[(q["extremum"], q["polarity"])] += 1
    assert len(variants) == 4


def test_distinct_lengths_spacing():
    rng = np.random.default_rng(0)
    for _ in range(500):
        v = sorted(_distinct_lengths(10, 40, 4, 7, rng))
        assert v[0] >= 10 and v[-1] <= 40 and all(b - a >= 7 for a, b in zip(v, v[1:]))


def test_multihop_structure(generation):
    seen_k = Counter()
    for sample in _samples(generation, "multi_hop", 60):
        q = sample.query
        acts = [r.activity for r in sample.needles]
        a = acts.index(q["anchor"])
        assert acts.count(q["anchor"]) == 1
        if q["direction"] == "after":
            side = sample.needles[a + 1 :]
        else:
            side = sample.needles[:a][::-1]
        assert all(r.activity == q["target"] for r in side)
        assert q["K"] <= len(side) <= 3
        hit = side[q["K"] - 1]
        assert sample.gold["start_ms"] == (sample.start_clock_ms + round(hit.start * 1000 / sample.rate)) % 86_400_000
        assert len(sample.needles) - 1 - len(side) <= 2
        seen_k[q["K"]] += 1
    assert set(seen_k) == {1, 2, 3}


@pytest.mark.parametrize("task", ["anomaly_detection", "anomaly_localization"])
def test_anomaly_structure(generation, task):
    for sample in _samples(generation, task, 60):
        regime = sample.query["regime"]
        bg = _background_classes(sample) - {"unannotated"}
        assert bg and {regime_of(c) for c in bg} == {regime}
        odd = [r for r in sample.needles if regime_of(r.activity) != regime]
        normal = [r for r in sample.needles if regime_of(r.activity) == regime]
        assert len(odd) == int(sample.gold["value"])
        assert 1 <= len(normal) <= 3 and not {r.activity for r in normal} & bg
        if odd:
            assert sample.gold["category"] == odd[0].activity
            assert ("start_ms" in sample.gold) == (task == "anomaly_localization")
            assert sample.answer_text.startswith("Yes")
        else:
            assert sample.answer_text == "No."


def test_order_independence(corpus, splits):
    keys = [SampleKey(t, c, s, i) for t in TASKS for c in (2.56, 10.0) for s in ("train", "test") for i in range(3)]
    a = Generation(corpus, splits, 21, counts={"train": 3, "val": 3, "test": 3})
    b = Generation(corpus, splits, 21, counts={"train": 3, "val": 3, "test": 3})
    first = {k: a.sample(k) for k in keys}
    order = np.random.default_rng(0).permutation(len(keys))
    for j in order:
        k = keys[j]
        other = b.sample(k)
        assert np.array_equal(first[k].series, other.series)
        assert first[k].to_record() == other.to_record()


def test_different_seeds_differ(corpus, splits):
    key = SampleKey("localization", 10.0, "train", 0)
    a = Generation(corpus, splits, 1).sample(key)
    b = Generation(corpus, splits, 2).sample(key)
    assert not np.array_equal(a.series, b.series)


def test_splits_use_own_participants(generation, splits):
    for split in ("train", "val", "test"):
        s = generation.sample(SampleKey("counting", 10.0, split, 0))
        assert s.participant in splits.of(split) and s.split == split


def test_long_context_generation(generation):
    sample = generation.sample(SampleKey("multi_hop", 3600.0, "train", 0))
    assert sample.length == 180_000
    assert recompute_gold(sample.to_record()) == sample.gold


def test_task_config_validation():
    with pytest.raises(ValueError):
        TaskConfig("counting", (0.1, 0.05))
    with pytest.raises(ValueError):
        TaskConfig("multi_hop", (0.02, 0.06), k_weights=(0.5, 0.4))
    with pytest.raises(ValueError):
        TaskConfig("nope", (0.02, 0.06))
    with pytest.raises(ValueError):
        DEFAULT_TASK_CONFIGS["counting"].with_overrides({"colour": 1})
    ts = TaskSet.from_overrides({"counting": {"bouts": [2, 3]}})
    assert ts.configs["counting"].bouts == (2, 3)
    with pytest.raises(ValueError):
        gen_comparison(None, DEFAULT_TASK_CONFIGS["counting"])


def test_generators_give_up_cleanly(corpus):
    from tshaystack.taskgen.context import GenContext

    ctx = GenContext.from_recordings(corpus[:1], 10.0)
    with pytest.raises(NeedleUnavailable):
        gen_localization(ctx.with_context(10 * 3600.0), rng=np.random.default_rng(0))


def test_generator_table():
    assert list(GENERATORS) == list(TASKS)
    assert set(CLASSES) >= {"walking", "sleep"}
