from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tshaystack.insertion import (
    BlendSpec,
    PlacementInfeasible,
    blend_profile,
    blend_weight,
    default_blend_window,
    insert_needle,
    mean_align,
    min_gap_samples,
    place_bouts,
)


@pytest.mark.parametrize("w", [1, 2, 4, 7, 25, 100, 1001])
def test_blend_weight_exact_points(w):
    assert blend_weight(0, w) == 0.0
    assert blend_weight(w / 2, w) == 0.5
    assert blend_weight(w, w) == 1.0


def test_blend_weight_matches_formula_and_is_monotone():
    w = 25
    ts = np.linspace(0, w, 501)
    vals = np.array([blend_weight(t, w) for t in ts])
    np.testing.assert_allclose(vals, 0.5 * (1 - np.cos(np.pi * ts / w)), atol=1e-15)
    assert np.all(np.diff(vals) >= 0)
    with pytest.raises(ValueError):
        blend_weight(w + 1, w)
    with pytest.raises(ValueError):
        blend_weight(0, 0)


def test_mean_align_hits_target_means():
    needle = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    out = mean_align(needle, np.zeros((3, 5)))
    np.testing.assert_array_equal(out.mean(axis=1), [0, 0, 0])


def test_mean_align_identity_is_exact():
    rng = np.random.default_rng(0)
    needle = rng.normal(size=(3, 40))
    target = needle[:, ::-1].copy()  # same per-channel means
    mu_n = needle.mean(axis=1, keepdims=True)
    mu_t = target.mean(axis=1, keepdims=True)
    if np.array_equal(mu_n, mu_t):
        assert np.array_equal(mean_align(needle, target), needle)
    assert np.array_equal(mean_align(needle, needle), needle)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.integers(2, 300))
def test_mean_align_properties(seed, offset, n):
    rng = np.random.default_rng(seed)
    needle = rng.normal(size=(3, n)) * 3 + offset
    target = rng.normal(size=(3, n + 7)) - offset
    out = mean_align(needle, target)
    mu_t = target.mean(axis=1)
    assert np.all(np.abs(out.mean(axis=1) - mu_t) < 1e-9 * (1 + np.abs(mu_t)))
    var_direct = ((needle - needle.mean(axis=1, keepdims=True)) ** 2).sum(axis=1) / n
    np.testing.assert_allclose(out.var(axis=1), var_direct, rtol=1e-9)


def test_mean_align_rejects_empty():
    with pytest.raises(ValueError):
        mean_align(np.zeros((3, 0)), np.zeros((3, 4)))


def test_hard_replacement_when_window_zero():
    bg = np.random.default_rng(1).normal(size=(3, 100))
    needle = np.random.default_rng(2).normal(size=(3, 20)) + 5
    out, rec = insert_needle(bg, needle, BlendSpec(0, 30, 20), "sports", "Q")
    aligned = mean_align(needle, bg[:, 30:50])
    assert np.array_equal(out[:, 30:50], aligned)
    assert np.array_equal(out[:, :30], bg[:, :30]) and np.array_equal(out[:, 50:], bg[:, 50:])
    assert (rec.start, rec.end, rec.activity, rec.inserted) == (30, 50, "sports", True)


def test_blend_formula_inside_windows():
    rng = np.random.default_rng(3)
    bg = rng.normal(size=(3, 200))
    needle = rng.normal(size=(3, 60))
    w, pos = 10, 70
    out, _ = insert_needle(bg, needle, BlendSpec(w, pos, 60))
    aligned = mean_align(needle, bg[:, pos : pos + 60])
    for t in range(w):
        a = 0.5 * (1 - math.cos(math.pi * t / w))
        np.testing.assert_allclose(out[:, pos + t], (1 - a) * bg[:, pos + t] + a * aligned[:, t], atol=1e-12)
        k = 59 - t  # mirrored falling edge
        np.testing.assert_allclose(out[:, pos + k], (1 - a) * bg[:, pos + k] + a * aligned[:, k], atol=1e-12)
    assert np.array_equal(out[:, pos + w : pos + 60 - w], aligned[:, w : 60 - w])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.integers(1, 120))
def test_insertion_keeps_length_and_is_convex(seed, bg_len, n):
    n = min(n, bg_len)
    rng = np.random.default_rng(seed)
    bg = rng.normal(size=(3, bg_len))
    needle = rng.normal(size=(3, n))
    pos = int(rng.integers(bg_len - n + 1))
    w = int(rng.integers(0, n // 2 + 1))
    out, _ = insert_needle(bg, needle, BlendSpec(w, pos, n))
    assert out.shape == bg.shape
    aligned = mean_align(needle, bg[:, pos : pos + n])
    seg = out[:, pos : pos + n]
    lo = np.minimum(bg[:, pos : pos + n], aligned) - 1e-12
    hi = np.maximum(bg[:, pos : pos + n], aligned) + 1e-12
    assert np.all((seg >= lo) & (seg <= hi))


def test_blend_spec_validation():
    with pytest.raises(ValueError):
        BlendSpec(6, 0, 10).check(100)
    with pytest.raises(ValueError):
        BlendSpec(2, 95, 10).check(100)
    assert default_blend_window(40) == 10 and default_blend_window(1000) == 25
    assert blend_profile(8, 0).tolist() == [1.0] * 8


def test_min_gap_cap():
    assert min_gap_samples(1000) == 20
    assert min_gap_samples(360_000) == 100


def test_single_bout_position_is_uniform():
    rng = np.random.default_rng(0)
    starts = [place_bouts([10], 30, 0.0, 0, rng)[0] for _ in range(21_000)]
    counts = np.bincount(starts, minlength=21)
    assert counts.min() > 800 and counts.max() < 1200 and len(counts) == 21


def test_exact_fit_is_unique():
    # margin 2 each side, three bouts of 5, gaps of 3: 2+5+3+5+3+5+2 = 25
    for seed in range(20):
        assert place_bouts([5, 5, 5], 25, 0.08, 3, np.random.default_rng(seed)) == [2, 10, 18]


def test_layouts_uniform_over_feasible_set():
    lengths, bg, gap = [2, 3], 12, 1
    feasible = [
        (a, b) for a, b in itertools.product(range(bg), repeat=2) if a + 2 + gap <= b and b + 3 <= bg
    ]
    rng = np.random.default_rng(5)
    seen = {}
    for _ in range(len(feasible) * 400):
        key = tuple(place_bouts(lengths, bg, 0.0, gap, rng))
        seen[key] = seen.get(key, 0) + 1
    assert set(seen) == set(feasible)
    counts = np.array(list(seen.values()))
    assert counts.min() > 300 and counts.max() < 500


def test_infeasible_placement():
    with pytest.raises(PlacementInfeasible):
        place_bouts([30] * 5, 100, 0.02, 1, np.random.default_rng(0))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(1, 40), min_size=1, max_size=6), st.sampled_from(["random", "beginning", "middle", "end"]))
def test_layout_respects_gaps_and_margins(seed, lengths, position):
    bg, frac, gap = 400, 0.02, 8
    starts = place_bouts(lengths, bg, frac, gap, np.random.default_rng(seed), position)
    margin = math.ceil(frac * bg)
    assert starts[0] >= margin and starts[-1] + lengths[-1] <= bg - margin
    for (s1, n1), s2 in zip(zip(starts, lengths), starts[1:]):
        assert s2 - (s1 + n1) >= gap
