from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import balanced_accuracy_score, f1_score

from tshaystack.labels import CLASSES
from tshaystack.qa.clock import MS_PER_DAY, parse_clock
from tshaystack.qa.templates import TASKS
from tshaystack.score.baselines import MONTE_CARLO_TASKS, closed_form, random_baseline, wilson_interval
from tshaystack.score.metrics import balanced_accuracy, confusion_matrix, macro_f1
from tshaystack.score.parse import AnswerParseError, ParsedAnswer, from_gold, parse_answer
from tshaystack.score.report import SampleScore, aggregate, score_records, score_transcript
from tshaystack.score.rules import KindMismatch, ScoringRule, interval_iou, range_matches, score_sample
from tshaystack.taskgen.dataset import SampleKey


def tr(a: str, b: str) -> ParsedAnswer:
    return ParsedAnswer("time_range", start_ms=parse_clock(a), end_ms=parse_clock(b))


# -- parsing ------------------------------------------------------------------
@pytest.mark.parametrize(
    "text, kind, expected",
    [
        ("It looks calm. Answer: Yes.", "boolean", True),
        ("answer: no, nothing there", "boolean", False),
        ("Answer: maybe yes. Answer: No", "boolean", False),
        ("Answer: 3", "integer", 3),
        ("Answer: three bouts", "integer", 3),
        ("Answer: Sitting.", "category", "sitting"),
        ("Answer: mixed-activity", "category", "mixed-activity"),
    ],
)
def test_parse_scalars(text, kind, expected):
    assert parse_answer(text, kind).value == expected


def test_parse_ranges():
    p = parse_answer("Answer: From 02:34:56:789 PM to 02:35:01:000 PM.", "time_range")
    assert (p.start_ms, p.end_ms) == (parse_clock("02:34:56:789 PM"), parse_clock("02:35:01:000 PM"))
    p = parse_answer("so Answer: 14:00:00 - 14:00:05", "time_range")
    assert (p.start_ms, p.end_ms) == (50_400_000, 50_405_000)


def test_parse_compound():
    p = parse_answer("Answer: Yes, there is anomalous walking activity from 01:00:00:000 AM to 01:00:03:000 AM.", "compound")
    assert p.value and p.category == "walking" and p.start_ms == 3_600_000 and p.end_ms == 3_603_000
    assert parse_answer("Answer: No.", "compound") == ParsedAnswer("compound", False)
    q = parse_answer("Answer: Yes, something odd.", "compound")
    assert q.value and q.category is None and not q.has_range


@pytest.mark.parametrize(
    "text, kind, reason",
    [
        ("Yes it is", "boolean", "missing_marker"),
        ("Answer: perhaps", "boolean", "unparseable"),
        ("Answer: many", "integer", "unparseable"),
        ("Answer: sitting or walking", "category", "unparseable"),
        ("Answer: around noon", "time_range", "unparseable"),
    ],
)
def test_parse_failures(text, kind, reason):
    with pytest.raises(AnswerParseError) as err:
        parse_answer(text, kind)
    assert err.value.reason == reason


def test_rendered_gold_answers_parse_back(generation):
    for task in TASKS:
        for i in range(10):
            rec = generation.sample(SampleKey(task, 10.0, "train", i)).to_record()
            gold = from_gold(rec["gold"])
            pred = parse_answer("Answer: " + rec["answer_text"], gold.kind)
            assert score_sample(pred, gold)
            if gold.kind in ("time_range",) or gold.has_range:
                assert (pred.start_ms, pred.end_ms) == (gold.start_ms, gold.end_ms)


# -- rules --------------------------------------------------------------------
def test_iou_threshold_boundary():
    gold = ParsedAnswer("time_range", start_ms=0, end_ms=1000)
    assert interval_iou((0, 1000), (0, 500)) == 0.5
    assert score_sample(ParsedAnswer("time_range", start_ms=0, end_ms=500), gold)
    assert not score_sample(ParsedAnswer("time_range", start_ms=0, end_ms=490), gold)  # IoU 0.49
    assert score_sample(ParsedAnswer("time_range", start_ms=0, end_ms=490), gold, ScoringRule.parse("iou:0.3"))


def test_tolerance_rule():
    rule = ScoringRule.parse("tolerance:2")
    gold = tr("01:00:00", "01:00:10")
    assert score_sample(tr("01:00:02", "01:00:08"), gold, rule)
    assert not score_sample(tr("01:00:03", "01:00:10"), gold, rule)
    assert str(rule) == "tolerance:2" and str(ScoringRule()) == "iou:0.5"
    with pytest.raises(ValueError):
        ScoringRule.parse("jaccard")


def test_midnight_wrap():
    gold = tr("11:59:58 PM", "12:00:02 AM")
    assert range_matches(tr("11:59:58 PM", "12:00:02 AM"), gold, ScoringRule())
    assert range_matches(tr("11:59:59 PM", "12:00:02 AM"), gold, ScoringRule())
    assert not range_matches(tr("12:00:03 AM", "12:00:06 AM"), gold, ScoringRule())
    # prediction entirely after midnight still overlaps a wrapped gold
    assert range_matches(tr("12:00:00 AM", "12:00:02 AM"), tr("11:59:59 PM", "12:00:02 AM"), ScoringRule("iou", 0.6))


@settings(max_examples=200)
@given(st.integers(0, MS_PER_DAY - 1), st.integers(1, 600_000), st.integers(-5000, 5000))
def test_iou_symmetric_and_shift_invariant(start, length, shift):
    a = ParsedAnswer("time_range", start_ms=start, end_ms=(start + length) % MS_PER_DAY)
    b = ParsedAnswer("time_range", start_ms=(start + shift) % MS_PER_DAY, end_ms=(start + shift + length) % MS_PER_DAY)
    rule = ScoringRule("iou", 0.5)
    assert range_matches(a, b, rule) == range_matches(b, a, rule)
    expected = max(0, length - abs(shift)) / (length + min(abs(shift), length)) >= 0.5
    assert range_matches(a, b, rule) == expected


def test_scalar_scoring_and_kind_mismatch():
    assert score_sample(ParsedAnswer("category", "Sitting."), ParsedAnswer("category", "sitting"))
    assert not score_sample(ParsedAnswer("integer", 2), ParsedAnswer("integer", 3))
    with pytest.raises(KindMismatch):
        score_sample(ParsedAnswer("integer", 2), ParsedAnswer("boolean", True))


def test_compound_scoring():
    gold_r = ParsedAnswer("compound", True, "walking", 1000, 3000)
    gold_c = ParsedAnswer("compound", True, "walking")
    assert score_sample(ParsedAnswer("compound", True, "walking", 1000, 3000), gold_r)
    assert not score_sample(ParsedAnswer("compound", True, "walking"), gold_r)  # range required
    assert not score_sample(ParsedAnswer("compound", True, "sports", 1000, 3000), gold_r)
    assert score_sample(ParsedAnswer("compound", True), gold_c)
    assert not score_sample(ParsedAnswer("compound", False), gold_c)
    assert score_sample(ParsedAnswer("compound", False), ParsedAnswer("compound", False))
    assert not score_sample(ParsedAnswer("compound", True, "walking"), ParsedAnswer("compound", False))


# -- baselines ----------------------------------------------------------------
@pytest.mark.parametrize("task, value", [("existence", 50), ("ordering", 50), ("anomaly_detection", 50), ("counting", 20), ("state_query", 10), ("antecedent", 10)])
def test_closed_form_baselines_against_simulation(task, value):
    assert closed_form(task) == value
    rng = np.random.default_rng(7)
    n = 40_000
    if value == 50:
        hits = rng.integers(2, size=n) == rng.integers(2, size=n)
    elif value == 20:
        hits = rng.integers(1, 6, size=n) == rng.integers(1, 6, size=n)
    else:
        hits = rng.integers(len(CLASSES), size=n) == rng.integers(len(CLASSES), size=n)
    p = value / 100
    assert abs(hits.mean() - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4) and hi == pytest.approx(0.5962, abs=1e-4)
    assert wilson_interval(0, 10)[0] == 0.0


@pytest.mark.parametrize("task", MONTE_CARLO_TASKS)
def test_monte_carlo_baselines(task):
    est = random_baseline(task, n_mc=10_000, seed=1)
    assert est.method == "monte-carlo" and est.n == 10_000
    assert est.ci_low <= est.percent <= est.ci_high
    assert 0 < est.percent < 40
    assert random_baseline(task, n_mc=10_000, seed=1) == est
    with pytest.raises(ValueError):
        random_baseline(task, n_mc=500)


def test_localization_baseline_independent_estimate():
    # uniform single interval vs uniform single interval of the same length law
    rng = np.random.default_rng(3)
    n, hits = 10_000, 0
    draws = 20_000
    for _ in range(draws):
        g = max(1, round(rng.uniform(0.02, 0.10) * n))
        p = max(1, round(rng.uniform(0.02, 0.10) * n))
        gs = rng.integers(n - g + 1)
        ps = rng.integers(n - p + 1)
        inter = max(0, min(gs + g, ps + p) - max(gs, ps))
        hits += inter / (g + p - inter) >= 0.5
    est = random_baseline("localization", n_mc=20_000, seed=4)
    # same order of magnitude; placement margins and distractors shift it slightly
    assert 0.5 * est.percent < 100 * hits / draws < 2 * est.percent


# -- metrics ------------------------------------------------------------------
CL = ["a", "b", "c"]
FIXTURES = [
    (["a", "b", "c"], ["a", "b", "c"], 1.0, 1.0),
    (["a", "a", "a"], ["a", "b", "c"], 1 / 6, 1 / 3),
    (["b", "a"], ["a", "b"], 0.0, 0.0),
    (["a", "a", "b", "b"], ["a", "b", "b", "b"], (2 / 3 + 0.8) / 2, (1 + 2 / 3) / 2),
    (["a", "c", "c", "c"], ["a", "a", "c", "c"], (2 / 3 + 0.8) / 2, 0.75),
]


@pytest.mark.parametrize("preds, golds, f1, bal", FIXTURES)
def test_metric_fixtures(preds, golds, f1, bal):
    assert macro_f1(preds, golds, CL) == pytest.approx(f1)
    assert balanced_accuracy(preds, golds, CL) == pytest.approx(bal)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(CL), st.sampled_from(CL)), min_size=1, max_size=60))
def test_metrics_match_sklearn(pairs):
    preds, golds = [p for p, _ in pairs], [g for _, g in pairs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert macro_f1(preds, golds, CL) == pytest.approx(f1_score(golds, preds, average="macro", zero_division=0))
        assert balanced_accuracy(preds, golds, CL) == pytest.approx(balanced_accuracy_score(golds, preds))
    rename = {"a": "c", "b": "a", "c": "b"}
    assert macro_f1([rename[p] for p in preds], [rename[g] for g in golds], CL) == pytest.approx(macro_f1(preds, golds, CL))


def test_uniform_predictions_near_chance():
    rng = np.random.default_rng(0)
    classes = list(CLASSES)
    golds = [classes[i] for i in rng.integers(10, size=20_000)]
    preds = [classes[i] for i in rng.integers(10, size=20_000)]
    assert macro_f1(preds, golds, classes) == pytest.approx(0.1, abs=0.01)
    assert balanced_accuracy(preds, golds, classes) == pytest.approx(0.1, abs=0.01)


def test_metric_errors():
    with pytest.raises(ValueError):
        macro_f1([], [], CL)
    with pytest.raises(ValueError):
        macro_f1(["a"], ["a", "b"], CL)
    with pytest.raises(ValueError):
        macro_f1(["z"], ["a"], CL)
    assert confusion_matrix(["b"], ["a"], CL)[0, 1] == 1


# -- report -------------------------------------------------------------------
def test_score_records_with_perfect_answerer(generation, tmp_path):
    records = [generation.sample(SampleKey(t, c, "test", i)).to_record() for t in TASKS for c in (2.56, 10.0) for i in range(3)]
    transcripts = {r["id"]: f"Reasoning.\nAnswer: {r['answer_text']}" for r in records}
    scores = score_records(records, transcripts)
    assert all(s.correct for s in scores)
    baselines = {t: random_baseline(t, n_mc=10_000) for t in TASKS}
    report = aggregate(scores, baselines)
    assert report.average(2.56) == report.average(10.0) == 100.0
    assert not report.missing
    paths = report.write(tmp_path)
    text = paths["txt"].read_text()
    assert all(t in text for t in TASKS) and "100.0" in text
    assert paths["svg"].read_bytes().startswith(b"<?xml")


def test_missing_cells_warn_and_are_excluded():
    scores = [SampleScore("x", "existence", 10.0, True), SampleScore("y", "counting", 10.0, False)]
    with pytest.warns(UserWarning, match="no scored samples"):
        report = aggregate(scores, tasks=["existence", "counting"], contexts=[10.0, 100.0])
    assert report.missing == [("existence", 100.0), ("counting", 100.0)]
    assert report.average(10.0) == 50.0 and report.average(100.0) is None
    assert "missing" in report.to_text()


def test_diagnostics():
    rec = {"id": "x", "task": "counting", "context_s": 10.0, "gold": {"kind": "integer", "value": 2}}
    assert score_transcript(rec, None).diagnostic == "missing_transcript"
    assert score_transcript(rec, "two").diagnostic == "missing_marker"
    assert score_transcript(rec, "Answer: lots").diagnostic == "unparseable"
    assert score_transcript(rec, "Answer: 2").correct
