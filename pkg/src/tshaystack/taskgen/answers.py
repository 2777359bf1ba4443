"""Typed gold answers, their natural-language rendering, and recomputation from a timeline.

``recompute_gold`` looks only at a serialized record (timeline in ms, query
parameters, start clock). It shares no code with the generators, so agreement
between the two is a real consistency check.
"""

from __future__ import annotations

from typing import Any, Mapping

from ..labels import UNANNOTATED, regime_of
from ..qa.clock import MS_PER_DAY, format_range


def boolean(value: bool) -> dict:
    return {"kind": "boolean", "value": bool(value)}


def integer(value: int) -> dict:
    return {"kind": "integer", "value": int(value)}


def category(value: str) -> dict:
    return {"kind": "category", "value": value}


def time_range(start_ms: int, end_ms: int) -> dict:
    return {"kind": "time_range", "start_ms": int(start_ms) % MS_PER_DAY, "end_ms": int(end_ms) % MS_PER_DAY}


def compound(value: bool, cat: str | None = None, rng: tuple[int, int] | None = None) -> dict:
    out: dict[str, Any] = {"kind": "compound", "value": bool(value)}
    if cat is not None:
        out["category"] = cat
    if rng is not None:
        out["start_ms"] = int(rng[0]) % MS_PER_DAY
        out["end_ms"] = int(rng[1]) % MS_PER_DAY
    return out


def render_answer(gold: Mapping[str, Any], background_regime: str | None = None) -> str:
    kind = gold["kind"]
    if kind == "boolean":
        return "Yes." if gold["value"] else "No."
    if kind == "integer":
        return f"{gold['value']}."
    if kind == "category":
        name = gold["value"]
        return name[:1].upper() + name[1:] + "."
    if kind == "time_range":
        return format_range(gold["start_ms"], gold["end_ms"]) + "."
    if kind == "compound":
        if not gold["value"]:
            return "No."
        text = f"Yes, there is anomalous {gold['category']} activity"
        if "start_ms" in gold:
            span = format_range(gold["start_ms"], gold["end_ms"])
            return f"{text} f{span[1:]}."
        if background_regime:
            return text + f" in the {background_regime} background."
        return text + "."
    raise ValueError(f"unknown answer kind {kind!r}")


class InconsistentTimeline(ValueError):
    pass


def _segs(record: Mapping[str, Any], activity: str, inserted: bool | None = None) -> list[dict]:
    return [
        s for s in record["timeline"]
        if s["class"] == activity and (inserted is None or s["inserted"] == inserted)
    ]


def _clock_range(record: Mapping[str, Any], start_ms: int, end_ms: int) -> dict:
    base = int(record["start_clock_ms"])
    return time_range(base + start_ms, base + end_ms)


def recompute_gold(record: Mapping[str, Any]) -> dict:
    task = record["task"]
    q = record["query"]
    tl = record["timeline"]
    if task == "existence":
        return boolean(bool(_segs(record, q["activity"])))
    if task == "localization":
        hits = _segs(record, q["activity"])
        if len(hits) != 1:
            raise InconsistentTimeline(f"{record['id']}: {len(hits)} {q['activity']} segments")
        return _clock_range(record, hits[0]["start_ms"], hits[0]["end_ms"])
    if task == "counting":
        return integer(len(_segs(record, q["activity"])))
    if task == "ordering":
        a, b = _segs(record, q["activity_a"]), _segs(record, q["activity_b"])
        if not a or not b:
            raise InconsistentTimeline(f"{record['id']}: ordering activities missing")
        return boolean(a[0]["start_ms"] < b[0]["start_ms"])
    if task == "state_query":
        (needle,) = _segs(record, q["event"], inserted=True)
        i = tl.index(needle)
        before = tl[i - 1]["class"] if i > 0 else None
        after = tl[i + 1]["class"] if i + 1 < len(tl) else None
        if before != after or before is None:
            raise InconsistentTimeline(f"{record['id']}: event not enclosed by a single state")
        return category(before)
    if task == "antecedent":
        (target,) = _segs(record, q["target"], inserted=True)
        prior = [s for s in tl if s["inserted"] and s["end_ms"] <= target["start_ms"]]
        if not prior:
            raise InconsistentTimeline(f"{record['id']}: nothing inserted before target")
        return category(max(prior, key=lambda s: s["end_ms"])["class"])
    if task == "comparison":
        bouts = sorted(_segs(record, q["activity"]), key=lambda s: s["start_ms"])
        if q["polarity"] == "with":
            spans = [(s["start_ms"], s["end_ms"]) for s in bouts]
        else:
            edges = [0] + [x for s in bouts for x in (s["start_ms"], s["end_ms"])] + [tl[-1]["end_ms"]]
            spans = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
        pick = max if q["extremum"] == "longest" else min
        lo, hi = pick(spans, key=lambda sp: sp[1] - sp[0])
        return _clock_range(record, lo, hi)
    if task == "multi_hop":
        (anchor,) = _segs(record, q["anchor"])
        targets = _segs(record, q["target"])
        if q["direction"] == "after":
            side = sorted((s for s in targets if s["start_ms"] >= anchor["end_ms"]), key=lambda s: s["start_ms"])
        else:
            side = sorted((s for s in targets if s["end_ms"] <= anchor["start_ms"]), key=lambda s: -s["start_ms"])
        k = int(q["K"])
        if len(side) < k:
            raise InconsistentTimeline(f"{record['id']}: fewer than {k} targets {q['direction']} anchor")
        hit = side[k - 1]
        return _clock_range(record, hit["start_ms"], hit["end_ms"])
    if task in ("anomaly_detection", "anomaly_localization"):
        regimes = {regime_of(s["class"]) for s in tl if not s["inserted"] and s["class"] != UNANNOTATED}
        if len(regimes) != 1:
            raise InconsistentTimeline(f"{record['id']}: background is not regime-pure")
        (bg,) = regimes
        odd = [s for s in tl if s["inserted"] and regime_of(s["class"]) != bg]
        if not odd:
            return compound(False)
        if len(odd) > 1:
            raise InconsistentTimeline(f"{record['id']}: more than one anomaly")
        s = odd[0]
        if task == "anomaly_detection":
            return compound(True, s["class"])
        base = int(record["start_clock_ms"])
        return compound(True, s["class"], (base + s["start_ms"], base + s["end_ms"]))
    raise ValueError(f"unknown task {task!r}")
