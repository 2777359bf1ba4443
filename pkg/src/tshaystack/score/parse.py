"""Extract typed answers from free-form model transcripts."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping

from ..labels import CLASSES
from ..qa.clock import MS_PER_DAY, find_clocks

KINDS = ("boolean", "integer", "category", "time_range", "compound")

_MARKER = re.compile(r"answer\s*:", re.IGNORECASE)
_RANGE = re.compile(r"from\s+(?P<a>.+?)\s+to\s+(?P<b>.+?)(?:[.;,]?\s*$|[.;,]\s)", re.IGNORECASE)
_WORD_NUMBERS = {w: i for i, w in enumerate("zero one two three four five six seven eight nine ten".split())}
# longest names first so "mixed-activity" is not shadowed by a shorter match
_CLASS_RE = re.compile(
    r"(?<![\w-])(" + "|".join(re.escape(c) for c in sorted(CLASSES, key=len, reverse=True)) + r")(?![\w-])",
    re.IGNORECASE,
)


class AnswerParseError(ValueError):
    """``reason`` is ``missing_marker`` or ``unparseable``."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class ParsedAnswer:
    kind: str
    value: Any = None  # bool | int | str for the scalar kinds; bool for compound
    category: str | None = None
    start_ms: int | None = None
    end_ms: int | None = None

    @property
    def has_range(self) -> bool:
        return self.start_ms is not None


def answer_text(transcript: str) -> str:
    """Text after the last ``Answer:`` marker."""
    hits = list(_MARKER.finditer(transcript))
    if not hits:
        raise AnswerParseError("missing_marker", "no 'Answer:' marker in transcript")
    return transcript[hits[-1].end() :].strip()


def _boolean(text: str) -> bool | None:
    first = re.match(r"\W*(\w+)", text)
    word = first.group(1).lower() if first else ""
    return {"yes": True, "true": True, "no": False, "false": False}.get(word)


def _categories(text: str) -> list[str]:
    seen: list[str] = []
    for m in _CLASS_RE.finditer(text):
        name = m.group(1).lower()
        if name not in seen:
            seen.append(name)
    return seen


def _range(text: str) -> tuple[int, int] | None:
    m = _RANGE.search(text + " ")
    clocks = find_clocks(m.group(0)) if m else []
    if len(clocks) < 2:
        clocks = find_clocks(text)
    if len(clocks) < 2:
        return None
    return clocks[0] % MS_PER_DAY, clocks[1] % MS_PER_DAY


def parse_payload(text: str, kind: str) -> ParsedAnswer:
    if kind not in KINDS:
        raise ValueError(f"unknown answer kind {kind!r}")
    fail = AnswerParseError("unparseable", f"cannot read a {kind} answer from {text[:80]!r}")
    if kind == "boolean":
        value = _boolean(text)
        if value is None:
            raise fail
        return ParsedAnswer(kind, value)
    if kind == "integer":
        m = re.search(r"-?\d+", text)
        if m:
            return ParsedAnswer(kind, int(m.group(0)))
        words = [w for w in re.findall(r"[a-z]+", text.lower()) if w in _WORD_NUMBERS]
        if not words:
            raise fail
        return ParsedAnswer(kind, _WORD_NUMBERS[words[0]])
    if kind == "category":
        found = _categories(text)
        if len(found) != 1:
            raise fail
        return ParsedAnswer(kind, found[0])
    if kind == "time_range":
        rng = _range(text)
        if rng is None:
            raise fail
        return ParsedAnswer(kind, None, start_ms=rng[0], end_ms=rng[1])
    value = _boolean(text)
    if value is None:
        raise fail
    if not value:
        return ParsedAnswer(kind, False)
    found = _categories(text)
    rng = _range(text)
    return ParsedAnswer(
        kind,
        True,
        category=found[0] if len(found) == 1 else None,
        start_ms=rng[0] if rng else None,
        end_ms=rng[1] if rng else None,
    )


def parse_answer(transcript: str, expected_kind: str) -> ParsedAnswer:
    return parse_payload(answer_text(transcript), expected_kind)


def from_gold(gold: Mapping[str, Any]) -> ParsedAnswer:
    kind = gold["kind"]
    if kind == "time_range":
        return ParsedAnswer(kind, None, start_ms=gold["start_ms"], end_ms=gold["end_ms"])
    if kind == "compound":
        return ParsedAnswer(kind, gold["value"], gold.get("category"), gold.get("start_ms"), gold.get("end_ms"))
    return ParsedAnswer(kind, gold["value"])
