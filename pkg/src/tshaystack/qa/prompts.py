"""Model-facing prompt text for a generated sample, with and without the ground-truth timeline."""

from __future__ import annotations

from typing import Any, Mapping

from .clock import MS_PER_DAY, format_clock

SERIES_PLACEHOLDER = "[accelerometer data x/y/z axes]"

PREAMBLE = "You are given accelerometer data in all three dimensions from a wrist-worn sensor."

INSTRUCTIONS = (
    "Instructions: Analyze the accelerometer data carefully. "
    "Think step-by-step about what the signal patterns indicate. "
    "Write your reasoning as a natural paragraph. "
    'End your response with "Answer: <your answer>"'
)

ORACLE_HEADER = "Activity Timeline (Ground Truth):"


def _fields(sample: Any) -> tuple[int, int, str, list[Mapping[str, Any]]]:
    """(start clock, duration ms, question, timeline) from a HaystackSample or its JSON record."""
    if isinstance(sample, Mapping):
        rec = sample
        duration = int(round(rec["length"] * 1000.0 / rec["rate"]))
        return int(rec["start_clock_ms"]), duration, rec["question"], list(rec["timeline"])
    duration = int(round(sample.length * 1000.0 / sample.rate))
    return sample.start_clock_ms, duration, sample.question, sample.timeline_json()


def _short(t_ms: int, am_pm: bool = True) -> str:
    return format_clock(t_ms, millis=False, am_pm=am_pm)


def build_prompt(sample: Any, am_pm: bool = True) -> str:
    start, duration, question, _ = _fields(sample)
    span = f"The recording spans from {_short(start, am_pm)} to {_short(start + duration, am_pm)}."
    return "\n".join([f"{PREAMBLE} {span}", f"Question: {question}", SERIES_PLACEHOLDER, INSTRUCTIONS])


def _bare(t_ms: int, am_pm: bool) -> str:
    # 12-hour digits without the suffix when the header already carries AM/PM
    text = format_clock(t_ms, millis=False, am_pm=am_pm)
    return text[:-3] if am_pm else text


def timeline_lines(sample: Any, am_pm: bool = True) -> list[str]:
    start, _, _, timeline = _fields(sample)
    lines = []
    for seg in timeline:
        a = _bare((start + seg["start_ms"]) % MS_PER_DAY, am_pm)
        b = _bare((start + seg["end_ms"]) % MS_PER_DAY, am_pm)
        lines.append(f"{a} -- {b}: {seg['class']}" + (" [inserted]" if seg["inserted"] else ""))
    return lines


def build_oracle_prompt(sample: Any, am_pm: bool = True) -> str:
    start, duration, _, _ = _fields(sample)
    head = [ORACLE_HEADER, f"Recording: {_short(start, am_pm)} -- {_short(start + duration, am_pm)}"]
    return "\n".join(head + timeline_lines(sample, am_pm) + [build_prompt(sample, am_pm)])
