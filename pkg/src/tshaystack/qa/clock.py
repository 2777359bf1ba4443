"""Wall-clock timestamps in the ``HH:MM:SS:mmm`` style used by questions and answers."""

from __future__ import annotations

import re

MS_PER_DAY = 86_400_000

_CLOCK_RE = re.compile(
    r"(?P<h>\d{1,2}):(?P<m>\d{2}):(?P<s>\d{2})(?::(?P<ms>\d{3}))?(?:\s*(?P<ampm>[AaPp][Mm]))?"
)


def format_clock(t_ms: int, pad_hours: bool = True, am_pm: bool = True, millis: bool = True) -> str:
    """Format milliseconds since midnight; values wrap at midnight.

    >>> format_clock(9_296_789)
    '02:34:56:789 AM'
    >>> format_clock(0, am_pm=False)
    '00:00:00:000'
    """
    t = int(t_ms) % MS_PER_DAY
    h, rem = divmod(t, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    suffix = ""
    if am_pm:
        suffix = " AM" if h < 12 else " PM"
        h = h % 12 or 12
    hh = f"{h:02d}" if pad_hours else str(h)
    out = f"{hh}:{m:02d}:{s:02d}"
    if millis:
        out += f":{ms:03d}"
    return out + suffix


def parse_clock(text: str) -> int:
    """Inverse of :func:`format_clock`; accepts padded or unpadded hours, with or without AM/PM."""
    match = _CLOCK_RE.fullmatch(text.strip())
    if match is None:
        raise ValueError(f"not a clock time: {text!r}")
    return _from_match(match)


def _from_match(match: re.Match) -> int:
    h, m, s = int(match["h"]), int(match["m"]), int(match["s"])
    ms = int(match["ms"] or 0)
    ampm = match["ampm"]
    if m > 59 or s > 59:
        raise ValueError(f"invalid clock time {match.group(0)!r}")
    if ampm:
        if not 1 <= h <= 12:
            raise ValueError(f"invalid 12-hour clock time {match.group(0)!r}")
        h = h % 12 + (12 if ampm.upper() == "PM" else 0)
    elif h > 23:
        raise ValueError(f"invalid clock time {match.group(0)!r}")
    return ((h * 60 + m) * 60 + s) * 1000 + ms


def find_clocks(text: str) -> list[int]:
    """All clock times appearing in free text, in order."""
    return [_from_match(m) for m in _CLOCK_RE.finditer(text)]


def clock_at(start_clock: int, index: int, rate: float) -> int:
    """Clock time (ms since midnight) of sample ``index`` in a window starting at ``start_clock``."""
    return (int(start_clock) + int(round(index * 1000.0 / rate))) % MS_PER_DAY


def format_range(start_ms: int, end_ms: int, am_pm: bool = False) -> str:
    return f"From {format_clock(start_ms, am_pm=am_pm)} to {format_clock(end_ms, am_pm=am_pm)}"
