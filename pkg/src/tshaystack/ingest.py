"""Loading, resampling, splitting and synthesizing annotated accelerometer recordings.

CSV layout (one file per participant)::

    # rate=100            <- optional; otherwise inferred from timestamps
    time,x,y,z,annotation
    0,0.01,-0.98,0.12,sleep
    ...

``time`` is either integer milliseconds or an ISO-8601 timestamp. Rows with an
empty annotation are unannotated.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .labels import CLASS_INDEX, CLASSES

MS_PER_DAY = 86_400_000


class IngestError(ValueError):
    """Raised for malformed input files or invalid recording operations."""


@dataclass(frozen=True)
class Recording:
    participant_id: str
    channels: np.ndarray  # shape (3, n), float64, g units
    rate: float
    start_clock: int  # ms since midnight
    annotations: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != 3:
            raise IngestError("channels must have shape (3, n)")
        if ch.shape[1] < 1:
            raise IngestError("no samples")
        if not self.rate > 0:
            raise IngestError("rate must be positive")
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "start_clock", int(self.start_clock) % MS_PER_DAY)
        anns = tuple((int(s), int(e), str(c)) for s, e, c in self.annotations)
        prev_end = 0
        for s, e, _ in anns:
            if s < prev_end or e <= s or e > ch.shape[1]:
                raise IngestError(f"annotation span [{s}, {e}) overlaps, is unsorted or out of range")
            prev_end = e
        object.__setattr__(self, "annotations", anns)

    @property
    def length(self) -> int:
        return int(self.channels.shape[1])

    def label_codes(self) -> np.ndarray:
        """Per-sample class index into ``CLASSES``; -1 marks unannotated samples."""
        codes = np.full(self.length, -1, dtype=np.int16)
        for s, e, c in self.annotations:
            codes[s:e] = CLASS_INDEX[c]
        return codes


@dataclass(frozen=True)
class LabelMap:
    mapping: dict[str, str]
    classes: tuple[str, ...] = CLASSES

    def __post_init__(self) -> None:
        if len(self.classes) != 10 or len(set(self.classes)) != 10:
            raise IngestError("label map must define exactly 10 distinct classes")
        unknown = {c for c in self.mapping.values() if c not in self.classes}
        if unknown:
            raise IngestError(f"label map targets unknown classes: {sorted(unknown)}")

    @classmethod
    def identity(cls) -> "LabelMap":
        return cls({c: c for c in CLASSES})

    def __call__(self, raw: str) -> str:
        try:
            return self.mapping[raw]
        except KeyError:
            raise IngestError(f"raw label {raw!r} has no mapping") from None


def load_label_map(path: str | Path) -> LabelMap:
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise IngestError(f"{path}:{lineno}: expected 'raw_label<TAB>class'")
        raw, cls = parts[0].strip(), parts[1].strip()
        if raw in mapping and mapping[raw] != cls:
            raise IngestError(f"{path}:{lineno}: raw label {raw!r} mapped twice")
        mapping[raw] = cls
    return LabelMap(mapping)


def _parse_times(col: pd.Series) -> tuple[np.ndarray, int]:
    """Return (ms offsets from the first row, start clock in ms since midnight)."""
    as_num = pd.to_numeric(col, errors="coerce")
    if not as_num.isna().any():
        ms = as_num.to_numpy(dtype=np.float64)
        if not np.all(ms == np.round(ms)):
            raise IngestError("integer millisecond timestamps expected")
        ms = ms.astype(np.int64)
        return ms - ms[0], int(ms[0] % MS_PER_DAY)
    try:
        ts = pd.to_datetime(col.astype(str), format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise IngestError(f"unparseable timestamp: {exc}") from None
    ns = ts.astype("int64").to_numpy()
    first = ts.iloc[0]
    midnight = first.normalize()
    start = int((first - midnight).total_seconds() * 1000 + 0.5)
    return (ns - ns[0]) // 1_000_000, start


def load_recording(path: str | Path, label_map: LabelMap | None = None) -> Recording:
    path = Path(path)
    label_map = label_map or LabelMap.identity()
    text = path.read_text()
    declared_rate = None
    body_lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if key.strip() == "rate":
                declared_rate = float(val)
            continue
        body_lines.append(line)
    if len(body_lines) <= 1:
        raise IngestError(f"{path}: no samples")
    try:
        df = pd.read_csv(
            io.StringIO("\n".join(body_lines)),
            dtype={"annotation": str},
            keep_default_na=False,
            float_precision="round_trip",
        )
    except pd.errors.ParserError as exc:
        raise IngestError(f"{path}: malformed row: {exc}") from None
    if list(df.columns) != ["time", "x", "y", "z", "annotation"]:
        raise IngestError(f"{path}: header must be time,x,y,z,annotation")
    if len(df) == 0:
        raise IngestError(f"{path}: no samples")
    xyz = df[["x", "y", "z"]].apply(pd.to_numeric, errors="coerce")
    bad = xyz.isna().any(axis=1).to_numpy()
    if bad.any():
        raise IngestError(f"{path}: malformed row {int(np.argmax(bad)) + 2}")
    offsets, start_clock = _parse_times(df["time"])
    diffs = np.diff(offsets)
    if np.any(diffs <= 0):
        raise IngestError(f"{path}: non-monotonic timestamps at row {int(np.argmax(diffs <= 0)) + 3}")
    if declared_rate is not None:
        rate = declared_rate
    elif len(diffs):
        step = float(np.median(diffs))
        if np.any(np.abs(diffs - step) > max(1.0, 0.05 * step)):
            raise IngestError(f"{path}: variable sampling rate")
        rate = 1000.0 / step
    else:
        raise IngestError(f"{path}: cannot infer rate from a single row; declare '# rate='")

    raw = df["annotation"].str.strip().to_numpy()
    breaks = np.flatnonzero(raw[1:] != raw[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [len(raw)]))
    annotations = [(int(s), int(e), label_map(raw[s])) for s, e in zip(starts, ends) if raw[s]]
    return Recording(
        participant_id=path.stem,
        channels=xyz.to_numpy(dtype=np.float64).T.copy(),
        rate=rate,
        start_clock=start_clock,
        annotations=tuple(annotations),
    )


def save_recording(rec: Recording, path: str | Path) -> None:
    """Write ``rec`` in the CSV layout accepted by :func:`load_recording`."""
    n = rec.length
    times = rec.start_clock + np.round(np.arange(n) * 1000.0 / rec.rate).astype(np.int64)
    labels = np.full(n, "", dtype=object)
    for s, e, c in rec.annotations:
        labels[s:e] = c
    df = pd.DataFrame(
        {"time": times, "x": rec.channels[0], "y": rec.channels[1], "z": rec.channels[2], "annotation": labels}
    )
    with open(path, "w", newline="") as fh:
        fh.write(f"# rate={rec.rate!r}\n")
        df.to_csv(fh, index=False, float_format="%.17g")


def resample(rec: Recording, target_rate: float) -> Recording:
    """Decimate by an integer factor (keep every k-th sample, no filtering)."""
    if target_rate > rec.rate:
        raise IngestError(f"upsampling {rec.rate} -> {target_rate} Hz is not supported")
    factor = rec.rate / target_rate
    k = int(round(factor))
    if k < 1 or abs(factor - k) > 1e-9:
        raise IngestError(f"non-integer decimation factor {factor}")
    if k == 1:
        return rec
    n_new = rec.length // k
    if n_new < 1:
        raise IngestError("no samples")
    channels = rec.channels[:, : n_new * k : k].copy()
    anns = []
    for s, e, c in rec.annotations:
        s2, e2 = -(-s // k), min(-(-e // k), n_new)
        if e2 > s2:
            anns.append((s2, e2, c))
    return Recording(rec.participant_id, channels, target_rate, rec.start_clock, tuple(anns))


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]
    seed: int

    def of(self, split: str) -> frozenset[str]:
        return {"train": self.train, "val": self.val, "test": self.test}[split]

    def split_of(self, participant_id: str) -> str:
        for name in ("train", "val", "test"):
            if participant_id in self.of(name):
                return name
        raise KeyError(participant_id)


def split_participants(ids: Iterable[str], counts: Sequence[int], seed: int) -> SplitAssignment:
    ids = sorted(set(ids))
    n_train, n_val, n_test = (int(c) for c in counts)
    if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test != len(ids):
        raise IngestError(f"split counts {tuple(counts)} do not sum to {len(ids)} participants")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return SplitAssignment(
        train=frozenset(shuffled[:n_train]),
        val=frozenset(shuffled[n_train : n_train + n_val]),
        test=frozenset(shuffled[n_train + n_val :]),
        seed=seed,
    )


@dataclass(frozen=True)
class ClassSignal:
    """Generative parameters for one activity class."""

    amplitude: float  # g, oscillation amplitude
    freq_lo: float  # Hz
    freq_hi: float  # Hz
    noise: float  # g, white-noise std
    posture: tuple[float, float, float]  # g, mean orientation of gravity
    bout_min_s: float
    bout_max_s: float


DEFAULT_CLASS_SIGNALS: dict[str, ClassSignal] = {
    "sleep": ClassSignal(0.004, 0.10, 0.30, 0.003, (0.10, 0.20, -0.95), 1200, 7200),
    "sitting": ClassSignal(0.015, 0.20, 0.60, 0.008, (0.60, -0.70, 0.20), 300, 3600),
    "standing": ClassSignal(0.030, 0.30, 0.80, 0.015, (0.15, -0.95, 0.10), 60, 900),
    "vehicle": ClassSignal(0.060, 4.00, 8.00, 0.030, (0.50, -0.75, 0.30), 300, 2400),
    "walking": ClassSignal(0.350, 1.60, 2.20, 0.060, (0.20, -0.90, 0.15), 60, 900),
    "mixed-activity": ClassSignal(0.200, 0.50, 3.00, 0.120, (0.35, -0.80, 0.25), 60, 600),
    "bicycling": ClassSignal(0.250, 1.00, 1.50, 0.050, (0.70, -0.55, 0.30), 120, 1200),
    "manual-work": ClassSignal(0.180, 0.80, 1.60, 0.090, (0.45, -0.60, 0.55), 120, 1800),
    "sports": ClassSignal(0.800, 2.50, 3.50, 0.150, (0.25, -0.85, 0.20), 120, 1800),
    "household-chores": ClassSignal(0.120, 0.60, 1.20, 0.070, (0.50, -0.70, 0.35), 120, 1800),
}


@dataclass(frozen=True)
class SynthSpec:
    participants: int = 6
    duration_s: float = 4 * 3600.0
    rate: float = 50.0
    seed: int = 0
    bias_scale: float = 1.0  # g, std of per-participant sensor offset (wrist orientation)
    classes: dict[str, ClassSignal] = field(default_factory=lambda: dict(DEFAULT_CLASS_SIGNALS))

    def __post_init__(self) -> None:
        nums = [self.participants, self.duration_s, self.rate, self.bias_scale]
        for sig in self.classes.values():
            nums += [sig.amplitude, sig.freq_lo, sig.freq_hi, sig.noise, sig.bout_min_s, sig.bout_max_s]
        if not all(math.isfinite(v) and v > 0 for v in nums):
            raise IngestError("synthetic spec parameters must be finite and positive")
        if set(self.classes) != set(CLASSES):
            raise IngestError("synthetic spec must define all 10 classes")
        if int(self.duration_s * self.rate) < 1:
            raise IngestError("synthetic recordings would be empty")


def _synth_bout(sig: ClassSignal, bias: np.ndarray, n: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / rate
    f = rng.uniform(sig.freq_lo, sig.freq_hi)
    phase = rng.uniform(0, 2 * np.pi, size=(3, 1))
    weights = rng.uniform(0.5, 1.0, size=(3, 1))
    base = np.sin(2 * np.pi * f * t + phase) + 0.4 * np.sin(4 * np.pi * f * t + 2 * phase)
    out = sig.amplitude * weights * base
    out += sig.noise * rng.standard_normal((3, n))
    out += (np.asarray(sig.posture) + bias)[:, None]
    return out


def synth_corpus(spec: SynthSpec) -> list[Recording]:
    """Deterministic synthetic participants with class-dependent signal statistics."""
    n = int(spec.duration_s * spec.rate)
    names = list(CLASSES)
    recordings = []
    children = np.random.SeedSequence(spec.seed).spawn(spec.participants)
    for p, child in enumerate(children):
        rng = np.random.default_rng(child)
        bias = rng.normal(0.0, spec.bias_scale, size=3)
        start_clock = int(rng.integers(0, MS_PER_DAY))
        channels = np.empty((3, n))
        annotations = []
        pos, prev = 0, None
        while pos < n:
            cls = names[int(rng.integers(len(names)))]
            if cls == prev:
                continue
            sig = spec.classes[cls]
            dur_s = math.exp(rng.uniform(math.log(sig.bout_min_s), math.log(sig.bout_max_s)))
            length = min(max(1, int(dur_s * spec.rate)), n - pos)
            channels[:, pos : pos + length] = _synth_bout(sig, bias, length, spec.rate, rng)
            annotations.append((pos, pos + length, cls))
            pos += length
            prev = cls
        recordings.append(Recording(f"P{p:03d}", channels, spec.rate, start_clock, tuple(annotations)))
    return recordings


def load_corpus(directory: str | Path, label_map: LabelMap | None = None) -> list[Recording]:
    files = sorted(Path(directory).glob("*.csv"))
    if not files:
        raise IngestError(f"{directory}: no CSV recordings found")
    return [load_recording(f, label_map) for f in files]
