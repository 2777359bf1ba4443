"""Deterministic SVG plots of a sample's three channels against clock time."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import FuncFormatter  # noqa: E402

from .clock import format_clock  # noqa: E402

MAX_POINTS = 10_000
AXIS_NAMES = ("x", "y", "z")


def decimate_minmax(t: np.ndarray, y: np.ndarray, max_points: int = MAX_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Keep each bin's minimum and maximum in time order so the envelope survives downsampling."""
    n = len(y)
    if n <= max_points:
        return t, y
    bins = max_points // 2
    edges = np.linspace(0, n, bins + 1).astype(np.int64)
    keep = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        seg = y[lo:hi]
        a, b = lo + int(seg.argmin()), lo + int(seg.argmax())
        keep.extend((a, b) if a <= b else (b, a))
    idx = np.asarray(keep)
    return t[idx], y[idx]


def render_plot(
    series: np.ndarray,
    rate: float,
    start_clock_ms: int = 0,
    title: str = "",
    path: str | Path | None = None,
    max_points: int = MAX_POINTS,
) -> bytes:
    """Three stacked traces; identical input gives identical bytes."""
    series = np.asarray(series, dtype=np.float64)
    t = np.arange(series.shape[1]) / float(rate)
    with plt.rc_context({"svg.hashsalt": "tshaystack", "svg.fonttype": "none", "path.simplify": False}):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(10, 5))
        for ax, channel, name in zip(axes, series, AXIS_NAMES):
            tx, ty = decimate_minmax(t, channel, max_points)
            ax.plot(tx, ty, linewidth=0.6, color="black")
            ax.set_ylabel(name)
        axes[-1].xaxis.set_major_formatter(
            FuncFormatter(lambda s, _: format_clock(start_clock_ms + int(round(s * 1000)), millis=False))
        )
        axes[-1].set_xlabel("clock time")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    data = buf.getvalue()
    if path is not None:
        Path(path).write_bytes(data)
    return data


def render_sample_plot(sample, path: str | Path | None = None) -> bytes:
    return render_plot(sample.series, sample.rate, sample.start_clock_ms, sample.id, path)
