"""Deterministic SVG line plots and CSV export for run logs.

Each metric becomes one panel.  ``mean_reward_per_format`` expands to one
curve per format channel, coloured blue / green / orange for f1 / f2 / f3.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .harness import SMOOTHING_WINDOW, moving_average, read_log
from .rewards import ConfigError

FORMAT_COLORS = {
    "F1Nested": "#1f77b4",
    "F2Nested": "#2ca02c",
    "F3Nested": "#ff7f0e",
    "F1Excl": "#1f77b4",
    "F2Excl": "#2ca02c",
    "F3Excl": "#ff7f0e",
    "Strict": "#7f7f7f",
    "Composite": "#9467bd",
}
RUN_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
FORMAT_GROUP = "mean_reward_per_format"
LEASH_METRICS = ("kl_to_reference", "mean_total_reward", "mean_completion_length")

PANEL_W, PANEL_H = 420, 280
MARGIN = dict(left=60, right=20, top=30, bottom=40)


class PlotFormat(str, enum.Enum):
    SVG = "SVG"
    CSV = "CSV"


@dataclass
class PlotSpec:
    runs: list[str]
    metrics: list[str] = field(default_factory=list)
    smoothing: int = SMOOTHING_WINDOW
    out: str = "plot.svg"
    format: PlotFormat = PlotFormat.SVG

    def resolved_metrics(self) -> list[str]:
        if self.metrics:
            return list(self.metrics)
        return [FORMAT_GROUP] if len(self.runs) == 1 else list(LEASH_METRICS)


@dataclass
class Series:
    label: str
    color: str
    steps: np.ndarray
    values: np.ndarray


def _metric_series(records: list[dict], metric: str, path: str) -> dict[str, np.ndarray]:
    """Raw per-step values for ``metric``; a dict field yields one series per key."""
    if not records:
        return {}
    head, _, sub = metric.partition(".")
    first = records[0]
    if head not in first or (sub and (not isinstance(first[head], dict) or sub not in first[head])):
        raise ConfigError(f"metric {metric!r} not present in {path}")
    if sub:
        return {sub: np.array([r[head][sub] for r in records], dtype=float)}
    if isinstance(first[head], dict):
        return {k: np.array([r[head][k] for r in records], dtype=float) for k in first[head]}
    return {metric: np.array([r[head] for r in records], dtype=float)}


def collect(spec: PlotSpec) -> list[tuple[str, list[Series]]]:
    """Smoothed series grouped by panel (one panel per metric)."""
    logs = []
    for path in spec.runs:
        try:
            logs.append((path, read_log(path)[1]))
        except OSError as exc:
            raise ConfigError(f"cannot read log {path}: {exc}") from exc
    panels = []
    for metric in spec.resolved_metrics():
        series: list[Series] = []
        for i, (path, records) in enumerate(logs):
            steps = np.array([r["step"] for r in records], dtype=float)
            run_label = Path(path).parent.name or Path(path).stem
            for key, values in _metric_series(records, metric, path).items():
                per_channel = key != metric
                color = FORMAT_COLORS.get(key, RUN_COLORS[i % len(RUN_COLORS)]) if per_channel and len(logs) == 1 else RUN_COLORS[i % len(RUN_COLORS)]
                label = key if len(logs) == 1 else (f"{run_label}:{key}" if per_channel else run_label)
                series.append(Series(label, color, steps, moving_average(values, spec.smoothing)))
        panels.append((metric, series))
    return panels


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_range(lo: float, hi: float) -> tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo < 1e-9:
        return lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _panel(metric: str, series: list[Series], x0: float) -> list[str]:
    left, top = x0 + MARGIN["left"], MARGIN["top"]
    w = PANEL_W - MARGIN["left"] - MARGIN["right"]
    h = PANEL_H - MARGIN["top"] - MARGIN["bottom"]
    xs = [s.steps for s in series if s.steps.size]
    ys = [s.values for s in series if s.values.size]
    xmax = max((float(x.max()) for x in xs), default=1.0) or 1.0
    ylo, yhi = _nice_range(min((float(y.min()) for y in ys), default=0.0), max((float(y.max()) for y in ys), default=1.0))

    def px(x: float) -> float:
        return left + w * x / xmax

    def py(y: float) -> float:
        return top + h * (1.0 - (y - ylo) / (yhi - ylo))

    out = [
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="none" stroke="#333"/>',
        f'<text x="{_fmt(left + w / 2)}" y="{_fmt(top - 10)}" text-anchor="middle" font-size="13">{escape(metric)}</text>',
        f'<text x="{_fmt(left + w / 2)}" y="{_fmt(top + h + 32)}" text-anchor="middle" font-size="11">step</text>',
    ]
    for i in range(5):
        yv = ylo + (yhi - ylo) * i / 4
        xv = xmax * i / 4
        out.append(f'<text x="{_fmt(left - 6)}" y="{_fmt(py(yv) + 4)}" text-anchor="end" font-size="10">{yv:.2f}</text>')
        out.append(f'<text x="{_fmt(px(xv))}" y="{_fmt(top + h + 16)}" text-anchor="middle" font-size="10">{xv:.0f}</text>')
    for j, s in enumerate(series):
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.steps, s.values))
        out.append(f'<polyline fill="none" stroke="{s.color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 14 + 14 * j
        out.append(f'<line x1="{_fmt(left + 8)}" y1="{_fmt(ly - 4)}" x2="{_fmt(left + 28)}" y2="{_fmt(ly - 4)}" stroke="{s.color}" stroke-width="2"/>')
        out.append(f'<text x="{_fmt(left + 32)}" y="{_fmt(ly)}" font-size="10">{escape(s.label)}</text>')
    return out


def render_svg(panels: list[tuple[str, list[Series]]]) -> str:
    width = PANEL_W * max(len(panels), 1)
    body = ['<?xml version="1.0" encoding="UTF-8"?>']
    body.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif">'
    )
    body.append(f'<rect width="{width}" height="{PANEL_H}" fill="white"/>')
    for i, (metric, series) in enumerate(panels):
        body.extend(_panel(metric, series, i * PANEL_W))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def render_csv(panels: list[tuple[str, list[Series]]]) -> str:
    """One row per step; one column per plotted (smoothed) series."""
    columns = [(f"{metric}/{s.label}" if len(panels) > 1 or s.label != metric else s.label, s) for metric, ss in panels for s in ss]
    steps = sorted({int(x) for _, s in columns for x in s.steps})
    lookup = [dict(zip(s.steps.astype(int).tolist(), s.values.tolist())) for _, s in columns]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step"] + [name for name, _ in columns])
    for step in steps:
        writer.writerow([step] + [f"{d[step]:.6g}" if step in d else "" for d in lookup])
    return buf.getvalue()


def make_plot(spec: PlotSpec) -> Path:
    if spec.smoothing < 1:
        raise ConfigError("smoothing window must be >= 1")
    panels = collect(spec)
    fmt = PlotFormat(spec.format)
    text = render_svg(panels) if fmt is PlotFormat.SVG else render_csv(panels)
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    return out


def plot_runs(runs: Sequence[str | Path], out: str | Path, metrics: Sequence[str] = (), **kw) -> Path:
    return make_plot(PlotSpec(runs=[str(r) for r in runs], metrics=list(metrics), out=str(out), **kw))
