"""File formats: trajectory/summary CSVs and a dependency-free SVG line plot."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .engine import Trajectory

TRAJECTORY_HEADER = ["iter", "agent", "role", "belief_theta1", "belief_theta2"]
SUMMARY_HEADER = ["iter", "avg_belief_true_state"]


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path, traj: Trajectory) -> None:
    beliefs = traj.beliefs
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for i, row in enumerate(beliefs):
            for k, (b1, b2) in enumerate(row):
                w.writerow((i, k, traj.roles[k], _g17(b1), _g17(b2)))


def write_summary_csv(path, curve: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for i, v in enumerate(curve):
            w.writerow((i, _g17(v)))


def _rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise CsvFormatError(path, 1, f"expected header {','.join(header)!r}, got {first!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, row


def _prob(path, lineno, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CsvFormatError(path, lineno, f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise CsvFormatError(path, lineno, f"belief {v} outside [0, 1]")
    return v


def read_summary_csv(path) -> np.ndarray:
    """Parse and validate a summary CSV; iterations must run 0, 1, 2, ..."""
    values = []
    for lineno, (it, v) in _rows(path, SUMMARY_HEADER):
        if it != str(len(values)):
            raise CsvFormatError(path, lineno, f"expected iter {len(values)}, got {it!r}")
        values.append(_prob(path, lineno, v))
    if not values:
        raise CsvFormatError(path, 2, "no data rows")
    return np.array(values)


def validate_trajectory_csv(path, normalization_tol: float = 1e-12) -> int:
    """Check a trajectory CSV against its schema; returns the number of data rows."""
    n = 0
    agents: int | None = None
    for lineno, (it, agent, role, b1, b2) in _rows(path, TRAJECTORY_HEADER):
        if not it.isdigit() or not agent.isdigit():
            raise CsvFormatError(path, lineno, "iter and agent must be nonnegative integers")
        if role not in ("normal", "malicious"):
            raise CsvFormatError(path, lineno, f"unknown role {role!r}")
        p1, p2 = _prob(path, lineno, b1), _prob(path, lineno, b2)
        if abs(p1 + p2 - 1.0) > normalization_tol:
            raise CsvFormatError(path, lineno, f"beliefs sum to {p1 + p2!r}")
        if int(it) == 0:
            agents = int(agent) + 1
        elif agents is None or int(agent) >= agents:
            raise CsvFormatError(path, lineno, f"agent index {agent} out of range")
        n += 1
    if n == 0:
        raise CsvFormatError(path, 2, "no data rows")
    return n


# -- SVG ---------------------------------------------------------------------

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _nice_ticks(upper: float, count: int = 5) -> list[float]:
    if upper <= 0:
        return [0.0]
    raw = upper / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    return [step * i for i in range(int(upper // step) + 1)]


def render_svg(
    series: Sequence[np.ndarray],
    labels: Sequence[str],
    title: str = "Average belief on the true state",
    width: int = 640,
    height: int = 400,
) -> str:
    """One polyline per series; x = iteration, y = average belief in [0, 1]."""
    if len(series) != len(labels):
        raise ValueError("need one label per series")
    left, right, top, bottom = 60, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    x_max = max(max(len(s) - 1 for s in series), 1)

    def sx(i):
        return left + pw * i / x_max

    def sy(v):
        return top + ph * (1.0 - v)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _nice_ticks(x_max):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in np.linspace(0, 1, 6):
        y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{t:.1f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">iteration</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">average belief on true state</text>'
    )
    for idx, (s, label) in enumerate(zip(series, labels)):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(s))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}">'
                   f"<title>{escape(label)}</title></polyline>")
        ly = top + 14 + 16 * idx
        out.append(f'<line x1="{left + pw - 110}" y1="{ly}" x2="{left + pw - 90}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 85}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_summaries(paths: Sequence, labels: Sequence[str] | None, out_path, title: str | None = None) -> Path:
    labels = list(labels) if labels else [Path(p).stem for p in paths]
    if len(labels) != len(paths):
        raise ValueError(f"{len(paths)} CSV files but {len(labels)} labels")
    series = [read_summary_csv(p) for p in paths]
    svg = render_svg(series, labels, title or "Average belief on the true state")
    out_path = Path(out_path)
    out_path.write_text(svg)
    return out_path
