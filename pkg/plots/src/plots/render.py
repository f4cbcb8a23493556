"""Figure construction from qwqkd CSV outputs.

Two figure kinds are supported:

``c_vs_P``
    reads ``P,c_min,t_opt`` summaries (``qwqkd sweep-c --p-list ...``) and
    plots the minimal security parameter against P.

``qer_vs_P``
    reads ``P,q_at_threshold,...`` summaries (``qwqkd threshold --p-list
    ...``) and plots the maximally tolerated disturbance against P.

All referenced files must share the same P axis.  Output is deterministic
for identical inputs (fixed style, salted SVG ids, no timestamps).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KIND_COLUMNS = {"c_vs_P": "c_min", "qer_vs_P": "q_at_threshold"}
KIND_YLABEL = {
    "c_vs_P": "minimal security parameter c",
    "qer_vs_P": "maximally tolerated QER",
}


class FigureSpecError(ValueError):
    """Malformed figure spec or inconsistent input files."""


@dataclass
class FigureSpec:
    kind: str
    series: list  # (label, path) pairs
    output: Path
    image_format: str = ""

    def __post_init__(self):
        if self.kind not in KIND_COLUMNS:
            raise FigureSpecError(f"unknown figure kind {self.kind!r}")
        if not self.series:
            raise FigureSpecError("series list is empty")
        self.output = Path(self.output)
        if not self.image_format:
            self.image_format = self.output.suffix.lstrip(".") or "png"
        if self.image_format not in ("png", "svg"):
            raise FigureSpecError(f"unsupported image format {self.image_format!r}")
        missing = [str(p) for _, p in self.series if not Path(p).exists()]
        if missing:
            raise FigureSpecError("missing input files: " + ", ".join(missing))


@dataclass
class RenderedFigure:
    """What was drawn, for callers that verify the figure against its data."""

    output: Path
    p_axis: list
    series: dict = field(default_factory=dict)  # label -> y values


def load_figure_spec(path) -> FigureSpec:
    raw = json.loads(Path(path).read_text())
    series = [(s["label"], Path(s["path"])) for s in raw.get("series", [])]
    return FigureSpec(
        kind=raw.get("kind", ""),
        series=series,
        output=raw.get("output", "figure.png"),
        image_format=raw.get("format", ""),
    )


def read_series(path: Path, column: str) -> tuple[list, list]:
    """Read (P, column) pairs from a qwqkd summary CSV, skipping comments."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(r for r in fh if not r.startswith("#"))]
    if not rows or column not in rows[0]:
        raise FigureSpecError(f"{path}: expected columns P,{column}")
    ps = [int(r["P"]) for r in rows]
    ys = [float(r[column]) for r in rows]
    return ps, ys


def render(spec: FigureSpec) -> RenderedFigure:
    """Draw the figure and write it to spec.output."""
    column = KIND_COLUMNS[spec.kind]
    data = {}
    axes_seen = {}
    for label, path in spec.series:
        ps, ys = read_series(Path(path), column)
        data[label] = (ps, ys)
        axes_seen[str(path)] = ps
    reference = next(iter(axes_seen.values()))
    clashing = [p for p, ps in axes_seen.items() if ps != reference]
    if clashing:
        raise FigureSpecError(
            "input files do not share the P axis: " + ", ".join(clashing))

    plt.rcParams["svg.hashsalt"] = "qwqkd-plots"
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    markers = ["o", "s", "^", "d", "v", "*"]
    for i, (label, (ps, ys)) in enumerate(data.items()):
        ax.plot(ps, ys, marker=markers[i % len(markers)], label=label)
    ax.set_xlabel("P")
    ax.set_ylabel(KIND_YLABEL[spec.kind])
    ax.set_xticks(reference)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, format=spec.image_format,
                metadata={"Software": "qwqkd-plots"} if spec.image_format == "png"
                else {"Date": None})
    plt.close(fig)
    return RenderedFigure(output=spec.output, p_axis=list(reference),
                          series={label: ys for label, (ps, ys) in data.items()})
