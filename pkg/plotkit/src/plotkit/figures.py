"""Figure builders for the sweep output families.

Every figure is deterministic: fixed style, legends sorted, vector (SVG)
output. Delay and latency CDFs use a log x-axis and render undetected runs
as a terminal plateau annotated "Inf".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import cdf_points, detection_f1, group_by, load_runs

__all__ = ["FigureSpec", "FIGURES", "render", "render_all"]

_STYLE = {
    "figure.figsize": (5.2, 3.4),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "svg.hashsalt": "serene-plotkit",
}


@dataclass
class FigureSpec:
    """One render request: which family, which CSVs, where the image goes."""

    figure: str
    inputs: list[str | Path]
    output: str | Path
    options: dict = field(default_factory=dict)


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else math.nan


def _plot_cdf_family(ax, series, xlabel):
    """Log-x CDF curves with an Inf plateau when mass never materializes."""
    finite_max = 0.0
    for _, values in series:
        finite = [v for v in values if v is not None and not math.isinf(v) and v > 0]
        if finite:
            finite_max = max(finite_max, max(finite))
    inf_x = max(finite_max, 1e-3) * 4.0
    plotted_inf = False
    for label, values in series:
        xs, ys, inf_fraction = cdf_points(values)
        xs = [x for x in xs if x > 0] or [1e-3]
        ys = ys[-len(xs):]
        top = ys[-1] if ys else 0.0
        line, = ax.step(xs, ys, where="post", label=label)
        if inf_fraction > 0:
            ax.plot([xs[-1], inf_x], [top, top], linestyle=":", color=line.get_color())
            ax.plot([inf_x], [top], marker="x", color=line.get_color())
            plotted_inf = True
    ax.set_xscale("log")
    ax.set_ylim(0, 1.02)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    if plotted_inf:
        ax.annotate("Inf", (inf_x, 0.02), ha="center", fontsize=8)
    ax.legend(loc="lower right", fontsize=8)


def _fig3a(ax, runs, options):
    collusion = [r for r in runs if r.ground_truth_collusion]
    series = [
        (scheme, [r.detection_delay_s for r in group])
        for scheme, group in group_by(collusion, lambda r: r.scheme).items()
    ]
    _plot_cdf_family(ax, series, "detection delay (s)")
    ax.set_title("Detection delay CDF")


def _fig3b(ax, runs, options):
    collusion = [r for r in runs if r.ground_truth_collusion]
    series = []
    for scheme, group in group_by(collusion, lambda r: r.scheme).items():
        values = [
            r.detection_epochs if r.proper_detection else math.inf
            for r in group
        ]
        series.append((scheme, values))
    _plot_cdf_family(ax, series, "detection delay (epochs)")
    ax.set_title("Detection delay CDF, in epochs")


def _fig3c(ax, runs, options):
    schemes = group_by(runs, lambda r: r.scheme)
    pcs = sorted({r.p_collude for r in runs if r.ground_truth_collusion})
    width = 0.8 / max(len(schemes), 1)
    for i, (scheme, group) in enumerate(schemes.items()):
        f1s = []
        for pc in pcs:
            cell = [r for r in group if (not r.ground_truth_collusion) or r.p_collude == pc]
            f1s.append(detection_f1(cell) or 0.0)
        xs = np.arange(len(pcs)) + i * width
        ax.bar(xs, f1s, width=width, label=scheme)
    ax.set_xticks(np.arange(len(pcs)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{pc:g}" for pc in pcs])
    ax.set_xlabel("collusion probability")
    ax.set_ylabel("detection f1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Detection accuracy")
    ax.legend(fontsize=8)


def _fig4a(ax, runs, options):
    collusion = [r for r in runs if r.ground_truth_collusion]
    by_l = group_by(collusion, lambda r: r.cvt_len)
    pcs = sorted({r.p_collude for r in collusion})
    for lv, group in by_l.items():
        medians = []
        for pc in pcs:
            delays = [r.detection_delay_s for r in group if r.p_collude == pc
                      if r.detection_delay_s is not None]
            medians.append(float(np.median(delays)) if delays else math.nan)
        ax.plot(pcs, medians, marker="o", label=f"L={lv}")
    ax.set_xlabel("collusion probability")
    ax.set_ylabel("median detection delay (s)")
    ax.set_title("Detection delay by table size")
    ax.legend(fontsize=8)


def _fig4b(ax, runs, options):
    collusion = [r for r in runs if r.ground_truth_collusion]
    series = [
        (f"L={lv}", [r.detection_delay_s for r in group])
        for lv, group in group_by(collusion, lambda r: r.cvt_len).items()
    ]
    _plot_cdf_family(ax, series, "detection delay (s)")
    ax.set_title("Detection delay CDF by table size")


def _fig5a(ax, runs, options):
    pc = options.get("pc", 0.5)
    cells = [r for r in runs if r.ground_truth_collusion and r.p_collude == pc]
    schemes = group_by(cells, lambda r: r.scheme)
    fractions = sorted({r.colluding_fraction for r in cells})
    width = 0.8 / max(len(schemes), 1)
    for i, (scheme, group) in enumerate(schemes.items()):
        means = []
        for cf in fractions:
            means.append(_mean([r.mitigation_f1 for r in group if r.colluding_fraction == cf]))
        xs = np.arange(len(fractions)) + i * width
        ax.bar(xs, means, width=width, label=scheme)
    ax.set_xticks(np.arange(len(fractions)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{cf:.0%}" for cf in fractions], fontsize=7)
    ax.set_xlabel("colluding fraction")
    ax.set_ylabel("mitigation f1")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"Mitigation accuracy at $p_c$={pc:g}")
    ax.legend(fontsize=8)


def _fig5b(ax, runs, options):
    cells = [r for r in runs if r.ground_truth_collusion]
    schemes = group_by(cells, lambda r: r.scheme)
    pcs = sorted({r.p_collude for r in cells})
    width = 0.8 / max(len(schemes), 1)
    for i, (scheme, group) in enumerate(schemes.items()):
        means = [
            _mean([r.mitigation_f1 for r in group if r.p_collude == pc])
            for pc in pcs
        ]
        xs = np.arange(len(pcs)) + i * width
        ax.bar(xs, means, width=width, label=scheme)
    ax.set_xticks(np.arange(len(pcs)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{pc:g}" for pc in pcs])
    ax.set_xlabel("collusion probability")
    ax.set_ylabel("mitigation f1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Mitigation accuracy, all colluding fractions")
    ax.legend(fontsize=8)


def _fig5c(ax, runs, options):
    cells = [r for r in runs if r.ground_truth_collusion]
    series = [
        (scheme, [r.mitigation_latency_s for r in group])
        for scheme, group in group_by(cells, lambda r: r.scheme).items()
    ]
    _plot_cdf_family(ax, series, "mitigation latency (s)")
    ax.set_title("Mitigation latency CDF")


def _fig6(ax, runs, options):
    cells = [r for r in runs if r.ground_truth_collusion]
    by_e = group_by(cells, lambda r: r.obs_per_edge)
    pcs = sorted({r.p_collude for r in cells})
    width = 0.8 / max(len(by_e), 1)
    for i, (ev, group) in enumerate(by_e.items()):
        means = [
            _mean([r.mitigation_f1 for r in group if r.p_collude == pc])
            for pc in pcs
        ]
        xs = np.arange(len(pcs)) + i * width
        ax.bar(xs, means, width=width, label=f"e={ev}")
    ax.set_xticks(np.arange(len(pcs)) + 0.4 - width / 2)
    ax.set_xticklabels([f"{pc:g}" for pc in pcs])
    ax.set_xlabel("collusion probability")
    ax.set_ylabel("mitigation f1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Mitigation accuracy by verification budget")
    ax.legend(fontsize=8)


FIGURES = {
    "fig3a": _fig3a,
    "fig3b": _fig3b,
    "fig3c": _fig3c,
    "fig4a": _fig4a,
    "fig4b": _fig4b,
    "fig5a": _fig5a,
    "fig5b": _fig5b,
    "fig5c": _fig5c,
    "fig6": _fig6,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure family to a vector image; returns the output path."""
    if spec.figure not in FIGURES:
        raise ValueError(f"unknown figure {spec.figure!r}; known: {sorted(FIGURES)}")
    runs = []
    for path in spec.inputs:
        runs.extend(load_runs(path))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        FIGURES[spec.figure](ax, runs, spec.options)
        out = Path(spec.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, format=out.suffix.lstrip(".") or "svg", metadata={"Date": None})
        plt.close(fig)
    return out


def render_all(in_dir: str | Path, out_dir: str | Path, options=None) -> list[Path]:
    """Render every family from the runs.csv files under ``in_dir``."""
    in_dir = Path(in_dir)
    inputs = sorted(in_dir.rglob("runs.csv"))
    if not inputs:
        raise FileNotFoundError(f"no runs.csv under {in_dir}")
    outputs = []
    for name in sorted(FIGURES):
        spec = FigureSpec(name, inputs, Path(out_dir) / f"{name}.svg", options or {})
        outputs.append(render(spec))
    return outputs
