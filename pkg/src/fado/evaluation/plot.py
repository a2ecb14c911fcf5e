"""Static SVG scatter of the performance/fairness landscape."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fado.evaluation.benchmark import EvalReport  # noqa: E402
from fado.evaluation.pareto import RULE80  # noqa: E402

_MARKERS = {"none": "o", "rps": "o", "rw": "o", "uasp": "^", "uar": "s"}
_BASELINE_COLORS = {"none": "black", "rps": "tab:blue", "rw": "tab:purple"}


def _panel(ax, report: EvalReport, metric: str, zoom: bool) -> None:
    front = set(report.pareto[metric])
    perf = np.array([p.performance for p in report.points])
    fair = np.array([p.fairness[metric] for p in report.points])
    cmap = plt.get_cmap("RdYlGn_r")
    for kind, marker in _MARKERS.items():
        idx = [i for i, p in enumerate(report.points) if p.kind == kind]
        if not idx:
            continue
        for on_front in (False, True):
            sel = [i for i in idx if (i in front) == on_front]
            if not sel:
                continue
            if kind in _BASELINE_COLORS:
                color = _BASELINE_COLORS[kind]
                kw = {"color": color}
            else:
                kw = {"c": [report.points[i].alpha for i in sel], "cmap": cmap, "vmin": 0.0, "vmax": 1.0}
            ax.scatter(perf[sel], fair[sel], marker=marker, s=60 if on_front else 14,
                       alpha=1.0 if on_front else 0.35, edgecolors="none",
                       label=kind if not on_front else None, **kw)
    ax.axhline(RULE80, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("TPR @ FPR ceiling")
    ax.set_ylabel(metric.replace("_", " "))
    if zoom and front:
        fp = perf[list(front)]
        lo = float(np.quantile(perf, 0.5))
        ax.set_xlim(min(lo, fp.min()) - 0.01, perf.max() + 0.01)
        ax.set_title("top half by performance")
    else:
        ax.set_title("all models")
        ax.legend(loc="lower left", fontsize=7)


def write_svg(report: EvalReport, metric: str, path: str | Path) -> None:
    """Two panels (full and zoomed) with frontier points enlarged; colour encodes alpha."""
    with matplotlib.rc_context({"svg.hashsalt": "fado", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
        _panel(axes[0], report, metric, zoom=False)
        _panel(axes[1], report, metric, zoom=True)
        sm = plt.cm.ScalarMappable(cmap=plt.get_cmap("RdYlGn_r"), norm=plt.Normalize(0.0, 1.0))
        fig.colorbar(sm, ax=axes, label="alpha (weight on performance)")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
