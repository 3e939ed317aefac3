"""Plot data (CSV) and rendered figures for a finished experiment.

For each problem, ``<out>/<problem>/plots/`` receives

* ``gap_curves.csv``            mean GAP after each decision, one column per policy
* ``discrepancy.csv``           end-of-run L2-discrepancy of every run
* ``discrepancy_quartiles.csv`` min / quartiles / max / mean per policy
* ``pareto_scatter.csv``        a_gap vs mean discrepancy with dominance flag
* ``<problem>.png``             three panels drawn from the files above
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .config import ExperimentConfig  # noqa: E402
from .runner import _atomic_write, _fmt, collect, problem_summary  # noqa: E402

QUARTILE_COLUMNS = ["policy", "min", "q1", "median", "q3", "max", "mean"]


def _write_rows(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def quartiles(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "min": float(v.min()),
        "q1": float(np.quantile(v, 0.25)),
        "median": float(np.median(v)),
        "q3": float(np.quantile(v, 0.75)),
        "max": float(v.max()),
        "mean": float(v.mean()),
    }


def get_figure(width=15, height=None, ncols=3):
    golden_ratio = (math.sqrt(5) - 1.0) / 2.0
    height = height or width / ncols * golden_ratio + 1.0
    fig, axes = plt.subplots(1, ncols, figsize=(width, height), facecolor="w")
    for ax in np.atleast_1d(axes):
        ax.tick_params(labelsize=9)
    return fig, axes


def emit_plots(cfg: ExperimentConfig, render: bool = True) -> list[Path]:
    """Write plot data for every problem; draw PNGs unless ``render=False``.

    Raises ``FileNotFoundError`` listing the missing traces when the bundle
    is incomplete.
    """
    written = []
    for spec in cfg.problems:
        groups = collect(cfg, spec)
        rows, annotated = problem_summary(cfg, spec)
        pdir = Path(cfg.out) / spec.name / "plots"

        ok = [g for g in groups if g.curves]
        means = {g.policy: np.mean(np.array(g.curves), axis=0) for g in ok}
        length = max((m.size for m in means.values()), default=0)
        gap_rows = []
        for i in range(length):
            gap_rows.append([i + 1] + [means[g.policy][i] for g in ok])
        _write_rows(pdir / "gap_curves.csv", ["decision"] + [g.policy for g in ok], gap_rows)

        raw = [(g.policy, r, v) for g in ok for r, v in enumerate(g.discrepancies)]
        _write_rows(pdir / "discrepancy.csv", ["policy", "run", "d_l2"], raw)
        qrows = []
        for g in ok:
            q = quartiles(g.discrepancies)
            qrows.append([g.policy] + [q[c] for c in QUARTILE_COLUMNS[1:]])
        _write_rows(pdir / "discrepancy_quartiles.csv", QUARTILE_COLUMNS, qrows)

        scatter = [(p.policy, p.a_gap, p.d_l2, p.dominated) for p in annotated]
        _write_rows(pdir / "pareto_scatter.csv", ["policy", "a_gap", "d_l2_mean", "dominated"], scatter)
        written += [pdir / n for n in
                    ("gap_curves.csv", "discrepancy.csv", "discrepancy_quartiles.csv", "pareto_scatter.csv")]

        if render and ok:
            written.append(_render(spec.name, ok, means, annotated, pdir / f"{spec.name}.png"))
    return written


def _render(name, groups, means, annotated, path: Path) -> Path:
    fig, (ax_gap, ax_box, ax_par) = get_figure()
    colors = plt.cm.tab20(np.linspace(0, 1, max(len(groups), 2)))
    for color, g in zip(colors, groups):
        curve = means[g.policy]
        ax_gap.plot(np.arange(1, curve.size + 1), curve, color=color, lw=1.4, label=g.policy)
    ax_gap.set_xlabel("BO iteration")
    ax_gap.set_ylabel("average GAP")
    ax_gap.set_ylim(-0.02, 1.02)
    ax_gap.legend(fontsize=7, loc="lower right")

    ax_box.boxplot([g.discrepancies for g in groups])
    ax_box.set_xticks(np.arange(1, len(groups) + 1))
    ax_box.set_xticklabels([g.policy for g in groups], rotation=60, ha="right", fontsize=7)
    ax_box.set_ylabel("L2-discrepancy")

    for p in annotated:
        marker_face = "none" if p.dominated else "k"
        ax_par.scatter(p.d_l2, p.a_gap, s=40, facecolors=marker_face, edgecolors="k")
        ax_par.annotate(p.policy, (p.d_l2, p.a_gap), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax_par.set_xlabel("mean L2-discrepancy (minimize)")
    ax_par.set_ylabel("A_GAP (maximize)")
    ax_par.set_title("filled: Pareto optimal", fontsize=8)

    fig.suptitle(name)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
