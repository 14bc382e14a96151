"""Figure builders for swing-up runs and solver-convergence comparisons."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import PlotDataError, load_compare, load_run, load_trace

# fixed renderer settings so repeated renders are byte-identical
_SAVEFIG = {"dpi": 150, "metadata": {"Software": "plotviz"}}


def _style(label):
    """Dotted for pseudo-random/cold starts, solid otherwise."""
    low = label.lower()
    if "random" in low or "cold" in low:
        return ":"
    return "-"


def build_swingup_figure(run_dir):
    """Panels: control input, joint coordinates, and mean strains vs time."""
    run = load_run(run_dir)
    wanted = [("controls", "control input"),
              ("joints", "joint coordinates")]
    if "mean_strains" in run.series:
        wanted.append(("mean_strains", "mean strain"))
    for name, _ in wanted:
        if name not in run.series:
            raise PlotDataError(f"run at {run_dir} lacks series {name}")

    fig, axes = plt.subplots(len(wanted), 1, figsize=(7, 2.6 * len(wanted)),
                             sharex=True)
    axes = np.atleast_1d(axes)
    for ax, (name, ylabel) in zip(axes, wanted):
        s = run.series[name]
        for j, col in enumerate(s.columns):
            ax.plot(s.t, s.values[:, j], label=col)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        if len(s.columns) <= 8:
            ax.legend(fontsize=8, loc="upper right")
    axes[-1].set_xlabel("time [s]")
    fig.tight_layout()
    return fig


def render_swingup(run_dir, out_path):
    fig = build_swingup_figure(run_dir)
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)
    return out_path


def build_convergence_figure(path):
    """Cost-vs-iteration curves (log scale) with a timing bar panel.

    Accepts either a compare directory (compare.csv + trace_<label>.csv) or
    a single run directory (trace.csv); the single-run layout has no bars.
    """
    if os.path.exists(os.path.join(path, "compare.csv")):
        entries = load_compare(path)
    elif os.path.exists(os.path.join(path, "trace.csv")):
        idx, cost, _ = load_trace(os.path.join(path, "trace.csv"))
        entries = [{"label": "run", "mean_iter_time": None,
                    "iters": idx, "costs": cost}]
    else:
        raise PlotDataError(f"no compare.csv or trace.csv under {path}")

    with_bars = any(e["mean_iter_time"] is not None for e in entries) \
        and len(entries) > 1
    if with_bars:
        fig, (ax_cost, ax_time) = plt.subplots(
            1, 2, figsize=(9, 3.4), gridspec_kw={"width_ratios": [2, 1]})
    else:
        fig, ax_cost = plt.subplots(figsize=(6, 3.4))

    for e in entries:
        ax_cost.plot(e["iters"], e["costs"], _style(e["label"]),
                     label=e["label"])
    ax_cost.set_xlabel("iteration")
    ax_cost.set_ylabel("cost")
    ax_cost.set_yscale("log")
    ax_cost.grid(True, alpha=0.3)
    if len(entries) > 1:
        ax_cost.legend(fontsize=9)

    if with_bars:
        labels = [e["label"] for e in entries]
        times = [e["mean_iter_time"] for e in entries]
        ax_time.bar(labels, times)
        ax_time.set_ylabel("mean time per iteration [s]")
        ax_time.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def render_convergence(path, out_path):
    fig = build_convergence_figure(path)
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)
    return out_path
