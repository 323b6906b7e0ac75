"""Report figures rendered next to the JSON/CSV output: completion-time
and path-error distributions per interface, and trajectory overlays
against the target square."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .config import MODES

MODE_LABEL = {"cobotar": "CobotAR", "gamepad": "Gamepad", "pendant": "Pendant"}


def _grouped(rows, key):
    out = {}
    for row in rows:
        out.setdefault(row["interface"], []).append(row[key])
    return {m: out[m] for m in MODES if m in out} or out


def _boxplot(groups: dict, title: str, ylabel: str, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    labels = [MODE_LABEL.get(m, m) for m in groups]
    ax.boxplot(list(groups.values()), tick_labels=labels)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _trajectories(named_trajs, task, path: str) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    if task is not None:
        corners = task.corners_mm()
        xs = list(corners[:, 0]) + [corners[0, 0]]
        ys = list(corners[:, 1]) + [corners[0, 1]]
        ax.plot(xs, ys, "k--", linewidth=1.5, label="target square")
    for label, traj in named_trajs:
        ax.plot(traj.xy[:, 0], traj.xy[:, 1], linewidth=1.0, label=label)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_title("TCP trajectories")
    ax.set_aspect("equal")
    ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figures(report: dict, named_trajs, task, outdir) -> list:
    """Write the figure set; returns the file paths."""
    os.makedirs(outdir, exist_ok=True)
    rows = report["sessions"]
    paths = []
    if rows:
        p = os.path.join(outdir, "completion_times.png")
        _boxplot(
            _grouped(rows, "time_s"), "Completion time", "seconds", p
        )
        paths.append(p)
        p = os.path.join(outdir, "path_errors.png")
        _boxplot(
            _grouped(rows, "error_mm"), "Mean path error", "mm", p
        )
        paths.append(p)
    if named_trajs:
        p = os.path.join(outdir, "trajectories.png")
        _trajectories(named_trajs, task, p)
        paths.append(p)
    return paths
