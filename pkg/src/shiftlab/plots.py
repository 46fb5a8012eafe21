"""Figure rendering for the report CSVs.

Each function takes already-computed results and writes one PNG next to the
delimited output. Rendering is headless (Agg) and carries no timestamps, so
repeated runs produce stable files.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import ErrorDecomposition
from .encoder import Trajectory

__all__ = [
    "trajectory_figure",
    "decomposition_figure",
    "measures_figure",
    "baseline_figure",
]

_CRITERION_STYLE = {
    "bottleneck": ("tab:blue", "o"),
    "independence": ("tab:orange", "s"),
    "sufficiency": ("tab:green", "^"),
    "separation": ("tab:red", "v"),
}

_BASELINE_MARKER = {
    "color-only": "X",
    "digit-only": "^",
    "picture": "o",
    "prior-only": "s",
}


def _save(fig, path: str) -> None:
    fig.savefig(path, format="png", dpi=150, bbox_inches="tight")
    plt.close(fig)


def trajectory_figure(
    trajectories: Mapping[str, Trajectory],
    baselines: Mapping[str, tuple[float, float]],
    path: str,
    title: str = "",
) -> None:
    """Train-vs-test cross-entropy curves, one per criterion.

    Each curve is parametrized by the regularization strength; baseline
    scores appear as white-filled markers.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for name, traj in trajectories.items():
        color, marker = _CRITERION_STYLE.get(name, ("gray", "."))
        train = [p.train_ce for p in traj.points]
        test = [p.test_ce for p in traj.points]
        ax.plot(train, test, linestyle="--", linewidth=1.0, color=color,
                marker=marker, markersize=4, label=name)
    for name, (train_ce, test_ce) in baselines.items():
        marker = _BASELINE_MARKER.get(name, "D")
        ax.plot([train_ce], [test_ce], marker=marker, markersize=9,
                markerfacecolor="white", markeredgecolor="black",
                linestyle="none", label=name)
    ax.axhline(np.log(2), color="lightgray", linewidth=0.8, zorder=0)
    ax.axvline(np.log(2), color="lightgray", linewidth=0.8, zorder=0)
    ax.set_xlabel("train cross-entropy (nats)")
    ax.set_ylabel("test cross-entropy (nats)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8, loc="best")
    _save(fig, path)


def decomposition_figure(
    rows: Sequence[tuple[str, float, ErrorDecomposition]],
    path: str,
    title: str = "",
) -> None:
    """Stacked information-loss / latent-error bars with the test error marked.

    The stacked height is the upper bound; the marker shows the achieved test
    error, so the visible gap is the slack of the bound.
    """
    labels = [f"{crit}\n$\\lambda$={lam:g}" for crit, lam, _ in rows]
    info = np.array([d.info_loss for _, _, d in rows])
    latent = np.array([d.latent_error for _, _, d in rows])
    test = np.array([d.test_error for _, _, d in rows])
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(rows), 4.0))
    ax.bar(x, info, width=0.6, color="tab:blue", label="information loss")
    ax.bar(x, latent, width=0.6, bottom=info, color="tab:orange",
           label="latent test error")
    ax.plot(x, test, linestyle="none", marker="_", markersize=22,
            markeredgewidth=2.0, color="black", label="test error")
    ax.set_xticks(x, labels, fontsize=8)
    ax.set_ylabel("nats")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def measures_figure(tables: Mapping[str, Mapping[str, float]], path: str) -> None:
    """Grouped horizontal bars: each information quantity across variants."""
    variants = list(tables)
    quantities = list(next(iter(tables.values())))
    y = np.arange(len(quantities))
    height = 0.8 / max(len(variants), 1)
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(quantities) + 1.5))
    for i, variant in enumerate(variants):
        vals = [tables[variant][q] for q in quantities]
        ax.barh(y + (i - (len(variants) - 1) / 2) * height, vals,
                height=height, label=variant)
    ax.set_yticks(y, quantities, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("nats")
    ax.legend(fontsize=8)
    _save(fig, path)


def baseline_figure(
    tables: Mapping[str, Mapping[str, tuple[float, float]]], path: str
) -> None:
    """Train-vs-test scores of the fixed-feature baselines per variant."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    colors = {v: f"C{i}" for i, v in enumerate(tables)}
    for variant, scores in tables.items():
        for kind, (train_ce, test_ce) in scores.items():
            ax.plot([train_ce], [test_ce],
                    marker=_BASELINE_MARKER.get(kind, "D"), markersize=9,
                    markerfacecolor="white", markeredgecolor=colors[variant],
                    markeredgewidth=1.6, linestyle="none")
    ax.axhline(np.log(2), color="lightgray", linewidth=0.8, zorder=0)
    ax.axvline(np.log(2), color="lightgray", linewidth=0.8, zorder=0)
    handles = [
        plt.Line2D([], [], marker=m, linestyle="none", markersize=8,
                   markerfacecolor="white", markeredgecolor="black", label=k)
        for k, m in _BASELINE_MARKER.items()
    ] + [
        plt.Line2D([], [], marker="o", linestyle="none", markersize=8,
                   color=colors[v], label=v)
        for v in tables
    ]
    ax.legend(handles=handles, fontsize=8)
    ax.set_xlabel("train cross-entropy (nats)")
    ax.set_ylabel("test cross-entropy (nats)")
    _save(fig, path)
