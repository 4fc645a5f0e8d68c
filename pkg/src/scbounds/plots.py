"""Figure rendering for the CLI report paths.

Every figure goes straight to a file (Agg backend); nothing is shown
interactively.
"""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = [
    "save_weights_figure",
    "save_series_figure",
    "save_comparison_figure",
]

_OBSERVED_STYLE = dict(color="black", linewidth=1.8)
_SYNTH_STYLE = dict(color="tab:blue", linewidth=1.6, linestyle="--")
_BAND_STYLE = dict(color="tab:blue", alpha=0.2, linewidth=0)


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_weights_figure(
    path: str, weights: Mapping[str, float], title: str = "donor weights"
) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(weights) + 2.0), 3.2))
    units = list(weights)
    ax.bar(range(len(units)), [weights[u] for u in units], color="tab:blue")
    ax.set_xticks(range(len(units)))
    ax.set_xticklabels(units, rotation=45, ha="right")
    ax.set_ylabel("weight")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    _finish(fig, path)


def save_series_figure(
    path: str,
    period_labels: Sequence,
    observed: Sequence[float],
    synthetic: Sequence[float],
    t0_index: int,
    lower: Optional[Sequence[float]] = None,
    upper: Optional[Sequence[float]] = None,
    title: str = "synthetic control",
    observed_label: str = "observed",
) -> None:
    """Observed vs synthetic series with an optional bound band."""
    x = range(len(period_labels))
    fig, ax = plt.subplots(figsize=(7.0, 3.8))
    if lower is not None and upper is not None:
        ax.fill_between(x, lower, upper, label="misspecification interval", **_BAND_STYLE)
    ax.plot(x, observed, label=observed_label, **_OBSERVED_STYLE)
    ax.plot(x, synthetic, label="synthetic", **_SYNTH_STYLE)
    ax.axvline(t0_index - 0.5, color="gray", linestyle=":", linewidth=1.2)
    _sparse_ticks(ax, period_labels)
    ax.set_ylabel("outcome")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def save_comparison_figure(
    path: str,
    period_labels: Sequence,
    truth: Sequence[float],
    panels: Mapping[str, dict],
    t0_index: int,
) -> None:
    """One subplot per method: truth, synthetic series, and bound band.

    panels maps a method name to {"synthetic": ..., "lower": ..., "upper": ...}
    (bounds may be None).
    """
    n = len(panels)
    fig, axes = plt.subplots(
        1, n, figsize=(4.2 * n, 3.6), sharey=True, squeeze=False
    )
    x = range(len(period_labels))
    for ax, (name, data) in zip(axes[0], panels.items()):
        lower, upper = data.get("lower"), data.get("upper")
        if lower is not None and upper is not None:
            ax.fill_between(x, lower, upper, **_BAND_STYLE)
        ax.plot(x, truth, label="true outcome", **_OBSERVED_STYLE)
        ax.plot(x, data["synthetic"], label="synthetic", **_SYNTH_STYLE)
        ax.axvline(t0_index - 0.5, color="gray", linestyle=":", linewidth=1.2)
        _sparse_ticks(ax, period_labels)
        ax.set_title(name)
    axes[0][0].set_ylabel("outcome")
    axes[0][0].legend(loc="best", fontsize=8)
    _finish(fig, path)


def _sparse_ticks(ax, period_labels: Sequence, max_ticks: int = 10) -> None:
    n = len(period_labels)
    step = max(1, n // max_ticks)
    ticks = list(range(0, n, step))
    ax.set_xticks(ticks)
    ax.set_xticklabels([str(period_labels[t]) for t in ticks], fontsize=8)
