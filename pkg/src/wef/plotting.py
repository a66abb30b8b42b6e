"""Figures rendered next to exported reports."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .stats import Sample, StatsSnapshot  # noqa: E402

REPORT_RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    # fixed metadata keeps repeated renders byte-stable
    "svg.hashsalt": "wef",
}

BOT_COLOR = "#c0392b"
ANON_COLOR = "#2874a6"
LOGGEDIN_COLOR = "#7fb3d5"


def figure_size(width: float = 10.0):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return width, width * golden


def _plot_ratios(ax, samples: Sequence[Sample]) -> None:
    if not samples:
        ax.text(0.5, 0.5, "no samples", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
        return
    t0 = samples[0].taken_at
    xs = [(s.taken_at - t0) / 1000.0 for s in samples]
    bot = [s.bot_ratio * 100 if s.bot_ratio is not None else math.nan for s in samples]
    anon = [s.anon_ratio * 100 if s.anon_ratio is not None else math.nan for s in samples]
    ax.plot(xs, bot, color=BOT_COLOR, label="bot edits (% of all)")
    ax.plot(xs, anon, color=ANON_COLOR, label="anonymous (% of human)")
    first = next((x for x, s in zip(xs, samples) if s.converged), None)
    if first is not None:
        ax.axvline(first, color="0.4", linestyle="--", linewidth=0.8)
        ax.text(first, 1.0, " converged", transform=ax.get_xaxis_transform(),
                va="top", fontsize=8, color="0.3")
    ax.set_xlabel("observation time (s)")
    ax.set_ylabel("percent")
    ax.set_ylim(0, 100)
    ax.legend(loc="upper right", frameon=False)
    ax.set_title("Ratios over time")


def _plot_channels(ax, snap: StatsSnapshot, top: int) -> None:
    rows = sorted(snap.counters.per_channel.items(), key=lambda kv: (-kv[1].total, kv[0]))[:top]
    if not rows:
        ax.text(0.5, 0.5, "no edits", ha="center", va="center", transform=ax.transAxes)
        ax.set_axis_off()
        return
    names = [room.lstrip("#").replace(".wikipedia", "") for room, _ in rows]
    bot = [c.bot for _, c in rows]
    anon = [c.anon_human for _, c in rows]
    logged = [c.loggedin_human for _, c in rows]
    ys = range(len(rows))
    ax.barh(ys, bot, color=BOT_COLOR, label="bot")
    ax.barh(ys, anon, left=bot, color=ANON_COLOR, label="anonymous")
    ax.barh(ys, logged, left=[b + a for b, a in zip(bot, anon)], color=LOGGEDIN_COLOR,
            label="logged-in")
    ax.set_yticks(list(ys))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("edits")
    coverage = "n/a" if snap.coverage is None else f"{snap.coverage:.1%}"
    ax.set_title(f"Busiest channels ({snap.channels_edited}/{snap.channels_configured} edited, {coverage})")
    ax.legend(loc="lower right", frameon=False)


def plot_report(
    snap: StatsSnapshot,
    samples: Sequence[Sample],
    path: Union[str, Path],
    top: int = 15,
) -> Path:
    """Render ratio history and per-channel breakdown; the format follows the suffix."""
    path = Path(path)
    with plt.rc_context(REPORT_RC):
        fig, (left, right) = plt.subplots(1, 2, figsize=figure_size())
        _plot_ratios(left, samples)
        _plot_channels(right, snap, top)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
        plt.close(fig)
    return path
