"""Edit counters, ratio snapshots, convergence detection and report export.

Ratios with a zero denominator are ``None`` (exported as JSON ``null``), never
zero or NaN.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional

CSV_COLUMNS = ("channel", "total", "bot", "human", "anon_human", "loggedin_human")


@dataclass
class ChannelCounts:
    total: int = 0
    bot: int = 0
    human: int = 0
    anon_human: int = 0
    loggedin_human: int = 0

    def add(self, is_bot: bool, is_anonymous: bool) -> None:
        self.total += 1
        if is_bot:
            self.bot += 1
        else:
            self.human += 1
            if is_anonymous:
                self.anon_human += 1
            else:
                self.loggedin_human += 1

    def as_row(self) -> List[int]:
        return [self.total, self.bot, self.human, self.anon_human, self.loggedin_human]


@dataclass
class Counters:
    """Global and per-room tallies. Keys of ``per_channel`` are room strings."""

    total_edits: int = 0
    bot_edits: int = 0
    human_edits: int = 0
    anon_human_edits: int = 0
    loggedin_human_edits: int = 0
    malformed_lines: int = 0
    per_channel: Dict[str, ChannelCounts] = field(default_factory=dict)

    def record(self, channel, is_bot: bool, is_anonymous: bool) -> None:
        room = str(channel)
        self.total_edits += 1
        if is_bot:
            self.bot_edits += 1
        else:
            self.human_edits += 1
            if is_anonymous:
                self.anon_human_edits += 1
            else:
                self.loggedin_human_edits += 1
        counts = self.per_channel.get(room)
        if counts is None:
            counts = self.per_channel[room] = ChannelCounts()
        counts.add(is_bot, is_anonymous)

    def record_event(self, event) -> None:
        """Count a classified edit event (anything with ``channel`` and ``editor``)."""
        self.record(event.channel, event.editor.is_bot, event.editor.is_anonymous)

    def record_malformed(self) -> None:
        self.malformed_lines += 1

    @property
    def channels_edited(self) -> int:
        return sum(1 for c in self.per_channel.values() if c.total)

    def copy(self) -> "Counters":
        return Counters(
            self.total_edits,
            self.bot_edits,
            self.human_edits,
            self.anon_human_edits,
            self.loggedin_human_edits,
            self.malformed_lines,
            {room: ChannelCounts(*c.as_row()) for room, c in self.per_channel.items()},
        )

    def to_dict(self) -> dict:
        return {
            "total_edits": self.total_edits,
            "bot_edits": self.bot_edits,
            "human_edits": self.human_edits,
            "anon_human_edits": self.anon_human_edits,
            "loggedin_human_edits": self.loggedin_human_edits,
            "malformed_lines": self.malformed_lines,
            "per_channel": {
                room: dict(zip(CSV_COLUMNS[1:], self.per_channel[room].as_row()))
                for room in sorted(self.per_channel)
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Counters":
        per_channel = {
            room: ChannelCounts(*(row[k] for k in CSV_COLUMNS[1:]))
            for room, row in d["per_channel"].items()
        }
        return cls(
            d["total_edits"],
            d["bot_edits"],
            d["human_edits"],
            d["anon_human_edits"],
            d["loggedin_human_edits"],
            d["malformed_lines"],
            per_channel,
        )


@dataclass(frozen=True)
class StatsSnapshot:
    taken_at: int
    counters: Counters
    bot_ratio: Optional[float]
    anon_ratio: Optional[float]
    channels_edited: int
    channels_configured: int
    coverage: Optional[float]

    def to_dict(self) -> dict:
        return {
            "taken_at": self.taken_at,
            "counters": self.counters.to_dict(),
            "bot_ratio": self.bot_ratio,
            "anon_ratio": self.anon_ratio,
            "channels_edited": self.channels_edited,
            "channels_configured": self.channels_configured,
            "coverage": self.coverage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatsSnapshot":
        return cls(
            taken_at=d["taken_at"],
            counters=Counters.from_dict(d["counters"]),
            bot_ratio=d["bot_ratio"],
            anon_ratio=d["anon_ratio"],
            channels_edited=d["channels_edited"],
            channels_configured=d["channels_configured"],
            coverage=d["coverage"],
        )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def snapshot(counters: Counters, channels_configured: int, now: int) -> StatsSnapshot:
    """Take an immutable copy of ``counters`` with derived ratios."""
    copy = counters.copy()
    edited = copy.channels_edited
    return StatsSnapshot(
        taken_at=now,
        counters=copy,
        bot_ratio=_ratio(copy.bot_edits, copy.total_edits),
        anon_ratio=_ratio(copy.anon_human_edits, copy.human_edits),
        channels_edited=edited,
        channels_configured=channels_configured,
        coverage=_ratio(edited, channels_configured),
    )


@dataclass(frozen=True)
class Sample:
    taken_at: int
    bot_ratio: Optional[float]
    anon_ratio: Optional[float]
    converged: bool


class ConvergenceTracker:
    """Sliding window of periodic ratio samples.

    Converged means the window is full of defined samples and the max-min
    spread of both the bot ratio and the anonymous ratio is below ``epsilon``.
    """

    def __init__(self, sample_interval: float = 10.0, window: int = 30, epsilon: float = 0.005):
        if window < 1:
            raise ValueError("window must be at least one sample")
        if sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        self.sample_interval = sample_interval
        self.window = window
        self.epsilon = epsilon
        self.samples_bot: Deque[Optional[float]] = deque(maxlen=window)
        self.samples_anon: Deque[Optional[float]] = deque(maxlen=window)
        self.log: List[Sample] = []

    def _settled(self, ring: Deque[Optional[float]]) -> bool:
        if len(ring) < self.window or any(v is None for v in ring):
            return False
        return max(ring) - min(ring) < self.epsilon

    def add(self, bot_ratio: Optional[float], anon_ratio: Optional[float], taken_at: int = 0) -> bool:
        self.samples_bot.append(bot_ratio)
        self.samples_anon.append(anon_ratio)
        converged = self._settled(self.samples_bot) and self._settled(self.samples_anon)
        self.log.append(Sample(taken_at, bot_ratio, anon_ratio, converged))
        return converged

    @property
    def converged(self) -> bool:
        return bool(self.log) and self.log[-1].converged

    def first_converged_at(self) -> Optional[int]:
        for s in self.log:
            if s.converged:
                return s.taken_at
        return None


def sample_and_check_convergence(tracker: ConvergenceTracker, snap: StatsSnapshot) -> bool:
    return tracker.add(snap.bot_ratio, snap.anon_ratio, snap.taken_at)


def export_report(snap: StatsSnapshot, format: str = "json") -> bytes:
    if format == "json":
        return json.dumps(snap.to_dict(), ensure_ascii=False).encode("utf-8") + b"\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        per_channel = snap.counters.per_channel
        for room in sorted(per_channel):
            writer.writerow([room, *per_channel[room].as_row()])
        if per_channel:
            c = snap.counters
            writer.writerow(
                ["TOTAL", c.total_edits, c.bot_edits, c.human_edits,
                 c.anon_human_edits, c.loggedin_human_edits]
            )
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format: {format!r}")


def parse_report(data: bytes) -> StatsSnapshot:
    """Inverse of the JSON export."""
    return StatsSnapshot.from_dict(json.loads(data))
