"""Deterministic synthetic recent-changes traffic with a ground-truth log.

Randomness comes from SplitMix64 so a seed produces the same byte stream on
any platform:

    state  = state + 0x9E3779B97F4A7C15            (mod 2**64)
    z      = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z      = (z ^ (z >> 27)) * 0x94D049BB133111EB
    output = z ^ (z >> 31)

Floats use the top 53 bits (``(x >> 11) * 2**-53``); bounded integers use
``lo + x % (hi - lo + 1)``.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, List, Optional, Sequence, Tuple

from .channels import ChannelName
from .feed import RawFeedLine, paced
from .rc_parser import render_flags, render_size

_MASK = (1 << 64) - 1

_WORDS = (
    "River", "Castle", "Theory", "Station", "Festival", "Battle", "Island",
    "Museum", "Language", "Bridge", "Province", "Album", "Church", "Railway",
    "Mountain", "Treaty", "School", "Galaxy", "Library", "Dynasty",
)
_COMMENTS = (
    "/* History */ expanded",
    "copyedit",
    "",
    "rv * vandalism * again",
    "Reverted edits by * to last version",
    "/* References */ fix cite",
    "typo",
    "(moved from draft)",
)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        return lo + self.next_u64() % (hi - lo + 1)

    def choice(self, seq: Sequence):
        return seq[self.randint(0, len(seq) - 1)]


@dataclass(frozen=True)
class GenConfig:
    seed: int
    channels: Tuple[Tuple[ChannelName, float], ...]
    total_events: int
    bot_probability: float = 0.3
    anon_probability_given_human: float = 0.2
    size_range: Tuple[int, int] = (-500, 500)
    # mark bots with a "...Bot" name instead of the B flag
    bot_names: bool = False
    new_page_probability: float = 0.05
    decorate: bool = False
    start_ts: int = 0
    interval_ms: int = 10

    def __post_init__(self):
        if not self.channels:
            raise ValueError("at least one channel is required")
        if abs(sum(w for _, w in self.channels) - 1.0) > 1e-9:
            raise ValueError("channel weights must sum to 1")
        if any(w <= 0 for _, w in self.channels):
            raise ValueError("channel weights must be positive")
        for p in (self.bot_probability, self.anon_probability_given_human,
                  self.new_page_probability):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range: {p}")
        if self.total_events < 0:
            raise ValueError("total_events must be non-negative")
        if self.size_range[0] > self.size_range[1]:
            raise ValueError("empty size range")

    @classmethod
    def uniform(cls, seed: int, channels: Iterable[ChannelName], total_events: int, **kw) -> "GenConfig":
        chans = list(channels)
        if not chans:
            raise ValueError("at least one channel is required")
        w = 1.0 / len(chans)
        # absorb rounding in the last weight so the sum is exact
        weights = [w] * (len(chans) - 1) + [1.0 - w * (len(chans) - 1)]
        return cls(seed, tuple(zip(chans, weights)), total_events, **kw)


@dataclass(frozen=True)
class TruthRecord:
    channel: str
    is_bot: bool
    is_anon: bool

    def to_json(self) -> str:
        return json.dumps({"channel": self.channel, "isBot": self.is_bot, "isAnon": self.is_anon})

    @classmethod
    def from_json(cls, text: str) -> "TruthRecord":
        d = json.loads(text)
        return cls(d["channel"], d["isBot"], d["isAnon"])


@dataclass
class _Channel:
    name: ChannelName
    last_rev: int = 0


def _ip(rng: SplitMix64) -> str:
    if rng.random() < 0.1:
        return f"2001:db8:{rng.randint(0, 0xFFFF):x}::{rng.randint(1, 0xFFFF):x}"
    return ".".join(
        str(x) for x in (rng.randint(1, 223), rng.randint(0, 255),
                         rng.randint(0, 255), rng.randint(1, 254))
    )


def _decorate(title: str, middle: str, editor: str, tail: str) -> str:
    # mimics the colour codes the live feed wraps around each component
    return (
        f"\x0314[[\x0307{title}\x0314]]\x034 \x0302{middle}\x03 \x035*\x03 "
        f"\x0303{editor}\x03 \x035*\x03 {tail}"
    )


def generate(config: GenConfig) -> Iterator[Tuple[RawFeedLine, TruthRecord]]:
    """Yield ``(line, truth)`` pairs; the same config always yields the same bytes."""
    rng = SplitMix64(config.seed)
    channels = [_Channel(ch) for ch, _ in config.channels]
    cumulative = []
    acc = 0.0
    for _, w in config.channels:
        acc += w
        cumulative.append(acc)

    for i in range(config.total_events):
        idx = min(bisect.bisect_right(cumulative, rng.random()), len(channels) - 1)
        chan = channels[idx]
        if chan.last_rev == 0:
            chan.last_rev = rng.randint(1_000_000, 9_999_999)
        is_bot = rng.random() < config.bot_probability
        is_anon = (not is_bot) and rng.random() < config.anon_probability_given_human

        if is_anon:
            editor = _ip(rng)
        elif is_bot and config.bot_names:
            editor = f"{rng.choice(_WORDS)}{rng.randint(1, 99)}Bot"
        elif is_bot:
            editor = f"Maintainer{rng.randint(1, 999)}"
        else:
            editor = f"Editor{rng.randint(1, 99999)}"

        flags = set()
        new_page = rng.random() < config.new_page_probability
        if new_page:
            flags.add("N")
        if rng.random() < 0.2:
            flags.add("M")
        if is_bot and not config.bot_names:
            flags.add("B")

        title = f"{rng.choice(_WORDS)} {rng.choice(_WORDS)} {rng.randint(1, 5000)}"
        new_rev = chan.last_rev + rng.randint(1, 9)
        host = chan.name.host
        if new_page:
            url = f"http://{host}/w/index.php?oldid={new_rev}&rcid={i + 1}"
        else:
            url = f"http://{host}/w/index.php?diff={new_rev}&oldid={chan.last_rev}"
        chan.last_rev = new_rev
        size = rng.randint(*config.size_range)
        comment = rng.choice(_COMMENTS)

        middle = url + (" " + render_flags(flags) if flags else "")
        tail = f"{render_size(size)} {comment}"
        if config.decorate:
            text = _decorate(title, middle, editor, tail)
        else:
            text = f"[[{title}]] {middle} * {editor} * {tail}"

        yield (
            RawFeedLine(chan.name, text, config.start_ts + i * config.interval_ms),
            TruthRecord(chan.name.room, is_bot, is_anon),
        )


def generate_lists(config: GenConfig) -> Tuple[List[RawFeedLine], List[TruthRecord]]:
    lines, truth = [], []
    for line, rec in generate(config):
        lines.append(line)
        truth.append(rec)
    return lines, truth


def write_truth(records: Iterable[TruthRecord], fh: IO[str]) -> int:
    n = 0
    for rec in records:
        fh.write(rec.to_json() + "\n")
        n += 1
    return n


def open_synthetic_feed(config: GenConfig, rate: Optional[float] = None, truth: Optional[list] = None):
    """Async source over :func:`generate`; ground-truth records are appended to ``truth``."""

    def lines():
        for line, rec in generate(config):
            if truth is not None:
                truth.append(rec)
            yield line

    return paced(lines(), rate)
