"""Sources of raw recent-changes lines: live IRC, fixture replay, synthetic.

Every source is an async iterator of :class:`RawFeedLine`. Iteration pulls
one line at a time, so a slow consumer holds the producer back (the live
reader simply stops reading the socket, replay pauses its pacing clock).
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import AsyncIterator, Iterator, List, NamedTuple, Optional, Union

from .channels import ChannelError, ChannelName, channel_from_room, unique_channels

log = logging.getLogger(__name__)

DEFAULT_SERVER = ("irc.wikimedia.org", 6667)


class FeedError(Exception):
    """Terminal failure of a feed source."""


@dataclass(frozen=True)
class RawFeedLine:
    channel: ChannelName
    text: str
    received_at: int


@dataclass(frozen=True)
class Backoff:
    """Exponential reconnect delays; ``max_retries=None`` retries forever."""

    initial: float = 1.0
    factor: float = 2.0
    cap: float = 60.0
    max_retries: Optional[int] = None

    def delay(self, attempt: int) -> Optional[float]:
        if self.max_retries is not None and attempt >= self.max_retries:
            return None
        return min(self.cap, self.initial * self.factor ** attempt)


@dataclass
class FeedConfig:
    channels: List[ChannelName]
    source_kind: str = "live"
    server: tuple = DEFAULT_SERVER
    nickname: str = "wef"
    reconnect_backoff: Backoff = field(default_factory=Backoff)
    replay_path: Optional[Path] = None
    # events per second; None paces nothing
    replay_rate: Optional[float] = None

    def __post_init__(self):
        if self.source_kind not in ("live", "replay", "synthetic"):
            raise ValueError(f"unknown source kind {self.source_kind!r}")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("duplicate channels")
        self.channels = unique_channels(self.channels)
        if self.replay_rate is not None and self.replay_rate <= 0:
            raise ValueError("replay rate must be positive")

    @property
    def rooms(self) -> dict:
        return {ch.room: ch for ch in self.channels}


@dataclass
class FeedStats:
    foreign_channel: int = 0
    decode_lossy: int = 0
    reconnects: int = 0
    keepalive_replies: int = 0


class _MonotonicMillis:
    """Wall-clock milliseconds that never step backwards."""

    def __init__(self):
        self.last = 0

    def __call__(self) -> int:
        self.last = max(self.last, int(time.time() * 1000))
        return self.last


# --- IRC -----------------------------------------------------------------


class IrcMessage(NamedTuple):
    prefix: str
    command: str
    params: List[str]


def parse_irc_message(line: str) -> IrcMessage:
    """Split ``[@tags] [:prefix] COMMAND params [:trailing]``."""
    rest = line
    if rest.startswith("@"):
        _, _, rest = rest.partition(" ")
    prefix = ""
    if rest.startswith(":"):
        prefix, _, rest = rest[1:].partition(" ")
    rest = rest.lstrip(" ")
    if " :" in rest:
        head, trailing = rest.split(" :", 1)
        params = head.split() + [trailing]
    elif rest.startswith(":"):
        return IrcMessage(prefix, "", [rest[1:]])
    else:
        params = rest.split()
    command = params.pop(0).upper() if params else ""
    return IrcMessage(prefix, command, params)


def _decode(raw: bytes, stats: FeedStats) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        stats.decode_lossy += 1
        return raw.decode("utf-8", "replace")


def nick_candidate(nickname: str, attempt: int) -> str:
    return nickname if attempt == 0 else f"{nickname}_{attempt}"


async def _send(writer: asyncio.StreamWriter, line: str) -> None:
    writer.write(line.encode("utf-8") + b"\r\n")
    await writer.drain()


async def _irc_session(reader, writer, config: FeedConfig, stats: FeedStats, clock, state: dict):
    rooms = config.rooms
    joined = set()
    nick_attempt = 0
    await _send(writer, f"NICK {config.nickname}")
    await _send(writer, f"USER {config.nickname} 0 * :{config.nickname}")
    while True:
        try:
            raw = await reader.readuntil(b"\n")
        except asyncio.IncompleteReadError:
            return
        raw = raw.rstrip(b"\r\n")
        if not raw:
            continue
        text = _decode(raw, stats)
        if text.startswith("PING"):
            # echo the token exactly as received
            await _send(writer, "PONG" + text[4:])
            stats.keepalive_replies += 1
            continue
        msg = parse_irc_message(text)
        if msg.command == "PING":
            await _send(writer, "PONG :" + (msg.params[-1] if msg.params else ""))
            stats.keepalive_replies += 1
        elif msg.command == "001":
            state["registered"] = True
            for room in rooms:
                await _send(writer, f"JOIN {room}")
            joined = set(rooms)
        elif msg.command == "433":
            nick_attempt += 1
            await _send(writer, f"NICK {nick_candidate(config.nickname, nick_attempt)}")
        elif msg.command == "PRIVMSG" and len(msg.params) >= 2:
            target, body = msg.params[0], msg.params[-1]
            if target in joined:
                yield RawFeedLine(rooms[target], body, clock())
            else:
                stats.foreign_channel += 1
        elif msg.command == "ERROR":
            return


async def open_live_feed(
    config: FeedConfig, stats: Optional[FeedStats] = None, *, sleep=asyncio.sleep
) -> AsyncIterator[RawFeedLine]:
    """Read the recent-changes IRC rooms, reconnecting with backoff forever
    (or until ``config.reconnect_backoff.max_retries`` consecutive failures)."""
    stats = stats if stats is not None else FeedStats()
    clock = _MonotonicMillis()
    host, port = config.server
    failures = 0
    while True:
        state = {"registered": False}
        try:
            reader, writer = await asyncio.open_connection(host, port, limit=1 << 20)
        except OSError as exc:
            log.warning("connect to %s:%s failed: %s", host, port, exc)
        else:
            try:
                async for line in _irc_session(reader, writer, config, stats, clock, state):
                    yield line
            except (OSError, ValueError, asyncio.LimitOverrunError) as exc:
                log.warning("connection lost: %s", exc)
            finally:
                writer.close()
            stats.reconnects += 1
        if state["registered"]:
            failures = 0
        delay = config.reconnect_backoff.delay(failures)
        if delay is None:
            raise FeedError(f"server {host}:{port} unreachable after {failures} retries")
        failures += 1
        await sleep(delay)


# --- replay ----------------------------------------------------------------


def iter_fixture(path: Union[str, Path]) -> Iterator[RawFeedLine]:
    """Read fixture records in file order; raises FeedError naming the bad line."""
    prev_ts = None
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw.decode("utf-8"))
                channel = channel_from_room(rec["channel"])
                text, ts = rec["line"], rec["ts"]
                if not isinstance(text, str) or "\n" in text or "\r" in text:
                    raise ValueError("line must be single-line text")
                if not isinstance(ts, int) or isinstance(ts, bool):
                    raise ValueError("ts must be an integer")
            except (ValueError, KeyError, TypeError, ChannelError) as exc:
                raise FeedError(f"{path}:{lineno}: malformed fixture record: {exc}") from None
            if prev_ts is not None and ts < prev_ts:
                raise FeedError(f"{path}:{lineno}: timestamp goes backwards")
            prev_ts = ts
            yield RawFeedLine(channel, text, ts)


def fixture_record(line: RawFeedLine) -> str:
    return json.dumps({"channel": line.channel.room, "line": line.text, "ts": line.received_at},
                      ensure_ascii=False)


def write_fixture(lines, fh) -> int:
    n = 0
    for line in lines:
        fh.write(fixture_record(line) + "\n")
        n += 1
    return n


async def paced(lines, rate: Optional[float], config_rooms=None, stats: Optional[FeedStats] = None):
    """Emit ``lines`` at ``rate`` per second (unpaced when ``None``).

    Lines for rooms outside ``config_rooms`` are dropped and counted.
    """
    loop = asyncio.get_running_loop()
    start = loop.time()
    i = 0
    for line in lines:
        if config_rooms is not None and line.channel.room not in config_rooms:
            if stats is not None:
                stats.foreign_channel += 1
            continue
        if rate is not None:
            delay = start + i / rate - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
        i += 1
        yield line


def open_replay_feed(config: FeedConfig, stats: Optional[FeedStats] = None) -> AsyncIterator[RawFeedLine]:
    if config.replay_path is None:
        raise FeedError("replay source needs a fixture path")
    if not Path(config.replay_path).exists():
        raise FeedError(f"fixture not found: {config.replay_path}")
    return paced(iter_fixture(config.replay_path), config.replay_rate, config.rooms, stats)
