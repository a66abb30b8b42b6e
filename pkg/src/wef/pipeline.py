"""Wiring from raw feed lines to counted, published edit events."""

from __future__ import annotations

import asyncio
from collections import Counter
from dataclasses import dataclass
from typing import AsyncIterator, Iterable, List, Optional, Union

from .channels import ChannelName
from .classifier import BotPolicy, EditorClass, classify
from .feed import RawFeedLine
from .rc_parser import ParsedEdit, ParseFailure, build_diff_url, parse_line, render_flags
from .sse import EditPayload, SseServer, encode_frame
from .stats import ConvergenceTracker, Counters, StatsSnapshot, snapshot

HANDOFF_SIZE = 1024


@dataclass(frozen=True)
class EditEvent:
    channel: ChannelName
    received_at: int
    edit: ParsedEdit
    editor: EditorClass
    diff_url: str

    def payload(self, extended: bool = False) -> EditPayload:
        p = EditPayload(
            article=self.edit.article_key,
            editor=self.editor.qualified_editor,
            isBot=self.editor.is_bot,
            language=self.channel.language_code,
            diffUrl=self.diff_url,
        )
        if not extended:
            return p
        return EditPayload(
            p.article, p.editor, p.isBot, p.language, p.diffUrl,
            isAnon=self.editor.is_anonymous,
            flags=render_flags(self.edit.flags),
            changeSize=self.edit.change_size,
        )

    def frame(self, extended: bool = False) -> bytes:
        return encode_frame(self.payload(extended), self.channel.language_code)


def process_line(line: RawFeedLine, policy: BotPolicy = BotPolicy()) -> Union[EditEvent, ParseFailure]:
    parsed = parse_line(line.text)
    if isinstance(parsed, ParseFailure):
        return parsed
    code = line.channel.language_code
    diff_url = ""
    if parsed.to_rev is not None:
        diff_url = build_diff_url(code, parsed.from_rev, parsed.to_rev)
    return EditEvent(
        channel=line.channel,
        received_at=line.received_at,
        edit=parsed,
        editor=classify(code, parsed.editor_handle, parsed.flags, policy),
        diff_url=diff_url,
    )


class Pipeline:
    """Single writer over the counters; optionally publishes to an SSE server.

    Ratio samples are taken on event time (``received_at``) every
    ``tracker.sample_interval`` seconds, which keeps replays reproducible.
    """

    def __init__(
        self,
        channels: List[ChannelName],
        policy: BotPolicy = BotPolicy(),
        tracker: Optional[ConvergenceTracker] = None,
        server: Optional[SseServer] = None,
        extended_payload: bool = False,
    ):
        self.channels = list(channels)
        self.rooms = {c.room for c in self.channels}
        self.policy = policy
        self.tracker = tracker
        self.server = server
        self.extended_payload = extended_payload
        self.counters = Counters()
        self.failures: Counter = Counter()
        self.no_size = 0
        self.foreign_channel = 0
        self.last_ts = 0
        self._next_sample: Optional[int] = None

    def _maybe_sample(self, ts: int) -> None:
        if self.tracker is None:
            return
        step = max(1, int(self.tracker.sample_interval * 1000))
        if self._next_sample is None:
            self._next_sample = ts + step
            return
        emitted = 0
        while ts >= self._next_sample:
            if emitted > self.tracker.window:
                # further identical samples add nothing once the window is refilled
                self._next_sample += ((ts - self._next_sample) // step + 1) * step
                break
            self._sample(self._next_sample)
            emitted += 1
            self._next_sample += step

    def _sample(self, at: int) -> None:
        snap = self.snapshot(at)
        self.tracker.add(snap.bot_ratio, snap.anon_ratio, at)

    def handle(self, line: RawFeedLine) -> Optional[EditEvent]:
        if line.channel.room not in self.rooms:
            self.foreign_channel += 1
            return None
        self._maybe_sample(line.received_at)
        self.last_ts = max(self.last_ts, line.received_at)
        result = process_line(line, self.policy)
        if isinstance(result, ParseFailure):
            self.failures[result.reason.value] += 1
            self.counters.record_malformed()
            return None
        if result.edit.change_size is None:
            self.no_size += 1
        self.counters.record_event(result)
        if self.server is not None:
            self.server.publish(result.frame(self.extended_payload))
        return result

    def run_sync(self, lines: Iterable[RawFeedLine]) -> StatsSnapshot:
        for line in lines:
            self.handle(line)
        return self.snapshot()

    async def run(self, source: AsyncIterator[RawFeedLine], handoff_size: int = HANDOFF_SIZE) -> StatsSnapshot:
        """Drain ``source`` through a bounded handoff queue until it ends.

        Errors raised by the source propagate after the lines already handed
        off have been processed.
        """
        queue: asyncio.Queue = asyncio.Queue(maxsize=handoff_size)
        done = object()

        async def produce():
            try:
                async for line in source:
                    await queue.put(line)
            finally:
                await queue.put(done)

        producer = asyncio.ensure_future(produce())
        try:
            while True:
                item = await queue.get()
                if item is done:
                    break
                self.handle(item)
                # let subscriber writers run between events
                await asyncio.sleep(0)
        finally:
            if not producer.done():
                producer.cancel()
            try:
                await producer
            except asyncio.CancelledError:
                pass
        return self.snapshot()

    def snapshot(self, now: Optional[int] = None) -> StatsSnapshot:
        return snapshot(self.counters, len(self.channels), self.last_ts if now is None else now)
