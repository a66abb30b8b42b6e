"""Scripted IRC server for exercising the live feed without a network.

A transcript is plain text, one step per line::

    C: NICK wef                 # the client must send exactly this line
    S: :irc.test 001 wef :hi    # the server sends this line
    S:!disconnect               # the server drops the connection here

Blank lines and lines starting with ``#`` are ignored. Each new client
connection resumes the transcript where the previous one was dropped.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

DISCONNECT = "!disconnect"


class TranscriptError(ValueError):
    pass


def parse_transcript(text: str) -> List[Tuple[str, str]]:
    steps = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        who, sep, body = line.partition(":")
        if not sep or who not in ("S", "C"):
            raise TranscriptError(f"line {n}: expected 'S:' or 'C:' prefix: {line!r}")
        if body.startswith(" "):
            body = body[1:]
        steps.append((who, body))
    return steps


@dataclass
class ScriptReport:
    connections: int = 0
    # connections opened after the script was exhausted
    late_connections: int = 0
    mismatches: List[str] = field(default_factory=list)
    unexpected: List[str] = field(default_factory=list)
    probes_sent: int = 0
    probe_replies: int = 0
    messages_sent: int = 0


class ScriptedIrcServer:
    def __init__(self, transcript: str, read_timeout: float = 5.0):
        self.steps = parse_transcript(transcript)
        self.read_timeout = read_timeout
        self.position = 0
        self.report = ScriptReport()
        self.done = asyncio.Event()
        self._server: Optional[asyncio.AbstractServer] = None

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        self._server = await asyncio.start_server(self._handle, host, port)
        return self._server.sockets[0].getsockname()[1]

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def _drain_extra(self, reader: asyncio.StreamReader) -> None:
        # anything the client sends beyond the script is recorded
        while True:
            try:
                raw = await asyncio.wait_for(reader.readline(), 0.05)
            except (asyncio.TimeoutError, ConnectionError):
                return
            if not raw:
                return
            self.report.unexpected.append(raw.decode("utf-8", "replace").rstrip("\r\n"))

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self.report.connections += 1
        if self.position >= len(self.steps):
            self.report.late_connections += 1
            writer.close()
            return
        last_probe = None
        try:
            while self.position < len(self.steps):
                who, body = self.steps[self.position]
                self.position += 1
                if who == "S" and body == DISCONNECT:
                    await self._drain_extra(reader)
                    return
                if who == "S":
                    writer.write(body.encode("utf-8") + b"\r\n")
                    await writer.drain()
                    if body.startswith("PING"):
                        self.report.probes_sent += 1
                        last_probe = body
                    elif " PRIVMSG " in body:
                        self.report.messages_sent += 1
                    continue
                try:
                    raw = await asyncio.wait_for(reader.readline(), self.read_timeout)
                except asyncio.TimeoutError:
                    self.report.mismatches.append(f"timeout waiting for {body!r}")
                    return
                got = raw.decode("utf-8", "replace").rstrip("\r\n")
                if got != body:
                    self.report.mismatches.append(f"expected {body!r}, got {got!r}")
                elif got.startswith("PONG") and last_probe is not None:
                    if got == "PONG" + last_probe[4:]:
                        self.report.probe_replies += 1
                    last_probe = None
            await self._drain_extra(reader)
            self.done.set()
        finally:
            writer.close()
