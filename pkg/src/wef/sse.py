"""Server-Sent Events: payload encoding, fan-out server and a small client.

Wire form of one edit::

    event: enedit
    data: {"article":"...","editor":"en:...","isBot":false,"language":"en","diffUrl":"..."}

followed by an empty line. LF is the only line terminator emitted.
"""

from __future__ import annotations

import asyncio
import codecs
import json
import logging
import re
import socket
from dataclasses import dataclass
from typing import (AsyncIterator, Callable, Iterable, Iterator, List, Optional, Sequence,
                    Set, Tuple, Union)
from urllib.parse import urlsplit

log = logging.getLogger(__name__)

KEEPALIVE_FRAME = b": keep-alive\n\n"
OVERFLOW_FRAME = b": overflow\n\n"
DEFAULT_QUEUE_SIZE = 1024
DEFAULT_KEEPALIVE = 15.0

_CANONICAL = ("article", "editor", "isBot", "language", "diffUrl")
_EXTENDED = ("isAnon", "flags", "changeSize")
_EOL = re.compile(r"\r\n|\r|\n")


@dataclass(frozen=True)
class EditPayload:
    article: str
    editor: str
    isBot: bool
    language: str
    diffUrl: str
    # opt-in extras, serialised after the canonical five
    isAnon: Optional[bool] = None
    flags: Optional[str] = None
    changeSize: Optional[int] = None

    @property
    def extended(self) -> bool:
        return self.isAnon is not None

    def to_json(self) -> str:
        d = {k: getattr(self, k) for k in _CANONICAL}
        if self.extended:
            d.update((k, getattr(self, k)) for k in _EXTENDED)
        return json.dumps(d, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, data: str) -> "EditPayload":
        d = json.loads(data)
        if not isinstance(d, dict):
            raise ValueError("payload is not an object")
        kwargs = {k: d[k] for k in _CANONICAL}
        if "isAnon" in d:
            kwargs.update((k, d.get(k)) for k in _EXTENDED)
        return cls(**kwargs)


def event_type_for(language_code: str) -> str:
    return language_code + "edit"


def encode_frame(payload: EditPayload, language_code: str) -> bytes:
    return b"event: %s\ndata: %s\n\n" % (
        event_type_for(language_code).encode("utf-8"),
        payload.to_json().encode("utf-8"),
    )


# --- decoding ---------------------------------------------------------------


@dataclass(frozen=True)
class SseEvent:
    event: str
    data: str


class SseDecoder:
    """Incremental event-stream parser (CR, LF and CRLF line endings)."""

    def __init__(self):
        self._buf = ""
        self._skip_lf = False
        self._event = ""
        self._data: List[str] = []

    def _lines(self, text: str) -> List[str]:
        if self._skip_lf and text:
            if text[0] == "\n":
                text = text[1:]
            self._skip_lf = False
        if text.endswith("\r"):
            # the CR ends its line now; an LF arriving next belongs to it
            self._skip_lf = True
        lines = _EOL.split(self._buf + text)
        self._buf = lines.pop()
        return lines

    def feed(self, text: str) -> List[SseEvent]:
        out = []
        for line in self._lines(text):
            if line == "":
                if self._data:
                    out.append(SseEvent(self._event or "message", "\n".join(self._data)))
                self._event = ""
                self._data = []
                continue
            if line.startswith(":"):
                continue
            name, sep, value = line.partition(":")
            if sep and value.startswith(" "):
                value = value[1:]
            if name == "event":
                self._event = value
            elif name == "data":
                self._data.append(value)
            # id, retry and unknown fields are ignored
        return out


def decode_payloads(chunks: Iterable[Union[bytes, str]], event_types: Sequence[str] = ()) -> Iterator[EditPayload]:
    """Decode payloads from an iterable of stream chunks, keeping only ``event_types``
    (all types when empty)."""
    decoder = SseDecoder()
    utf8 = codecs.getincrementaldecoder("utf-8")("replace")
    wanted = set(event_types)
    for chunk in chunks:
        text = utf8.decode(chunk) if isinstance(chunk, (bytes, bytearray)) else chunk
        for ev in decoder.feed(text):
            if not wanted or ev.event in wanted:
                yield EditPayload.from_json(ev.data)


class SseConnectionLost(ConnectionError):
    """The event stream ended; SSE streams never end cleanly."""


class SseHttpError(ConnectionError):
    pass


async def _open_stream(url: str) -> Tuple[asyncio.StreamReader, asyncio.StreamWriter, bool]:
    parts = urlsplit(url)
    if parts.scheme != "http":
        raise SseHttpError(f"unsupported URL scheme: {url}")
    host = parts.hostname or "127.0.0.1"
    port = parts.port or 80
    path = parts.path or "/"
    if parts.query:
        path += "?" + parts.query
    reader, writer = await asyncio.open_connection(host, port)
    writer.write(
        f"GET {path} HTTP/1.1\r\nHost: {parts.netloc}\r\n"
        "Accept: text/event-stream\r\nCache-Control: no-cache\r\n\r\n".encode("latin-1")
    )
    await writer.drain()
    status_line = await reader.readline()
    fields = status_line.decode("latin-1").split(" ", 2)
    if len(fields) < 2 or fields[1] != "200":
        writer.close()
        raise SseHttpError(f"unexpected response: {status_line!r}")
    chunked = False
    while True:
        line = await reader.readline()
        if line in (b"\r\n", b"\n", b""):
            break
        name, _, value = line.decode("latin-1").partition(":")
        if name.strip().lower() == "transfer-encoding" and "chunked" in value.lower():
            chunked = True
    return reader, writer, chunked


async def _read_chunks(reader: asyncio.StreamReader, chunked: bool) -> AsyncIterator[bytes]:
    if not chunked:
        while True:
            data = await reader.read(65536)
            if not data:
                return
            yield data
    while True:
        size_line = await reader.readline()
        if not size_line:
            return
        size = int(size_line.split(b";")[0].strip() or b"0", 16)
        if size == 0:
            return
        data = await reader.readexactly(size)
        await reader.readline()
        yield data


async def consume(url: str, event_types: Sequence[str] = ()) -> AsyncIterator[EditPayload]:
    """Yield payloads from an SSE endpoint; raises :class:`SseConnectionLost` at end of stream."""
    try:
        reader, writer, chunked = await _open_stream(url)
    except SseHttpError:
        raise
    except OSError as exc:
        raise SseConnectionLost(f"cannot connect to {url}: {exc}") from exc
    decoder = SseDecoder()
    utf8 = codecs.getincrementaldecoder("utf-8")("replace")
    wanted = set(event_types)
    try:
        async for chunk in _read_chunks(reader, chunked):
            for ev in decoder.feed(utf8.decode(chunk)):
                if not wanted or ev.event in wanted:
                    yield EditPayload.from_json(ev.data)
    except (OSError, asyncio.IncompleteReadError) as exc:
        raise SseConnectionLost(str(exc)) from exc
    finally:
        writer.close()
    raise SseConnectionLost("event stream closed by server")


# --- fan-out server -------------------------------------------------------------


class Subscriber:
    def __init__(self, queue_size: int):
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=queue_size)
        self.overflowed = False
        self.writer: Optional[asyncio.StreamWriter] = None

    def offer(self, frame: bytes) -> bool:
        if self.overflowed:
            return False
        try:
            self.queue.put_nowait(frame)
            return True
        except asyncio.QueueFull:
            self.overflow()
            return False

    def overflow(self) -> None:
        self.overflowed = True
        while not self.queue.empty():
            self.queue.get_nowait()
        if self.writer is not None:
            transport = self.writer.transport
            transport.write(OVERFLOW_FRAME)
            transport.close()
            # a stalled peer never drains the buffer; force it shut
            asyncio.get_running_loop().call_later(1.0, transport.abort)
        self.queue.put_nowait(None)


StatsProvider = Callable[[], bytes]


class SseServer:
    """HTTP endpoint broadcasting frames to every subscriber of ``/sse``.

    Each subscriber gets its own bounded queue; a subscriber whose queue
    fills up is sent ``: overflow`` and disconnected so nobody else waits.
    """

    def __init__(
        self,
        stats_provider: Optional[StatsProvider] = None,
        *,
        keepalive: float = DEFAULT_KEEPALIVE,
        queue_size: int = DEFAULT_QUEUE_SIZE,
        write_buffer_limit: Optional[int] = None,
        send_buffer: Optional[int] = None,
    ):
        self.stats_provider = stats_provider
        self.keepalive = keepalive
        self.queue_size = queue_size
        self.write_buffer_limit = write_buffer_limit
        # SO_SNDBUF for subscriber sockets; bounds what the kernel holds for a stalled peer
        self.send_buffer = send_buffer
        self.subscribers: Set[Subscriber] = set()
        self.disconnected_overflow = 0
        self._server: Optional[asyncio.AbstractServer] = None
        self._subscribed = asyncio.Condition()
        self.address: Optional[Tuple[str, int]] = None

    async def start(self, host: str = "127.0.0.1", port: int = 8080) -> Tuple[str, int]:
        self._server = await asyncio.start_server(self._handle, host, port)
        self.address = self._server.sockets[0].getsockname()[:2]
        return self.address

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
        for sub in list(self.subscribers):
            if sub.queue.full():
                sub.overflow()
            else:
                sub.queue.put_nowait(None)
        if self._server is not None:
            await self._server.wait_closed()

    def publish(self, frame: bytes) -> None:
        for sub in list(self.subscribers):
            if not sub.offer(frame):
                self.subscribers.discard(sub)
                self.disconnected_overflow += 1

    async def wait_for_subscribers(self, n: int) -> None:
        async with self._subscribed:
            await self._subscribed.wait_for(lambda: len(self.subscribers) >= n)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            request = await asyncio.wait_for(reader.readuntil(b"\r\n\r\n"), 10)
        except (asyncio.TimeoutError, asyncio.IncompleteReadError, asyncio.LimitOverrunError,
                ConnectionError):
            writer.close()
            return
        request_line = request.split(b"\r\n", 1)[0].decode("latin-1")
        parts = request_line.split(" ")
        if len(parts) != 3:
            await self._respond(writer, 400, "text/plain", b"bad request\n")
            return
        method, target, _ = parts
        path = urlsplit(target).path
        if method != "GET":
            await self._respond(writer, 405, "text/plain", b"method not allowed\n")
        elif path == "/sse":
            await self._stream(writer)
        elif path == "/stats" and self.stats_provider is not None:
            await self._respond(writer, 200, "application/json", self.stats_provider())
        else:
            await self._respond(writer, 404, "text/plain", b"not found\n")

    async def _respond(self, writer, status: int, ctype: str, body: bytes) -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}[status]
        head = (
            f"HTTP/1.1 {status} {reason}\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nCache-Control: no-cache\r\n"
            "Access-Control-Allow-Origin: *\r\nConnection: close\r\n\r\n"
        )
        try:
            writer.write(head.encode("latin-1") + body)
            await writer.drain()
        except ConnectionError:
            pass
        finally:
            writer.close()

    async def _stream(self, writer: asyncio.StreamWriter) -> None:
        if self.write_buffer_limit is not None:
            writer.transport.set_write_buffer_limits(high=self.write_buffer_limit)
        sock = writer.get_extra_info("socket")
        if self.send_buffer is not None and sock is not None:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, self.send_buffer)
        writer.write(
            b"HTTP/1.1 200 OK\r\nContent-Type: text/event-stream\r\n"
            b"Cache-Control: no-cache\r\nAccess-Control-Allow-Origin: *\r\n"
            b"Connection: close\r\n\r\n"
        )
        sub = Subscriber(self.queue_size)
        sub.writer = writer
        async with self._subscribed:
            self.subscribers.add(sub)
            self._subscribed.notify_all()
        getter = None
        try:
            await writer.drain()
            while True:
                if getter is None and sub.queue.empty():
                    getter = asyncio.ensure_future(sub.queue.get())
                if getter is not None:
                    done, _ = await asyncio.wait({getter}, timeout=self.keepalive)
                    if not done:
                        # the pending get stays alive so no frame is lost
                        writer.write(KEEPALIVE_FRAME)
                        await writer.drain()
                        continue
                    batch, getter = [getter.result()], None
                else:
                    batch = []
                while not sub.queue.empty():
                    batch.append(sub.queue.get_nowait())
                closing = None in batch or sub.overflowed
                frames = [f for f in batch if f is not None]
                if frames and not sub.overflowed:
                    writer.write(b"".join(frames))
                    await writer.drain()
                if closing:
                    break
        except (ConnectionError, OSError):
            pass
        finally:
            if getter is not None:
                getter.cancel()
            self.subscribers.discard(sub)
            if not sub.overflowed:
                writer.close()


async def serve(
    host: str,
    port: int,
    frames: AsyncIterator[bytes],
    stats_provider: Optional[StatsProvider] = None,
    **kwargs,
) -> SseServer:
    """Start a server and pump ``frames`` into it until the iterator ends."""
    server = SseServer(stats_provider, **kwargs)
    await server.start(host, port)
    async for frame in frames:
        server.publish(frame)
        await asyncio.sleep(0)
    return server
