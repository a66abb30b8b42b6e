"""Command line entry point: ``wef serve|consume|report|gen-fixture``."""

from __future__ import annotations

import argparse
import asyncio
import logging
import os
import signal
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .channels import ChannelError, parse_languages
from .classifier import BotPolicy, is_anonymous, load_bot_list
from .feed import FeedConfig, FeedError, FeedStats, iter_fixture, open_live_feed, \
    open_replay_feed, write_fixture
from .generator import GenConfig, generate_lists, open_synthetic_feed, write_truth
from .pipeline import Pipeline
from .sse import DEFAULT_KEEPALIVE, SseConnectionLost, SseHttpError, SseServer, consume
from .stats import ConvergenceTracker, export_report

log = logging.getLogger("wef")

DEFAULT_LISTEN = "127.0.0.1:8080"
DEFAULT_IRC_SERVER = "irc.wikimedia.org:6667"


class CliError(Exception):
    pass


def host_port(text: str) -> tuple:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


def fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return value


def positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _add_stats_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--languages", default="all",
                   help="'all' for the shipped channel list, or comma separated codes")
    p.add_argument("--bot-list", default=os.environ.get("WEF_BOT_LIST"),
                   help="file of known bot handles, one per line [env WEF_BOT_LIST]")
    p.add_argument("--convergence-epsilon", type=positive, default=0.005)
    p.add_argument("--convergence-window", type=int, default=30)
    p.add_argument("--sample-interval", type=positive, default=10.0, metavar="SECS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wef", description="Wikimedia recent-changes edit monitor.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="ingest a feed and publish edits over SSE")
    s.add_argument("--source", choices=("live", "replay", "synthetic"), default="live")
    s.add_argument("--server", type=host_port,
                   default=os.environ.get("WEF_IRC_SERVER", DEFAULT_IRC_SERVER),
                   metavar="HOST:PORT", help="IRC server [env WEF_IRC_SERVER]")
    s.add_argument("--nick", default="wef")
    s.add_argument("--fixture", type=Path, help="fixture file for --source replay")
    s.add_argument("--rate", type=positive, help="events per second for replay/synthetic")
    s.add_argument("--listen", type=host_port, default=os.environ.get("WEF_LISTEN", DEFAULT_LISTEN),
                   metavar="HOST:PORT", help="HTTP bind address [env WEF_LISTEN]")
    s.add_argument("--keepalive", type=positive, default=DEFAULT_KEEPALIVE, metavar="SECS")
    s.add_argument("--extended-payload", action="store_true",
                   help="append isAnon, flags, changeSize to each payload")
    s.add_argument("--seed", type=int, default=1, help="seed for --source synthetic")
    s.add_argument("--events", type=int, default=10000, help="event count for --source synthetic")
    s.add_argument("--await-subscribers", type=int, default=0, metavar="N",
                   help="hold the source until N subscribers are connected")
    _add_stats_flags(s)

    c = sub.add_parser("consume", help="subscribe to an SSE endpoint and print rolling ratios")
    c.add_argument("--url", required=True)
    c.add_argument("--events", default="", help="comma separated event types (default all)")
    c.add_argument("--stats-interval", type=positive, default=10.0, metavar="SECS")
    c.add_argument("--limit", type=int, help="stop after this many edits")

    r = sub.add_parser("report", help="run a replay to completion and export statistics")
    r.add_argument("--source", choices=("replay",), default="replay")
    r.add_argument("--fixture", type=Path, required=True)
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--figure", type=Path, help="also render ratio and channel plots to this file")
    _add_stats_flags(r)

    g = sub.add_parser("gen-fixture", help="write a synthetic replay fixture")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--events", type=int, required=True)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--bot-prob", type=fraction, default=0.3)
    g.add_argument("--anon-prob", type=fraction, default=0.2)
    g.add_argument("--languages", default="all")
    g.add_argument("--truth", type=Path, help="also write the ground-truth log here")
    g.add_argument("--bot-names", action="store_true",
                   help="mark bots by a ...Bot name instead of the B flag")
    g.add_argument("--decorate", action="store_true", help="wrap fields in IRC colour codes")
    return parser


def _policy(args) -> BotPolicy:
    if not args.bot_list:
        return BotPolicy()
    return BotPolicy(bot_list=load_bot_list(args.bot_list))


def _tracker(args) -> ConvergenceTracker:
    if args.convergence_window < 1:
        raise CliError("--convergence-window must be at least 1")
    return ConvergenceTracker(args.sample_interval, args.convergence_window, args.convergence_epsilon)


# --- serve -------------------------------------------------------------------


async def _serve(args) -> int:
    channels = parse_languages(args.languages)
    pipeline = Pipeline(channels, _policy(args), _tracker(args),
                        extended_payload=args.extended_payload)
    server = SseServer(lambda: export_report(pipeline.snapshot(), "json"),
                       keepalive=args.keepalive)
    pipeline.server = server
    host, port = await server.start(*args.listen)
    print(f"listening on http://{host}:{port}/sse", file=sys.stderr, flush=True)

    feed_stats = FeedStats()
    if args.source == "live":
        source = open_live_feed(FeedConfig(channels, "live", args.server, args.nick), feed_stats)
    elif args.source == "replay":
        if args.fixture is None:
            raise CliError("--source replay needs --fixture")
        source = open_replay_feed(
            FeedConfig(channels, "replay", replay_path=args.fixture, replay_rate=args.rate), feed_stats)
    else:
        source = open_synthetic_feed(GenConfig.uniform(args.seed, channels, args.events), args.rate)

    loop = asyncio.get_running_loop()
    stop = asyncio.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except (NotImplementedError, RuntimeError):
            pass

    async def ingest():
        if args.await_subscribers:
            await server.wait_for_subscribers(args.await_subscribers)
        await pipeline.run(source)
        print("source finished; still serving", file=sys.stderr, flush=True)

    ingest_task = asyncio.ensure_future(ingest())
    stop_task = asyncio.ensure_future(stop.wait())
    status = 0
    try:
        await asyncio.wait({ingest_task, stop_task}, return_when=asyncio.FIRST_EXCEPTION)
        if ingest_task.done() and ingest_task.exception() is not None:
            raise ingest_task.exception()
        if not stop_task.done():
            await stop_task
    except FeedError as exc:
        print(f"wef: error: {exc}", file=sys.stderr)
        status = 1
    finally:
        ingest_task.cancel()
        stop_task.cancel()
        await asyncio.gather(ingest_task, stop_task, return_exceptions=True)
        await server.close()
    sys.stdout.buffer.write(export_report(pipeline.snapshot(), "json"))
    sys.stdout.flush()
    return status


# --- consume -------------------------------------------------------------------


class RollingRatios:
    def __init__(self):
        self.edits = self.bots = self.humans = self.anon_humans = 0

    def add(self, payload) -> None:
        self.edits += 1
        if payload.isBot:
            self.bots += 1
            return
        self.humans += 1
        # editor is "<language>:<handle>"; the handle may itself contain ':'
        handle = payload.editor.split(":", 1)[1] if ":" in payload.editor else payload.editor
        if is_anonymous(handle):
            self.anon_humans += 1

    def line(self, prefix: str = "edits") -> str:
        bot = f"{100.0 * self.bots / self.edits:.2f}%" if self.edits else "n/a"
        anon = f"{100.0 * self.anon_humans / self.humans:.2f}%" if self.humans else "n/a"
        return (f"{prefix} edits={self.edits} bots={self.bots} humans={self.humans} "
                f"anon_humans={self.anon_humans} bot={bot} anon={anon}")


def _sse_url(url: str) -> str:
    stripped = url.rstrip("/")
    return url if stripped.endswith("/sse") else stripped + "/sse"


async def _consume(args) -> int:
    ratios = RollingRatios()
    types = [t.strip() for t in args.events.split(",") if t.strip()]
    next_print = time.monotonic() + args.stats_interval
    status = 0
    try:
        if args.limit == 0:
            return 0
        async for payload in consume(_sse_url(args.url), types):
            ratios.add(payload)
            if time.monotonic() >= next_print:
                print(ratios.line("rolling"), flush=True)
                next_print += args.stats_interval
            if args.limit is not None and ratios.edits >= args.limit:
                break
    except (SseConnectionLost, SseHttpError) as exc:
        print(f"wef: error: {exc}", file=sys.stderr)
        status = 1
    finally:
        print(ratios.line("final"), flush=True)
    return status


# --- report / gen-fixture ---------------------------------------------------------


def _report(args) -> int:
    if not args.fixture.exists():
        raise CliError(f"fixture not found: {args.fixture}")
    channels = parse_languages(args.languages)
    tracker = _tracker(args)
    pipeline = Pipeline(channels, _policy(args), tracker)
    snap = pipeline.run_sync(iter_fixture(args.fixture))
    args.out.write_bytes(export_report(snap, args.format))
    if args.figure is not None:
        from .plotting import plot_report

        plot_report(snap, tracker.log, args.figure)
    return 0


def _gen_fixture(args) -> int:
    if args.events < 0:
        raise CliError("--events must be non-negative")
    config = GenConfig.uniform(
        args.seed, parse_languages(args.languages), args.events,
        bot_probability=args.bot_prob, anon_probability_given_human=args.anon_prob,
        bot_names=args.bot_names, decorate=args.decorate,
    )
    lines, truth = generate_lists(config)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_fixture(lines, fh)
    if args.truth is not None:
        with open(args.truth, "w", encoding="utf-8", newline="\n") as fh:
            write_truth(truth, fh)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "serve":
            return asyncio.run(_serve(args))
        if args.command == "consume":
            return asyncio.run(_consume(args))
        if args.command == "report":
            return _report(args)
        return _gen_fixture(args)
    except (CliError, FeedError, ChannelError, OSError, ValueError) as exc:
        print(f"wef: error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


def run(argv: Optional[List[str]] = None) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
