"""Language editions and their recent-changes IRC rooms."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, List, Optional

WIKIDATA = "wikidata"
ROOM_SUFFIX = ".wikipedia"

_CODE_RE = re.compile(r"[a-z0-9-]+")


class ChannelError(ValueError):
    """Malformed language code or room string."""


@dataclass(frozen=True, order=True)
class ChannelName:
    language_code: str
    room: str

    @property
    def host(self) -> str:
        """Web host of the edition, used in revision and compare URLs."""
        if self.language_code == WIKIDATA:
            return "www.wikidata.org"
        return f"{self.language_code}.wikipedia.org"

    def __str__(self) -> str:
        return self.room


def channel_name_for(language_code: str) -> ChannelName:
    if not isinstance(language_code, str) or not _CODE_RE.fullmatch(language_code):
        raise ChannelError(f"malformed language code: {language_code!r}")
    return ChannelName(language_code, "#" + language_code + ROOM_SUFFIX)


def channel_from_room(room: str) -> ChannelName:
    """Inverse of :func:`channel_name_for` for a room string like ``#en.wikipedia``."""
    if not room.startswith("#") or not room.endswith(ROOM_SUFFIX):
        raise ChannelError(f"not a recent-changes room: {room!r}")
    return channel_name_for(room[1 : -len(ROOM_SUFFIX)])


def shipped_language_codes() -> List[str]:
    text = resources.files("wef.data").joinpath("languages.txt").read_text("utf-8")
    codes = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            codes.append(line)
    return codes


def all_channels() -> List[ChannelName]:
    """Every shipped language edition followed by the wikidata room."""
    return [channel_name_for(c) for c in shipped_language_codes()] + [
        channel_name_for(WIKIDATA)
    ]


def parse_languages(text: Optional[str]) -> List[ChannelName]:
    """Turn ``"all"`` or a comma separated code list into a duplicate-free channel list."""
    if text is None or text.strip() == "all":
        return all_channels()
    return unique_channels(
        channel_name_for(code.strip()) for code in text.split(",") if code.strip()
    )


def unique_channels(channels: Iterable[ChannelName]) -> List[ChannelName]:
    seen = set()
    out = []
    for ch in channels:
        if ch not in seen:
            seen.add(ch)
            out.append(ch)
    if not out:
        raise ChannelError("channel list is empty")
    return out
