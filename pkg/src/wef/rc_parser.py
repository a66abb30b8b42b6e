"""Decoding of recent-changes messages into structured edit records.

A message, once its terminal formatting codes are removed, looks like::

    [[Title]] http://xx.wikipedia.org/w/index.php?diff=2&oldid=1 MB * Editor * (+14) comment

The parser anchors on the first two ``" * "`` separators after the title so
asterisks in the free-text comment survive untouched.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple, Union
from urllib.parse import parse_qsl, urlsplit

FLAG_LETTERS = frozenset("NMB!")
# canonical rendering order for a flag set
_FLAG_ORDER = "NMB!"

SEPARATOR = " * "

_FORMATTING_RE = re.compile(r"\x03(?:[0-9]{1,2}(?:,[0-9]{1,2})?)?|[\x02\x0f\x1f]")
# bounded digit runs keep int() clear of the interpreter's digit limit
_SIZE_RE = re.compile(r"\(([+-])([0-9]{1,18})\)")
_DIGITS_RE = re.compile(r"[0-9]{1,18}")


class FailureReason(str, enum.Enum):
    NO_TITLE = "no_title"
    BAD_SEPARATOR_STRUCTURE = "bad_separator_structure"
    BAD_SIZE_TOKEN = "bad_size_token"
    BAD_URL = "bad_url"


@dataclass(frozen=True)
class ParsedEdit:
    article: str
    article_key: str
    flags: FrozenSet[str]
    revision_url: str
    from_rev: Optional[int]
    to_rev: Optional[int]
    editor_handle: str
    change_size: Optional[int]
    comment: str

    def render(self) -> str:
        """Re-create a message line that parses back to this record."""
        middle = self.revision_url
        if self.flags:
            middle += " " + render_flags(self.flags)
        parts = [f"[[{self.article}]] {middle}", self.editor_handle]
        if self.change_size is None:
            parts.append(self.comment)
        else:
            parts.append(f"{render_size(self.change_size)} {self.comment}")
        return SEPARATOR.join(parts)


@dataclass(frozen=True)
class ParseFailure:
    reason: FailureReason
    offending_text: str


class BadUrl(ValueError):
    pass


def render_flags(flags) -> str:
    return "".join(c for c in _FLAG_ORDER if c in flags)


def render_size(size: int) -> str:
    return f"({'-' if size < 0 else '+'}{abs(size)})"


def strip_formatting(text: str) -> str:
    """Remove bold, reset, underline and color codes from an IRC message."""
    return _FORMATTING_RE.sub("", text)


def normalize_article(title: str) -> str:
    return title.replace(" ", "_")


def extract_revisions(revision_url: str) -> Tuple[Optional[int], Optional[int]]:
    """Return ``(from_rev, to_rev)`` read from the ``oldid`` and ``diff`` parameters.

    Raises :class:`BadUrl` when there is no query string, a value is not a
    plain decimal number, or a ``diff`` comes without an ``oldid``.
    """
    try:
        query = urlsplit(revision_url).query
    except ValueError as exc:
        raise BadUrl(str(exc)) from None
    if not query:
        raise BadUrl("no query string")
    values = {}
    for key, value in parse_qsl(query, keep_blank_values=True):
        if key in ("diff", "oldid"):
            if key in values or not _DIGITS_RE.fullmatch(value):
                raise BadUrl(f"bad {key} value {value!r}")
            values[key] = int(value)
    from_rev, to_rev = values.get("oldid"), values.get("diff")
    if to_rev is not None and from_rev is None:
        raise BadUrl("diff without oldid")
    return from_rev, to_rev


def build_diff_url(language_code: str, from_rev: int, to_rev: int) -> str:
    if language_code == "wikidata":
        host = "www.wikidata.org"
    else:
        host = language_code + ".wikipedia.org"
    return (
        f"http://{host}/w/api.php?action=compare"
        f"&torev={to_rev}&fromrev={from_rev}&format=json"
    )


def _find_title_end(text: str) -> int:
    i = text.find("]]", 2)
    while i != -1:
        nxt = text[i + 2 : i + 3]
        if nxt in ("", " "):
            return i
        i = text.find("]]", i + 1)
    return -1


def _is_url(token: str) -> bool:
    return "://" in token


def _split_middle(middle: str) -> Tuple[str, FrozenSet[str]]:
    tokens = [t for t in middle.split(" ") if t]
    if len(tokens) == 1:
        url, flags = tokens[0], ""
    elif len(tokens) == 2:
        # the live feed sometimes puts the flags before the URL
        if _is_url(tokens[0]):
            url, flags = tokens
        else:
            flags, url = tokens
    else:
        raise BadUrl(f"unexpected revision component {middle!r}")
    if not _is_url(url):
        raise BadUrl(f"not a URL: {url!r}")
    if not set(flags) <= FLAG_LETTERS:
        raise BadUrl(f"unknown flags {flags!r}")
    return url, frozenset(flags)


def parse_line(line) -> Union[ParsedEdit, ParseFailure]:
    """Parse one message into a :class:`ParsedEdit`, or say which stage failed.

    Accepts text, raw bytes (decoded lossily) or anything with a ``text``
    attribute such as a feed line. Never raises.
    """
    text = getattr(line, "text", line)
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", "replace")
    if not isinstance(text, str):
        return ParseFailure(FailureReason.NO_TITLE, repr(text))
    text = strip_formatting(text)

    if not text.startswith("[["):
        return ParseFailure(FailureReason.NO_TITLE, text)
    end = _find_title_end(text)
    article = text[2:end] if end != -1 else ""
    if not article or not article.strip():
        return ParseFailure(FailureReason.NO_TITLE, text)

    rest = text[end + 2 :]
    parts = rest.split(SEPARATOR, 2)
    if len(parts) != 3 or not rest.startswith(" "):
        return ParseFailure(FailureReason.BAD_SEPARATOR_STRUCTURE, text)
    middle, editor, tail = parts
    if not editor or editor != editor.strip():
        return ParseFailure(FailureReason.BAD_SEPARATOR_STRUCTURE, text)

    try:
        url, flags = _split_middle(middle)
        from_rev, to_rev = extract_revisions(url)
    except BadUrl:
        return ParseFailure(FailureReason.BAD_URL, text)

    change_size = None
    comment = tail
    if tail.startswith("("):
        m = _SIZE_RE.match(tail)
        after = tail[m.end() :] if m else ""
        if m and after[:1] in ("", " "):
            sign, digits = m.groups()
            change_size = -int(digits) if sign == "-" else int(digits)
            comment = after[1:]
        elif tail[1:2] in ("+", "-") or tail[1:2].isdigit():
            # looks like a size token but is not one
            return ParseFailure(FailureReason.BAD_SIZE_TOKEN, text)

    return ParsedEdit(
        article=article,
        article_key=normalize_article(article),
        flags=flags,
        revision_url=url,
        from_rev=from_rev,
        to_rev=to_rev,
        editor_handle=editor,
        change_size=change_size,
        comment=comment,
    )
