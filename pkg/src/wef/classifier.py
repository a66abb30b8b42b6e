"""Bot/human and anonymous/logged-in labelling of editors."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, FrozenSet, Union


@dataclass(frozen=True)
class EditorClass:
    is_bot: bool
    is_anonymous: bool
    qualified_editor: str


@dataclass(frozen=True)
class BotPolicy:
    """Which bot signals are honoured, checked in the order flag, list, name."""

    bot_list: FrozenSet[str] = field(default_factory=frozenset)
    use_flag: bool = True
    use_list: bool = True
    use_name_heuristic: bool = True


def is_anonymous(editor_handle: str) -> bool:
    """True iff the handle is a literal IPv4 or IPv6 address."""
    if not editor_handle or "%" in editor_handle or editor_handle.strip() != editor_handle:
        # scoped IPv6 literals never appear as editor names
        return False
    try:
        ipaddress.ip_address(editor_handle)
    except ValueError:
        return False
    return True


def classify_bot(
    editor_handle: str,
    flags: AbstractSet[str],
    bot_list: AbstractSet[str] = frozenset(),
    *,
    use_flag: bool = True,
    use_list: bool = True,
    use_name_heuristic: bool = True,
) -> bool:
    if use_flag and "B" in flags:
        return True
    if use_list and editor_handle in bot_list:
        return True
    if use_name_heuristic and editor_handle.endswith(("bot", "Bot")):
        return not is_anonymous(editor_handle)
    return False


def qualify_editor(language_code: str, editor_handle: str) -> str:
    return language_code + ":" + editor_handle


def classify(
    language_code: str,
    editor_handle: str,
    flags: AbstractSet[str],
    policy: BotPolicy = BotPolicy(),
) -> EditorClass:
    return EditorClass(
        is_bot=classify_bot(
            editor_handle,
            flags,
            policy.bot_list,
            use_flag=policy.use_flag,
            use_list=policy.use_list,
            use_name_heuristic=policy.use_name_heuristic,
        ),
        is_anonymous=is_anonymous(editor_handle),
        qualified_editor=qualify_editor(language_code, editor_handle),
    )


def load_bot_list(path: Union[str, Path]) -> FrozenSet[str]:
    """Read one handle per line; ``#`` starts a comment."""
    names = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            name = line.split("#", 1)[0].strip()
            if name:
                names.add(name)
    return frozenset(names)
