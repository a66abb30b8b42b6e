import itertools
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wef.classifier import BotPolicy, classify, classify_bot, is_anonymous, load_bot_list, \
    qualify_editor


@pytest.mark.parametrize("handle, expected", [
    ("74.197.171.148", True),
    ("Rambot", False),
    ("256.1.1.1", False),
    ("2001:db8::1", True),
    ("::1", True),
    ("::ffff:1.2.3.4", True),
    ("1.2.3", False),
    ("+1.2.3.4", False),
    ("1.2.3.4 ", False),
    ("fe80::1%eth0", False),
    ("2001:db8:::1", False),
    ("", False),
])
def test_is_anonymous_examples(handle, expected):
    assert is_anonymous(handle) is expected


def _dotted_quad_oracle(handle):
    # independent check: four plain decimal octets 0-255 without leading zeros
    parts = handle.split(".")
    if len(parts) != 4:
        return False
    for p in parts:
        if not re.fullmatch(r"0|[1-9][0-9]{0,2}", p) or int(p) > 255:
            return False
    return True


def test_ipv4_against_enumerated_oracle():
    octets = ["0", "1", "9", "10", "99", "100", "255", "256", "300", "01", "-1", "", "a", "1a"]
    for combo in itertools.product(octets, repeat=4):
        handle = ".".join(combo)
        assert is_anonymous(handle) is _dotted_quad_oracle(handle), handle


@given(st.ip_addresses())
def test_every_ip_is_anonymous(addr):
    assert is_anonymous(str(addr))


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ _", min_size=1))
def test_names_with_letters_outside_hex_are_not_anonymous(name):
    if any(c not in "abcdefABCDEF" for c in name):
        assert not is_anonymous(name)


def test_classify_bot_examples():
    assert classify_bot("X", {"B"}, set()) is True
    assert classify_bot("74.197.171.148", set(), set()) is False
    assert classify_bot("ExampleBot", set(), set()) is True
    assert classify_bot("examplebot", set(), set()) is True
    assert classify_bot("Alice", set(), {"Alice"}) is True
    assert classify_bot("alice", set(), {"Alice"}) is False


def test_classify_bot_toggles():
    assert classify_bot("X", {"B"}, use_flag=False) is False
    assert classify_bot("Alice", set(), {"Alice"}, use_list=False) is False
    assert classify_bot("ExampleBot", set(), use_name_heuristic=False) is False


@given(st.ip_addresses())
def test_ip_never_bot_by_name(addr):
    assert classify_bot(str(addr), set()) is False
    assert classify_bot(str(addr), {"B"}) is True


@pytest.mark.parametrize("code, handle, expected", [
    ("en", "86.150.237.133", "en:86.150.237.133"),
    ("wikidata", "Alice", "wikidata:Alice"),
    ("de", "A B", "de:A B"),
])
def test_qualify_editor(code, handle, expected):
    assert qualify_editor(code, handle) == expected


@given(st.text(min_size=1), st.text(min_size=1))
def test_qualify_editor_injective(a, b):
    if a != b:
        assert qualify_editor("en", a) != qualify_editor("en", b)


def test_classify_listing_editor():
    c = classify("en", "86.150.237.133", frozenset())
    assert c.is_anonymous and not c.is_bot
    assert c.qualified_editor == "en:86.150.237.133"


def test_load_bot_list(tmp_path):
    path = tmp_path / "bots.txt"
    path.write_text("# known bots\nClueBot NG\n\n  Addbot  # inline comment\n", encoding="utf-8")
    bots = load_bot_list(path)
    assert bots == {"ClueBot NG", "Addbot"}
    assert classify("en", "ClueBot NG", frozenset(), BotPolicy(bot_list=bots)).is_bot
