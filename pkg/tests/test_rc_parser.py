import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wef.rc_parser import (FailureReason, ParsedEdit, ParseFailure, build_diff_url,
                           extract_revisions, BadUrl, normalize_article, parse_line,
                           strip_formatting)

from conftest import SAMPLE_LINE


# --- strip_formatting ---------------------------------------------------------

@pytest.mark.parametrize("raw, clean", [
    ("\x0307abc\x03", "abc"),
    ("plain text", "plain text"),
    ("\x02(+14)\x02", "(+14)"),
    ("\x1funder\x0f", "under"),
    ("\x0304,12red on blue", "red on blue"),
    ("\x03123", "3"),            # at most two colour digits
    ("\x0304,abc", ",abc"),       # comma only consumed with a background digit
    ("\x03,05x", ",05x"),         # no foreground, so no background either
])
def test_strip_formatting_examples(raw, clean):
    assert strip_formatting(raw) == clean


@given(st.text())
def test_strip_formatting_idempotent(text):
    once = strip_formatting(text)
    assert strip_formatting(once) == once


@given(st.text(alphabet=st.characters(blacklist_characters="\x02\x03\x0f\x1f")))
def test_strip_formatting_identity_without_codes(text):
    assert strip_formatting(text) == text


# --- parse_line ---------------------------------------------------------------

def test_sample_line():
    p = parse_line(SAMPLE_LINE)
    assert p == ParsedEdit(
        article="Keep Calm and Carry On",
        article_key="Keep_Calm_and_Carry_On",
        flags=frozenset(),
        revision_url="http://en.wikipedia.org/w/index.php?diff=585806152&oldid=585805943",
        from_rev=585805943,
        to_rev=585806152,
        editor_handle="74.197.171.148",
        change_size=14,
        comment="/* Parodies */",
    )


def test_new_page_form():
    p = parse_line("[[X]] http://en.wikipedia.org/w/index.php?oldid=1&rcid=2 N * Alice * (+0) ")
    assert p.article == "X"
    assert p.flags == {"N"}
    assert p.to_rev is None and p.from_rev == 1
    assert p.change_size == 0
    assert p.comment == ""


def test_decorated_live_form():
    raw = ("\x0314[[\x0307Foo Bar\x0314]]\x034 MB\x0310 \x0302https://de.wikipedia.org/w/"
           "index.php?diff=12&oldid=11\x03 \x035*\x03 \x0303SomeBot\x03 \x035*\x03 (-3) "
           "\x0310Typo\x03")
    p = parse_line(raw)
    assert p.article == "Foo Bar"
    assert p.flags == {"M", "B"}
    assert (p.from_rev, p.to_rev) == (11, 12)
    assert p.editor_handle == "SomeBot"
    assert p.change_size == -3
    assert p.comment == "Typo"


def test_comment_asterisks_preserved():
    p = parse_line("[[A]] http://x.org/?diff=2&oldid=1 * Bob * (+1) a * b * c")
    assert p.comment == "a * b * c"


def test_missing_size_is_absent_not_zero():
    p = parse_line("[[A]] http://x.org/?diff=2&oldid=1 * Bob * just a comment")
    assert p.change_size is None
    assert p.comment == "just a comment"


@pytest.mark.parametrize("text, reason", [
    ("no brackets here", FailureReason.NO_TITLE),
    ("[[]] http://x/?oldid=1 * a * (+1)", FailureReason.NO_TITLE),
    ("[[A]]http://x/?oldid=1 * a * (+1)", FailureReason.NO_TITLE),
    ("[[A]] http://x/?oldid=1 * a (+1)", FailureReason.BAD_SEPARATOR_STRUCTURE),
    ("[[A]] http://x/?oldid=1 *  * (+1)", FailureReason.BAD_SEPARATOR_STRUCTURE),
    ("[[A]] http://x/?oldid=1 * a * (+1x)", FailureReason.BAD_SIZE_TOKEN),
    ("[[A]] http://x/?oldid=1 * a * (14)", FailureReason.BAD_SIZE_TOKEN),
    ("[[A]] http://x/?diff=abc&oldid=1 * a * (+1)", FailureReason.BAD_URL),
    ("[[A]] http://x/ * a * (+1)", FailureReason.BAD_URL),
    ("[[A]] notaurl * a * (+1)", FailureReason.BAD_URL),
    ("[[A]] http://x/?oldid=1 Q * a * (+1)", FailureReason.BAD_URL),
])
def test_failures(text, reason):
    result = parse_line(text)
    assert isinstance(result, ParseFailure)
    assert result.reason is reason


def test_huge_numbers_do_not_crash():
    digits = "9" * 5000
    assert isinstance(parse_line(f"[[A]] http://x/?oldid={digits} * a * (+1)"), ParseFailure)
    assert isinstance(parse_line(f"[[A]] http://x/?oldid=1 * a * (+{digits})"), ParseFailure)


def test_accepts_bytes_and_feed_lines():
    from wef.channels import channel_name_for
    from wef.feed import RawFeedLine

    assert parse_line(SAMPLE_LINE.encode()) == parse_line(SAMPLE_LINE)
    line = RawFeedLine(channel_name_for("en"), SAMPLE_LINE, 0)
    assert parse_line(line) == parse_line(SAMPLE_LINE)


# --- extract_revisions / build_diff_url / normalize_article ---------------------

@pytest.mark.parametrize("url, expected", [
    ("http://en.wikipedia.org/w/index.php?diff=585806152&oldid=585805943", (585805943, 585806152)),
    ("http://en.wikipedia.org/w/index.php?oldid=7", (7, None)),
])
def test_extract_revisions(url, expected):
    assert extract_revisions(url) == expected


@pytest.mark.parametrize("url", [
    "http://en.wikipedia.org/w/index.php?diff=abc",
    "http://en.wikipedia.org/w/index.php",
    "http://en.wikipedia.org/w/index.php?diff=5",
    "http://en.wikipedia.org/w/index.php?diff=+5&oldid=1",
])
def test_extract_revisions_bad(url):
    with pytest.raises(BadUrl):
        extract_revisions(url)


@given(st.integers(0, 10**12), st.integers(0, 10**12), st.booleans())
def test_extract_revisions_order_insensitive(old, new, extra):
    params = [f"diff={new}", f"oldid={old}"] + (["rcid=3"] if extra else [])
    a = extract_revisions("http://h/w/index.php?" + "&".join(params))
    b = extract_revisions("http://h/w/index.php?" + "&".join(reversed(params)))
    assert a == b == (old, new)


def test_build_diff_url_examples():
    assert build_diff_url("en", 585776128, 585820379) == (
        "http://en.wikipedia.org/w/api.php?action=compare&torev=585820379&fromrev=585776128&format=json")
    assert build_diff_url("wikidata", 1, 2) == (
        "http://www.wikidata.org/w/api.php?action=compare&torev=2&fromrev=1&format=json")
    assert build_diff_url("de", 5, 5).endswith("torev=5&fromrev=5&format=json")


@pytest.mark.parametrize("title, key", [
    ("Keep Calm and Carry On", "Keep_Calm_and_Carry_On"),
    ("X", "X"),
    ("a  b", "a__b"),
])
def test_normalize_article(title, key):
    assert normalize_article(title) == key


# --- properties ----------------------------------------------------------------

_safe = string.ascii_letters + string.digits + "()-,.'/:!?*"
titles = st.text(alphabet=_safe + " ", min_size=1, max_size=30).filter(
    lambda t: t.strip() and "]]" not in t and not t.endswith("]"))
editors = st.text(alphabet=_safe.replace("*", ""), min_size=1, max_size=20)
comments = st.text(alphabet=_safe + " ", max_size=40)
flag_sets = st.frozensets(st.sampled_from("NMB!"))
sizes = st.one_of(st.none(), st.integers(-10**9, 10**9))


@st.composite
def parsed_edits(draw):
    old = draw(st.integers(1, 10**10))
    new = draw(st.one_of(st.none(), st.integers(1, 10**10)))
    url = f"http://xx.wikipedia.org/w/index.php?oldid={old}" if new is None else \
        f"http://xx.wikipedia.org/w/index.php?diff={new}&oldid={old}"
    title = draw(titles)
    size = draw(sizes)
    comment = draw(comments)
    if size is None and comment.startswith("("):
        comment = "x" + comment
    return ParsedEdit(title, normalize_article(title), draw(flag_sets), url, old, new,
                      draw(editors), size, comment)


@given(parsed_edits())
def test_render_parse_round_trip(edit):
    assert parse_line(edit.render()) == edit


@given(st.text(max_size=200))
@settings(max_examples=500)
def test_reparse_of_any_success_is_stable(text):
    first = parse_line(text)
    if isinstance(first, ParsedEdit):
        assert parse_line(first.render()) == first


@given(st.lists(comments, min_size=2, max_size=5).map(" * ".join))
def test_comment_separators_survive(comment):
    p = parse_line(f"[[T]] http://h/?diff=2&oldid=1 * ed * (+1) {comment}")
    assert p.comment == comment


@given(st.binary(max_size=300))
@settings(max_examples=1000)
def test_totality_bytes(data):
    assert isinstance(parse_line(data), (ParsedEdit, ParseFailure))


@given(st.text(alphabet="[] *()+-0123456789:/?=&abcNMB!\x02\x03\x0f\x1f,", max_size=120))
@settings(max_examples=2000)
def test_totality_grammar_alphabet(text):
    result = parse_line(text)
    assert isinstance(result, (ParsedEdit, ParseFailure))
    if isinstance(result, ParsedEdit):
        assert result.article and " " not in result.article_key
        assert result.to_rev is None or result.from_rev is not None
