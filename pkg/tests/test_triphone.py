import io
import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GOLDEN
from phonorich.g2p import transcribe_tokens
from phonorich.ingest import tokenize
from phonorich.inventory import UnknownSymbolError, default_inventory
from phonorich.triphone import (
    CATEGORIES,
    Triphone,
    TriphoneCategory,
    TriphoneInventory,
    add,
    categorize,
    extract,
    merge,
)

INV = default_inventory()
SYMBOLS = tuple(INV)
streams = st.lists(st.sampled_from(SYMBOLS), max_size=25)


def test_extract_windows():
    assert extract(["a", "t", "u", "a"]) == [Triphone("a", "t", "u"), Triphone("t", "u", "a")]
    assert extract(["a", "t"]) == []
    assert extract([]) == []


def test_extract_canonicalizes_tie_bars():
    assert extract(["a", "t͡ʃ", "ɪ"]) == [Triphone("a", "tʃ", "ɪ")]


def test_extract_reports_position_of_unknown_symbol():
    with pytest.raises(UnknownSymbolError, match="position 2"):
        extract(["a", "t", "θ", "a"])


@pytest.mark.parametrize("tri, cat", [(g[1], g[2]) for g in GOLDEN])
def test_golden_categories(tri, cat):
    assert categorize(tri) is TriphoneCategory(cat)


def test_all_categories_reachable_from_golden_sentences():
    inv = TriphoneInventory()
    for text, _, _ in GOLDEN:
        inv.add(extract(transcribe_tokens(tokenize(text)).phonemes))
    assert all(inv.distinct_in(c) >= 1 for c in CATEGORIES)


def _check_sums(inv: TriphoneInventory):
    pc = inv.per_category
    assert sum(d for d, _ in pc.values()) == inv.distinct == len(inv.counts)
    assert sum(t for _, t in pc.values()) == inv.total == sum(inv.counts.values())
    inv.check()


@given(st.lists(streams, max_size=12))
def test_sum_identities(sentences):
    inv = TriphoneInventory()
    expected_total = 0
    for s in sentences:
        inv.add(extract(s))
        expected_total += max(0, len(s) - 2)
    _check_sums(inv)
    assert inv.total == expected_total


@given(st.lists(streams, max_size=8), streams)
def test_contribution_is_set_difference(history, sentence):
    inv = TriphoneInventory()
    for s in history:
        inv.add(extract(s))
    seen = set(inv.counts)
    ts = extract(sentence)
    oracle = Counter(categorize(t).value for t in set(ts) - seen)
    before = inv.copy()
    new = inv.new_by_category(ts)
    assert inv == before  # pure
    assert {c.value: n for c, n in new.items() if n} == dict(oracle)
    _, contribution = add(inv, ts)
    assert contribution == new


def test_duplicate_within_sentence_counts_once_for_contribution():
    inv = TriphoneInventory()
    ts = extract("a t a t a t a".split())
    new = inv.add(ts)
    assert sum(new.values()) == 2  # /ata/ and /tat/
    assert inv.total == 5


@settings(max_examples=50)
@given(st.lists(streams, max_size=6), st.lists(streams, max_size=6))
def test_merge_equals_sequential_add(xs, ys):
    a, b, both = TriphoneInventory(), TriphoneInventory(), TriphoneInventory()
    for s in xs:
        a.add(extract(s))
        both.add(extract(s))
    for s in ys:
        b.add(extract(s))
        both.add(extract(s))
    m = merge(a, b)
    assert m == both == merge(b, a)
    _check_sums(m)
    assert m.per_category == both.per_category


@settings(max_examples=50)
@given(st.lists(streams, max_size=6))
def test_dump_load_round_trip(sentences):
    inv = TriphoneInventory()
    for s in sentences:
        inv.add(extract(s))
    buf = io.StringIO()
    inv.dump(buf)
    text = buf.getvalue()
    loaded = TriphoneInventory.load(io.StringIO(text))
    assert loaded == inv and loaded.per_category == inv.per_category
    lines = text.splitlines()
    keys = [tuple(json.loads(line)[k] for k in ("p1", "p2", "p3")) for line in lines]
    assert keys == sorted(keys)
    buf2 = io.StringIO()
    loaded.dump(buf2)
    assert buf2.getvalue() == text


def test_load_rejects_bad_lines():
    with pytest.raises(ValueError, match="line 2"):
        TriphoneInventory.load(io.StringIO('{"p1":"a","p2":"t","p3":"a","count":1}\n{"p1":"a"}\n'))
    with pytest.raises(ValueError, match="category mismatch"):
        TriphoneInventory.load(io.StringIO('{"p1":"a","p2":"t","p3":"a","category":"CCC","count":1}\n'))
