import io
import random

import pytest

from conftest import T0, q
from dnsobs.errors import EmptyDatabase, EmptyTrace, UnsortedInput
from dnsobs.fingerprint import (
    AccessPattern,
    PatternDB,
    detect_stream,
    extract_pattern,
    match_window,
    uniqueness_report,
)
from oracles import brute_match, brute_windows, pairwise_uniqueness

MAGERSUCHT = [
    "www.magersucht.de",
    "www.amazon.de",
    "www.essfrust.de",
    "www.magersucht.de",
    "www.essstoerungen-frankfurt.de",
    "www.telefonseelsorge.de",
    "www.amazon.de",
]


def test_extract_pattern_from_trace():
    trace = [q(i * 0.2, "u", d) for i, d in enumerate(MAGERSUCHT)]
    p = extract_pattern("www.magersucht.de", trace)
    assert p.domains == {
        "www.amazon.de",
        "www.essfrust.de",
        "www.essstoerungen-frankfurt.de",
        "www.magersucht.de",
        "www.telefonseelsorge.de",
    }


def test_extract_pattern_singleton_and_dedup():
    assert extract_pattern("p", [q(0, "u", "d")]).domains == {"d"}
    assert extract_pattern("p", ["a", "b", "a", "c", "b"]).domains == {"a", "b", "c"}


def test_extract_pattern_empty_trace():
    with pytest.raises(EmptyTrace):
        extract_pattern("p", [])


def test_db_index_consistency():
    db = PatternDB.from_mapping({"p1": ["a", "b"], "p2": ["b", "c"]})
    assert db.domain_index == {"a": {"p1"}, "b": {"p1", "p2"}, "c": {"p2"}}
    assert db.universe() == ["a", "b", "c"]
    with pytest.raises(ValueError):
        PatternDB([AccessPattern("p", frozenset("a")), AccessPattern("p", frozenset("b"))])


def test_db_json_roundtrip():
    db = PatternDB.from_mapping({"p1": ["b", "a"], "p2": ["c"]})
    buf = io.StringIO()
    db.dump(buf)
    buf.seek(0)
    back = PatternDB.load(buf)
    assert back.to_list() == [{"page_id": "p1", "domains": ["a", "b"]}, {"page_id": "p2", "domains": ["c"]}]


def test_uniqueness_report_example():
    patterns = {"p1": "ab", "p2": "ac", "p3": "ab"}
    rep = uniqueness_report(PatternDB.from_mapping(patterns))
    unique, groups = pairwise_uniqueness(patterns)
    assert (rep.unique_count, rep.total) == (unique, 3) == (1, 3)
    assert rep.fraction_unique == pytest.approx(1 / 3)
    assert rep.duplicate_groups == groups == [["p1", "p3"]]


def test_uniqueness_degenerate():
    assert uniqueness_report(PatternDB.from_mapping({"p": "a"})).fraction_unique == 1.0
    assert uniqueness_report(PatternDB.from_mapping({"p": "ab", "r": "ba", "s": "ab"})).fraction_unique == 0.0
    with pytest.raises(EmptyDatabase):
        uniqueness_report(PatternDB())


def test_uniqueness_permutation_invariant():
    rng = random.Random(3)
    patterns = {f"p{i}": rng.sample("abcdef", rng.randint(1, 3)) for i in range(30)}
    items = list(patterns.items())
    base = uniqueness_report(PatternDB.from_mapping(patterns)).to_dict()
    for _ in range(5):
        rng.shuffle(items)
        assert uniqueness_report(PatternDB.from_mapping(dict(items))).to_dict() == base


@pytest.mark.parametrize(
    "patterns, observed, expected",
    [
        ({"p1": "ab"}, "abc", {"p1"}),
        ({"p1": "ab"}, "ac", set()),
        ({"p1": "ab", "p2": "abc"}, "abc", {"p1", "p2"}),
    ],
)
def test_match_window_examples(patterns, observed, expected):
    db = PatternDB.from_mapping(patterns)
    assert match_window(db, set(observed)) == expected == brute_match(patterns, observed)


def test_match_window_against_brute_force():
    rng = random.Random(11)
    universe = [f"d{i}" for i in range(30)]
    for _ in range(200):
        patterns = {
            f"p{i}": rng.sample(universe, rng.randint(1, 6)) for i in range(rng.randint(1, 50))
        }
        db = PatternDB.from_mapping(patterns)
        observed = set(rng.sample(universe, rng.randint(1, 30)))
        assert match_window(db, observed) == brute_match(patterns, observed)


def test_match_handles_large_patterns():
    big = [f"x{i}.com" for i in range(1000)]
    db = PatternDB.from_mapping({"big": big, "small": ["x1.com"]})
    assert match_window(db, big) == {"big", "small"}
    assert match_window(db, big[:-1]) == {"small"}


def test_detect_single_load():
    db = PatternDB.from_mapping({"p1": ["a", "b", "c"], "p2": ["x", "y"]})
    qs = [q(0, "u", "a"), q(2, "u", "b"), q(5, "u", "c")]
    (ev,) = detect_stream(db, qs, window=30)
    assert (ev.time, ev.user, ev.page_ids) == (T0 + 5, "u", ("p1",))


def test_detect_window_miss():
    db = PatternDB.from_mapping({"p1": ["a", "b", "c"]})
    qs = [q(0, "u", "a"), q(20, "u", "b"), q(40, "u", "c")]
    assert detect_stream(db, qs, window=30) == []


def test_detect_two_interleaved_users():
    patterns = {"p1": ["a", "b", "c"], "p2": ["x", "y"]}
    db = PatternDB.from_mapping(patterns)
    qs = [q(0, "u1", "a"), q(0.5, "u2", "x"), q(1, "u1", "b"), q(1.5, "u2", "b"),
          q(2, "u2", "y"), q(3, "u1", "c")]
    events = detect_stream(db, qs, window=30)
    assert [(e.user, e.page_ids) for e in events] == [("u2", ("p2",)), ("u1", ("p1",))]
    assert [(e.time, e.user, e.page_ids) for e in events] == brute_windows(patterns, qs, 30)


def test_detect_matches_brute_force_on_random_streams():
    rng = random.Random(5)
    universe = [f"d{i}" for i in range(12)]
    for _ in range(50):
        patterns = {f"p{i}": rng.sample(universe, rng.randint(1, 4)) for i in range(8)}
        db = PatternDB.from_mapping(patterns)
        t = 0.0
        qs = []
        for _ in range(60):
            t += rng.expovariate(0.2)
            qs.append(q(t, rng.choice(["u1", "u2", "u3"]), rng.choice(universe)))
        got = [(e.time, e.user, e.page_ids) for e in detect_stream(db, qs, window=15)]
        assert got == brute_windows(patterns, qs, 15)


def test_detect_unsorted_input():
    db = PatternDB.from_mapping({"p1": ["a"]})
    with pytest.raises(UnsortedInput):
        detect_stream(db, [q(5, "u", "a"), q(1, "u", "a")])
