"""Website fingerprinting from DNS access patterns.

A page load resolves a characteristic *set* of domains.  Order, timing and
multiplicity are deliberately dropped.  A page is detected when its complete
pattern is contained in what a user resolved; partial overlaps are ignored.
"""
from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Mapping

from .errors import DataError, EmptyDatabase, EmptyTrace, UnsortedInput
from .model import DnsQuery, normalize_domain

DEFAULT_WINDOW = 30.0


@dataclass(frozen=True)
class AccessPattern:
    page_id: str
    domains: frozenset

    def __post_init__(self):
        if not self.domains:
            raise DataError(f"pattern {self.page_id!r} has no domains")
        object.__setattr__(self, "domains", frozenset(self.domains))

    def __len__(self):
        return len(self.domains)

    def to_dict(self) -> dict:
        return {"page_id": self.page_id, "domains": sorted(self.domains)}


def extract_pattern(page_id: str, trace: Iterable[DnsQuery | str]) -> AccessPattern:
    """Reduce a page-load capture to the set of distinct domains it resolved."""
    domains = {normalize_domain(q if isinstance(q, str) else q.domain) for q in trace}
    if not domains:
        raise EmptyTrace(f"no queries captured for {page_id!r}")
    return AccessPattern(str(page_id), frozenset(domains))


class PatternDB:
    """Access patterns keyed by page id, with an inverted domain index."""

    def __init__(self, patterns: Iterable[AccessPattern] = ()):
        self._patterns: dict[str, AccessPattern] = {}
        index: dict[str, set] = defaultdict(set)
        for p in patterns:
            if p.page_id in self._patterns:
                raise DataError(f"duplicate page id {p.page_id!r}")
            self._patterns[p.page_id] = p
            for d in p.domains:
                index[d].add(p.page_id)
        self.domain_index: Mapping[str, frozenset] = {d: frozenset(s) for d, s in index.items()}

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[str]]) -> "PatternDB":
        return cls(extract_pattern(pid, doms) for pid, doms in mapping.items())

    def __len__(self) -> int:
        return len(self._patterns)

    def __iter__(self) -> Iterator[AccessPattern]:
        return iter(self._patterns.values())

    def __getitem__(self, page_id: str) -> AccessPattern:
        return self._patterns[page_id]

    def __contains__(self, page_id) -> bool:
        return page_id in self._patterns

    def page_ids(self) -> list[str]:
        return list(self._patterns)

    def universe(self) -> list[str]:
        """All domains occurring in any pattern, sorted."""
        return sorted(self.domain_index)

    def to_list(self) -> list[dict]:
        return [p.to_dict() for p in self]

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> "PatternDB":
        try:
            return cls(extract_pattern(str(it["page_id"]), it["domains"]) for it in items)
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed pattern database: {exc!r}") from None

    def dump(self, fh: IO[str]) -> None:
        json.dump(self.to_list(), fh, indent=1)
        fh.write("\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "PatternDB":
        try:
            return cls.from_list(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc}") from None


@dataclass
class UniquenessReport:
    unique_count: int
    total: int
    fraction_unique: float
    duplicate_groups: list

    def to_dict(self) -> dict:
        return {
            "unique_count": self.unique_count,
            "total": self.total,
            "fraction_unique": self.fraction_unique,
            "duplicate_groups": self.duplicate_groups,
        }


def uniqueness_report(db: PatternDB) -> UniquenessReport:
    """Count patterns whose domain set no other page shares exactly."""
    if not len(db):
        raise EmptyDatabase("pattern database is empty")
    groups: dict[frozenset, list[str]] = defaultdict(list)
    for p in db:
        groups[p.domains].append(p.page_id)
    unique = sum(1 for g in groups.values() if len(g) == 1)
    dups = sorted(sorted(g) for g in groups.values() if len(g) > 1)
    return UniquenessReport(unique, len(db), unique / len(db), dups)


def match_window(db: PatternDB, observed: Iterable[str]) -> set[str]:
    """Pages whose full pattern is a subset of ``observed``."""
    observed = set(observed)
    hits: dict[str, int] = defaultdict(int)
    index = db.domain_index
    for d in observed:
        for pid in index.get(d, ()):
            hits[pid] += 1
    return {pid for pid, n in hits.items() if n == len(db[pid].domains)}


@dataclass(frozen=True)
class Detection:
    time: float
    user: str
    page_ids: tuple

    def to_dict(self) -> dict:
        return {"time": self.time, "user": self.user, "page_ids": list(self.page_ids)}


def detect_stream(
    db: PatternDB, queries: Iterable[DnsQuery], window: float = DEFAULT_WINDOW
) -> list[Detection]:
    """Slide a ``window``-second window over each user's queries.

    An event is emitted whenever the set of completely matched pages changes
    to a new non-empty set.  Events are ordered by (time, user).
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    per_user: dict[str, list[DnsQuery]] = defaultdict(list)
    for q in queries:
        per_user[q.user].append(q)

    events = []
    for user in sorted(per_user):
        live: deque = deque()
        counts: dict[str, int] = defaultdict(int)
        last: frozenset = frozenset()
        prev_ts = None
        for q in per_user[user]:
            if prev_ts is not None and q.timestamp < prev_ts:
                raise UnsortedInput(f"queries of user {user!r} are not time-ordered")
            prev_ts = q.timestamp
            live.append(q)
            counts[q.domain] += 1
            while live[0].timestamp < q.timestamp - window:
                old = live.popleft()
                counts[old.domain] -= 1
                if not counts[old.domain]:
                    del counts[old.domain]
            current = frozenset(match_window(db, counts))
            if current != last and current:
                events.append(Detection(q.timestamp, user, tuple(sorted(current))))
            last = current
    events.sort(key=lambda e: (e.time, e.user))
    return events
