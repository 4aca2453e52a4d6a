"""Push-service economics: popularity ranking, top-k coverage, push bandwidth.

Clients receive the records of the k most popular domains unsolicited and
resolve those locally.  Coverage is the share of requests answered that way.
"""
from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import IO, Iterable

import numpy as np

from ._validation import check_positive
from .errors import EmptyStore
from .model import SessionStore

# mean mix-cascade response time reported for the non-pushed remainder (seconds);
# carried in reports as context, not simulated
MIX_CASCADE_LATENCY = 0.17

COVERAGE_CSV_HEADER = ("k", "aggregate_coverage", "per_user_mean_coverage")


class PopularityRanking(list):
    """[(domain, total_requests), ...] in descending count, ties by name."""

    @classmethod
    def from_counts(cls, counts) -> "PopularityRanking":
        return cls(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    @property
    def total(self) -> int:
        return sum(c for _, c in self)

    def top(self, k: int) -> list[str]:
        return [d for d, _ in self[:k]]

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "domain", "count"))
        for i, (d, c) in enumerate(self, start=1):
            w.writerow((i, d, c))


def rank_domains(store: SessionStore) -> PopularityRanking:
    """Aggregate request counts over all users and epochs."""
    if not len(store):
        raise EmptyStore("cannot rank domains of an empty store")
    totals: Counter = Counter()
    for s in store:
        totals.update(s.counts)
    return PopularityRanking.from_counts(totals)


@dataclass(frozen=True)
class PushConfig:
    k: int = 10_000
    record_size_bytes: int = 80
    mean_change_interval_seconds: float = 1000.0

    def __post_init__(self):
        check_positive(self.k, "k", integer=True)
        check_positive(self.record_size_bytes, "record_size_bytes", integer=True)
        check_positive(self.mean_change_interval_seconds, "mean_change_interval_seconds")


def bandwidth_estimate(config: PushConfig) -> float:
    """Steady-state push volume per subscriber in bytes per second.

    Every pushed record is re-sent once per change and every subscriber gets
    every update.
    """
    return config.k * config.record_size_bytes / config.mean_change_interval_seconds


def bandwidth_report(config: PushConfig) -> dict:
    return {
        "config": asdict(config),
        "bytes_per_second": bandwidth_estimate(config),
        "mix_cascade_latency_seconds": MIX_CASCADE_LATENCY,
    }


@dataclass(frozen=True)
class Coverage:
    k: int
    aggregate: float
    per_user_mean: float

    def row(self) -> tuple:
        return (self.k, repr(self.aggregate), repr(self.per_user_mean))


def coverage_curve(ranking: PopularityRanking, store: SessionStore, ks: Iterable[int]) -> list[Coverage]:
    """Top-k coverage for each ``k``.

    ``aggregate`` is the share of all requests whose domain is among the top
    ``k``; ``per_user_mean`` averages each user's own share.  Domains missing
    from ``ranking`` are never covered.
    """
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be non-empty")
    for k in ks:
        check_positive(k, "k", integer=True)
    rank_of = {d: i for i, (d, _) in enumerate(ranking)}
    unranked = len(ranking)

    per_user: dict[str, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for s in store:
        acc = per_user[s.user]
        for d, c in s.counts.items():
            acc[rank_of.get(d, unranked)] += c
    if not per_user:
        raise EmptyStore("cannot compute coverage of an empty store")

    n = unranked + 1
    hist = np.zeros((len(per_user), n))
    for row, user in enumerate(sorted(per_user)):
        acc = per_user[user]
        idx = np.fromiter(acc.keys(), dtype=np.intp, count=len(acc))
        hist[row] = np.bincount(idx, weights=np.fromiter(acc.values(), float, len(acc)), minlength=n)
    cum = np.cumsum(hist, axis=1)
    user_totals = cum[:, -1]
    grand = user_totals.sum()

    out = []
    for k in ks:
        col = min(k, unranked) - 1
        covered = cum[:, col] if col >= 0 else np.zeros(len(user_totals))
        out.append(Coverage(k, float(covered.sum() / grand), float(np.mean(covered / user_totals))))
    return out


def coverage(ranking: PopularityRanking, store: SessionStore, k: int) -> Coverage:
    return coverage_curve(ranking, store, [k])[0]


def write_coverage_csv(rows: Iterable[Coverage], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COVERAGE_CSV_HEADER)
    for r in rows:
        w.writerow(r.row())
