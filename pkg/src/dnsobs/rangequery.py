"""Range-query defenses and the fingerprinting attack that undoes them.

A client hides the domains of a page load among dummy lookups.  With
randomly chosen dummies the real page is usually the only one whose pattern
is *complete* in the observation, so a resolver holding a pattern database
still identifies it.  Drawing dummies as whole patterns of other pages
leaves the resolver with ``n + 1`` equally complete candidates.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._validation import check_positive
from .errors import DataError, NotEnoughPatterns, PoolExhausted
from .fingerprint import AccessPattern, PatternDB, match_window

STRATEGIES = ("random", "pattern_complete")


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class RangeQueryObservation:
    observed: frozenset
    true_page: str
    strategy: str
    n_dummies: int


@dataclass(frozen=True)
class AttackResult:
    candidates: frozenset
    identified: bool

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)


def random_dummies(pattern: AccessPattern, n: int, pool: Iterable[str], seed=None):
    """Add ``n`` distinct dummies drawn uniformly from ``pool`` minus the pattern."""
    check_positive(n, "n", integer=True, allow_zero=True)
    candidates = [d for d in sorted(set(pool)) if d not in pattern.domains]
    if len(candidates) < n:
        raise PoolExhausted(f"pool offers {len(candidates)} dummy domains, {n} requested")
    rng = make_rng(seed)
    picks = rng.choice(len(candidates), size=n, replace=False) if n else ()
    observed = pattern.domains | {candidates[i] for i in picks}
    return RangeQueryObservation(frozenset(observed), pattern.page_id, "random", n)


def pattern_dummies(pattern: AccessPattern, n_patterns: int, db: PatternDB, seed=None):
    """Add the complete patterns of ``n_patterns`` other pages from ``db``."""
    check_positive(n_patterns, "n_patterns", integer=True, allow_zero=True)
    others = sorted(pid for pid in db.page_ids() if pid != pattern.page_id)
    if len(others) < n_patterns:
        raise NotEnoughPatterns(f"db has {len(others)} other pages, {n_patterns} requested")
    rng = make_rng(seed)
    picks = rng.choice(len(others), size=n_patterns, replace=False) if n_patterns else ()
    observed = set(pattern.domains)
    for i in picks:
        observed |= db[others[i]].domains
    return RangeQueryObservation(frozenset(observed), pattern.page_id, "pattern_complete", n_patterns)


def range_attack(db: PatternDB, observation: RangeQueryObservation) -> AttackResult:
    candidates = frozenset(match_window(db, observation.observed))
    return AttackResult(candidates, candidates == {observation.true_page})


@dataclass
class BenchmarkReport:
    strategy: str
    n: int
    trials: int
    identification_rate: float
    mean_candidate_count: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n": self.n,
            "trials": self.trials,
            "identification_rate": self.identification_rate,
            "mean_candidate_count": self.mean_candidate_count,
            "seed": self.seed,
        }


def defense_benchmark(
    db: PatternDB,
    strategy: str,
    n: int,
    trials: int,
    pool: Iterable[str] | None = None,
    seed: int = 0,
    threads: int = 1,
) -> BenchmarkReport:
    """Monte Carlo identification rate of the complete-pattern attack.

    Each trial draws its true page uniformly from ``db`` using its own child
    seed, so results do not depend on ``threads``.  ``pool`` defaults to the
    domain universe of ``db``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    check_positive(trials, "trials", integer=True)
    if not len(db):
        raise DataError("pattern database is empty")
    pages = sorted(db.page_ids())
    pool = sorted(set(pool)) if pool is not None else db.universe()
    children = np.random.SeedSequence(seed).spawn(trials)

    def one_trial(child):
        rng = make_rng(child)
        true = db[pages[int(rng.integers(len(pages)))]]
        if strategy == "random":
            obs = random_dummies(true, n, pool, rng)
        else:
            obs = pattern_dummies(true, n, db, rng)
        res = range_attack(db, obs)
        assert true.page_id in res.candidates
        return res.identified, res.candidate_count

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(one_trial, children))
    else:
        outcomes = [one_trial(c) for c in children]
    hits = sum(1 for ok, _ in outcomes if ok)
    return BenchmarkReport(
        strategy=strategy,
        n=n,
        trials=trials,
        identification_rate=hits / trials,
        mean_candidate_count=sum(c for _, c in outcomes) / trials,
        seed=seed,
    )
