"""Seeded synthetic workloads: user populations, page patterns, Zipf traffic.

All randomness flows from one integer seed through numpy's ``SeedSequence``
into PCG64 generators, so outputs are identical across runs and platforms.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import IO

import numpy as np

from ._validation import check_positive, check_probability
from .errors import PoolExhausted
from .fingerprint import AccessPattern, PatternDB
from .model import DAY, DnsQuery, EpochSpec, SessionStore, Session, parse_timestamp, sessionize

RNG_ALGORITHM = "PCG64"


def domain_pool(size: int, prefix: str = "site") -> list[str]:
    width = max(5, len(str(size - 1)))
    return [f"{prefix}{i:0{width}d}.example" for i in range(size)]


def zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1, dtype=float) ** exponent
    return w / w.sum()


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class UserBehaviorProfile:
    user: str
    personal_domains: tuple  # most preferred first
    zipf_exponent: float
    daily_volume: tuple  # (mean, dispersion)
    stability: float


@dataclass(frozen=True)
class PopulationConfig:
    """Parameters of a synthetic user population.

    ``daily_volume`` is (mean, dispersion) of a negative binomial with
    variance ``mean + dispersion * mean**2``; dispersion 0 means Poisson.
    ``pool_popularity_exponent`` skews which pool domains end up in
    profiles (0 = uniform), so that some domains are popular across users.
    """

    num_users: int = 100
    num_epochs: int = 30
    global_pool_size: int = 20_000
    profile_size_range: tuple = (50, 200)
    zipf_exponent: float = 0.9
    daily_volume: tuple = (120.0, 0.3)
    stability: float = 0.9
    seed: int = 42
    rng: str = RNG_ALGORITHM
    epoch_seconds: float = DAY
    origin: str = "2015-03-01T00:00:00Z"
    pool_popularity_exponent: float = 0.5
    disjoint_profiles: bool = False

    def __post_init__(self):
        for name in ("num_users", "num_epochs", "global_pool_size"):
            check_positive(getattr(self, name), name, integer=True)
        lo, hi = self.profile_size_range
        check_positive(lo, "profile_size_range[0]", integer=True)
        if hi < lo:
            raise ValueError("profile_size_range must be (low, high) with low <= high")
        check_positive(self.zipf_exponent, "zipf_exponent", allow_zero=True)
        check_positive(self.daily_volume[0], "daily_volume mean")
        check_positive(self.daily_volume[1], "daily_volume dispersion", allow_zero=True)
        check_probability(self.stability, "stability")
        check_positive(self.epoch_seconds, "epoch_seconds")
        if self.rng != RNG_ALGORITHM:
            raise ValueError(f"unsupported rng {self.rng!r}; only {RNG_ALGORITHM} is implemented")
        object.__setattr__(self, "profile_size_range", tuple(self.profile_size_range))
        object.__setattr__(self, "daily_volume", tuple(float(v) for v in self.daily_volume))

    @property
    def epoch_spec(self) -> EpochSpec:
        return EpochSpec(float(self.epoch_seconds), parse_timestamp(self.origin))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile_size_range"] = list(self.profile_size_range)
        d["daily_volume"] = list(self.daily_volume)
        return d

    @classmethod
    def from_dict(cls, d) -> "PopulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        for key in ("profile_size_range", "daily_volume"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def load(cls, fh: IO[str]) -> "PopulationConfig":
        return cls.from_dict(json.load(fh))


@dataclass
class Simulation:
    config: PopulationConfig
    profiles: list
    volumes: np.ndarray  # (num_users, num_epochs) drawn request counts
    queries: list

    def store(self) -> SessionStore:
        return sessionize(self.queries, self.config.epoch_spec)


def _draw_profiles(cfg: PopulationConfig, pool: list[str], rng) -> list[UserBehaviorProfile]:
    lo, hi = cfg.profile_size_range
    sizes = rng.integers(lo, hi + 1, size=cfg.num_users)
    if hi > len(pool):
        raise PoolExhausted(f"profile size {hi} exceeds pool of {len(pool)} domains")
    if cfg.disjoint_profiles and sizes.sum() > len(pool):
        raise PoolExhausted(f"disjoint profiles need {sizes.sum()} domains, pool has {len(pool)}")
    if cfg.disjoint_profiles:
        order = rng.permutation(len(pool))
        bounds = np.concatenate(([0], np.cumsum(sizes)))
        picks = [order[bounds[i]:bounds[i + 1]] for i in range(cfg.num_users)]
    else:
        weights = zipf_weights(len(pool), cfg.pool_popularity_exponent)
        picks = [rng.choice(len(pool), size=s, replace=False, p=weights) for s in sizes]
    width = max(4, len(str(cfg.num_users - 1)))
    return [
        UserBehaviorProfile(
            user=f"u{i:0{width}d}",
            personal_domains=tuple(pool[j] for j in picks[i]),
            zipf_exponent=cfg.zipf_exponent,
            daily_volume=cfg.daily_volume,
            stability=cfg.stability,
        )
        for i in range(cfg.num_users)
    ]


def _draw_volume(mean, dispersion, rng) -> int:
    if dispersion == 0:
        return int(rng.poisson(mean))
    return int(rng.poisson(rng.gamma(1.0 / dispersion, mean * dispersion)))


def simulate(cfg: PopulationConfig) -> Simulation:
    """Draw profiles, then every user's requests for every epoch.

    Per request: with probability ``stability`` a Zipf draw over the user's
    personal domains, otherwise a uniform draw from the global pool.
    Timestamps are whole seconds, uniform inside the epoch.
    """
    pool = domain_pool(cfg.global_pool_size)
    root = np.random.SeedSequence(cfg.seed)
    profile_seed, *user_seeds = root.spawn(cfg.num_users + 1)
    profiles = _draw_profiles(cfg, pool, _generator(profile_seed))
    spec = cfg.epoch_spec
    span = int(cfg.epoch_seconds)

    volumes = np.zeros((cfg.num_users, cfg.num_epochs), dtype=np.int64)
    queries = []
    for u, (prof, ss) in enumerate(zip(profiles, user_seeds)):
        rng = _generator(ss)
        personal = prof.personal_domains
        p = zipf_weights(len(personal), prof.zipf_exponent)
        for t in range(cfg.num_epochs):
            vol = _draw_volume(*prof.daily_volume, rng)
            volumes[u, t] = vol
            if not vol:
                continue
            start = spec.origin + t * cfg.epoch_seconds
            own = rng.random(vol) < prof.stability
            personal_idx = rng.choice(len(personal), size=vol, p=p)
            noise_idx = rng.integers(len(pool), size=vol)
            offsets = np.sort(rng.integers(0, span, size=vol))
            for o, mine, pi, ni in zip(offsets.tolist(), own.tolist(), personal_idx.tolist(), noise_idx.tolist()):
                queries.append(DnsQuery(start + o, prof.user, personal[pi] if mine else pool[ni]))
    queries.sort()
    return Simulation(cfg, profiles, volumes, queries)


def generate_queries(cfg: PopulationConfig) -> list[DnsQuery]:
    return simulate(cfg).queries


def generate_population(cfg: PopulationConfig) -> SessionStore:
    return simulate(cfg).store()


def generate_pattern_db(
    num_pages: int = 500,
    pattern_size_range=(10, 20),
    pool_size: int = 5000,
    overlap_rate: float = 0.2,
    seed: int = 0,
    *,
    shared_pool_size: int = 50,
    disjoint: bool = False,
) -> PatternDB:
    """Random page patterns over a shared domain pool.

    The first ``shared_pool_size`` pool domains play the role of widely
    embedded third parties; each pattern takes a Binomial(size, overlap_rate)
    share of its domains from them and the rest from the remaining pool.
    With ``disjoint`` the pool is partitioned so no two pages share a domain.
    """
    check_positive(num_pages, "num_pages", integer=True)
    lo, hi = pattern_size_range
    check_positive(lo, "pattern_size_range[0]", integer=True)
    if hi < lo:
        raise ValueError("pattern_size_range must be (low, high) with low <= high")
    check_probability(overlap_rate, "overlap_rate")
    if pool_size < hi:
        raise PoolExhausted(f"pool of {pool_size} cannot hold patterns of size {hi}")
    rng = _generator(seed)
    pool = domain_pool(pool_size, prefix="host")
    sizes = rng.integers(lo, hi + 1, size=num_pages)
    width = max(4, len(str(num_pages - 1)))
    ids = [f"page-{i:0{width}d}" for i in range(num_pages)]

    if disjoint:
        if sizes.sum() > pool_size:
            raise PoolExhausted(f"disjoint patterns need {sizes.sum()} domains, pool has {pool_size}")
        order = rng.permutation(pool_size)
        bounds = np.concatenate(([0], np.cumsum(sizes)))
        return PatternDB(
            AccessPattern(ids[i], frozenset(pool[j] for j in order[bounds[i]:bounds[i + 1]]))
            for i in range(num_pages)
        )

    shared_n = min(shared_pool_size, pool_size)
    shared, rest = pool[:shared_n], pool[shared_n:]
    patterns = []
    for i, s in enumerate(sizes):
        k = min(int(rng.binomial(s, overlap_rate)), shared_n)
        if s - k > len(rest):
            k = s - len(rest)
            if k > shared_n:
                raise PoolExhausted(f"pool of {pool_size} cannot hold a pattern of size {s}")
        doms = [shared[j] for j in rng.choice(shared_n, size=k, replace=False)] if k else []
        if s - k:
            doms += [rest[j] for j in rng.choice(len(rest), size=s - k, replace=False)]
        patterns.append(AccessPattern(ids[i], frozenset(doms)))
    return PatternDB(patterns)


def zipf_traffic(
    num_domains: int,
    num_requests: int,
    exponent: float = 1.0,
    num_users: int = 10,
    seed: int = 0,
    epoch_seconds: float = DAY,
) -> SessionStore:
    """One epoch of Zipf-distributed requests split evenly over ``num_users``."""
    check_positive(num_domains, "num_domains", integer=True)
    check_positive(num_requests, "num_requests", integer=True)
    check_positive(num_users, "num_users", integer=True)
    pool = domain_pool(num_domains)
    p = zipf_weights(num_domains, exponent)
    rng = _generator(seed)
    share = np.full(num_users, num_requests // num_users)
    share[: num_requests % num_users] += 1
    sessions = []
    for u, n in enumerate(share):
        counts = rng.multinomial(int(n), p)
        nz = np.flatnonzero(counts)
        if len(nz):
            sessions.append(Session(f"u{u:04d}", 0, {pool[i]: int(counts[i]) for i in nz}))
    return SessionStore(EpochSpec(epoch_seconds, 0.0), sessions)
