"""Observable DNS log data model: queries, epochs and per-user sessions.

A resolver operator sees (time, client, domain) triples.  Clients are kept as
opaque pseudonyms; timestamps are POSIX seconds (UTC).  Sessions are the
domain->count multisets of one user inside one clock-aligned epoch.
"""
from __future__ import annotations

import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator, Mapping, NamedTuple

from ._validation import check_positive
from .errors import (
    DataError,
    EmptyLabel,
    InvalidDomain,
    LogFormatError,
    MalformedTimestamp,
    MissingColumn,
    OutOfRange,
)

LOG_HEADER = "timestamp,user,domain"
DAY = 86400.0
HOUR = 3600.0

_WS = re.compile(r"\s")


def normalize_domain(raw: str) -> str:
    """Lowercase ``raw`` and strip one trailing dot.

    >>> normalize_domain("WWW.Hamburg.DE.")
    'www.hamburg.de'
    """
    if not isinstance(raw, str):
        raise InvalidDomain(f"domain must be a string, got {type(raw).__name__}")
    value = raw.strip()
    if not value:
        raise InvalidDomain("empty domain")
    if _WS.search(value):
        raise InvalidDomain(f"domain contains whitespace: {raw!r}")
    if value.endswith("."):
        value = value[:-1]
    if not value or any(label == "" for label in value.split(".")):
        raise EmptyLabel(f"empty label in domain {raw!r}")
    if "," in value:
        raise InvalidDomain(f"domain contains a comma: {raw!r}")
    return value.lower()


def parse_timestamp(text: str) -> float:
    """Parse an RFC 3339 timestamp into POSIX seconds.  A zone is mandatory."""
    s = text.strip()
    if s[-1:] in ("Z", "z"):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise MalformedTimestamp(f"not an RFC 3339 timestamp: {text!r}") from None
    if dt.tzinfo is None:
        raise MalformedTimestamp(f"timestamp lacks a UTC offset: {text!r}")
    return dt.timestamp()


def format_timestamp(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|sec|m|min|h|d)?\s*$")
_UNITS = {None: 1.0, "s": 1.0, "sec": 1.0, "m": 60.0, "min": 60.0, "h": HOUR, "d": DAY}


def parse_duration(text: str) -> float:
    """'24h', '1h', '5min', '300s' or bare seconds -> seconds."""
    m = _DURATION.match(str(text))
    if not m:
        raise ValueError(f"cannot parse duration {text!r}")
    seconds = float(m.group(1)) * _UNITS[m.group(2)]
    return check_positive(seconds, "duration")


def format_duration(seconds: float) -> str:
    for unit, size in (("d", DAY), ("h", HOUR), ("min", 60.0)):
        if seconds >= size and seconds % size == 0:
            return f"{int(seconds // size)}{unit}"
    return f"{seconds:g}s"


class DnsQuery(NamedTuple):
    """One resolution event as seen by the resolver."""

    timestamp: float
    user: str
    domain: str

    @classmethod
    def make(cls, timestamp, user, domain) -> "DnsQuery":
        if isinstance(timestamp, str):
            ts = parse_timestamp(timestamp)
        elif isinstance(timestamp, datetime):
            ts = timestamp.timestamp()
        else:
            ts = float(timestamp)
        if not math.isfinite(ts):
            raise MalformedTimestamp(f"non-finite timestamp {timestamp!r}")
        return cls(ts, str(user), normalize_domain(domain))


def parse_query_log(
    stream: Iterable[str], *, strict: bool = True, skipped: list | None = None
) -> list[DnsQuery]:
    """Read the ``timestamp,user,domain`` CSV log.

    In strict mode the first bad line raises (the error carries ``.line``).
    Otherwise bad lines are skipped and their errors appended to ``skipped``.
    A leading header line and blank lines are ignored.
    """
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if lineno == 1 and line.strip() == LOG_HEADER:
            continue
        try:
            parts = line.split(",")
            if len(parts) < 3:
                raise MissingColumn(f"expected 3 columns, found {len(parts)}", line=lineno)
            if len(parts) > 3:
                raise LogFormatError(f"expected 3 columns, found {len(parts)}", line=lineno)
            ts_text, user, domain = parts
            if not user.strip():
                raise MissingColumn("empty user column", line=lineno)
            try:
                out.append(DnsQuery.make(ts_text, user.strip(), domain))
            except DataError as exc:
                raise type(exc)(str(exc), line=lineno) from None
        except DataError as exc:
            if strict:
                raise
            if skipped is not None:
                skipped.append(exc)
    return out


def write_query_log(queries: Iterable[DnsQuery], fh: IO[str]) -> None:
    fh.write(LOG_HEADER + "\n")
    for q in queries:
        fh.write(f"{format_timestamp(q.timestamp)},{q.user},{q.domain}\n")


@dataclass(frozen=True)
class EpochSpec:
    """Clock-aligned epochs of fixed ``duration`` seconds starting at ``origin``."""

    duration: float = DAY
    origin: float = 0.0

    def __post_init__(self):
        check_positive(self.duration, "duration")
        if not math.isfinite(self.origin):
            raise ValueError("origin must be finite")

    def index(self, ts: float) -> int:
        if ts < self.origin:
            raise OutOfRange(f"timestamp {format_timestamp(ts)} precedes epoch origin")
        return int((ts - self.origin) // self.duration)

    def bounds(self, index: int) -> tuple[float, float]:
        start = self.origin + index * self.duration
        return start, start + self.duration

    def to_dict(self) -> dict:
        return {"duration_seconds": self.duration, "origin": format_timestamp(self.origin)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EpochSpec":
        origin = d.get("origin", 0.0)
        if isinstance(origin, str):
            origin = parse_timestamp(origin)
        return cls(float(d["duration_seconds"]), float(origin))


@dataclass(frozen=True)
class Session:
    """One user's activity in one epoch: domain -> positive request count."""

    user: str
    epoch_index: int
    counts: dict

    def __post_init__(self):
        if self.epoch_index < 0:
            raise ValueError("epoch_index must be >= 0")
        if not self.counts:
            raise DataError("sessions must contain at least one request")
        for d, c in self.counts.items():
            if c < 1:
                raise DataError(f"non-positive count {c} for {d!r}")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def key(self) -> tuple[str, int]:
        return (self.user, self.epoch_index)

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "epoch_index": self.epoch_index,
            "counts": {d: self.counts[d] for d in sorted(self.counts)},
        }


class SessionStore:
    """Sessions indexed by (user, epoch_index); at most one per key."""

    def __init__(self, epoch_spec: EpochSpec, sessions: Iterable[Session] = ()):
        self.epoch_spec = epoch_spec
        self._sessions: dict[tuple[str, int], Session] = {}
        for s in sessions:
            if s.key in self._sessions:
                raise DataError(f"duplicate session for user {s.user!r} epoch {s.epoch_index}")
            self._sessions[s.key] = s
        self._by_epoch: dict[int, list[Session]] = defaultdict(list)
        for key in sorted(self._sessions, key=lambda k: (k[1], k[0])):
            self._by_epoch[key[1]].append(self._sessions[key])

    def __len__(self) -> int:
        return len(self._sessions)

    def __iter__(self) -> Iterator[Session]:
        for t in self.epochs():
            yield from self._by_epoch[t]

    def __contains__(self, key) -> bool:
        return key in self._sessions

    def __getitem__(self, key: tuple[str, int]) -> Session:
        return self._sessions[key]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SessionStore):
            return NotImplemented
        return self.epoch_spec == other.epoch_spec and self._sessions == other._sessions

    def __repr__(self) -> str:
        return (
            f"SessionStore({len(self)} sessions, {len(self.users())} users, "
            f"{len(self.epochs())} epochs of {format_duration(self.epoch_spec.duration)})"
        )

    def get(self, user: str, epoch_index: int) -> Session | None:
        return self._sessions.get((user, epoch_index))

    def epochs(self) -> list[int]:
        return sorted(self._by_epoch)

    def epoch(self, t: int) -> list[Session]:
        """Sessions active in epoch ``t``, ordered by user."""
        return list(self._by_epoch.get(t, ()))

    def users(self) -> list[str]:
        return sorted({u for u, _ in self._sessions})

    @property
    def total_requests(self) -> int:
        return sum(s.total for s in self._sessions.values())

    def to_queries(self) -> list[DnsQuery]:
        """Expand back into queries stamped at each epoch's start."""
        out = []
        for s in self:
            start, _ = self.epoch_spec.bounds(s.epoch_index)
            for d in sorted(s.counts):
                out.extend([DnsQuery(start, s.user, d)] * s.counts[d])
        return out

    def to_dict(self) -> dict:
        return {"epoch": self.epoch_spec.to_dict(), "sessions": [s.to_dict() for s in self]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SessionStore":
        try:
            spec = EpochSpec.from_dict(d["epoch"])
            sessions = [
                Session(
                    str(s["user"]),
                    int(s["epoch_index"]),
                    {normalize_domain(k): int(v) for k, v in s["counts"].items()},
                )
                for s in d["sessions"]
            ]
        except (KeyError, TypeError, AttributeError) as exc:
            raise DataError(f"malformed session store: {exc!r}") from None
        return cls(spec, sessions)

    def dump(self, fh: IO[str]) -> None:
        json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "SessionStore":
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)


def sessionize(queries: Iterable[DnsQuery], spec: EpochSpec) -> SessionStore:
    """Bucket queries into per-(user, epoch) count maps."""
    buckets: dict[tuple[str, int], dict[str, int]] = defaultdict(lambda: defaultdict(int))
    origin, duration = spec.origin, spec.duration
    for ts, user, domain in queries:
        if ts < origin:
            raise OutOfRange(f"query at {format_timestamp(ts)} precedes epoch origin")
        buckets[(user, int((ts - origin) // duration))][domain] += 1
    return SessionStore(spec, (Session(u, t, dict(c)) for (u, t), c in buckets.items()))


def default_origin(queries: Iterable[DnsQuery]) -> float:
    """UTC midnight at or before the earliest query."""
    first = min((q.timestamp for q in queries), default=0.0)
    return math.floor(first / DAY) * DAY
