"""Independent brute-force reference implementations used by the tests."""
from collections import defaultdict
from fractions import Fraction
import math


def nb_exact_ranking(training, query, alpha=Fraction(1)):
    """Users ranked by exact multinomial NB likelihood, ties by user id.

    training: {user: {domain: count}}; query: {domain: count}.
    """
    vocab = set()
    for counts in training.values():
        vocab |= set(counts)
    scores = {}
    for user, counts in training.items():
        denom = sum(counts.values()) + alpha * (len(vocab) + 1)
        lik = Fraction(1)
        for d, c in query.items():
            num = counts.get(d, 0) + alpha if d in vocab else alpha
            lik *= (Fraction(num) / denom) ** c
        scores[user] = lik
    return sorted(scores, key=lambda u: (-scores[u], u))


def nb_float_top1(training, query, alpha=1.0):
    """Plain-float NB with dict lookups; top user, ties by user id."""
    vocab = {d for counts in training.values() for d in counts}
    best = None
    for user in sorted(training):
        counts = training[user]
        denom = sum(counts.values()) + alpha * (len(vocab) + 1)
        s = sum(c * math.log((counts.get(d, 0) + alpha) / denom) for d, c in query.items())
        if best is None or s > best[0] + 1e-9 * max(1.0, abs(best[0])):
            best = (s, user)
    return best[1]


def brute_match(patterns, observed):
    observed = set(observed)
    return {pid for pid, doms in patterns.items() if set(doms) <= observed}


def pairwise_uniqueness(patterns):
    ids = list(patterns)
    unique = 0
    for a in ids:
        if not any(b != a and set(patterns[a]) == set(patterns[b]) for b in ids):
            unique += 1
    groups = []
    seen = set()
    for a in ids:
        if a in seen:
            continue
        same = sorted(b for b in ids if set(patterns[b]) == set(patterns[a]))
        seen.update(same)
        if len(same) > 1:
            groups.append(same)
    return unique, sorted(groups)


def rebucket(queries, duration, origin):
    out = defaultdict(lambda: defaultdict(int))
    for ts, user, domain in queries:
        k = 0
        while origin + (k + 1) * duration <= ts:
            k += 1
        out[(user, k)][domain] += 1
    return {key: dict(v) for key, v in out.items()}


def harmonic(n, s=1.0):
    return math.fsum(1.0 / i ** s for i in range(1, n + 1))


def brute_windows(patterns, queries, window):
    """Per-user sliding-window detection by full recomputation."""
    by_user = defaultdict(list)
    for q in queries:
        by_user[q.user].append(q)
    events = []
    for user in sorted(by_user):
        qs = by_user[user]
        last = set()
        for i, q in enumerate(qs):
            seen = {p.domain for p in qs[: i + 1] if p.timestamp >= q.timestamp - window}
            cur = brute_match(patterns, seen)
            if cur and cur != last:
                events.append((q.timestamp, user, tuple(sorted(cur))))
            last = cur
    return sorted(events, key=lambda e: (e[0], e[1]))
