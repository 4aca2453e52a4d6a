"""Behavior-based linkage of DNS sessions across pseudonym changes.

A multinomial Naive Bayes model is trained on every user's session in epoch
``t``; each session of epoch ``t + 1`` is then attributed to the user whose
domain distribution explains it best.  Pseudonyms persist in the stores used
here, so they serve as ground truth and are hidden only at prediction time.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_count_map, check_count_maps, check_labels, check_positive
from .errors import DegenerateTraining, EmptyEpoch, NotEnoughEpochs
from .model import DnsQuery, EpochSpec, Session, SessionStore, default_origin, sessionize

# relative score gap below which two users count as tied
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LinkPrediction:
    query_session: tuple
    ranked: list
    top1: str


class MultinomialLinker(ClassifierMixin, BaseEstimator):
    """Multinomial Naive Bayes over per-domain request counts.

    Every user gets an additive-smoothed distribution over the training
    vocabulary plus one shared out-of-vocabulary bucket.  The class prior is
    uniform, so it never affects rankings and is left out of the scores.
    Ties are broken towards the lexicographically smallest user id.

    Parameters
    ----------
    alpha : float, default=1.0
        Additive (Laplace) smoothing.
    """

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y=None):
        """Fit from sessions (or count maps plus user labels ``y``)."""
        check_positive(self.alpha, "alpha")
        maps = check_count_maps(X)
        labels = check_labels(X, y)
        users = sorted(set(labels))
        if len(users) < 2:
            raise DegenerateTraining(f"need at least 2 users to train, got {len(users)}")
        vocab = sorted({d for m in maps for d in m})
        self.classes_ = np.array(users, dtype=object)
        self.vocabulary_ = {d: i for i, d in enumerate(vocab)}
        self.oov_index_ = len(vocab)

        row = {u: i for i, u in enumerate(users)}
        counts = np.zeros((len(users), len(vocab) + 1))
        for m, u in zip(maps, labels):
            r = row[u]
            for d, c in m.items():
                counts[r, self.vocabulary_[d]] += c
        self.feature_count_ = counts
        totals = counts.sum(axis=1, keepdims=True)
        denom = totals + self.alpha * (len(vocab) + 1)
        self.feature_log_prob_ = np.log(counts + self.alpha) - np.log(denom)
        return self

    def _vectorize(self, counts):
        index = self.vocabulary_
        agg: dict[int, int] = defaultdict(int)
        for d, c in counts.items():
            agg[index.get(d, self.oov_index_)] += c
        cols = np.fromiter(agg.keys(), dtype=np.intp, count=len(agg))
        vals = np.fromiter(agg.values(), dtype=float, count=len(agg))
        return cols, vals

    def _scores(self, counts):
        cols, vals = self._vectorize(counts)
        return self.feature_log_prob_[:, cols] @ vals

    def decision_function(self, X):
        """Log-likelihood of every sample under every user, shape (n, n_users)."""
        check_is_fitted(self, "feature_log_prob_")
        maps = check_count_maps(X)
        if not maps:
            return np.empty((0, len(self.classes_)))
        return np.vstack([self._scores(m) for m in maps])

    def predict(self, X):
        check_is_fitted(self, "feature_log_prob_")
        maps = check_count_maps(X)
        return np.array([self.classes_[_top_index(self._scores(m))] for m in maps], dtype=object)

    def rank(self, session) -> LinkPrediction:
        """Full ranking of candidate users for one session."""
        check_is_fitted(self, "feature_log_prob_")
        counts = as_count_map(session)
        scores = self._scores(counts)
        order = np.argsort(-scores, kind="stable")  # classes_ is sorted, so exact ties stay lexicographic
        ranked: list[tuple[str, float]] = []
        group: list[int] = []
        head = None
        for i in order:
            s = scores[i]
            if head is not None and head - s <= _tol(head):
                group.append(i)
                continue
            ranked.extend((self.classes_[j], float(scores[j])) for j in sorted(group))
            group, head = [i], s
        ranked.extend((self.classes_[j], float(scores[j])) for j in sorted(group))
        key = (getattr(session, "user", None), getattr(session, "epoch_index", None))
        return LinkPrediction(key, ranked, ranked[0][0])

    def log_prob(self, user, domain) -> float:
        check_is_fitted(self, "feature_log_prob_")
        r = int(np.flatnonzero(self.classes_ == user)[0])
        return float(self.feature_log_prob_[r, self.vocabulary_.get(domain, self.oov_index_)])


def _tol(score):
    return TIE_TOLERANCE * max(1.0, abs(score))


def _top_index(scores):
    best = scores.max()
    return int(np.flatnonzero(scores >= best - _tol(best))[0])


class VocabularyRestrictor(TransformerMixin, BaseEstimator):
    """Keep only the ``top_n`` domains by total request count.

    Ties in count are broken by domain name.  Transforming may yield empty
    count maps; callers decide whether to drop them.
    """

    def __init__(self, top_n=500):
        self.top_n = top_n

    def fit(self, X, y=None):
        check_positive(self.top_n, "top_n", integer=True)
        totals: Counter = Counter()
        for m in check_count_maps(X):
            totals.update(m)
        ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
        self.vocabulary_ = frozenset(d for d, _ in ranked[: self.top_n])
        return self

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        keep = self.vocabulary_
        return [{d: c for d, c in m.items() if d in keep} for m in check_count_maps(X)]


def train(sessions, alpha=1.0) -> MultinomialLinker:
    return MultinomialLinker(alpha=alpha).fit(list(sessions))


def predict(model: MultinomialLinker, session) -> LinkPrediction:
    return model.rank(session)


@dataclass
class PairResult:
    t: int
    predicted: dict  # true user -> top-1 user
    scored: int
    correct: int
    unmatchable: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.scored if self.scored else float("nan")

    def to_dict(self) -> dict:
        return {"t": self.t, "accuracy": self.accuracy, "scored": self.scored,
                "unmatchable": self.unmatchable}


def link_epoch_pair(store: SessionStore, t: int, alpha=1.0) -> PairResult:
    """Train on epoch ``t`` and attribute every session of ``t + 1``.

    Users absent from epoch ``t`` cannot be linked; they are counted as
    unmatchable and left out of the accuracy.
    """
    train_sessions = store.epoch(t)
    test_sessions = store.epoch(t + 1)
    if not train_sessions or not test_sessions:
        missing = t if not train_sessions else t + 1
        raise EmptyEpoch(f"epoch {missing} has no sessions")
    model = MultinomialLinker(alpha=alpha).fit(train_sessions)
    known = set(model.classes_)
    scorable = [s for s in test_sessions if s.user in known]
    predicted = {}
    if scorable:
        predicted = dict(zip((s.user for s in scorable), model.predict(scorable)))
    correct = sum(1 for u, p in predicted.items() if u == p)
    return PairResult(t, predicted, len(scorable), correct, len(test_sessions) - len(scorable))


@dataclass
class LinkageEvaluation:
    alpha: float
    epoch_seconds: float
    pairs: list
    mean_accuracy: float
    perfect_user_fraction: float
    skipped_pairs: int = 0
    users_scored: int = 0

    @property
    def epoch_pairs(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "epoch_seconds": self.epoch_seconds,
            "pairs": [p.to_dict() for p in self.pairs],
            "mean_accuracy": self.mean_accuracy,
            "perfect_user_fraction": self.perfect_user_fraction,
            "skipped_pairs": self.skipped_pairs,
            "users_scored": self.users_scored,
        }


def _try_pair(store, t, alpha):
    if len(store.epoch(t)) < 2:
        return None
    result = link_epoch_pair(store, t, alpha)
    return result if result.scored else None


def evaluate_linkage(store: SessionStore, alpha=1.0, threads: int = 1) -> LinkageEvaluation:
    """Link every consecutive epoch pair and aggregate.

    Pairs whose training epoch has fewer than two users, or whose next epoch
    has no linkable session, are skipped and counted in ``skipped_pairs``.
    """
    epochs = store.epochs()
    if len(epochs) < 2:
        raise NotEnoughEpochs(f"need at least 2 epochs, store has {len(epochs)}")
    present = set(epochs)
    candidates = [t for t in epochs if t + 1 in present]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _try_pair(store, t, alpha), candidates))
    else:
        results = [_try_pair(store, t, alpha) for t in candidates]
    pairs = [r for r in results if r is not None]
    skipped = len(candidates) - len(pairs)
    if not pairs:
        raise NotEnoughEpochs("no consecutive epoch pair with two or more active users")

    all_right: dict[str, bool] = {}
    for p in pairs:
        for u, guess in p.predicted.items():
            all_right[u] = all_right.get(u, True) and guess == u
    return LinkageEvaluation(
        alpha=float(alpha),
        epoch_seconds=store.epoch_spec.duration,
        pairs=pairs,
        mean_accuracy=float(np.mean([p.accuracy for p in pairs])),
        perfect_user_fraction=sum(all_right.values()) / len(all_right),
        skipped_pairs=skipped,
        users_scored=len(all_right),
    )


def restrict_vocabulary(store: SessionStore, top_n: int) -> tuple[SessionStore, list]:
    """Restrict every session to the global ``top_n`` domains.

    Returns the restricted store and the (user, epoch_index) keys of sessions
    that became empty and were dropped.
    """
    sessions = list(store)
    restricted = VocabularyRestrictor(top_n).fit_transform(sessions)
    kept, dropped = [], []
    for s, counts in zip(sessions, restricted):
        if counts:
            kept.append(Session(s.user, s.epoch_index, counts))
        else:
            dropped.append(s.key)
    return SessionStore(store.epoch_spec, kept), dropped


@dataclass
class SweepResult:
    evaluations: dict = field(default_factory=dict)  # duration seconds -> LinkageEvaluation

    def mean_accuracy(self) -> dict:
        return {d: e.mean_accuracy for d, e in self.evaluations.items()}


def epoch_sweep(
    queries: list[DnsQuery], durations, alpha=1.0, origin: float | None = None, threads: int = 1
) -> SweepResult:
    """Re-sessionize one query stream at several epoch lengths and link each."""
    durations = list(durations)
    if not durations:
        raise ValueError("durations must be non-empty")
    for d in durations:
        check_positive(d, "duration")
    if origin is None:
        origin = default_origin(queries)
    result = SweepResult()
    for d in durations:
        store = sessionize(queries, EpochSpec(float(d), origin))
        result.evaluations[float(d)] = evaluate_linkage(store, alpha, threads=threads)
    return result
