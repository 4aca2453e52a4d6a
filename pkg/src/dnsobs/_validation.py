"""Small input-validation helpers shared by the estimators and the analyses."""
from collections.abc import Mapping
from numbers import Integral, Real

from .errors import DataError


def check_positive(value, name, *, integer=False, allow_zero=False):
    kind = Integral if integer else Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a number'}, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero) or value != value:
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_probability(value, name):
    if not 0.0 <= float(value) <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)


def as_count_map(x):
    """Return the domain->count mapping behind a Session or a plain mapping."""
    counts = getattr(x, "counts", x)
    if not isinstance(counts, Mapping):
        raise TypeError(f"expected a Session or a domain->count mapping, got {type(x).__name__}")
    for domain, c in counts.items():
        if isinstance(c, bool) or not isinstance(c, Integral) or c < 1:
            raise DataError(f"count for {domain!r} must be a positive integer, got {c!r}")
    return counts


def check_count_maps(X):
    """Validate a sequence of sessions / count maps; returns a list of mappings."""
    if isinstance(X, Mapping) or hasattr(X, "counts"):
        raise TypeError("expected a sequence of sessions, got a single session")
    return [as_count_map(x) for x in X]


def check_labels(X, y):
    if y is None:
        labels = [getattr(x, "user", None) for x in X]
        if any(u is None for u in labels):
            raise TypeError("y is required unless X holds Session objects")
        return [str(u) for u in labels]
    labels = [str(u) for u in y]
    if len(labels) != len(X):
        raise ValueError(f"X and y have inconsistent lengths: {len(X)} vs {len(labels)}")
    return labels
