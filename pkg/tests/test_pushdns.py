import io

import pytest

from dnsobs.errors import EmptyStore
from dnsobs.model import EpochSpec, Session, SessionStore
from dnsobs.pushdns import (
    PushConfig,
    bandwidth_estimate,
    bandwidth_report,
    coverage,
    coverage_curve,
    rank_domains,
    write_coverage_csv,
)
from dnsobs.synth import zipf_traffic
from oracles import harmonic


def store(*sessions):
    return SessionStore(EpochSpec(), [Session(u, t, c) for u, t, c in sessions])


def test_rank_aggregates():
    s = store(("u1", 0, {"a": 3, "b": 1}), ("u2", 0, {"b": 3}))
    assert rank_domains(s) == [("b", 4), ("a", 3)]
    assert rank_domains(s).total == s.total_requests


def test_rank_singleton_and_ties():
    assert rank_domains(store(("u", 0, {"a": 1}))) == [("a", 1)]
    assert rank_domains(store(("u", 0, {"b": 2, "a": 2}))) == [("a", 2), ("b", 2)]


def test_rank_empty():
    with pytest.raises(EmptyStore):
        rank_domains(store())


def test_coverage_small_example():
    s = store(("u1", 0, {"a": 3, "b": 1}), ("u2", 0, {"b": 3}), ("u2", 1, {"c": 1}))
    r = rank_domains(s)
    cov = coverage(r, s, 1)
    assert cov.aggregate == pytest.approx(4 / 8)
    assert cov.per_user_mean == pytest.approx((1 / 4 + 3 / 4) / 2)
    assert coverage(r, s, 3).aggregate == 1.0
    assert coverage(r, s, 999).per_user_mean == 1.0


def test_curve_endpoints_and_monotone():
    s = zipf_traffic(500, 20_000, exponent=1.0, num_users=4, seed=1)
    r = rank_domains(s)
    ks = list(range(1, len(r) + 1, 7)) + [len(r)]
    curve = coverage_curve(r, s, ks)
    agg = [c.aggregate for c in curve]
    assert agg == sorted(agg)
    assert agg[0] == pytest.approx(r[0][1] / r.total)
    assert agg[-1] == 1.0


def test_curve_matches_harmonic_oracle():
    n = 2000
    s = zipf_traffic(n, 400_000, exponent=1.0, num_users=5, seed=2)
    r = rank_domains(s)
    for c in coverage_curve(r, s, [1, 10, 100, 500, 1000]):
        assert c.aggregate == pytest.approx(harmonic(c.k) / harmonic(n), abs=0.02)


def test_coverage_csv_format():
    s = store(("u1", 0, {"a": 3, "b": 1}))
    buf = io.StringIO()
    write_coverage_csv(coverage_curve(rank_domains(s), s, [1, 2]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,aggregate_coverage,per_user_mean_coverage"
    assert lines[1] == "1,0.75,0.75"
    assert lines[2] == "2,1.0,1.0"


def test_bandwidth_unit_case_and_paper_figure():
    assert bandwidth_estimate(PushConfig(1, 100, 100.0)) == 1.0
    assert bandwidth_estimate(PushConfig(10_000, 80, 1000.0)) == 800.0


def test_bandwidth_linearity():
    base = bandwidth_estimate(PushConfig(500, 64, 300.0))
    assert bandwidth_estimate(PushConfig(1000, 64, 300.0)) == pytest.approx(2 * base)
    assert bandwidth_estimate(PushConfig(500, 128, 300.0)) == pytest.approx(2 * base)
    assert bandwidth_estimate(PushConfig(500, 64, 600.0)) == pytest.approx(base / 2)


def test_push_config_validation():
    with pytest.raises(ValueError):
        PushConfig(0, 80, 1000.0)
    with pytest.raises(ValueError):
        PushConfig(10, 80, -1.0)
    rep = bandwidth_report(PushConfig())
    assert rep["bytes_per_second"] == 800.0
    assert rep["mix_cascade_latency_seconds"] == 0.17
