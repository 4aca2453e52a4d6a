import io
import math
from collections import Counter

import numpy as np
import pytest

from dnsobs.errors import PoolExhausted
from dnsobs.fingerprint import uniqueness_report
from dnsobs.linker import evaluate_linkage
from dnsobs.synth import PopulationConfig, generate_pattern_db, simulate, zipf_weights
from oracles import pairwise_uniqueness


def export(store):
    buf = io.StringIO()
    store.dump(buf)
    return buf.getvalue()


def test_population_deterministic():
    cfg = PopulationConfig(num_users=8, num_epochs=3, seed=17)
    assert export(simulate(cfg).store()) == export(simulate(cfg).store())
    other = PopulationConfig(num_users=8, num_epochs=3, seed=18)
    assert export(simulate(other).store()) != export(simulate(cfg).store())


def test_conservation_of_requests():
    sim = simulate(PopulationConfig(num_users=12, num_epochs=5, seed=1))
    assert len(sim.queries) == int(sim.volumes.sum())
    assert sim.store().total_requests == int(sim.volumes.sum())


def test_stable_users_stay_in_profile():
    sim = simulate(PopulationConfig(num_users=5, num_epochs=3, stability=1.0, seed=2))
    allowed = {p.user: set(p.personal_domains) for p in sim.profiles}
    for s in sim.store():
        assert set(s.counts) <= allowed[s.user]


def test_disjoint_profiles_are_separable():
    cfg = PopulationConfig(num_users=2, num_epochs=4, disjoint_profiles=True, stability=1.0,
                           global_pool_size=1000, seed=3)
    sim = simulate(cfg)
    a, b = (set(p.personal_domains) for p in sim.profiles)
    assert not a & b
    assert evaluate_linkage(sim.store()).mean_accuracy == 1.0


def test_profile_larger_than_pool():
    with pytest.raises(PoolExhausted):
        simulate(PopulationConfig(num_users=2, global_pool_size=10, profile_size_range=(5, 20)))


def test_zipf_rank1_beats_rank10():
    cfg = PopulationConfig(num_users=1, num_epochs=20, stability=1.0, zipf_exponent=0.8,
                           daily_volume=(100.0, 0.0), seed=4)
    sim = simulate(cfg)
    prof = sim.profiles[0]
    counts = Counter(q.domain for q in sim.queries)
    n = len(sim.queries)
    assert n >= 1000
    p = zipf_weights(len(prof.personal_domains), 0.8)
    c1, c10 = counts[prof.personal_domains[0]], counts[prof.personal_domains[9]]
    # 3 sigma on the difference of two multinomial cell counts
    sigma = math.sqrt(n * (p[0] + p[9] - (p[0] - p[9]) ** 2))
    assert c1 - c10 > 0
    assert c1 - c10 > n * (p[0] - p[9]) - 3 * sigma


def test_config_roundtrip_and_validation():
    cfg = PopulationConfig(num_users=3, profile_size_range=(5, 9))
    assert PopulationConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        PopulationConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        PopulationConfig(stability=1.5)
    with pytest.raises(ValueError):
        PopulationConfig(rng="MT19937")


def test_pattern_db_disjoint_all_unique():
    db = generate_pattern_db(100, pool_size=2000, seed=1, disjoint=True)
    assert uniqueness_report(db).fraction_unique == 1.0
    seen = set()
    for p in db:
        assert not p.domains & seen
        seen |= p.domains


def test_pattern_db_forced_identical():
    db = generate_pattern_db(2, pattern_size_range=(10, 10), overlap_rate=1.0, shared_pool_size=10, seed=0)
    assert uniqueness_report(db).fraction_unique == 0.0


def test_pattern_db_default_is_mostly_unique():
    db = generate_pattern_db(seed=0)
    assert len(db) == 500
    assert all(10 <= len(p) <= 20 for p in db)
    rep = uniqueness_report(db)
    unique, _ = pairwise_uniqueness({p.page_id: p.domains for p in db})
    assert rep.unique_count == unique
    assert rep.fraction_unique >= 0.95


def test_pattern_db_deterministic_and_infeasible():
    assert generate_pattern_db(50, seed=9).to_list() == generate_pattern_db(50, seed=9).to_list()
    with pytest.raises(PoolExhausted):
        generate_pattern_db(10, pattern_size_range=(10, 20), pool_size=15)
    with pytest.raises(PoolExhausted):
        generate_pattern_db(10, pool_size=50, disjoint=True)


def test_zipf_weights_normalized():
    w = zipf_weights(100, 1.0)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(w) < 0)
