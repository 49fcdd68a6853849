import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epr import (
    DescriptorSet,
    DomainError,
    EprConfig,
    EprEngine,
    Strategy,
    SyntheticSpec,
    ValidationError,
    generate_synthetic,
    run,
)
from epr.engine import expand_intra_db, expand_sequence
from epr.similarity import k_argmax
from oracles import brute_full_matrix


def random_db(n=50, dim=256, seed=0):
    return DescriptorSet(np.random.default_rng(seed).normal(size=(n, dim)))


def max_offdiag_neighbors(engine):
    sdb = engine.sdb
    mask = sdb >= engine.state.theta_db
    np.fill_diagonal(mask, False)
    return int(mask.sum(axis=1).max())


# ------------------------------------------------------------------- config


@pytest.mark.parametrize("kwargs", [dict(k=0), dict(v=-1), dict(t_reloc=0), dict(p_db=1.0), dict(p_reloc=0.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        EprConfig(**kwargs)


def test_config_defaults():
    c = EprConfig()
    assert (c.k, c.v, c.t_reloc, c.strategy) == (5, 5, 100, Strategy.PERIODIC)
    assert c.p_db == 1 - 1e-6 and c.p_reloc == 0.95 and c.standardize_db


# --------------------------------------------------------------------- init


def test_init_orthogonal_db(orthogonal_db):
    engine = EprEngine(orthogonal_db, EprConfig(standardize_db=False))
    np.testing.assert_array_equal(engine.sdb, np.eye(3))
    assert engine.state.theta_db == 0.0
    assert engine.state.theta_reloc is None


def test_init_deterministic():
    db = random_db()
    assert EprEngine(db).state.theta_db == EprEngine(db).state.theta_db


def test_init_standardization_needs_two_rows():
    with pytest.raises(DomainError):
        EprEngine(DescriptorSet(np.ones((1, 4))))


# -------------------------------------------------------------- first query


def test_first_query_full_column():
    db = random_db(5, 8)
    engine = EprEngine(db)
    idx, val = engine.process(db.data[3])
    assert idx.tolist() == [0, 1, 2, 3, 4]
    assert int(idx[np.argmax(val)]) == 3 and val.max() == 1.0
    assert engine.state.reloc_events == [0]
    assert np.isfinite(engine.state.theta_reloc)


def test_first_query_constant_column_threshold():
    db = DescriptorSet(np.tile([1.0, 2.0, 3.0], (4, 1)))
    engine = EprEngine(db, EprConfig(standardize_db=False))
    _, val = engine.process_first_query([3.0, 2.0, 1.0])
    assert np.all(val == val[0])
    assert engine.state.theta_reloc == val[0]


def test_dimension_mismatch():
    db = random_db(5, 8)
    engine = EprEngine(db)
    with pytest.raises(DomainError):
        engine.process(np.ones(7))
    with pytest.raises(DomainError):
        run(db, DescriptorSet(np.ones((2, 7))))


def test_process_query_before_first():
    with pytest.raises(ValidationError):
        EprEngine(random_db(5, 8)).process_query(np.ones(8))


# ---------------------------------------------------------- subsequent queries


def test_minimal_expansion():
    db = random_db(50, 256)
    engine = EprEngine(db, EprConfig(k=1, v=0, t_reloc=1000))
    assert max_offdiag_neighbors(engine) == 0
    engine.process(db.data[10])
    idx, _ = engine.process(np.random.default_rng(1).normal(size=256))
    assert idx.tolist() == [10]


def test_sequence_expansion_clamped_at_end():
    db = random_db(50, 256)
    engine = EprEngine(db, EprConfig(k=1, v=5, t_reloc=1000))
    engine.process(db.data[49])
    idx, _ = engine.process(db.data[49])
    assert idx.max() <= 49
    assert 49 in idx


def test_loop_found_through_intra_db_similarity():
    # places 0 and 1 are revisited at db indices 30 and 31
    db_route = list(range(30)) + [0, 1]
    db, q, _ = generate_synthetic(SyntheticSpec(30, 64, db_route, [29, 0], 0.0, 11))
    engine = EprEngine(db, EprConfig(k=1, v=1, t_reloc=1000))
    # brute-force precondition: the revisit is above the tuned threshold
    assert engine.sdb[0, 30] >= engine.state.theta_db
    engine.process(q.data[0])
    idx, val = engine.process(q.data[1])
    assert {0, 30} <= set(idx.tolist())
    assert val[idx.tolist().index(0)] == 1.0

    ablation = EprEngine(db, EprConfig(k=1, v=1, t_reloc=1000, strategy="no_sdb"))
    ablation.process(q.data[0])
    idx, _ = ablation.process(q.data[1])
    assert 0 not in idx and 30 in idx


# ---------------------------------------------------------------- relocalize


def test_periodic_decision_uses_one_based_query_number():
    engine = EprEngine(random_db(5, 8), EprConfig(t_reloc=100))
    engine.state.t = 199  # the 200th query
    assert engine.relocalize_decision({}) is True
    engine.state.t = 200
    assert engine.relocalize_decision({}) is False


def test_event_decision():
    engine = EprEngine(random_db(5, 8), EprConfig(strategy="event_based"))
    engine.state.theta_reloc = 0.5
    assert engine.relocalize_decision({2: 0.9}) is False
    assert engine.relocalize_decision({2: 0.3}) is True
    assert engine.relocalize_decision({2: 0.5}) is False


def test_full_baseline_always_relocalizes():
    engine = EprEngine(random_db(5, 8), EprConfig(strategy="full_baseline"))
    assert engine.relocalize_decision({0: 1.0}) is True


def test_periodic_events_in_run(line_dataset):
    db, q, _ = line_dataset
    _, report = run(db, q, EprConfig(t_reloc=50))
    assert report.reloc_events == [0, 49, 99, 149, 199]


def test_theta_reloc_fitted_once():
    db, q, _ = generate_synthetic(SyntheticSpec(80, 32, list(range(80)), [-1] * 20 + list(range(60)), 0.05, 4))
    engine = EprEngine(db, EprConfig(strategy="event_based"))
    engine.process(q.data[0])
    first = engine.state.theta_reloc
    for row in q.data[1:]:
        engine.process(row)
    assert len(engine.state.reloc_events) > 1
    assert engine.state.theta_reloc == first


# ------------------------------------------------------------------------ run


def test_full_baseline_density(line_dataset):
    db, q, _ = line_dataset
    S, report = run(db, q, EprConfig(strategy="full_baseline"))
    assert report.percentage == 100.0
    assert S.nnz == db.count * q.count


def test_reloc_every_step_equals_full_and_brute_force():
    db, q, _ = generate_synthetic(SyntheticSpec(30, 16, list(range(30)), list(range(25)), 0.1, 3))
    S_pr, _ = run(db, q, EprConfig(t_reloc=1))
    S_full, _ = run(db, q, EprConfig(strategy="full_baseline"))
    assert S_pr.equals(S_full)
    np.testing.assert_allclose(S_pr.to_dense(), brute_full_matrix(db.data, q.data), atol=1e-12, rtol=0)


def test_determinism(line_dataset):
    db, q, _ = line_dataset
    for strategy in Strategy:
        a, ra = run(db, q, EprConfig(strategy=strategy))
        b, rb = run(db, q, EprConfig(strategy=strategy))
        assert a.equals(b)
        assert ra.reloc_events == rb.reloc_events


def test_report_contents(line_dataset):
    db, q, _ = line_dataset
    S, report = run(db, q)
    assert report.evaluated_pairs == S.nnz
    assert report.percentage == pytest.approx(100 * S.nnz / (200 * 200))
    assert set(report.timings) == {"init", "sdb", "query_loop", "total"}
    assert report.timings["init"] + report.timings["sdb"] + report.timings["query_loop"] <= report.duration_s


def audit_run(db, q, config):
    """Replay a run step by step and check every structural property of each column."""
    engine = EprEngine(db, config)
    F = max_offdiag_neighbors(engine)
    k, v = config.k, config.v
    prev = None
    for t, row in enumerate(q.data):
        n_events = len(engine.state.reloc_events)
        idx, val = engine.process(row)
        relocated = len(engine.state.reloc_events) > n_events
        assert idx.size >= min(k, db.count)
        assert np.all(np.diff(idx) > 0)
        if relocated:
            assert idx.size == db.count
        else:
            a = k_argmax(prev, k)
            b = expand_intra_db(a, engine.neighbors) if config.uses_sdb else a
            c = expand_sequence(b, v, db.count)
            assert set(a) <= set(b) <= set(c)
            assert set(c) <= set(idx.tolist())
            assert idx.size <= k * (1 + F) * (1 + v) + k * (1 + F)
        prev = (idx, val)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(0, 10_000),
    st.integers(1, 6),
    st.integers(0, 6),
    st.sampled_from(["periodic", "event_based", "no_sdb"]),
)
def test_structural_audit(seed, k, v, strategy):
    rng = np.random.default_rng(seed)
    places = 40
    db_route = list(range(places)) + list(rng.integers(0, places, size=15)) + [5] * 4
    q_route = [int(p) for p in rng.integers(-1, places, size=60)]
    spec = SyntheticSpec(places, 24, db_route, q_route, 0.08, seed)
    db, q, _ = generate_synthetic(spec)
    audit_run(db, q, EprConfig(k=k, v=v, strategy=strategy, t_reloc=17))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 99), max_size=12), st.integers(0, 8))
def test_sequence_expansion_monotone_and_clamped(cands, v):
    out = expand_sequence(np.array(cands, dtype=np.int64), v, 100)
    assert set(cands) <= set(out.tolist())
    assert out.size == 0 or (out.min() >= 0 and out.max() < 100)
    expected = {c + i for c in cands for i in range(v + 1) if c + i < 100}
    assert set(out.tolist()) == expected


def test_intra_db_expansion_single_pass():
    chain = {0: np.array([0, 1]), 1: np.array([0, 1, 2]), 2: np.array([1, 2])}
    out = expand_intra_db(np.array([0]), lambda c: chain[c])
    # neighbours of neighbours are not followed
    assert out.tolist() == [0, 1]
