from __future__ import annotations

import numpy as np
import pytest

from cgsp.data import CrossDomainData, subsample_overlap
from cgsp.estimator import CGSPRecommender
from cgsp.exceptions import DataError
from cgsp.filters import FilterSpec
from cgsp.oracle import DenseInstance, generate_synthetic, oracle_scores


@pytest.fixture(scope="module")
def instance():
    src, tgt = generate_synthetic(seed=31)
    return src, tgt, DenseInstance.from_interactions(src, tgt)


def test_self_check(instance):
    gaps = instance[2].self_check()
    assert max(gaps.values()) <= 1e-12


def test_alpha_zero_io_intra(instance):
    _, _, inst = instance
    RT = inst.mats["RT"]
    np.testing.assert_allclose(oracle_scores(inst, "io", "intra", 0.0), RT @ RT.T @ RT, atol=1e-14)


def test_empty_overlap_scales_target_only():
    src, tgt = generate_synthetic(seed=5)
    inst = DenseInstance.from_interactions(src, tgt)
    empty = DenseInstance(inst.source, inst.target, inst.source_rows[:0], inst.target_rows[:0])
    base = oracle_scores(empty, "io", "intra", 0.0)
    np.testing.assert_allclose(oracle_scores(empty, "io", "intra", 0.85), 0.15 * base, atol=1e-15)


@pytest.mark.parametrize("strategy", ["io", "oa", "ua"])
@pytest.mark.parametrize("scenario", ["intra", "inter"])
def test_engine_agrees_with_oracle(instance, strategy, scenario):
    src, tgt, inst = instance
    data = CrossDomainData.from_interactions(src, tgt)
    n_rows = len(tgt.users) if scenario == "intra" else len(src.users)
    for spec in (FilterSpec(), FilterSpec("mixed", cutoff_rank=4), FilterSpec("linear_order_k", coeffs=[0.2, 1.0, 0.3])):
        model = CGSPRecommender(strategy, 0.3, filter=spec.kind, coeffs=spec.coeffs, lowpass_rank=4).fit(data)
        got = model.predict_scores(range(n_rows), scenario)
        want = oracle_scores(inst, strategy, scenario, 0.3, spec)
        assert np.max(np.abs(got - want)) <= 1e-9


def test_lowpass_projector_matches_engine(instance):
    src, tgt, inst = instance
    model = CGSPRecommender(filter="ideal_lowpass", lowpass_rank=5).fit(CrossDomainData.from_interactions(src, tgt))
    V = model.lowpass_.basis
    np.testing.assert_allclose(V @ V.T, inst.lowpass_projector(5), atol=1e-8)


def test_synthetic_is_seeded():
    a = generate_synthetic(seed=9)
    b = generate_synthetic(seed=9)
    c = generate_synthetic(seed=10)
    assert a[0].key_pairs() == b[0].key_pairs() and a[1].key_pairs() == b[1].key_pairs()
    assert a[1].key_pairs() != c[1].key_pairs()


def test_synthetic_shape_and_overlap():
    src, tgt = generate_synthetic(60, 50, 30, 80, 80, density=0.3, seed=0)
    assert len(src.users) == 60 and len(tgt.users) == 50
    data = CrossDomainData.from_interactions(src, tgt)
    assert data.n_overlap == 30


def test_synthetic_clusters_concentrate_interactions():
    src, tgt = generate_synthetic(200, 200, 100, 100, 100, density=0.1, n_clusters=4, boost=1.0, seed=1)
    B = tgt.to_binary().toarray()
    # with boost 1 every user only touches items of one cluster, so co-occurrence is block structured
    co = (B.T @ B) > 0
    assert co.mean() < 0.5


@pytest.mark.parametrize("kw", [
    {"density": 0.0}, {"n_clusters": 0}, {"boost": 1.5}, {"coherence": -0.1},
    {"n_overlap": 100}, {"n_target_items": 0},
])
def test_synthetic_rejects(kw):
    with pytest.raises(DataError):
        generate_synthetic(**kw)


def test_oracle_refuses_large_instances():
    with pytest.raises(ValueError):
        DenseInstance(np.ones((3000, 2)), np.ones((2, 2)), np.array([0]), np.array([0]))


def test_oracle_empty_overlap_from_subsample(instance):
    src, tgt, _ = instance
    sub = subsample_overlap(CrossDomainData.from_interactions(src, tgt), 0.0, seed=1)
    inst = DenseInstance(sub.source_binary.toarray(), sub.target_binary.toarray(),
                         sub.overlap.source_rows, sub.overlap.target_rows)
    model = CGSPRecommender("oa", 0.85).fit(sub)
    got = model.predict_scores(range(len(sub.target_users)), "intra")
    assert np.max(np.abs(got - oracle_scores(inst, "oa", "intra", 0.85))) <= 1e-12
