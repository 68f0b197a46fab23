from __future__ import annotations

import logging

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cgsp.data import CrossDomainData
from cgsp.exceptions import CGSPError, ConfigError
from cgsp.filters import FilterSpec, LowPassState, apply_filtered, fit_lowpass, laplacian, smoothness
from cgsp.graph import assemble, materialize
from cgsp.oracle import generate_synthetic


def projector(V):
    return V @ V.T


# ------------------------------------------------------------------- spec

def test_filter_spec_aliases_and_defaults():
    assert FilterSpec().kind == "linear" and FilterSpec().order == 1
    assert FilterSpec("lowpass").kind == "ideal_lowpass"
    spec = FilterSpec("linear-k", coeffs=[1, 0.5, 0.25])
    assert spec.kind == "linear_order_k" and spec.order == 3
    assert spec.to_dict() == {"kind": "linear_order_k", "order": 3, "coeffs": [1.0, 0.5, 0.25]}


@pytest.mark.parametrize("kw", [
    {"kind": "bandpass"},
    {"kind": "linear_order_k"},
    {"kind": "linear_order_k", "order": 2, "coeffs": [1, 2, 3]},
    {"kind": "ideal_lowpass", "cutoff_rank": 0},
    {"kind": "mixed", "mix_weight": -1},
    {"order": 0},
])
def test_filter_spec_rejects(kw):
    with pytest.raises(ConfigError):
        FilterSpec(**kw)


# --------------------------------------------------------------- low-pass

def random_sparse(m, n, density, seed):
    A = sp.random(m, n, density=density, random_state=seed, format="csr")
    A.data[:] = 1.0 + np.random.default_rng(seed).random(A.nnz)
    return A


def test_rank_one():
    u, v = np.array([1.0, 2.0, 0.5]), np.array([0.3, 0.0, 1.0, 2.0])
    A = sp.csr_matrix(np.outer(u, v))
    lp = fit_lowpass(A, 1)
    assert lp.rank == 1
    assert abs(lp.singular_values[0] - np.linalg.norm(A.toarray())) <= 1e-10
    vn = v / np.linalg.norm(v)
    np.testing.assert_allclose(projector(lp.basis), np.outer(vn, vn), atol=1e-10)


def test_matches_dense_decomposition():
    A = random_sparse(20, 15, 0.3, 4)
    lp = fit_lowpass(A, 5, seed=1)
    _, s, vt = np.linalg.svd(A.toarray())
    assert lp.rank == 5
    assert np.max(np.abs(lp.singular_values - s[:5])) <= 1e-7
    assert np.max(np.abs(projector(lp.basis) - projector(vt[:5].T))) <= 1e-7


def test_full_rank_is_identity_on_row_space():
    A = random_sparse(8, 6, 0.6, 2)
    lp = fit_lowpass(A, 6)
    x = np.random.default_rng(0).random(8) @ A.toarray()
    assert np.max(np.abs(lp.project(x) - x)) <= 1e-6


def test_projector_idempotent():
    lp = fit_lowpass(random_sparse(40, 30, 0.2, 3), 7)
    x = np.random.default_rng(1).random((3, 30))
    once = lp.project(x)
    assert np.max(np.abs(lp.project(once) - once)) <= 1e-8


def test_rank_above_matrix_rank_warns(caplog):
    A = sp.csr_matrix(np.outer([1.0, 1.0, 2.0, 1.0], [1.0, 0.0, 3.0, 1.0, 1.0]))
    with caplog.at_level(logging.WARNING, logger="cgsp.filters"):
        lp = fit_lowpass(A, 3)
    assert lp.rank == 1 and lp.requested_rank == 3
    assert "achieved rank 1" in caplog.text


def test_tied_singular_values_kept_together():
    # three identical disconnected blocks give a threefold top singular value
    block = np.array([[1.0, 1.0], [1.0, 0.0]])
    A = sp.block_diag([block, block, block, 0.1 * block], format="csr")
    lp = fit_lowpass(A, 2)
    assert lp.rank == 3
    np.testing.assert_allclose(lp.singular_values, lp.singular_values[0], rtol=1e-9)


def _normalized(B):
    B = sp.csr_matrix(B, dtype=np.float64)
    du = np.asarray(B.sum(axis=1)).ravel()
    di = np.asarray(B.sum(axis=0)).ravel()
    return sp.diags(1 / np.sqrt(du)) @ B @ sp.diags(1 / np.sqrt(di))


def test_repeated_top_value_across_components():
    # every component of a normalized matrix has top singular value 1;
    # large components go through ARPACK, small ones dense
    rng = np.random.default_rng(5)
    big = [(rng.random((120, 90)) < 0.1).astype(float) for _ in range(3)]
    small = [np.ones((2, 3)) for _ in range(4)]
    blocks = [b[b.sum(1) > 0][:, b[b.sum(1) > 0].sum(0) > 0] for b in big] + small
    A = _normalized(sp.block_diag(blocks))
    state = fit_lowpass(A, 3)
    assert state.rank == 7
    np.testing.assert_allclose(state.singular_values, 1.0, atol=1e-9)
    _, s, vt = np.linalg.svd(A.toarray())
    V = vt[:7].T
    np.testing.assert_allclose(state.basis @ state.basis.T, V @ V.T, atol=1e-8)


def test_deterministic_for_seed_and_roundtrip(tmp_path):
    A = random_sparse(60, 50, 0.1, 5)
    a, b = fit_lowpass(A, 6, seed=3), fit_lowpass(A, 6, seed=3)
    np.testing.assert_array_equal(a.basis, b.basis)
    a.save(tmp_path / "lp.npz")
    back = LowPassState.load(tmp_path / "lp.npz")
    np.testing.assert_array_equal(back.basis, a.basis)
    assert back.requested_rank == 6


def test_non_convergence_is_reported():
    A = random_sparse(400, 300, 0.05, 6)
    with pytest.raises(CGSPError, match="did not converge"):
        fit_lowpass(A, 20, maxiter=1, tol=1e-15)


def test_invalid_rank():
    with pytest.raises(ConfigError):
        fit_lowpass(random_sparse(5, 5, 0.5, 0), 0)


# ---------------------------------------------------------- apply_filtered

@pytest.fixture(scope="module")
def graph_and_lowpass():
    d = CrossDomainData.from_interactions(*generate_synthetic(seed=11))
    g = assemble("ua", 0.85, d)
    return g, fit_lowpass(d.R_T, 4), d


def test_linear_is_graph_apply(graph_and_lowpass):
    g, _, _ = graph_and_lowpass
    x = np.random.default_rng(0).random((2, g.aug_dim))
    assert np.array_equal(apply_filtered(g, FilterSpec(), None, x), g.apply(x))


def test_polynomial_filter(graph_and_lowpass):
    g, _, _ = graph_and_lowpass
    G = materialize(g)
    x = np.random.default_rng(1).random(g.aug_dim)
    coeffs = (0.5, 1.0, 0.25)
    out = apply_filtered(g, FilterSpec("linear_order_k", coeffs=coeffs), None, x)
    expected = 0.5 * x + x @ G + 0.25 * (x @ G @ G)
    assert np.max(np.abs(out - expected)) <= 1e-10 * max(1.0, np.abs(expected).max())


def test_lowpass_acts_on_items_only(graph_and_lowpass):
    g, lp, d = graph_and_lowpass
    x = np.random.default_rng(2).random(g.aug_dim)
    out = apply_filtered(g, FilterSpec("ideal_lowpass", cutoff_rank=4), lp, x)
    nu = g.n_user_block
    np.testing.assert_array_equal(out[:nu], x[:nu])
    np.testing.assert_allclose(out[nu:], x[nu:] @ projector(lp.basis), atol=1e-12)


def test_mixed_filter(graph_and_lowpass):
    g, lp, _ = graph_and_lowpass
    x = np.random.default_rng(3).random(g.aug_dim)
    spec = FilterSpec("mixed", cutoff_rank=4, mix_weight=0.3)
    low = apply_filtered(g, FilterSpec("ideal_lowpass", cutoff_rank=4), lp, x)
    np.testing.assert_allclose(apply_filtered(g, spec, lp, x), g.apply(x) + 0.3 * low, atol=1e-12)


def test_lowpass_requires_state(graph_and_lowpass):
    g, _, _ = graph_and_lowpass
    with pytest.raises(ValueError, match="LowPassState"):
        apply_filtered(g, FilterSpec("ideal_lowpass"), None, np.zeros(g.aug_dim))


# -------------------------------------------------------------- smoothness

def test_smoothness_examples():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert smoothness([1.0, 0.0], A) == 2.0
    assert smoothness([3.0, 3.0], A) == 0.0


def test_smoothness_rejects_bad_input():
    with pytest.raises(ValueError):
        smoothness([1, 0], np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        smoothness([1, 0, 0], np.eye(2))


def test_laplacian_rows_sum_to_zero():
    A = np.random.default_rng(0).random((5, 5))
    A = A + A.T
    np.testing.assert_allclose(laplacian(A).sum(axis=1), 0.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, (6, 6), elements=st.floats(0, 5)),
    arrays(np.float64, 6, elements=st.floats(-10, 10)),
)
def test_smoothness_nonnegative_and_matches_quadratic_form(W, x):
    A = (W + W.T) / 2
    value = smoothness(x, A)
    assert value >= 0
    quad = x @ laplacian(A) @ x
    assert abs(value - 2 * quad) <= 1e-9 * max(1.0, value)
