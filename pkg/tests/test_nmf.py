import numpy as np
import pytest

from mmsenmf.nmf import (NmfConfig, decompose_fixed_basis, factorize, is_divergence,
                         normalize_basis, update_basis, update_gains)


def random_problem(seed, shape=(8, 6), rank=3):
    rng = np.random.default_rng(seed)
    V = rng.uniform(0.01, 2.0, shape)
    B = rng.uniform(0.1, 1.0, (shape[0], rank))
    G = rng.uniform(0.1, 1.0, (rank, shape[1]))
    return V, B, G


def test_divergence_zero_at_exact_fit():
    _, B, G = random_problem(0)
    assert is_divergence(B @ G, B, G) == pytest.approx(0.0, abs=1e-12)


def test_scalar_divergence_value():
    # 2 - log 2 - 1
    assert is_divergence(np.array([[2.0]]), np.array([[1.0]]), np.array([[1.0]])) == \
        pytest.approx(0.3068528194400547, abs=1e-14)


def test_divergence_nonnegative_random():
    for seed in range(50):
        V, B, G = random_problem(seed)
        assert is_divergence(V, B, G) >= 0


def test_divergence_shape_mismatch():
    V, B, G = random_problem(0)
    with pytest.raises(ValueError):
        is_divergence(V[:-1], B, G)


def test_updates_fixed_point():
    _, B, G = random_problem(1)
    V = B @ G
    np.testing.assert_allclose(update_basis(V, B, G), B, rtol=1e-12)
    np.testing.assert_allclose(update_gains(V, B, G), G, rtol=1e-12)


def test_basis_update_never_increases_cost():
    for seed in range(100):
        V, B, G = random_problem(seed)
        before = is_divergence(V, B, G)
        assert is_divergence(V, update_basis(V, B, G), G) <= before + 1e-10


def test_gains_update_monotone_over_200_iterations():
    for seed in range(10):
        V, B, G = random_problem(seed)
        cost = is_divergence(V, B, G)
        for _ in range(200):
            G = update_gains(V, B, G)
            new = is_divergence(V, B, G)
            assert new <= cost + 1e-10
            cost = new


def test_zero_gain_row_stays_finite():
    V, B, G = random_problem(2)
    G[1] = 0.0
    out = update_basis(V, B, G)
    assert np.all(np.isfinite(out)) and np.all(out >= 0)
    assert np.all(np.isfinite(update_gains(V, B, G)))


def test_normalization_preserves_product():
    _, B, G = random_problem(3)
    Bn, Gn = normalize_basis(B * 7.0, G)
    np.testing.assert_allclose(np.linalg.norm(Bn, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(Bn @ Gn, 7.0 * B @ G, rtol=1e-12)


def test_factorize_recovers_rank_one():
    rng = np.random.default_rng(4)
    b, g = rng.uniform(0.5, 2.0, 10), rng.uniform(0.5, 2.0, 12)
    V = np.outer(b, g)
    B, G = factorize(V, NmfConfig(rank=1, max_iters=500, seed=0))
    assert is_divergence(V, B, G) < 1e-6


def test_factorize_unit_columns_and_determinism():
    V, _, _ = random_problem(5, shape=(20, 30))
    B1, G1 = factorize(V, NmfConfig(rank=4, max_iters=50, seed=3))
    B2, G2 = factorize(V, NmfConfig(rank=4, max_iters=50, seed=3))
    np.testing.assert_array_equal(B1, B2)
    np.testing.assert_array_equal(G1, G2)
    np.testing.assert_allclose(np.linalg.norm(B1, axis=0), 1.0, atol=1e-9)


def test_factorize_trace_monotone():
    V, _, _ = random_problem(6, shape=(15, 25))
    trace = []
    factorize(V, NmfConfig(rank=3, max_iters=100), trace)
    assert np.all(np.diff(trace) <= 1e-10 * np.abs(trace[:-1]))


def test_fixed_basis_recovers_known_gains():
    rng = np.random.default_rng(7)
    B = rng.uniform(0.1, 1.0, (30, 4))
    B /= np.linalg.norm(B, axis=0)
    G_true = rng.uniform(0.2, 2.0, (4, 20))
    Y = B @ G_true
    B_before = B.copy()
    trace = []
    G, ranks = decompose_fixed_basis(Y, B, NmfConfig(max_iters=500), trace)
    assert ranks == [4]
    assert is_divergence(Y, B, G) < 1e-5
    np.testing.assert_array_equal(B, B_before)
    assert np.all(np.diff(trace) <= 1e-10 * np.abs(trace[:-1]))


def test_fixed_basis_records_block_ranks():
    rng = np.random.default_rng(8)
    B1, B2 = rng.uniform(0.1, 1, (10, 3)), rng.uniform(0.1, 1, (10, 5))
    G, ranks = decompose_fixed_basis(rng.uniform(0.1, 1, (10, 7)), [B1, B2], NmfConfig(max_iters=5))
    assert ranks == [3, 5] and G.shape == (8, 7)


def test_nonnegativity_closed():
    V, B, G = random_problem(9)
    for _ in range(20):
        B = update_basis(V, B, G)
        G = update_gains(V, B, G)
        assert np.all(B >= 0) and np.all(G >= 0)
