"""Acceptance suite: one test (or group) per numbered criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary prints
one PASS/FAIL line per criterion. Criteria 8 to 10 share a desk-scale
synthetic corpus: harmonic tone complexes against band-limited noise bursts,
60 s of training audio per source, rank 16, K=4.
"""

import time

import numpy as np
import pytest

from mmsenmf.config import ToolConfig
from mmsenmf.gmm import GmmPrior
from mmsenmf.metrics import snr_db
from mmsenmf.mmse import mmse_estimate
from mmsenmf.nmf import (NmfConfig, factorize, is_divergence, stack_bases, update_basis,
                         update_gains)
from mmsenmf.regnmf import (MmsePrior, gamma_split, h_split, mmse_jacobian_split,
                            penalty_gradient_split, penalty_value, regularized_update_gains)
from mmsenmf.separation import learn_uncertainties_stage, mix_at_smr, separate, train_source_model
from mmsenmf.spectral import AudioSignal, istft, power_spectrogram, stft
from mmsenmf.synthetic import harmonic_tones, noise_bursts
from mmsenmf.uncertainty import learn_psi_em, marginal_log_likelihood, psi_m_step

CORPUS = ToolConfig(rank=16, gmm_k=4)
N_MIXTURES = 10
TRAIN_SECONDS = 60
TEST_SECONDS = 3


def random_instance(seed):
    rng = np.random.default_rng(seed)
    d, K, N = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
    w = rng.uniform(0.2, 1.0, K)
    model = GmmPrior(w / w.sum(), rng.uniform(-3, 0, (K, d)), rng.uniform(0.3, 2.0, (K, d)))
    return rng.uniform(0.05, 1.0, (d, N)), model, rng.uniform(0.1, 2.0, d)


def central_difference(fun, x, rel_step=1e-6):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        h = rel_step * max(1.0, abs(x[idx]))
        step = np.zeros_like(x)
        step[idx] = h
        grad[idx] = (fun(x + step) - fun(x - step)) / (2 * h)
    return grad


@pytest.fixture(scope="module")
def corpus():
    start = time.perf_counter()
    model_a = train_source_model([harmonic_tones(TRAIN_SECONDS, np.random.default_rng(1))], CORPUS)
    model_b = train_source_model([noise_bursts(TRAIN_SECONDS, np.random.default_rng(2))], CORPUS)
    mixtures = []
    for i in range(N_MIXTURES):
        a = harmonic_tones(TEST_SECONDS, np.random.default_rng(100 + i))
        b = noise_bursts(TEST_SECONDS, np.random.default_rng(200 + i))
        y = mix_at_smr(a, b, -5.0)
        mixtures.append((a, AudioSignal(y.samples - a.samples), y))
    return {"models": (model_a, model_b), "mixtures": mixtures,
            "setup_seconds": time.perf_counter() - start}


@pytest.mark.criterion(1)
def test_gradient_matches_finite_differences():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(200):
        G, model, psi = random_instance(seed)
        grad = penalty_gradient_split(G, model, psi).gradient
        fd = central_difference(lambda g: penalty_value(g, model, psi), G)
        err = np.max(np.abs(grad - fd)) / np.max(np.abs(fd))
        worst = max(worst, err)
    elapsed = time.perf_counter() - start
    print(f"worst relative error {worst:.2e}, {elapsed:.1f} s")
    assert worst < 1e-4
    assert elapsed < 30


@pytest.mark.criterion(2)
def test_split_parts_nonnegative():
    for seed in range(200):
        G, model, psi = random_instance(seed)
        for mode in ("full", "diagonal"):
            split = penalty_gradient_split(G, model, psi, jacobian=mode)
            assert np.all(split.positive >= 0) and np.all(split.negative >= 0)
        for x in G.T:
            hs = h_split(x, model, psi)
            assert np.all(hs.pos >= 0) and np.all(hs.neg >= 0)
            assert np.all(hs.grad_pos >= 0) and np.all(hs.grad_neg >= 0)
            gs = gamma_split(x, model, psi)
            assert np.all(gs.grad_pos >= 0) and np.all(gs.grad_neg >= 0)
            assert np.all(gs.m_grad_pos >= 0) and np.all(gs.m_grad_neg >= 0)
            f_pos, f_neg = mmse_jacobian_split(x, model, psi)
            assert np.all(f_pos >= 0) and np.all(f_neg >= 0)


@pytest.mark.criterion(3)
def test_zero_psi_trajectory_equals_plain_nmf(corpus):
    model_a, model_b = corpus["models"]
    _, _, y = corpus["mixtures"][0]
    Y = power_spectrogram(stft(y))
    G0, ranks, _ = learn_uncertainties_stage(Y, model_a, model_b, CORPUS.replace(sep_iters=20))
    B, _ = stack_bases([model_a.basis, model_b.basis])
    priors = [MmsePrior(m.prior, np.zeros(m.rank)) for m in (model_a, model_b)]
    G_reg, G_plain = G0.copy(), G0.copy()
    worst = 0.0
    for _ in range(50):
        G_reg = regularized_update_gains(Y, B, G_reg, priors, ranks)
        G_plain = update_gains(Y, B, G_plain)
        worst = max(worst, np.max(np.abs(G_reg - G_plain)) / np.max(np.abs(G_plain)))
    assert worst <= 1e-8


@pytest.mark.criterion(4)
def test_mmse_limits():
    rng = np.random.default_rng(4)
    for _ in range(50):
        G, model, psi = random_instance(int(rng.integers(1 << 30)))
        Q = np.log(G / np.linalg.norm(G, axis=0))
        assert np.max(np.abs(mmse_estimate(Q, model, np.zeros(model.dim)) - Q)) <= 1e-12
        big = 1e6 * model.variances.max(axis=0)
        for q in Q.T:
            S = model.variances + big
            dens = model.weights * np.prod(np.exp(-0.5 * (q - model.means) ** 2 / S) / np.sqrt(S),
                                           axis=1)
            target = (dens / dens.sum()) @ model.means
            assert np.max(np.abs(mmse_estimate(q, model, big) - target)) < 1e-3


@pytest.mark.criterion(5)
def test_psi_em_monotone():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        _, model, _ = random_instance(seed)
        comp = rng.choice(model.n_components, 500, p=model.weights)
        Q = model.means[comp].T + rng.standard_normal((model.dim, 500)) * 1.5
        trace = []
        learn_psi_em(Q, model, max_iters=100, trace=trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(np.array(trace[:-1])))
        assert trace[-1] >= marginal_log_likelihood(Q, model, np.ones(model.dim)) - 1e-8


@pytest.mark.criterion(5)
def test_psi_em_recovers_noise_variance():
    rng = np.random.default_rng(55)
    model = GmmPrior([0.3, 0.5, 0.2], rng.uniform(-4, 0, (3, 5)), rng.uniform(0.3, 2.0, (3, 5)))
    sigma2 = np.array([0.2, 0.5, 1.0, 2.0, 0.8])
    comp = rng.choice(3, 5000, p=model.weights)
    x = model.means[comp] + rng.standard_normal((5000, 5)) * np.sqrt(model.variances[comp])
    Q = (x + rng.standard_normal((5000, 5)) * np.sqrt(sigma2)).T
    psi = learn_psi_em(Q, model, max_iters=300)
    print("learned", np.round(psi, 3), "true", sigma2)
    assert np.all(np.abs(psi - sigma2) <= 0.2 * sigma2)


@pytest.mark.criterion(5)
def test_psi_em_one_step_example():
    model = GmmPrior([1.0], [[0.0, 0.0]], [[1.0, 1.0]])
    Q = np.array([[2.0], [0.0]])
    assert np.array_equal(psi_m_step(Q, model, np.ones(2)), np.array([1.5, 0.5]))
    assert np.array_equal(learn_psi_em(Q, model, max_iters=1, psi_init=np.ones(2)),
                          np.array([1.5, 0.5]))


@pytest.mark.criterion(6)
def test_is_nmf_monotone_over_seeds():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        V = rng.uniform(0.01, 2.0, (10, 8))
        B = rng.uniform(0.1, 1.1, (10, 3))
        G = rng.uniform(0.1, 1.1, (3, 8))
        cost = is_divergence(V, B, G)
        for _ in range(200):
            B = update_basis(V, B, G)
            new = is_divergence(V, B, G)
            assert new <= cost + 1e-10
            G = update_gains(V, B, G)
            cost, new = new, is_divergence(V, B, G)
            assert new <= cost + 1e-10
            cost = new


@pytest.mark.criterion(6)
def test_rank_one_recovery():
    rng = np.random.default_rng(6)
    V = np.outer(rng.uniform(0.5, 2.0, 20), rng.uniform(0.5, 2.0, 15))
    B, G = factorize(V, NmfConfig(rank=1, max_iters=500))
    assert is_divergence(V, B, G) < 1e-6


@pytest.mark.criterion(7)
def test_pipeline_identities(corpus):
    _, _, y = corpus["mixtures"][1]
    result = separate(y, *corpus["models"], "mmse", CORPUS)
    h1, h2 = result.masks
    assert np.max(np.abs(h1 + h2 - 1.0)) <= 1e-12
    Y = result.mixture_spectrum.values
    total = result.spectra[0].values + result.spectra[1].values
    assert np.max(np.abs(total - Y)) <= 1e-12 * np.max(np.abs(Y))
    x = y.samples
    back = istft(stft(y)).samples
    inner = slice(CORPUS.frame_length, -CORPUS.frame_length)
    assert np.linalg.norm(back[inner] - x[inner]) < 1e-6 * np.linalg.norm(x[inner])


@pytest.mark.criterion(8)
def test_mmse_beats_no_prior_at_minus_5_db(corpus):
    start = time.perf_counter()
    gains = []
    for a, _, y in corpus["mixtures"]:
        plain = snr_db(a, separate(y, *corpus["models"], "none", CORPUS).sources[0])
        mmse = snr_db(a, separate(y, *corpus["models"], "mmse", CORPUS).sources[0])
        gains.append((plain, mmse))
    gains = np.array(gains)
    elapsed = corpus["setup_seconds"] + time.perf_counter() - start
    none_mean, mmse_mean = gains.mean(axis=0)
    print(f"mean SNR none {none_mean:.3f} dB, mmse {mmse_mean:.3f} dB, "
          f"difference {mmse_mean - none_mean:+.3f} dB, {elapsed:.0f} s")
    assert elapsed < 600
    assert mmse_mean - none_mean >= 0.3


@pytest.mark.criterion(9)
def test_psi_tracks_energy_asymmetry(corpus):
    model_a, model_b = corpus["models"]
    means = {}
    for smr in (10.0, -10.0):
        rows = []
        for seed in range(10):
            a = harmonic_tones(TEST_SECONDS, np.random.default_rng(1000 + seed))
            b = noise_bursts(TEST_SECONDS, np.random.default_rng(2000 + seed))
            Y = power_spectrogram(stft(mix_at_smr(a, b, smr)))
            _, _, (psi_a, psi_b) = learn_uncertainties_stage(Y, model_a, model_b, CORPUS)
            rows.append((psi_a.mean(), psi_b.mean()))
        means[smr] = np.array(rows)
        print(f"SMR {smr:+.0f} dB: mean psi_A {means[smr][:, 0].mean():.3f}, "
              f"mean psi_B {means[smr][:, 1].mean():.3f}")
    assert np.all(means[10.0][:, 1] > means[10.0][:, 0])
    assert np.all(means[-10.0][:, 0] > means[-10.0][:, 1])


@pytest.mark.criterion(10)
def test_sparse_baseline_sanity(corpus):
    thresholds = (1e-6, 1e-3, 1e-1)
    for _, _, y in corpus["mixtures"]:
        plain = separate(y, *corpus["models"], "none", CORPUS)
        zero = separate(y, *corpus["models"], "sparse", CORPUS.replace(lam=0.0))
        assert np.array_equal(zero.gains, plain.gains)
        sparse = separate(y, *corpus["models"], "sparse", CORPUS.replace(lam=1e-4))
        assert np.all(np.isfinite(sparse.gains))
        for t in thresholds:
            assert np.count_nonzero(sparse.gains > t) <= np.count_nonzero(zero.gains > t)
