"""Two-source separation pipeline: training, uncertainty learning, masking."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import ToolConfig
from .gmm import GmmPrior, fit_gmm_em, log_normalize_columns
from .nmf import (NmfConfig, decompose_fixed_basis, factorize, is_divergence,
                  random_init, split_blocks, stack_bases, update_gains)
from .regnmf import (MmsePrior, SparsePrior, regularized_cost, regularized_update_gains,
                     sparse_update_gains)
from .spectral import AudioSignal, Spectrogram, istft, power_spectrogram, stft
from .uncertainty import learn_psi_em

log = logging.getLogger(__name__)

MODEL_VERSION = "mmsenmf-model/1"
MASK_FLOOR = 1e-12


@dataclass(eq=False)
class SourceModel:
    basis: np.ndarray
    prior: GmmPrior
    frame_params: dict
    floors: dict = field(default_factory=dict)
    seed: int = 0
    train_divergence: float | None = None
    version: str = MODEL_VERSION

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=np.float64)
        if self.prior.dim != self.basis.shape[1]:
            raise ValueError(f"prior dimension {self.prior.dim} does not match "
                             f"basis rank {self.basis.shape[1]}")

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def __eq__(self, other):
        if not isinstance(other, SourceModel):
            return NotImplemented
        return (np.array_equal(self.basis, other.basis) and self.prior == other.prior
                and self.frame_params == other.frame_params and self.floors == other.floors
                and self.seed == other.seed and self.version == other.version
                and self.train_divergence == other.train_divergence)


@dataclass
class SeparationResult:
    sources: list[AudioSignal]
    masks: list[np.ndarray]
    spectra: list[Spectrogram]
    mixture_spectrum: Spectrogram
    gains: np.ndarray
    block_ranks: list[int]
    psi: list[np.ndarray] | None = None
    traces: dict = field(default_factory=dict)


def _stft(signal: AudioSignal, config: ToolConfig) -> Spectrogram:
    return stft(signal, config.frame_length, config.hop, config.fft_size)


def train_source_model(training_audio: Sequence[AudioSignal],
                       config: ToolConfig = ToolConfig()) -> SourceModel:
    """Learn a unit-norm basis with IS-NMF and a GMM over its log-normalized gains."""
    if not training_audio:
        raise ValueError("no training audio")
    for sig in training_audio:
        if sig.sample_rate != config.sample_rate:
            raise ValueError(f"training audio at {sig.sample_rate} Hz, "
                             f"expected {config.sample_rate} Hz")
    V = np.concatenate([power_spectrogram(_stft(s, config)) for s in training_audio], axis=1)
    if V.shape[1] < config.gmm_k:
        raise ValueError(f"too little training audio: {V.shape[1]} frames "
                         f"for K={config.gmm_k} components")

    nmf_config = NmfConfig(config.rank, config.train_iters, config.eps, config.seed)
    B, G = factorize(V, nmf_config)
    divergence = is_divergence(V, B, G, config.eps)
    prior = fit_gmm_em(log_normalize_columns(G, config.gain_floor), config.gmm_k,
                       config.gmm_iters, config.seed)
    log.info("trained rank-%d model on %d frames, divergence %.6g",
             config.rank, V.shape[1], divergence)
    return SourceModel(B, prior, config.frame_params,
                       {"eps": config.eps, "gain_floor": config.gain_floor},
                       config.seed, divergence)


def _check_models(models: Sequence[SourceModel], config: ToolConfig) -> None:
    for model in models:
        params = model.frame_params
        if params and params != config.frame_params:
            raise ValueError(f"model framing {params} does not match {config.frame_params}")
    n_bins = {m.basis.shape[0] for m in models}
    if len(n_bins) != 1 or n_bins.pop() != config.fft_size // 2 + 1:
        raise ValueError("model basis row counts do not match the STFT size")


def learn_block_psi(G: np.ndarray, block_ranks, models: Sequence[SourceModel],
                    config: ToolConfig) -> list[np.ndarray]:
    psi = []
    for block, model in zip(split_blocks(G, block_ranks), models):
        Q = log_normalize_columns(block, config.gain_floor)
        psi.append(learn_psi_em(Q, model.prior, config.psi_iters))
    return psi


def learn_uncertainties_stage(Y: np.ndarray, model_a: SourceModel, model_b: SourceModel,
                              config: ToolConfig = ToolConfig(), trace: list | None = None):
    """No-prior decomposition of Y on [B_a, B_b], then Psi for each gains block.

    Returns ``(G, block_ranks, [psi_a, psi_b])``.
    """
    nmf_config = NmfConfig(model_a.rank + model_b.rank, config.sep_iters, config.eps, config.seed)
    G, block_ranks = decompose_fixed_basis(Y, [model_a.basis, model_b.basis], nmf_config, trace)
    psi = learn_block_psi(G, block_ranks, [model_a, model_b], config)
    return G, block_ranks, psi


def spectral_masks(estimates: Sequence[np.ndarray], floor: float = MASK_FLOOR):
    """Wiener-style masks S_i / sum_j S_j; 1/n where the total is below ``floor``."""
    total = sum(estimates)
    defined = total > floor
    safe = np.where(defined, total, 1.0)
    share = 1.0 / len(estimates)
    return [np.where(defined, s / safe, share) for s in estimates]


def separate(mixture: AudioSignal, model_a: SourceModel, model_b: SourceModel,
             prior_mode: str | None = None, config: ToolConfig = ToolConfig()) -> SeparationResult:
    """Separate ``mixture`` into estimates of the two modelled sources."""
    prior_mode = prior_mode or config.prior
    if prior_mode not in ("none", "sparse", "mmse"):
        raise ValueError(f"unknown prior mode {prior_mode!r}")
    if mixture.sample_rate != config.sample_rate:
        raise ValueError(f"mixture at {mixture.sample_rate} Hz, expected {config.sample_rate} Hz")
    models = [model_a, model_b]
    _check_models(models, config)

    Y_stft = _stft(mixture, config)
    Y = power_spectrogram(Y_stft)
    B, block_ranks = stack_bases([model_a.basis, model_b.basis])
    traces: dict = {}
    psi = None

    if prior_mode == "mmse":
        traces["no_prior"] = []
        G, block_ranks, psi = learn_uncertainties_stage(Y, model_a, model_b, config,
                                                        traces["no_prior"])
        G, traces["regularized"] = _run_regularized(Y, B, G, block_ranks, models, psi, config)
    else:
        rng = np.random.default_rng(config.seed)
        G = random_init((B.shape[1], Y.shape[1]), rng)
        trace = traces[prior_mode] = []
        for _ in range(config.sep_iters):
            if prior_mode == "sparse":
                G = sparse_update_gains(Y, B, G, config.lam, config.eps)
                trace.append(regularized_cost(Y, B, G, [SparsePrior(config.lam)] * 2,
                                              block_ranks, config.eps))
            else:
                G = update_gains(Y, B, G, config.eps)
                trace.append(is_divergence(Y, B, G, config.eps))

    estimates = [b @ g for b, g in zip([model_a.basis, model_b.basis],
                                      split_blocks(G, block_ranks))]
    masks = spectral_masks(estimates)
    spectra = [Y_stft.with_values(m * Y_stft.values) for m in masks]
    sources = [istft(s) for s in spectra]
    return SeparationResult(sources, masks, spectra, Y_stft, G, block_ranks, psi, traces)


def _mmse_priors(models, psi, config: ToolConfig):
    alphas = (config.alpha_a, config.alpha_b)
    return [MmsePrior(m.prior, p, a) for m, p, a in zip(models, psi, alphas)]


def _run_regularized(Y, B, G, block_ranks, models, psi, config: ToolConfig):
    priors = _mmse_priors(models, psi, config)
    trace = []
    for it in range(config.reg_iters):
        if config.psi_relearn_every and it and it % config.psi_relearn_every == 0:
            psi[:] = learn_block_psi(G, block_ranks, models, config)
            priors = _mmse_priors(models, psi, config)
        G = regularized_update_gains(Y, B, G, priors, block_ranks, config.eps, config.jacobian,
                                     config.split)
        trace.append(regularized_cost(Y, B, G, priors, block_ranks, config.eps))
    return G, trace


def mean_power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def mix_at_smr(a: AudioSignal, b: AudioSignal, smr_db: float) -> AudioSignal:
    """a + c*b with c chosen so 10 log10(P_a / P_cb) equals ``smr_db``.

    ``b`` is truncated or looped to the length of ``a``; P is mean square.
    """
    if a.sample_rate != b.sample_rate:
        raise ValueError("sample rates differ")
    b_fit = np.resize(b.samples, len(a))
    p_b = mean_power(b_fit)
    if p_b == 0.0:
        raise ValueError("cannot scale silence")
    scale = np.sqrt(mean_power(a.samples) / (p_b * 10.0 ** (smr_db / 10.0)))
    return AudioSignal(a.samples + scale * b_fit, a.sample_rate)
