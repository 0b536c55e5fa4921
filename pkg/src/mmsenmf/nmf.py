"""Itakura-Saito NMF: cost, multiplicative updates and factorization drivers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

EPS = 1e-12


@dataclass(frozen=True)
class NmfConfig:
    rank: int = 128
    max_iters: int = 200
    eps: float = EPS
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


def _floor(a: np.ndarray, eps: float) -> np.ndarray:
    return np.maximum(a, eps)


def _check_shapes(V, B, G):
    if B.shape[0] != V.shape[0] or G.shape[1] != V.shape[1] or B.shape[1] != G.shape[0]:
        raise ValueError(f"shape mismatch: V{V.shape}, B{B.shape}, G{G.shape}")


def is_divergence(V: np.ndarray, B: np.ndarray, G: np.ndarray, eps: float = EPS) -> float:
    """Itakura-Saito divergence D(V | BG), summed over all entries."""
    _check_shapes(V, B, G)
    return is_divergence_to(V, B @ G, eps)


def is_divergence_to(V: np.ndarray, model: np.ndarray, eps: float = EPS) -> float:
    if V.shape != model.shape:
        raise ValueError(f"shape mismatch: {V.shape} vs {model.shape}")
    ratio = _floor(V, eps) / _floor(model, eps)
    return float(np.sum(ratio - np.log(ratio) - 1.0))


def is_gradient_parts(V, B, G, eps: float = EPS):
    """Return (positive, negative) parts of the IS gradient with respect to G."""
    BG = _floor(B @ G, eps)
    V = _floor(V, eps)
    negative = B.T @ (V / BG ** 2)
    positive = B.T @ (1.0 / BG)
    return positive, negative


def update_basis(V: np.ndarray, B: np.ndarray, G: np.ndarray, eps: float = EPS) -> np.ndarray:
    _check_shapes(V, B, G)
    BG = _floor(B @ G, eps)
    V = _floor(V, eps)
    numerator = (V / BG ** 2) @ G.T
    denominator = _floor((1.0 / BG) @ G.T, eps)
    return B * numerator / denominator


def update_gains(V: np.ndarray, B: np.ndarray, G: np.ndarray, eps: float = EPS) -> np.ndarray:
    _check_shapes(V, B, G)
    positive, negative = is_gradient_parts(V, B, G, eps)
    return G * negative / _floor(positive, eps)


def normalize_basis(B: np.ndarray, G: np.ndarray, eps: float = EPS):
    """Scale B columns to unit l2 norm and rescale G rows so BG is unchanged."""
    norms = _floor(np.linalg.norm(B, axis=0), eps)
    return B / norms, G * norms[:, None]


def random_init(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.1, 1.1, size=shape)


def factorize(V: np.ndarray, config: NmfConfig = NmfConfig(), trace: list | None = None):
    """Learn (B, G) with V ~ BG; B columns are unit-norm after every iteration.

    If ``trace`` is a list, the divergence after each iteration is appended.
    """
    V = np.asarray(V, dtype=np.float64)
    if np.any(V < 0):
        raise ValueError("V must be nonnegative")
    rng = np.random.default_rng(config.seed)
    n_bins, n_frames = V.shape
    B = random_init((n_bins, config.rank), rng)
    G = random_init((config.rank, n_frames), rng)
    B, G = normalize_basis(B, G, config.eps)

    for _ in range(config.max_iters):
        B = update_basis(V, B, G, config.eps)
        G = update_gains(V, B, G, config.eps)
        B, G = normalize_basis(B, G, config.eps)
        if trace is not None:
            trace.append(is_divergence(V, B, G, config.eps))
    return B, G


def stack_bases(bases: np.ndarray | Sequence[np.ndarray]):
    """Concatenate per-source bases; returns (B, block_ranks)."""
    if isinstance(bases, np.ndarray):
        return bases, [bases.shape[1]]
    bases = [np.asarray(b, dtype=np.float64) for b in bases]
    return np.concatenate(bases, axis=1), [b.shape[1] for b in bases]


def split_blocks(G: np.ndarray, block_ranks: Sequence[int]) -> list[np.ndarray]:
    if sum(block_ranks) != G.shape[0]:
        raise ValueError(f"block ranks {list(block_ranks)} do not cover {G.shape[0]} rows")
    edges = np.cumsum([0, *block_ranks])
    return [G[lo:hi] for lo, hi in zip(edges[:-1], edges[1:])]


def decompose_fixed_basis(Y: np.ndarray, bases, config: NmfConfig = NmfConfig(),
                          trace: list | None = None):
    """Solve Y ~ BG for G only, with the (concatenated) basis held fixed.

    ``config.rank`` is ignored; the rank comes from the basis. Returns
    ``(G, block_ranks)``.
    """
    B, block_ranks = stack_bases(bases)
    Y = np.asarray(Y, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    G = random_init((B.shape[1], Y.shape[1]), rng)
    for _ in range(config.max_iters):
        G = update_gains(Y, B, G, config.eps)
        if trace is not None:
            trace.append(is_divergence(Y, B, G, config.eps))
    return G, block_ranks
