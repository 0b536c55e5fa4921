"""MMSE-regularized IS-NMF gains updates and the sparse-NMF baseline.

The penalty for a gains block is

    L(G) = sum_n || g_n/||g_n|| - exp(f(log(g_n/||g_n||))) ||^2

where ``f`` is the MMSE estimate under the block's GMM prior and deformation
covariance Psi. Multiplicative updates need the gradient of ``L`` written as
the difference of two nonnegative matrices. Every factor of the chain rule is
split into nonnegative parts, and products of differences are expanded so
positive and negative terms never mix.

Two Jacobian modes are available. ``"full"`` differentiates through the norm
``||g_n||`` and through every coordinate of the Gaussian exponent, giving the
exact gradient. ``"diagonal"`` keeps only the d(.)_a/dx_a terms of each
factor, the coordinatewise form that ignores cross-coordinate coupling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gmm import GAIN_FLOOR, GmmPrior, _psi_vector, _row_log_densities
from .mmse import mmse_estimate, shrinkage
from .nmf import EPS, _floor, is_divergence, is_gradient_parts, split_blocks

JACOBIAN_MODES = ("full", "diagonal")


@dataclass(frozen=True)
class SparsePrior:
    lam: float = 1e-4

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")


@dataclass(frozen=True)
class MmsePrior:
    model: GmmPrior
    psi: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "psi", _psi_vector(self.psi, self.model.dim).copy())

    @property
    def vanishes(self) -> bool:
        """True when the penalty is identically zero as a function of G."""
        return self.alpha == 0 or not np.any(self.psi)


@dataclass(frozen=True)
class GradientSplit:
    positive: np.ndarray
    negative: np.ndarray

    @property
    def gradient(self) -> np.ndarray:
        return self.positive - self.negative

    def minimal(self) -> "GradientSplit":
        """Remove the part shared by both sides; the difference is unchanged."""
        common = np.minimum(self.positive, self.negative)
        return GradientSplit(self.positive - common, self.negative - common)


@dataclass(frozen=True)
class HSplit:
    """Per-(k, a) terms of H_k(x)_a = mu_ka + w_ka (log(x_a/||x||) - mu_ka).

    ``grad_pos``/``grad_neg`` split the partial derivative dH_ka/dx_a.
    """

    value: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    grad_pos: np.ndarray
    grad_neg: np.ndarray


@dataclass(frozen=True)
class GammaSplit:
    """Responsibilities and split partials d gamma_k / d x_a, shape ``(K, d)``.

    ``m``, ``m_grad_pos`` and ``m_grad_neg`` are M_k = pi_k N(.) and its split
    partials, all multiplied by ``exp(-log_shift)`` so the largest M_k is 1.
    """

    gamma: np.ndarray
    grad_pos: np.ndarray
    grad_neg: np.ndarray
    m: np.ndarray
    m_grad_pos: np.ndarray
    m_grad_neg: np.ndarray
    log_shift: float


def _check_means(model: GmmPrior) -> None:
    if np.any(model.means > 0):
        raise ValueError("prior means must be nonpositive")


def _check_mode(jacobian: str) -> None:
    if jacobian not in JACOBIAN_MODES:
        raise ValueError(f"jacobian must be one of {JACOBIAN_MODES}, got {jacobian!r}")


class _Terms:
    """Shared per-column quantities for a batch of gain columns (rows of X)."""

    def __init__(self, X: np.ndarray, model: GmmPrior, psi, jacobian: str):
        _check_means(model)
        _check_mode(jacobian)
        psi = _psi_vector(psi, model.dim)
        self.X = X
        self.n2 = np.sum(X ** 2, axis=1, keepdims=True)
        self.norm = np.sqrt(self.n2)
        self.u = X / self.norm
        # log(x/||x||) <= 0 up to rounding
        self.q = np.minimum(np.log(self.u), 0.0)

        mu = model.means
        S = model.variances + psi
        w = shrinkage(model, psi)
        self.w = w

        log_p = _row_log_densities(self.q, model, psi)
        self.log_shift = log_p.max(axis=1, keepdims=True)
        self.M = np.exp(log_p - self.log_shift)
        self.gamma = self.M / self.M.sum(axis=1, keepdims=True)

        q3 = self.q[:, None, :]
        self.H = mu[None] + w[None] * (q3 - mu[None])
        self.H_pos = np.broadcast_to(-w * mu, self.H.shape)
        self.H_neg = -(mu[None] + w[None] * q3)
        self.f = np.einsum("nk,nkd->nd", self.gamma, self.H)

        # dq_c/dx_b = delta_cb / x_b - x_b / ||x||^2
        self.j_pos = 1.0 / X
        self.j_neg = X / self.n2
        self.H_grad_pos = w[None] * self.j_pos[:, None, :]
        self.H_grad_neg = w[None] * self.j_neg[:, None, :]

        # d log M_k / dx_b split into nonnegative factors (-q, -mu >= 0)
        inv_S = 1.0 / S
        if jacobian == "full":
            mu_over_S = np.sum(mu * inv_S, axis=1)
            q_over_S = self.q @ inv_S.T
            self.m_pos = (-q3 * inv_S[None] * self.j_pos[:, None, :]
                          - self.j_neg[:, None, :] * mu_over_S[None, :, None])
            self.m_neg = (-(mu * inv_S)[None] * self.j_pos[:, None, :]
                          - self.j_neg[:, None, :] * q_over_S[:, :, None])
        else:
            self.m_pos = (-q3 * inv_S[None] * self.j_pos[:, None, :]
                          - self.j_neg[:, None, :] * (mu * inv_S)[None])
            self.m_neg = (-(mu * inv_S)[None] * self.j_pos[:, None, :]
                          - self.j_neg[:, None, :] * q3 * inv_S[None])

        g = self.gamma[:, :, None]
        self.gamma_grad_pos = g * self.m_pos + g * np.sum(g * self.m_neg, axis=1, keepdims=True)
        self.gamma_grad_neg = g * self.m_neg + g * np.sum(g * self.m_pos, axis=1, keepdims=True)

        # sum_k gamma_k w_ka, the coefficient of dq_a/dx_b in sum_k gamma_k dH_ka
        self.gw = self.gamma @ w


def _as_gain_rows(G: np.ndarray, floor: float) -> np.ndarray:
    G = np.asarray(G, dtype=np.float64)
    rows = G[None, :] if G.ndim == 1 else G.T
    return np.maximum(rows, floor)


def penalty_value(G: np.ndarray, model: GmmPrior, psi, floor: float = GAIN_FLOOR) -> float:
    """Sum over columns of ||g/||g|| - exp(f(log(g/||g||)))||^2."""
    X = _as_gain_rows(G, floor)
    u = X / np.linalg.norm(X, axis=1, keepdims=True)
    estimate = mmse_estimate(np.log(u).T, model, psi).T
    return float(np.sum((u - np.exp(estimate)) ** 2))


def h_split(x: np.ndarray, model: GmmPrior, psi, floor: float = GAIN_FLOOR) -> HSplit:
    t = _Terms(_as_gain_rows(x, floor), model, psi, "diagonal")
    return HSplit(t.H[0], np.array(t.H_pos[0]), t.H_neg[0], t.H_grad_pos[0], t.H_grad_neg[0])


def gamma_split(x: np.ndarray, model: GmmPrior, psi, jacobian: str = "full",
                floor: float = GAIN_FLOOR) -> GammaSplit:
    t = _Terms(_as_gain_rows(x, floor), model, psi, jacobian)
    M = t.M[0][:, None]
    return GammaSplit(t.gamma[0], t.gamma_grad_pos[0], t.gamma_grad_neg[0], t.M[0],
                      M * t.m_pos[0], M * t.m_neg[0], float(t.log_shift[0, 0]))


def _f_split(t: _Terms, jacobian: str):
    """Split Jacobian of the MMSE map: d f_a / d x_b, shape ``(N, d, d)``."""
    cross_pos = (np.einsum("nka,nkb->nab", t.H_pos, t.gamma_grad_pos)
                 + np.einsum("nka,nkb->nab", t.H_neg, t.gamma_grad_neg))
    cross_neg = (np.einsum("nka,nkb->nab", t.H_neg, t.gamma_grad_pos)
                 + np.einsum("nka,nkb->nab", t.H_pos, t.gamma_grad_neg))
    d = t.X.shape[1]
    eye = np.eye(d)
    f_pos = cross_pos + eye * (t.gw * t.j_pos)[:, :, None]
    f_neg = cross_neg + t.gw[:, :, None] * t.j_neg[:, None, :]
    if jacobian == "diagonal":
        f_pos = f_pos * eye
        f_neg = f_neg * eye
    return f_pos, f_neg


def mmse_jacobian_split(x: np.ndarray, model: GmmPrior, psi, jacobian: str = "full",
                        floor: float = GAIN_FLOOR):
    """(positive, negative) parts of d f_a / d x_b for a single gain column."""
    t = _Terms(_as_gain_rows(x, floor), model, psi, jacobian)
    f_pos, f_neg = _f_split(t, jacobian)
    return f_pos[0], f_neg[0]


def penalty_gradient_split(G: np.ndarray, model: GmmPrior, psi, jacobian: str = "full",
                           floor: float = GAIN_FLOOR) -> GradientSplit:
    """Nonnegative (positive, negative) parts of dL/dG for a gains block ``(d, N)``."""
    t = _Terms(_as_gain_rows(G, floor), model, psi, jacobian)
    u, X, norm = t.u, t.X, t.norm
    v = np.exp(t.f)
    norm3 = norm ** 3

    if jacobian == "diagonal":
        f_pos, f_neg = _f_split(t, jacobian)
        fp = np.diagonal(f_pos, axis1=1, axis2=2)
        fn = np.diagonal(f_neg, axis1=1, axis2=2)
        sq = X ** 2 / norm3
        positive = 2.0 * (u * (1.0 / norm + v * fn) + v * (sq + v * fp))
        negative = 2.0 * (u * (sq + v * fp) + v * (1.0 / norm + v * fn))
        return GradientSplit(positive.T, negative.T)

    # Full mode: contract sum_a c_a (df_a/dx_b) without building (d, d) matrices.
    # du_a/dx_b = delta_ab/||x|| - x_a x_b/||x||^3
    uv, vv = u * v, v * v

    def contract(c):
        """sum_a c_a f_pos[a, b] and sum_a c_a f_neg[a, b] for weights c (N, d)."""
        ch_pos = np.einsum("nd,nkd->nk", c, t.H_pos)[:, :, None]
        ch_neg = np.einsum("nd,nkd->nk", c, t.H_neg)[:, :, None]
        cross_pos = np.sum(ch_pos * t.gamma_grad_pos + ch_neg * t.gamma_grad_neg, axis=1)
        cross_neg = np.sum(ch_neg * t.gamma_grad_pos + ch_pos * t.gamma_grad_neg, axis=1)
        diag_pos = c * t.gw * t.j_pos
        dense_neg = np.sum(c * t.gw, axis=1, keepdims=True) * t.j_neg
        return cross_pos + diag_pos, cross_neg + dense_neg

    uv_fp, uv_fn = contract(uv)
    vv_fp, vv_fn = contract(vv)
    u_dot = np.sum(u * X, axis=1, keepdims=True)
    v_dot = np.sum(v * X, axis=1, keepdims=True)
    positive = 2.0 * (u / norm + uv_fn + v_dot * X / norm3 + vv_fp)
    negative = 2.0 * (u_dot * X / norm3 + uv_fp + v / norm + vv_fn)
    return GradientSplit(positive.T, negative.T)


def _check_priors(priors: Sequence, block_ranks: Sequence[int], n_rows: int) -> None:
    if len(priors) != len(block_ranks):
        raise ValueError(f"{len(priors)} priors for {len(block_ranks)} gain blocks")
    if sum(block_ranks) != n_rows:
        raise ValueError(f"block ranks {list(block_ranks)} do not cover {n_rows} gain rows")
    for prior, rank in zip(priors, block_ranks):
        if isinstance(prior, MmsePrior) and prior.model.dim != rank:
            raise ValueError(f"prior dimension {prior.model.dim} does not match block rank {rank}")
        if prior is not None and not isinstance(prior, (MmsePrior, SparsePrior)):
            raise TypeError(f"unsupported prior {prior!r}")


def regularized_update_gains(Y: np.ndarray, B: np.ndarray, G: np.ndarray, priors: Sequence,
                             block_ranks: Sequence[int], eps: float = EPS,
                             jacobian: str = "full", split: str = "paper") -> np.ndarray:
    """One multiplicative gains update of IS divergence plus per-block priors.

    ``priors[i]`` applies to rows of block ``i``: ``None`` (no prior), a
    :class:`SparsePrior` or an :class:`MmsePrior`.
    """
    _check_priors(priors, block_ranks, G.shape[0])
    positive, negative = is_gradient_parts(Y, B, G, eps)
    edges = np.cumsum([0, *block_ranks])
    for prior, lo, hi in zip(priors, edges[:-1], edges[1:]):
        if prior is None:
            continue
        if isinstance(prior, SparsePrior):
            positive[lo:hi] += prior.lam
        elif not prior.vanishes:
            parts = penalty_gradient_split(G[lo:hi], prior.model, prior.psi, jacobian)
            if split == "minimal":
                parts = parts.minimal()
            positive[lo:hi] += prior.alpha * parts.positive
            negative[lo:hi] += prior.alpha * parts.negative
    return G * negative / _floor(positive, eps)


def sparse_update_gains(Y: np.ndarray, B: np.ndarray, G: np.ndarray, lam: float = 1e-4,
                        eps: float = EPS) -> np.ndarray:
    positive, negative = is_gradient_parts(Y, B, G, eps)
    return G * negative / _floor(positive + lam, eps)


def regularized_cost(Y: np.ndarray, B: np.ndarray, G: np.ndarray, priors: Sequence,
                     block_ranks: Sequence[int], eps: float = EPS) -> float:
    """IS divergence plus alpha * L for MMSE blocks and lambda * sum(G) for sparse ones."""
    _check_priors(priors, block_ranks, G.shape[0])
    cost = is_divergence(Y, B, G, eps)
    for prior, block in zip(priors, split_blocks(G, block_ranks)):
        if isinstance(prior, SparsePrior):
            cost += prior.lam * float(block.sum())
        elif isinstance(prior, MmsePrior) and not prior.vanishes:
            cost += prior.alpha * penalty_value(block, prior.model, prior.psi)
    return cost
