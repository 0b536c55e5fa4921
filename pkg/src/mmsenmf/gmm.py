"""Diagonal-covariance GMM prior over log-normalized gain columns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

GAIN_FLOOR = 1e-8
VAR_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmPrior:
    """Mixture weights ``(K,)``, means ``(K, d)`` and diagonal variances ``(K, d)``."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if means.shape != variances.shape or weights.shape != (means.shape[0],):
            raise ValueError(f"inconsistent GMM shapes: weights {weights.shape}, "
                             f"means {means.shape}, variances {variances.shape}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(variances <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GmmPrior):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.variances, other.variances))


def log_normalize_columns(G: np.ndarray, floor: float = GAIN_FLOOR) -> np.ndarray:
    """log(g / ||g||_2) per column, after flooring entries at ``floor``."""
    G = np.maximum(np.asarray(G, dtype=np.float64), floor)
    return np.log(G / np.linalg.norm(G, axis=0, keepdims=True))


def _as_rows(x: np.ndarray, dim: int) -> np.ndarray:
    """A d-vector or a ``(d, N)`` column matrix as ``(N, d)`` rows."""
    x = np.asarray(x, dtype=np.float64)
    rows = x[None, :] if x.ndim == 1 else x.T
    if rows.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {rows.shape[1]}")
    return rows


def _psi_vector(psi, dim: int) -> np.ndarray:
    if psi is None:
        return np.zeros(dim)
    psi = np.broadcast_to(np.asarray(psi, dtype=np.float64), (dim,))
    if np.any(psi < 0):
        raise ValueError("uncertainty entries must be nonnegative")
    return psi


def component_log_densities(x: np.ndarray, model: GmmPrior, psi=None) -> np.ndarray:
    """log(pi_k N(x | mu_k, Sigma_k + Psi)) for the columns of ``x``; shape ``(N, K)``."""
    return _row_log_densities(_as_rows(x, model.dim), model, psi)


def _row_log_densities(rows: np.ndarray, model: GmmPrior, psi=None) -> np.ndarray:
    total_var = model.variances + _psi_vector(psi, model.dim)
    diff = rows[:, None, :] - model.means[None, :, :]
    quad = np.sum(diff ** 2 / total_var[None], axis=2)
    log_norm = -0.5 * (model.dim * LOG_2PI + np.sum(np.log(total_var), axis=1))
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    return log_w[None, :] + log_norm[None, :] - 0.5 * quad


def gmm_log_density(x: np.ndarray, model: GmmPrior, psi=None):
    """log sum_k pi_k N(x | mu_k, Sigma_k + Psi); scalar for a single vector."""
    values = logsumexp(component_log_densities(x, model, psi), axis=1)
    return float(values[0]) if np.ndim(x) == 1 else values


def responsibilities(x: np.ndarray, model: GmmPrior, psi=None) -> np.ndarray:
    """Posterior component probabilities under the Psi-inflated covariances.

    Returns a K-vector for a single d-vector, else a ``(K, N)`` matrix.
    """
    log_p = component_log_densities(x, model, psi)
    gamma = np.exp(log_p - logsumexp(log_p, axis=1, keepdims=True))
    return gamma[0] if np.ndim(x) == 1 else gamma.T


def _kmeanspp_means(data: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    chosen = [int(rng.integers(n))]
    dist2 = np.sum((data - data[chosen[0]]) ** 2, axis=1)
    for _ in range(1, K):
        total = dist2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=dist2 / total))
        chosen.append(idx)
        dist2 = np.minimum(dist2, np.sum((data - data[idx]) ** 2, axis=1))
    return data[chosen].copy()


def fit_gmm_em(data: np.ndarray, K: int = 16, max_iters: int = 100, seed: int = 0,
               tol: float = 0.0, trace: list | None = None) -> GmmPrior:
    """Fit a diagonal GMM by EM to the columns of ``data`` (shape ``(d, N)``).

    Means start at k-means++ picks among the columns; variances start at the
    pooled per-dimension variance. ``trace`` (if given) receives the total
    data log-likelihood of every model visited, the returned one last. EM
    stops after ``max_iters`` M-steps or when the per-sample log-likelihood
    gain drops below ``tol``.
    """
    X = np.asarray(data, dtype=np.float64).T
    n, d = X.shape
    if K < 1:
        raise ValueError("K must be positive")
    if K > n:
        raise ValueError(f"too few samples: {n} columns for K={K} components")

    rng = np.random.default_rng(seed)
    means = _kmeanspp_means(X, K, rng)
    variances = np.tile(np.maximum(X.var(axis=0), VAR_FLOOR), (K, 1))
    weights = np.full(K, 1.0 / K)
    model = GmmPrior(weights, means, variances)

    previous = -np.inf
    for it in range(max_iters + 1):
        log_p = _row_log_densities(X, model)
        log_norm = logsumexp(log_p, axis=1, keepdims=True)
        total = float(log_norm.sum())
        if trace is not None:
            trace.append(total)
        converged = tol > 0 and np.isfinite(previous) and (total - previous) / n < tol
        if converged or it == max_iters:
            break
        previous = total
        model = _m_step(X, np.exp(log_p - log_norm))
    return model


def _m_step(X: np.ndarray, gamma: np.ndarray) -> GmmPrior:
    counts = gamma.sum(axis=0)
    safe = np.maximum(counts, np.finfo(float).tiny)
    means = (gamma.T @ X) / safe[:, None]
    variances = np.einsum("nk,nkd->kd", gamma, (X[:, None, :] - means[None]) ** 2)
    variances /= safe[:, None]
    # components that lost all support keep a broad shape instead of NaNs
    dead = counts <= np.finfo(float).tiny
    if np.any(dead):
        means[dead] = X.mean(axis=0)
        variances[dead] = X.var(axis=0)
    variances = np.maximum(variances, VAR_FLOOR)
    if np.all(X <= 0):
        means = np.minimum(means, 0.0)
    weights = np.maximum(counts / counts.sum(), WEIGHT_FLOOR)
    weights /= weights.sum()
    return GmmPrior(weights, means, variances)
