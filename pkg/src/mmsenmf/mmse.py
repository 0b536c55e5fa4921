"""MMSE estimate of a clean log-gain pattern from a deformed observation.

The observation model is ``q = x + e`` with ``x`` drawn from the GMM prior and
``e ~ N(0, Psi)``; every covariance involved is diagonal, so all per-component
algebra is elementwise.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .gmm import GmmPrior, _as_rows, _psi_vector, _row_log_densities


def shrinkage(model: GmmPrior, psi) -> np.ndarray:
    """Sigma_k / (Sigma_k + Psi), shape ``(K, d)``."""
    psi = _psi_vector(psi, model.dim)
    return model.variances / (model.variances + psi)


def _row_posterior(rows: np.ndarray, model: GmmPrior, psi):
    """Responsibilities ``(N, K)`` and per-component posterior means ``(N, K, d)``."""
    log_p = _row_log_densities(rows, model, psi)
    gamma = np.exp(log_p - logsumexp(log_p, axis=1, keepdims=True))
    w = shrinkage(model, psi)
    z_k = model.means[None] + w[None] * (rows[:, None, :] - model.means[None])
    return gamma, z_k


def mmse_estimate(q: np.ndarray, model: GmmPrior, psi) -> np.ndarray:
    """sum_k gamma_k [mu_k + Sigma_k (Sigma_k + Psi)^-1 (q - mu_k)].

    ``q`` is a d-vector or a ``(d, N)`` matrix of columns; the result has the
    same shape.
    """
    rows = _as_rows(q, model.dim)
    gamma, z_k = _row_posterior(rows, model, psi)
    estimate = np.einsum("nk,nkd->nd", gamma, z_k)
    return estimate[0] if np.ndim(q) == 1 else estimate.T
