"""EM learning of the diagonal deformation covariance Psi under a fixed GMM prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .gmm import GmmPrior, _as_rows, _psi_vector, _row_log_densities
from .mmse import _row_posterior

PSI_INIT_FLOOR = 1e-6
PSI_FLOOR = 1e-10


@dataclass(frozen=True)
class PosteriorStats:
    """Posterior mean ``z_hat``, diagonal second moment ``r_hat`` and ``gamma``."""

    z_hat: np.ndarray
    r_hat: np.ndarray
    gamma: np.ndarray


def _row_stats(rows: np.ndarray, model: GmmPrior, psi):
    gamma, z_k = _row_posterior(rows, model, psi)
    var = model.variances
    post_var = var - var ** 2 / (var + _psi_vector(psi, model.dim))
    z_hat = np.einsum("nk,nkd->nd", gamma, z_k)
    r_hat = np.einsum("nk,nkd->nd", gamma, post_var[None] + z_k ** 2)
    return z_hat, r_hat, gamma


def posterior_stats(q: np.ndarray, model: GmmPrior, psi) -> PosteriorStats:
    """E[z | q] and the diagonal of E[z z^T | q] for one observation."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("posterior_stats takes a single d-vector")
    z_hat, r_hat, gamma = _row_stats(q[None, :], model, psi)
    return PosteriorStats(z_hat[0], r_hat[0], gamma[0])


def psi_m_step(Q: np.ndarray, model: GmmPrior, psi) -> np.ndarray:
    """One EM update of diag(Psi) from the columns of ``Q`` (no clamping)."""
    rows = _as_rows(Q, model.dim)
    z_hat, r_hat, _ = _row_stats(rows, model, psi)
    return np.mean(rows ** 2 - 2.0 * rows * z_hat + r_hat, axis=0)


def marginal_log_likelihood(Q: np.ndarray, model: GmmPrior, psi) -> float:
    """sum_n log sum_k pi_k N(q_n | mu_k, Sigma_k + Psi)."""
    rows = _as_rows(Q, model.dim)
    return float(logsumexp(_row_log_densities(rows, model, psi), axis=1).sum())


def initial_psi(Q: np.ndarray, model: GmmPrior) -> np.ndarray:
    """Per-coordinate excess of the observed variance over the mean prior variance."""
    rows = _as_rows(Q, model.dim)
    prior_var = model.weights @ model.variances
    return np.maximum(rows.var(axis=0) - prior_var, PSI_INIT_FLOOR)


def learn_psi_em(Q: np.ndarray, model: GmmPrior, max_iters: int = 100, psi_init=None,
                 rtol: float = 1e-6, trace: list | None = None) -> np.ndarray:
    """Estimate diag(Psi) for observations ``Q`` (``(d, N)``) with the prior held fixed.

    Stops after ``max_iters`` updates or once the largest relative change of
    any entry falls below ``rtol``. ``trace`` collects the marginal
    log-likelihood of each visited Psi.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.size == 0:
        raise ValueError("no observations to learn the uncertainty from")
    rows = _as_rows(Q, model.dim)
    psi = initial_psi(Q, model) if psi_init is None else _psi_vector(psi_init, model.dim).copy()

    if trace is not None:
        trace.append(marginal_log_likelihood(Q, model, psi))
    for _ in range(max_iters):
        z_hat, r_hat, _ = _row_stats(rows, model, psi)
        updated = np.mean(rows ** 2 - 2.0 * rows * z_hat + r_hat, axis=0)
        updated = np.maximum(updated, PSI_FLOOR)
        change = np.max(np.abs(updated - psi) / np.maximum(psi, PSI_FLOOR))
        psi = updated
        if trace is not None:
            trace.append(marginal_log_likelihood(Q, model, psi))
        if change < rtol:
            break
    return psi
