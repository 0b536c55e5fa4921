"""SNR and SIR of separated signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import AudioSignal

MAX_DB = 300.0


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, AudioSignal) else np.asarray(x, dtype=np.float64)


def _ratio_db(num: float, den: float) -> float:
    if den <= 0.0:
        return MAX_DB
    if num <= 0.0:
        return -MAX_DB
    return float(np.clip(10.0 * np.log10(num / den), -MAX_DB, MAX_DB))


def _trim(*signals):
    n = min(len(s) for s in signals)
    return [s[:n] for s in signals]


def snr_db(reference, estimate) -> float:
    """10 log10(||s||^2 / ||s - s_hat||^2), capped at +/-300 dB."""
    s, s_hat = _trim(_samples(reference), _samples(estimate))
    energy = float(s @ s)
    if energy == 0.0:
        raise ValueError("reference signal is silent")
    err = s - s_hat
    return _ratio_db(energy, float(err @ err))


def sir_db(estimate, target, interferer) -> float:
    """Target-to-interference ratio from scalar least-squares projections.

    The estimate is projected on the target; the remainder is projected on
    the part of the interferer orthogonal to the target.
    """
    s_hat, s, i = _trim(_samples(estimate), _samples(target), _samples(interferer))
    ss = float(s @ s)
    if ss == 0.0:
        raise ValueError("target reference is silent")
    s_target = (float(s_hat @ s) / ss) * s
    i_orth = i - (float(i @ s) / ss) * s
    ii = float(i_orth @ i_orth)
    if ii <= 1e-12 * max(float(i @ i), np.finfo(float).tiny):
        raise ValueError("target and interferer references are collinear")
    residual = s_hat - s_target
    e_interf = (float(residual @ i_orth) / ii) * i_orth
    return _ratio_db(float(s_target @ s_target), float(e_interf @ e_interf))


@dataclass(frozen=True)
class EvalReport:
    snr_db: float
    sir_db: float
    length: int
    offset: int = 0


def evaluate(estimate, target, interferer) -> EvalReport:
    n = min(len(_samples(x)) for x in (estimate, target, interferer))
    return EvalReport(snr_db(target, estimate), sir_db(estimate, target, interferer), n)
