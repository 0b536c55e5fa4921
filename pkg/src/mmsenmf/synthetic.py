"""Synthetic two-source corpus: harmonic tone complexes and band-limited noise bursts.

Used for the desk-scale benchmark and for demos; both generators are fully
determined by the numpy ``Generator`` they are given.
"""

from __future__ import annotations

import numpy as np

from .spectral import AudioSignal

TARGET_RMS = 0.1


def _normalize(x: np.ndarray, rms: float = TARGET_RMS) -> np.ndarray:
    power = np.sqrt(np.mean(x ** 2))
    return x if power == 0 else x * (rms / power)


def _envelope(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    attack = max(1, int(rng.uniform(0.005, 0.03) * sample_rate))
    t = np.arange(n) / sample_rate
    env = np.exp(-t * rng.uniform(1.0, 8.0))
    env[:attack] *= np.linspace(0.0, 1.0, attack)
    release = min(n, int(0.01 * sample_rate))
    env[n - release:] *= np.linspace(1.0, 0.0, release)
    return env


def harmonic_tones(duration: float, rng: np.random.Generator, sample_rate: int = 16000,
                   f0_range=(110.0, 440.0), max_freq: float = 7000.0) -> AudioSignal:
    """A sequence of pitched notes with random harmonic amplitudes."""
    n_total = int(duration * sample_rate)
    out = np.zeros(n_total)
    pos = 0
    while pos < n_total:
        n = int(rng.uniform(0.15, 0.5) * sample_rate)
        f0 = np.exp(rng.uniform(*np.log(f0_range)))
        harmonics = np.arange(1, int(max_freq // f0) + 1)
        amps = harmonics ** -rng.uniform(0.5, 1.5) * rng.uniform(0.3, 1.0, harmonics.size)
        phases = rng.uniform(0, 2 * np.pi, harmonics.size)
        t = np.arange(n) / sample_rate
        note = np.sum(amps[:, None] * np.sin(2 * np.pi * f0 * harmonics[:, None] * t + phases[:, None]),
                      axis=0)
        note *= _envelope(n, sample_rate, rng) * rng.uniform(0.5, 1.0)
        end = min(n_total, pos + n)
        out[pos:end] += note[:end - pos]
        pos += int(n * rng.uniform(0.7, 1.1))
    return AudioSignal(_normalize(out), sample_rate)


def noise_bursts(duration: float, rng: np.random.Generator, sample_rate: int = 16000,
                 center_range=(200.0, 6000.0)) -> AudioSignal:
    """Bursts of white noise band-passed to random bands of 0.3 to 1.2 octaves."""
    n_total = int(duration * sample_rate)
    out = np.zeros(n_total)
    pos = 0
    while pos < n_total:
        n = int(rng.uniform(0.05, 0.4) * sample_rate)
        centre = np.exp(rng.uniform(*np.log(center_range)))
        half_width = 2.0 ** (rng.uniform(0.3, 1.2) / 2)
        spectrum = np.fft.rfft(rng.standard_normal(n))
        freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
        spectrum[(freqs < centre / half_width) | (freqs > centre * half_width)] = 0.0
        burst = np.fft.irfft(spectrum, n=n)
        burst = _normalize(burst) * _envelope(n, sample_rate, rng) * rng.uniform(0.5, 1.0)
        end = min(n_total, pos + n)
        out[pos:end] += burst[:end - pos]
        pos += int(n * rng.uniform(0.8, 1.5))
    return AudioSignal(_normalize(out), sample_rate)
