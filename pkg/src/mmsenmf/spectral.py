"""STFT analysis/synthesis, power spectrograms and 16-bit PCM WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_FRAME_LENGTH = 480
DEFAULT_HOP = 192
DEFAULT_FFT_SIZE = 512
POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-d samples)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT with the framing needed to invert it.

    ``values`` has shape ``(fft_size // 2 + 1, n_frames)``. ``length`` is the
    number of signal samples before tail padding, used to trim the inverse.
    """

    values: np.ndarray
    frame_length: int = DEFAULT_FRAME_LENGTH
    hop: int = DEFAULT_HOP
    fft_size: int = DEFAULT_FFT_SIZE
    sample_rate: int = DEFAULT_SAMPLE_RATE
    length: int | None = None

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        if values.shape != self.values.shape:
            raise ValueError(f"shape {values.shape} does not match {self.values.shape}")
        return Spectrogram(values, self.frame_length, self.hop, self.fft_size,
                           self.sample_rate, self.length)


def analysis_window(frame_length: int) -> np.ndarray:
    return np.hamming(frame_length)


def n_frames_for(n_samples: int, frame_length: int, hop: int) -> int:
    if n_samples <= frame_length:
        return 1
    return int(np.ceil((n_samples - frame_length) / hop)) + 1


def _check_framing(frame_length: int, hop: int, fft_size: int) -> None:
    if frame_length < 1 or hop < 1:
        raise ValueError("frame_length and hop must be positive")
    if frame_length > fft_size:
        raise ValueError(f"frame_length {frame_length} exceeds fft_size {fft_size}")


def stft(signal: AudioSignal, frame_length: int = DEFAULT_FRAME_LENGTH,
         hop: int = DEFAULT_HOP, fft_size: int = DEFAULT_FFT_SIZE) -> Spectrogram:
    """Hamming-windowed one-sided STFT; the last partial frame is zero-padded."""
    _check_framing(frame_length, hop, fft_size)
    x = signal.samples
    if x.size == 0:
        raise ValueError("empty input")

    n_frames = n_frames_for(x.size, frame_length, hop)
    padded = np.zeros((n_frames - 1) * hop + frame_length)
    padded[:x.size] = x
    idx = np.arange(frame_length)[:, None] + hop * np.arange(n_frames)[None, :]
    frames = padded[idx] * analysis_window(frame_length)[:, None]
    values = np.fft.rfft(frames, n=fft_size, axis=0)
    return Spectrogram(values, frame_length, hop, fft_size, signal.sample_rate, x.size)


def istft(spec: Spectrogram) -> AudioSignal:
    """Weighted overlap-add inverse of :func:`stft`.

    Each output sample is divided by the accumulated squared analysis window,
    which makes ``istft(stft(x))`` exact wherever that envelope is nonzero.
    """
    _check_framing(spec.frame_length, spec.hop, spec.fft_size)
    if spec.n_bins != spec.fft_size // 2 + 1:
        raise ValueError(f"expected {spec.fft_size // 2 + 1} bins, got {spec.n_bins}")

    frame_length, hop = spec.frame_length, spec.hop
    window = analysis_window(frame_length)
    frames = np.fft.irfft(spec.values, n=spec.fft_size, axis=0)[:frame_length]
    frames *= window[:, None]

    total = (spec.n_frames - 1) * hop + frame_length
    out = np.zeros(total)
    envelope = np.zeros(total)
    for t in range(spec.n_frames):
        out[t * hop:t * hop + frame_length] += frames[:, t]
        envelope[t * hop:t * hop + frame_length] += window ** 2

    if np.any(envelope <= 0.0):
        raise ValueError("window/hop not invertible")
    out /= envelope
    if spec.length is not None:
        out = out[:spec.length]
    return AudioSignal(out, spec.sample_rate)


def power_spectrogram(spec: Spectrogram | np.ndarray) -> np.ndarray:
    values = spec.values if isinstance(spec, Spectrogram) else np.asarray(spec)
    return values.real ** 2 + values.imag ** 2


def read_wav(path: str | Path, expected_rate: int | None = DEFAULT_SAMPLE_RATE) -> AudioSignal:
    """Read a mono 16-bit PCM WAV file into floats in [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ValueError(f"{path}: not a valid WAV file ({exc})") from None
    if n_channels != 1:
        raise ValueError(f"{path}: expected mono audio, got {n_channels} channels")
    if width != 2:
        raise ValueError(f"{path}: expected 16-bit PCM, got {8 * width}-bit samples")
    if expected_rate is not None and rate != expected_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz "
                         "(resampling is not supported)")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioSignal(samples, rate)


def write_wav(path: str | Path, signal: AudioSignal) -> None:
    """Write a mono 16-bit PCM WAV file; samples outside [-1, 1) are clipped."""
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(signal.sample_rate)
        fh.writeframes(pcm.tobytes())
