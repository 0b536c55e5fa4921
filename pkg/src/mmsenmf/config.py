"""Tool configuration: defaults, flat ``key=value`` config files and overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

PRIOR_MODES = ("none", "sparse", "mmse")


@dataclass(frozen=True)
class ToolConfig:
    sample_rate: int = 16000
    frame_length: int = 480
    hop: int = 192
    fft_size: int = 512
    rank: int = 128
    train_iters: int = 200
    sep_iters: int = 200
    reg_iters: int = 200
    gmm_k: int = 16
    gmm_iters: int = 100
    psi_iters: int = 100
    alpha_a: float = 1.0
    alpha_b: float = 1.0
    lam: float = 1e-4
    eps: float = 1e-12
    gain_floor: float = 1e-8
    seed: int = 0
    prior: str = "mmse"
    psi_relearn_every: int = 0
    jacobian: str = "full"
    split: str = "paper"

    def __post_init__(self):
        positive = ("sample_rate", "frame_length", "hop", "fft_size", "rank", "gmm_k")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("train_iters", "sep_iters", "reg_iters", "gmm_iters", "psi_iters",
                     "psi_relearn_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.frame_length > self.fft_size:
            raise ValueError("frame_length must not exceed fft_size")
        if self.hop >= self.frame_length:
            raise ValueError("hop must be smaller than frame_length")
        if min(self.alpha_a, self.alpha_b, self.lam) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if not (self.eps > 0 and self.gain_floor > 0):
            raise ValueError("floors must be positive")
        if self.prior not in PRIOR_MODES:
            raise ValueError(f"prior must be one of {PRIOR_MODES}, got {self.prior!r}")
        if self.split not in ("paper", "minimal"):
            raise ValueError(f"split must be 'paper' or 'minimal', got {self.split!r}")
        if self.jacobian not in ("full", "diagonal"):
            raise ValueError(f"jacobian must be 'full' or 'diagonal', got {self.jacobian!r}")

    @property
    def frame_params(self) -> dict:
        return {"sample_rate": self.sample_rate, "frame_length": self.frame_length,
                "hop": self.hop, "fft_size": self.fft_size}

    def replace(self, **changes) -> "ToolConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _coerce(name: str, text: str):
    types = {f.name: f.type for f in fields(ToolConfig)}
    if name not in types:
        raise ValueError(f"unknown config key {name!r}")
    kind = types[name]
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ValueError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = _coerce(key, value)
    return values


def load_config(path: str | Path | None = None, **overrides) -> ToolConfig:
    """Defaults, then the config file, then non-None ``overrides``."""
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ToolConfig(**values)
