"""Command-line interface: train, separate, mix, evaluate, inspect-model."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import PRIOR_MODES, load_config
from .metrics import evaluate
from .modelfile import load_model, save_model
from .separation import mean_power, mix_at_smr, separate, train_source_model
from .spectral import read_wav, write_wav

log = logging.getLogger("mmsenmf")


class CliError(Exception):
    """A user-facing failure; the message is printed and the exit code returned."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _config(args, **overrides):
    try:
        return load_config(getattr(args, "config", None), **overrides)
    except (OSError, ValueError) as exc:
        raise CliError(f"bad configuration: {exc}") from None


def _read(path, config=None):
    rate = config.sample_rate if config is not None else 16000
    try:
        return read_wav(path, expected_rate=rate)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", 2) from None
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from None


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise CliError(f"no such model file: {path}", 2) from None
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot load model {path}: {exc}") from None


def cmd_train(args) -> int:
    source_dir = Path(args.input)
    if not source_dir.is_dir():
        raise CliError(f"input directory not found: {source_dir}", 2)
    config = _config(args, rank=args.rank, gmm_k=args.gmm_k, seed=args.seed,
                     train_iters=args.iters)
    files = sorted(source_dir.glob("*.wav"))
    if not files:
        raise CliError(f"no .wav files in {source_dir}", 2)
    audio = [_read(f, config) for f in files]
    try:
        model = train_source_model(audio, config)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    save_model(model, args.out)
    print(f"rank={model.rank}")
    print(f"K={model.prior.n_components}")
    print(f"divergence={model.train_divergence:.10g}")
    return 0


def _write_diagnostics(path: Path, result, prior_mode: str) -> None:
    lines = [f"prior={prior_mode}", f"block_ranks={','.join(map(str, result.block_ranks))}"]
    if result.psi is not None:
        for name, psi in zip("ab", result.psi):
            lines.append(f"psi_{name}_mean={np.mean(psi):.10g}")
            lines.append(f"psi_{name}_min={np.min(psi):.10g}")
            lines.append(f"psi_{name}_max={np.max(psi):.10g}")
    for stage, trace in result.traces.items():
        lines.append(f"{stage}_iterations={len(trace)}")
        if trace:
            lines.append(f"{stage}_final_cost={trace[-1]:.10g}")
        lines.append(f"{stage}_cost_trace=" + ",".join(f"{c:.10g}" for c in trace))
    path.write_text("\n".join(lines) + "\n")


def cmd_separate(args) -> int:
    alpha_a = args.alpha_a if args.alpha_a is not None else args.alpha
    alpha_b = args.alpha_b if args.alpha_b is not None else args.alpha
    config = _config(args, prior=args.prior, alpha_a=alpha_a, alpha_b=alpha_b, lam=args.lam,
                     seed=args.seed)
    model_a, model_b = _load_model(args.model_a), _load_model(args.model_b)
    mixture = _read(args.mixture, config)
    try:
        result = separate(mixture, model_a, model_b, config.prior, config)
    except ValueError as exc:
        raise CliError(f"separation failed: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, source in enumerate(result.sources, 1):
        write_wav(out / f"source{i}.wav", source)
    _write_diagnostics(out / "diagnostics.txt", result, config.prior)
    print(f"wrote {out / 'source1.wav'} {out / 'source2.wav'}")
    return 0


def cmd_mix(args) -> int:
    a, b = _read(args.a), _read(args.b)
    try:
        mixed = mix_at_smr(a, b, args.smr_db)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    peak = np.max(np.abs(mixed.samples))
    if peak >= 1.0:
        log.warning("mixture peaks at %.3f and will be clipped", peak)
    write_wav(args.out, mixed)
    scaled_b = mixed.samples - a.samples
    ratio = 10 * np.log10(mean_power(a.samples) / mean_power(scaled_b))
    print(f"SMR_dB={ratio:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    estimate, target, interferer = _read(args.estimate), _read(args.target), _read(args.interferer)
    try:
        report = evaluate(estimate, target, interferer)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"SNR_dB={report.snr_db:.6f}")
    print(f"SIR_dB={report.sir_db:.6f}")
    return 0


def cmd_inspect_model(args) -> int:
    model = _load_model(args.model)
    prior = model.prior
    print(f"version={model.version}")
    print(f"rank={model.rank}")
    print(f"bins={model.basis.shape[0]}")
    print(f"K={prior.n_components}")
    for key, value in sorted(model.frame_params.items()):
        print(f"{key}={value}")
    print(f"seed={model.seed}")
    if model.train_divergence is not None:
        print(f"divergence={model.train_divergence:.10g}")
    print("weights=" + ",".join(f"{w:.6g}" for w in prior.weights))
    print(f"mean_variance={prior.variances.mean():.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmsenmf", description="Single-channel source separation with MMSE-regularized NMF.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a source model from a directory of WAV files")
    p.add_argument("--input", required=True, help="directory of mono 16-bit WAV files")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--rank", type=int)
    p.add_argument("--gmm-k", type=int)
    p.add_argument("--iters", type=int, help="NMF training iterations")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("separate", help="separate a mixture with two trained models")
    p.add_argument("--mixture", required=True)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--prior", choices=PRIOR_MODES)
    p.add_argument("--alpha", type=float, help="regularization weight for both sources")
    p.add_argument("--alpha-a", type=float)
    p.add_argument("--alpha-b", type=float)
    p.add_argument("--lambda", dest="lam", type=float, help="sparsity weight")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("mix", help="mix two signals at a given SMR")
    p.add_argument("--a", required=True, help="target signal")
    p.add_argument("--b", required=True, help="interfering signal, scaled")
    p.add_argument("--smr-db", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("evaluate", help="SNR and SIR of an estimate")
    p.add_argument("--estimate", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--interferer", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect-model", help="print a summary of a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect_model)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
