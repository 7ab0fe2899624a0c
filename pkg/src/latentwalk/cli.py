"""Command-line entry point: ``latentwalk {train,walk,enhance,eval,check}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import ConfigError, RunConfig, load_config
from .gan import generate, load_checkpoint, sample_dataset, save_checkpoint, train_wgan
from .inversion import invert
from .io import atomic_write_text, csv_text
from .pipeline import PipelineError, compare_methods, enhance_batch
from .proto import walk_trace
from .sphere import sample_prior

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class CommandError(Exception):
    def __init__(self, message: str, status: int = EXIT_FAIL):
        super().__init__(message)
        self.status = status


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _config(args) -> RunConfig:
    if args.config is None:
        raise CommandError("--config is required", EXIT_USAGE)
    try:
        return load_config(args.config)
    except ConfigError as exc:
        raise CommandError(f"bad config: {exc}", EXIT_USAGE) from None


def _checkpoint(args):
    if args.checkpoint is None:
        raise CommandError("--checkpoint is required", EXIT_USAGE)
    try:
        return load_checkpoint(args.checkpoint)
    except (OSError, ValueError) as exc:
        raise CommandError(str(exc)) from None


def _require_out(args):
    if args.out is None:
        raise CommandError("--out is required", EXIT_USAGE)
    return Path(args.out)


def _real_data(cfg: RunConfig) -> np.ndarray:
    real, _ = sample_dataset(cfg.dataset.kind, cfg.dataset.real_count, cfg.dataset.real_seed)
    return real


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _require_out(args)
    train = cfg.train
    if args.seed is not None:
        train = replace(train, seed=args.seed)
    if args.steps is not None:
        train = replace(train, iterations=args.steps)
    data, _ = sample_dataset(cfg.dataset.kind, cfg.dataset.count, cfg.dataset.seed)
    gen, critic, history = train_wgan(cfg.model.generator_spec(), cfg.model.critic_spec(), data, train)
    rows = zip(range(len(history.critic_loss)), history.critic_loss, history.generator_loss)
    history_text = csv_text(["iteration", "critic_loss", "generator_loss"], rows)
    save_checkpoint(out, gen, critic, train.seed)
    atomic_write_text(out.with_suffix(".history.csv"), history_text)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_walk(args) -> int:
    gen, critic, _ = _checkpoint(args)
    out = _require_out(args)
    cfg = load_config(args.config) if args.config else None
    seed = args.seed if args.seed is not None else 0
    steps = args.steps if args.steps is not None else 100
    count = args.count if args.count is not None else 64
    if count < 2:
        raise CommandError("--count must be at least 2 for critic batch statistics", EXIT_USAGE)
    Z0 = sample_prior(count, gen.spec.in_dim, seed)
    inv = invert(gen, critic, generate(gen, Z0), cfg.inversion if cfg else None, seed)
    trace = walk_trace(gen, critic, Z0, inv.z, steps, keep_latents=False).sample(0)
    atomic_write_text(out, csv_text(trace.header(), trace.rows()))
    print(f"wrote {out} ({len(trace)} rows)")
    return EXIT_OK


def cmd_enhance(args) -> int:
    cfg = _config(args)
    gen, critic, _ = _checkpoint(args)
    out = _require_out(args)
    count = args.count if args.count is not None else cfg.eval.count
    if count < 2:
        raise CommandError("--count must be at least 2", EXIT_USAGE)
    seed = args.seed if args.seed is not None else cfg.seed
    Z0 = sample_prior(count, gen.spec.in_dim, seed)
    try:
        res = enhance_batch(gen, critic, Z0, cfg.pipeline(), seed, real=_real_data(cfg))
    except PipelineError as exc:
        raise CommandError(f"enhancement failed in stage {exc.stage}: {exc.cause}") from None
    texts = {
        "report.json": dumps_report(res.report),
        "raw.csv": csv_text(["x0", "x1"], res.raw_samples),
        "enhanced.csv": csv_text(["x0", "x1"], res.samples),
        "latents.csv": csv_text(["sigma"] + [f"z_{j}" for j in range(Z0.shape[1])],
                                np.column_stack([res.sigma, res.Z_hat])),
    }
    out.mkdir(parents=True, exist_ok=True)
    for name, text in texts.items():
        atomic_write_text(out / name, text)
    agg = res.report["aggregate"]
    print(f"wrote {out}: frechet raw {agg['frechet_raw']:.6g}, enhanced {agg['frechet_enhanced']:.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    gen, critic, _ = _checkpoint(args)
    out = _require_out(args)
    count = args.count if args.count is not None else cfg.eval.count
    seed = args.seed if args.seed is not None else cfg.eval.seed
    try:
        report = compare_methods(gen, critic, _real_data(cfg), cfg.pipeline(), seed, count)
    except PipelineError as exc:
        raise CommandError(f"evaluation failed in stage {exc.stage}: {exc.cause}") from None
    atomic_write_text(out, dumps_report(report))
    for key in ("raw", "truncation_best", "constant_sigma_best", "optimized_sigma"):
        print(f"{key:20s} {report[key]['frechet']:.6g}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_checks(args.checkpoint, report=lambda r: print(r.line(), flush=True))
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


COMMANDS = {
    "train": cmd_train,
    "walk": cmd_walk,
    "enhance": cmd_enhance,
    "eval": cmd_eval,
    "check": cmd_check,
}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentwalk", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--checkpoint", help="checkpoint JSON written by train")
    parser.add_argument("--seed", type=_seed)
    parser.add_argument("--steps", type=int, help="walk steps, or training iterations for train")
    parser.add_argument("--count", type=int, help="number of samples")
    parser.add_argument("--out", help="output file (train, walk, eval) or directory (enhance)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CommandError as exc:
        print(f"latentwalk {args.command}: {exc}", file=sys.stderr)
        return exc.status
    except ConfigError as exc:
        print(f"latentwalk {args.command}: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
