#!/usr/bin/env python3
"""
tdict command line: synthesize, corrupt, train, complete, denoise, evaluate.

Parameters come from pipeline.yaml (section `defaults` and one section per
command) and can be overridden by long-form flags named after the
RunConfig fields.

Usage:
    tdict synth --kind volume --seed 7 --output data/synth
    tdict corrupt --input data/synth/volume.tns --missing-fraction 0.5 --seed 7 --output data/dead.tns
    tdict train --input data/synth/volume.tns --K 64 --sweeps 10 --seed 7 --output data/dict.tns
    tdict complete --input data/dead.tns --mask data/dead_mask.tns --dictionary data/dict.tns --output data/filled.tns
    tdict eval --input data/filled.tns --truth data/synth/volume.tns
"""

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from dotenv import load_dotenv

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from scripts.pipeline import COMMANDS, RunConfig, config_path, load_config, resolve_run_config
from tdict.errors import ConfigError, NumericalError
from tdict.ktsvd import Dictionary, train
from tdict.patches import (
    add_fixed_location_noise,
    apply_dead_pixels,
    frame_window,
    psnr,
    reconstruction_error,
)
from tdict.restore import (
    CodingSettings,
    complete_volume,
    default_beta,
    default_lambda,
    denoise_volume,
    training_columns,
)
from tdict.seeding import stream
from tdict.synth import planted_model, planted_volume
from tdict.tensorfile import (
    export_volume,
    import_volume,
    metadata_path,
    read_metadata,
    read_tensor,
    write_metadata,
    write_tensor,
)


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _sibling(path: str | Path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}")


def _read_meta(path: str | Path) -> dict[str, str]:
    return read_metadata(path) if metadata_path(path).exists() else {}


def _warn(message: str) -> None:
    print(f"Warning: {message}", file=sys.stderr)


def load_dictionary(path: str | Path) -> Dictionary:
    return Dictionary.from_metadata(read_tensor(path), _read_meta(path))


def read_mask(path: str | Path) -> np.ndarray:
    """H x W observed-pixel mask; masks of corrupted sites are inverted."""
    M = read_tensor(path)[:, :, 0] > 0.5
    if _read_meta(path).get("mask_kind") == "corrupted":
        return ~M
    return M


def select_frames(V: np.ndarray, cfg: RunConfig) -> np.ndarray:
    """The configured frame window of V, or V itself when no window is set."""
    if cfg.frame_start is None and cfg.frame_stop is None:
        return V
    return frame_window(V, cfg.frame_start or 0, cfg.frame_stop)


def _coding_settings(cfg: RunConfig, dictionary: Dictionary) -> CodingSettings:
    lam = cfg.lam or dictionary.lam or default_lambda(dictionary.n3)
    return CodingSettings(
        lam=lam,
        rho=cfg.rho,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        workers=cfg.workers,
        chunk=cfg.chunk,
    )


def write_metrics(path: Path, metrics: dict[str, float]) -> None:
    df = pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())})
    df.to_csv(path, index=False)


def cmd_synth(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    T = cfg.atoms_per_column

    if cfg.kind == "tensor":
        print(f"Synthesizing planted model d={cfg.d} K={cfg.K} n3={cfg.n3} n={cfg.n_columns} T={T}...")
        model = planted_model(cfg.d, cfg.K, cfg.n3, cfg.n_columns, T, cfg.seed)
        write_tensor(out / "D_true.tns", model.D)
        write_tensor(out / "X_true.tns", model.X)
        y_path = write_tensor(out / "Y.tns", model.Y)
        write_metadata(y_path, {"kind": "columns", "seed": cfg.seed, "T": T, "K": cfg.K})
        print(f"  -> {out / 'D_true.tns'}, {out / 'X_true.tns'}, {y_path}")
        return

    print(f"Synthesizing planted volume {cfg.height}x{cfg.width}x{cfg.bands} ({cfg.pattern})...")
    V, D = planted_volume(
        cfg.height, cfg.width, cfg.bands, cfg.p, cfg.q, cfg.K, T, cfg.seed, pattern=cfg.pattern
    )
    v_path = write_tensor(out / "volume.tns", V)
    write_metadata(v_path, {"kind": "volume", "seed": cfg.seed, "T": T, "K": cfg.K, "pattern": cfg.pattern})
    write_tensor(out / "D_true.tns", D)
    print(f"  -> {v_path}")


def cmd_corrupt(cfg: RunConfig) -> None:
    V = read_tensor(cfg.input)
    rng = stream(cfg.seed, "noise")
    mask_out = Path(cfg.mask) if cfg.mask else _sibling(cfg.output, "_mask.tns")

    if cfg.corruption == "dead":
        print(f"Removing {cfg.missing_fraction:.0%} of pixel tubes...")
        damaged, mask = apply_dead_pixels(V, cfg.missing_fraction, rng)
        meta = {"corruption": "dead", "missing_fraction": cfg.missing_fraction, "seed": cfg.seed}
        mask_kind = "observed"
    else:
        print(f"Adding noise at {cfg.sparsity:.0%} of pixel sites (sigma={cfg.sigma})...")
        damaged, mask = add_fixed_location_noise(V, cfg.sparsity, cfg.sigma, rng)
        meta = {
            "corruption": "noise",
            "sparsity": cfg.sparsity,
            "sigma": cfg.sigma,
            "seed": cfg.seed,
        }
        mask_kind = "corrupted"

    write_metadata(write_tensor(cfg.output, damaged), meta)
    write_metadata(write_tensor(mask_out, mask[:, :, None].astype(np.float64)), {"mask_kind": mask_kind})
    print(f"  -> {cfg.output} ({int(mask.sum())} {mask_kind} sites)")
    print(f"  -> {mask_out}")


def cmd_train(cfg: RunConfig) -> None:
    data = read_tensor(cfg.input)
    from_volume = _read_meta(cfg.input).get("kind") != "columns"

    if from_volume:
        data = select_frames(data, cfg)
        mask = read_mask(cfg.mask) if cfg.observed_only else None
        Y = training_columns(
            data,
            cfg.p,
            cfg.q,
            stride=cfg.stride or 1,
            count=cfg.count,
            rng=stream(cfg.seed, "patches"),
            depth=cfg.depth,
            center=cfg.center,
            scale=cfg.scale,
            mask=mask,
        )
        print(f"Extracted {Y.shape[1]} training patches of {cfg.p}x{cfg.q}x{Y.shape[2]}")
    else:
        Y = data
        print(f"Loaded {Y.shape[1]} training columns of {Y.shape[0]}x1x{Y.shape[2]}")

    lam = cfg.lam or default_lambda(Y.shape[2])
    print(f"Training K={cfg.K} atoms (lambda={lam:.4g}, rho={cfg.rho}, up to {cfg.sweeps} sweeps)...")
    dictionary, _, report = train(
        Y,
        cfg.K,
        lam,
        cfg.sweeps,
        cfg.seed,
        rho=cfg.rho,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        min_improvement=cfg.min_improvement,
        full_svd=cfg.full_svd,
        verbose=cfg.verbose,
    )
    if from_volume:
        dictionary.p, dictionary.q = cfg.p, cfg.q
        dictionary.center, dictionary.scale = cfg.center, cfg.scale

    unconverged = report.coding_converged.count(False)
    if unconverged:
        _warn(f"sparse coding hit max_iters in {unconverged} of {report.sweeps} sweeps")
    if report.replacements:
        _warn(f"{len(report.replacements)} unused atoms replaced by worst-represented columns")

    write_metadata(write_tensor(cfg.output, dictionary.D), dictionary.metadata())
    trace_path = _sibling(cfg.output, "_trace.csv")
    report.to_frame().to_csv(trace_path, index=False)
    print(f"  -> {cfg.output} ({report.sweeps} sweeps, error {report.representation_errors[-1]:.6g})")
    print(f"  -> {trace_path}")


def cmd_complete(cfg: RunConfig) -> None:
    V = select_frames(read_tensor(cfg.input), cfg)
    mask = read_mask(cfg.mask)
    dictionary = load_dictionary(cfg.dictionary)
    settings = _coding_settings(cfg, dictionary)

    print(f"Completing {V.shape[0]}x{V.shape[1]}x{V.shape[2]} volume ({(~mask).mean():.0%} missing)...")
    out, report = complete_volume(V, mask, dictionary, settings, stride=cfg.stride)
    print(f"  Coded {report.coded} of {report.patches} patches in {report.chunks} chunks")
    if report.empty_patches:
        _warn(f"{report.empty_patches} patches had no observed pixels; filled with band means")
    if report.unconverged_chunks:
        _warn(f"ADMM hit max_iters in {report.unconverged_chunks} chunks")
    write_tensor(cfg.output, out)
    print(f"  -> {cfg.output}")

    if cfg.truth:
        X = select_frames(read_tensor(cfg.truth), cfg)
        metrics = {
            "re": reconstruction_error(X, out),
            "re_zero_fill": reconstruction_error(X, V),
            "psnr": psnr(X, out),
        }
        metrics_path = _sibling(cfg.output, "_metrics.csv")
        write_metrics(metrics_path, metrics)
        print(f"  RE {metrics['re']:.4f} (zero fill {metrics['re_zero_fill']:.4f})")
        print(f"  -> {metrics_path}")


def cmd_denoise(cfg: RunConfig) -> None:
    V = select_frames(read_tensor(cfg.input), cfg)
    dictionary = load_dictionary(cfg.dictionary)
    settings = _coding_settings(cfg, dictionary)
    beta = cfg.beta if cfg.beta is not None else default_beta(cfg.sigma)

    print(f"Denoising {V.shape[0]}x{V.shape[1]}x{V.shape[2]} volume (beta={beta:.4g})...")
    out, report = denoise_volume(V, dictionary, settings, beta, stride=cfg.stride or 1)
    print(f"  Coded {report.coded} patches in {report.chunks} chunks")
    if report.unconverged_chunks:
        _warn(f"ADMM hit max_iters in {report.unconverged_chunks} chunks")
    write_tensor(cfg.output, out)
    print(f"  -> {cfg.output}")

    if cfg.truth:
        X = select_frames(read_tensor(cfg.truth), cfg)
        metrics = {
            "psnr": psnr(X, out),
            "psnr_input": psnr(X, V),
            "re": reconstruction_error(X, out),
        }
        metrics_path = _sibling(cfg.output, "_metrics.csv")
        write_metrics(metrics_path, metrics)
        print(f"  PSNR {metrics['psnr']:.2f} dB (input {metrics['psnr_input']:.2f} dB)")
        print(f"  -> {metrics_path}")


def cmd_eval(cfg: RunConfig) -> None:
    X = read_tensor(cfg.truth)
    Xrec = read_tensor(cfg.input)
    metrics = {"re": reconstruction_error(X, Xrec), "psnr": psnr(X, Xrec)}
    df = pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())})
    print(df.to_csv(index=False), end="")
    print(f"RE: {metrics['re']:.6g}")
    print(f"PSNR: {metrics['psnr']:.4f} dB")
    if cfg.output:
        write_metrics(Path(cfg.output), metrics)


def cmd_import(cfg: RunConfig) -> None:
    V = import_volume(cfg.input)
    write_metadata(write_tensor(cfg.output, V), {"kind": "volume"})
    print(f"Imported {V.shape[2]} frames of {V.shape[0]}x{V.shape[1]}")
    print(f"  -> {cfg.output}")


def cmd_export(cfg: RunConfig) -> None:
    V = read_tensor(cfg.input)
    paths = export_volume(V, cfg.output)
    print(f"Exported {len(paths)} frames")
    print(f"  -> {cfg.output}")


def cmd_sweep(cfg: RunConfig) -> None:
    V = read_tensor(cfg.input)
    dictionary = load_dictionary(cfg.dictionary)
    settings = _coding_settings(cfg, dictionary)

    print(f"Sweeping missing fraction over {len(cfg.fractions)} values...")
    rows = []
    for fraction in sorted(cfg.fractions):
        # Same stream state for every fraction: masks are nested
        damaged, mask = apply_dead_pixels(V, fraction, stream(cfg.seed, "sweep"))
        out, report = complete_volume(damaged, mask, dictionary, settings, stride=cfg.stride)
        row = {
            "missing_fraction": fraction,
            "re": reconstruction_error(V, out),
            "re_zero_fill": reconstruction_error(V, damaged),
            "empty_patches": report.empty_patches,
        }
        rows.append(row)
        print(f"  {fraction:.0%}: RE {row['re']:.4f} (zero fill {row['re_zero_fill']:.4f})")

    pd.DataFrame(rows).to_csv(cfg.output, index=False)
    print(f"  -> {cfg.output}")


HANDLERS = {
    "synth": cmd_synth,
    "corrupt": cmd_corrupt,
    "train": cmd_train,
    "complete": cmd_complete,
    "denoise": cmd_denoise,
    "eval": cmd_eval,
    "import": cmd_import,
    "export": cmd_export,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="Path to pipeline YAML (default: TDICT_CONFIG or pipeline.yaml)")

    paths = common.add_argument_group("paths")
    for name in ("input", "output", "mask", "truth", "dictionary"):
        paths.add_argument(f"--{name}")

    patches = common.add_argument_group("patches")
    patches.add_argument("--p", type=int)
    patches.add_argument("--q", type=int)
    patches.add_argument("--stride", type=int)
    patches.add_argument("--depth", type=int)
    patches.add_argument("--count", type=int)
    patches.add_argument("--frame-start", type=int, help="First frame used (0-based)")
    patches.add_argument("--frame-stop", type=int, help="One past the last frame used")

    learning = common.add_argument_group("learning and coding")
    learning.add_argument("--K", type=int)
    learning.add_argument("--lam", "--lambda", dest="lam", type=float)
    learning.add_argument("--rho", type=float)
    learning.add_argument("--tol", type=float)
    learning.add_argument("--max-iters", type=int)
    learning.add_argument("--sweeps", type=int)
    learning.add_argument("--min-improvement", type=float, help="0 disables early exit")
    learning.add_argument("--full-svd", action=argparse.BooleanOptionalAction, default=None)
    learning.add_argument("--center", action=argparse.BooleanOptionalAction, default=None)
    learning.add_argument("--scale", type=float)
    learning.add_argument("--observed-only", action=argparse.BooleanOptionalAction, default=None)

    corruption = common.add_argument_group("corruption and reconstruction")
    corruption.add_argument("--corruption", choices=["dead", "noise"])
    corruption.add_argument("--missing-fraction", type=float)
    corruption.add_argument("--sparsity", type=float)
    corruption.add_argument("--sigma", type=float)
    corruption.add_argument("--beta", type=float)
    corruption.add_argument("--fractions", type=float, nargs="+")

    synth = common.add_argument_group("synthetic data")
    synth.add_argument("--kind", choices=["tensor", "volume"])
    synth.add_argument("--pattern", choices=["blocks", "waves"])
    synth.add_argument("--d", type=int)
    synth.add_argument("--n3", type=int)
    synth.add_argument("--n-columns", type=int)
    synth.add_argument("--atoms-per-column", type=int)
    synth.add_argument("--height", type=int)
    synth.add_argument("--width", type=int)
    synth.add_argument("--bands", type=int)

    run = common.add_argument_group("execution")
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--chunk", type=int)
    run.add_argument("--verbose", action=argparse.BooleanOptionalAction, default=None)

    parser = _Parser(prog="tdict", description="Tensor dictionary learning (K-TSVD)", allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], allow_abbrev=False, help=(HANDLERS[name].__doc__ or "").strip() or None)
    return parser


def main(argv: list[str] | None = None) -> int:
    """CLI entry point; returns the process exit code."""
    load_dotenv()
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        config = load_config(config_path(args.pop("config")))
        cfg = resolve_run_config(command, config, args).validate(command)
        HANDLERS[command](cfg)
    except NumericalError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
