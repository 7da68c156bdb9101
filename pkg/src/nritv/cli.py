"""Command line front end: ``nritv simulate | reconstruct | evaluate | rankprobe``.

Exit codes: 0 success, 2 configuration error, 3 data-format error,
4 solver error, 1 any other I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bundle as bio
from .config import ConfigError, ExperimentConfig, load_config
from .metrics import evaluate, rank_probe
from .sim import acquire, make_coils, make_mask, make_phantom
from .solver import LinesearchError, reconstruct

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_SOLVER = 4


class UsageError(ConfigError):
    pass


def _json_number(x):
    """Finite floats as numbers, infinities as the strings ``"inf"`` / ``"-inf"``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return _json_number(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(obj):
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("NRITV_THREADS")
    if env is None or env == "":
        return None
    try:
        value = int(env)
    except ValueError:
        raise UsageError("/threads", f"NRITV_THREADS must be a nonnegative integer, got {env!r}") from None
    if value < 0:
        raise UsageError("/threads", f"NRITV_THREADS must be a nonnegative integer, got {env!r}")
    return value


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    overrides = {}
    if getattr(args, "lam", None) is not None:
        overrides["lam"] = args.lam
    if getattr(args, "max_iters", None) is not None:
        overrides["max_iters"] = args.max_iters
    if overrides:
        cfg.solver = replace(cfg.solver, **overrides)
    try:
        cfg.solver.validate()
    except ValueError as exc:
        raise ConfigError("/solver", str(exc)) from None
    return cfg


def simulate_bundle(cfg):
    """Build the in-memory dataset described by ``cfg``."""
    mask_seed, coil_seed, noise_seed = cfg.seeds()
    truth = make_phantom(cfg.phantom)
    sens = make_coils(cfg.n, cfg.P, width_frac=cfg.width_frac, seed=coil_seed)
    mask = make_mask(cfg.mask_spec()).mask
    ksp = acquire(truth, sens, mask, cfg.sigma, seed=noise_seed)
    return bio.DatasetBundle(
        kspace=ksp.astype(bio.COMPLEX_DTYPE),
        mask=mask,
        sens=sens.astype(bio.COMPLEX_DTYPE),
        truth=truth.astype(bio.COMPLEX_DTYPE),
        R=cfg.R,
        seed=cfg.seed,
        sigma=cfg.sigma,
    )


def cmd_simulate(args):
    cfg = _config(args)
    out = args.out or cfg.dataset_dir
    if not out:
        raise UsageError("/output/dataset", "no output directory: pass --out or set output.dataset")
    data = simulate_bundle(cfg)
    hashes = bio.write_bundle(out, data)
    N, P, n = data.shape
    _emit({"bundle": str(out), "n": n, "N": N, "P": P, "lines": int(data.mask.any(axis=1).sum()), "manifest": hashes})
    return EXIT_OK


def cmd_reconstruct(args):
    cfg = _config(args)
    params = cfg.solver
    out = args.out or cfg.recon_dir
    if not out:
        raise UsageError("/output/recon", "no output directory: pass --out or set output.recon")
    data = bio.read_bundle(args.bundle)
    workers = _threads(args)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    diagnostics = {"params": params.to_dict(), "threads": workers, "bundle": bio.manifest(args.bundle, ["meta.json", "kspace.bin", "mask.u8", "sens.bin"])}
    start = time.perf_counter()
    try:
        result = reconstruct(
            data.kspace.astype(np.complex128),
            data.mask,
            data.sens.astype(np.complex128),
            params,
            workers=workers,
        )
    except LinesearchError as exc:
        diagnostics.update(status="solver_error", error=str(exc), iterations=exc.state.iteration, wall_time_s=time.perf_counter() - start)
        bio.atomic_write_json(out / "diagnostics.json", _jsonable(diagnostics))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = time.perf_counter() - start
    u = result.u
    hashes = bio.write_recon(out, u, {"params": _jsonable(params.to_dict())})
    for c in range(u.shape[0]):
        name = f"contrast_{c}.png"
        bio.atomic_write_bytes(out / name, bio.png_bytes(u[c]))
        hashes[name] = bio.sha256_file(out / name)
    diagnostics.update(
        status="ok",
        iterations=result.iterations,
        termination=result.reason,
        trace=result.trace.to_dict(),
        wall_time_s=wall,
    )
    if data.truth is not None:
        diagnostics["metrics"] = evaluate(u.astype(bio.COMPLEX_DTYPE), data.truth).to_dict()
    bio.atomic_write_json(out / "diagnostics.json", _jsonable(diagnostics))
    _emit({"out": str(out), "iterations": result.iterations, "termination": result.reason, "wall_time_s": wall, "manifest": hashes})
    return EXIT_OK


def cmd_evaluate(args):
    recon = bio.read_images(args.recon)
    truth = bio.read_images(args.truth)
    if recon.shape != truth.shape:
        raise bio.FormatError(f"shape mismatch: {args.recon} holds {recon.shape}, {args.truth} holds {truth.shape}")
    report = _jsonable(evaluate(recon, truth).to_dict())
    if args.out:
        bio.atomic_write_json(args.out, report)
    _emit(report)
    return EXIT_OK


def cmd_rankprobe(args):
    if Path(args.path).is_file():
        u = make_phantom(load_config(args.path).phantom)
    else:
        u = bio.read_images(args.path)
    n = u.shape[-1]
    if not (0 <= args.i < n and 0 <= args.j < n):
        raise UsageError("/i", f"pixel ({args.i}, {args.j}) outside a {n}x{n} image")
    s1, s2 = rank_probe(u, args.i, args.j)
    _emit({"i": args.i, "j": args.j, "sigma1": s1, "sigma2": s2, "ratio": (s2 / s1) if s1 > 0 else 0.0})
    return EXIT_OK


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def _u32(text):
    value = _nonneg_int(text)
    if value > 2**32 - 1:
        raise argparse.ArgumentTypeError(f"{text} does not fit in 32 bits")
    return value


def _u64(text):
    value = _nonneg_int(text)
    if value > 2**64 - 1:
        raise argparse.ArgumentTypeError(f"{text} does not fit in 64 bits")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="nritv", description="Joint multi-contrast parallel MRI reconstruction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver=False):
        p.add_argument("--config", metavar="PATH", help="experiment configuration (JSON)")
        p.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
        p.add_argument("--threads", type=_u32, metavar="U32", help="FFT threads, 0 = all cores (env NRITV_THREADS)")
        if solver:
            p.add_argument("--lambda", dest="lam", type=_positive_float, metavar="F64", help="regularisation weight")
            p.add_argument("--max-iters", dest="max_iters", type=_u32, metavar="U32", help="iteration cap")

    p = sub.add_parser("simulate", help="generate a synthetic dataset bundle")
    common(p)
    p.add_argument("--out", metavar="DIR", help="bundle directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a bundle")
    p.add_argument("bundle", metavar="BUNDLE")
    common(p, solver=True)
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="SNR/SSIM of a reconstruction against ground truth")
    p.add_argument("recon", metavar="RECON", help="reconstruction directory (or bundle, for its truth)")
    p.add_argument("truth", metavar="TRUTH", help="bundle with truth.bin (or reconstruction directory)")
    p.add_argument("--out", metavar="FILE", help="also write the report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rankprobe", help="singular values of the joint gradient matrix at one pixel")
    p.add_argument("path", metavar="PATH", help="bundle (truth), reconstruction directory, or config file (phantom)")
    p.add_argument("i", type=int, help="row index (0-based)")
    p.add_argument("j", type=int, help="column index (0-based)")
    p.set_defaults(func=cmd_rankprobe)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except bio.FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
