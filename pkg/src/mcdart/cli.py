"""``mcdart`` command line.

Exit codes: 0 success, 2 configuration error, 3 I/O error (missing or
malformed files), 4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .dart import DartParams, mcdart_run
from .fileio import (FileFormatError, ensure_dir, header_geometry, read_pgm, read_sinogram,
                     read_spectra_csv, write_pgm, write_raw, write_sinogram, write_spectra_csv)
from .harness import ConfigError, InvariantViolation
from .metrics import pixel_error
from .phantom import PhantomGenerationError
from .projector import build_operator

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, angles_help="number of projection angles"):
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--size", type=int, help="grid width and height in pixels")
    p.add_argument("--angles", help=angles_help)
    p.add_argument("--detector", type=int, help="detector bins (default: grid size)")
    p.add_argument("--channels", help="channel counts, e.g. '1-10' or '1,8'")
    p.add_argument("--materials", help="material counts, e.g. '2-10'")
    p.add_argument("--runs", type=int, help="runs per cell")
    p.add_argument("--beta", type=float, help="fix probability")
    p.add_argument("--dart-iters", type=int, dest="dart_iterations")
    p.add_argument("--arm-iters", type=int, dest="arm_iterations")
    p.add_argument("--start-iters", type=int, dest="start_iterations")
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--paper-scale", action="store_true", help="128x128 grid, 128 bins, 100 runs")
    p.add_argument("--no-plot", dest="plot", action="store_false", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcdart", description="DART / multi-channel DART experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="pixel error over channel and material counts")
    _add_common(p)
    p = sub.add_parser("converge", help="class-count convergence vs. a plain ARM baseline")
    _add_common(p)
    p = sub.add_parser("angles", help="pixel error for several angle counts")
    _add_common(p, angles_help="angle counts, e.g. '2,32,128'")

    p = sub.add_parser("synthesize", help="write a random phantom, spectra and sinograms")
    _add_common(p)
    p.add_argument("--run", type=int, default=0, help="run index used in seed derivation")

    p = sub.add_parser("reconstruct", help="MC-DART reconstruction from files")
    p.add_argument("--sinograms", nargs="+", help="raw sinogram files in channel order")
    p.add_argument("--spectra", help="spectra CSV")
    p.add_argument("--reference", help="ground-truth label PGM; adds pixel error to the manifest")
    p.add_argument("--manifest", help="replay the inputs and parameters of an earlier run")
    p.add_argument("--beta", type=float)
    p.add_argument("--dart-iters", type=int, dest="dart_iterations")
    p.add_argument("--arm-iters", type=int, dest="arm_iterations")
    p.add_argument("--start-iters", type=int, dest="start_iterations")
    p.add_argument("--connectivity", type=int, choices=(4, 8))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir", default="reconstruction")
    return parser


def _config(command: str, args) -> harness.ExperimentConfig:
    file_values = harness.read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in (
        "size", "detector", "runs", "beta", "dart_iterations", "arm_iterations", "start_iterations",
        "connectivity", "seed", "out_dir", "workers", "plot")}
    for k in ("angles", "channels", "materials"):
        v = getattr(args, k)
        overrides[k] = harness.parse_int_list(v) if v is not None else None
    return harness.make_config(command, file_values, overrides, args.paper_scale)


def cmd_sweep(args) -> int:
    res = harness.run_sweep(_config("sweep", args))
    for row in res["cells"]:
        if not 0 <= row["mean_error_pct"] <= 100:
            raise InvariantViolation(f"pixel error out of range: {row}")
    print(f"wrote {', '.join(str(p) for p in res['files'].values())}")
    return EXIT_OK


def cmd_angles(args) -> int:
    res = harness.run_angles(_config("angles", args))
    for row in res["cells"]:
        print(f"angles={row['angle_count']:4d} C={row['C']:3d} m={row['m']:3d} "
              f"error={row['mean_error_pct']:7.3f}%")
    print(f"wrote {', '.join(str(p) for p in res['files'].values())}")
    return EXIT_OK


def cmd_converge(args) -> int:
    config = _config("converge", args)
    res = harness.run_converge(config)
    for cr in res["runs"]:
        if np.any(cr.mcdart_counts.sum(axis=1) != cr.disk_size):
            raise InvariantViolation("class counts do not partition the inner disk")
    for row in res["summary"]:
        print(f"run {row['run']}: MC-DART {row['mcdart_final_pct']:.3f}%  "
              f"ARM only {row['baseline_final_pct']:.3f}%")
    print(f"wrote {', '.join(str(p) for p in res['files'].values())}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    config = _config("synthesize", args)
    n_angles = config.single_angle_count
    if len(config.channels) != 1 or len(config.materials) != 1:
        raise ConfigError("synthesize takes a single channel count and a single material count")
    (C,), (m,) = config.channels, config.materials
    seed, _, disk, problem = harness.make_problem(config, n_angles, C, m, args.run)
    out = ensure_dir(config.out_dir)
    g = problem.grid
    write_pgm(out / "phantom.pgm", problem.phantom, g.width, g.height)
    write_spectra_csv(out / "spectra.csv", problem.spectra)
    for c in range(C):
        write_sinogram(out / f"sino_c{c}.raw", problem.sinograms[c], g, problem.geometry, c)
    (out / "synthesis.json").write_text(json.dumps(
        {"config": config.describe(), "run": args.run, "trial_seed": seed}, indent=2, sort_keys=True) + "\n")
    print(f"wrote phantom, spectra and {C} sinogram(s) to {out}")
    return EXIT_OK


def _reconstruct_inputs(args) -> dict:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        inputs, params = manifest["inputs"], manifest["params"]
    else:
        if not args.sinograms or not args.spectra:
            raise ConfigError("reconstruct needs --sinograms and --spectra (or --manifest)")
        inputs = {"sinograms": [str(Path(p).resolve()) for p in args.sinograms],
                  "spectra": str(Path(args.spectra).resolve()),
                  "reference": str(Path(args.reference).resolve()) if args.reference else None}
        params = dataclasses.asdict(DartParams())
    for k in ("start_iterations", "dart_iterations", "arm_iterations", "connectivity"):
        if getattr(args, k) is not None:
            params[k] = getattr(args, k)
    if args.beta is not None:
        params["fix_probability"] = args.beta
    if args.seed is not None:
        params["rng_seed"] = args.seed
    try:
        DartParams(**params)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return {"inputs": inputs, "params": params}


def cmd_reconstruct(args) -> int:
    run = _reconstruct_inputs(args)
    inputs, params = run["inputs"], DartParams(**run["params"])
    spectra = read_spectra_csv(inputs["spectra"])
    sinos, metas = zip(*(read_sinogram(p) for p in inputs["sinograms"]))
    if len(sinos) != spectra.channels:
        raise ConfigError(f"{len(sinos)} sinogram(s) for {spectra.channels} spectra channel(s)")
    if any("grid" not in m or "geometry" not in m for m in metas):
        raise FileFormatError(inputs["sinograms"][0], 0, "sidecar lacks grid/geometry")
    grid, geometry = header_geometry(metas[0])
    for p, m in zip(inputs["sinograms"], metas):
        if header_geometry(m) != (grid, geometry):
            raise ConfigError(f"{p}: geometry differs from the first sinogram")
    op = build_operator(grid, geometry)
    X, labels, trace = mcdart_run(op, np.array(sinos), spectra, params)

    out = ensure_dir(args.out_dir)
    outputs = {"labels": "labels.pgm", "reconstructions": []}
    write_pgm(out / "labels.pgm", labels, grid.width, grid.height)
    for c in range(spectra.channels):
        name = f"recon_c{c}.raw"
        write_raw(out / name, X[c], grid.width, grid.height, channel=c)
        outputs["reconstructions"].append(name)
    manifest = {"inputs": inputs, "params": dataclasses.asdict(params), "outputs": outputs,
                "class_counts": [int(v) for v in trace[-1].class_counts]}
    if inputs.get("reference"):
        ref, w, h = read_pgm(inputs["reference"])
        if (w, h) != (grid.width, grid.height):
            raise ConfigError("reference image size differs from the reconstruction grid")
        rep = pixel_error(labels, ref, ref > 0)
        manifest["pixel_error"] = {"mismatched": rep.mismatched, "region_size": rep.region_size,
                                   "percentage": rep.percentage}
        print(f"inner-disk pixel error {rep.percentage:.3f}% ({rep.mismatched}/{rep.region_size})")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote reconstruction to {out}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "angles": cmd_angles, "converge": cmd_converge,
            "synthesize": cmd_synthesize, "reconstruct": cmd_reconstruct}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"mcdart: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileFormatError, OSError, json.JSONDecodeError, KeyError) as e:
        print(f"mcdart: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (InvariantViolation, PhantomGenerationError) as e:
        print(f"mcdart: internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
