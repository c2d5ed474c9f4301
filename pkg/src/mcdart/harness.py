"""Experiment configuration and the sweep / convergence / angle studies.

Every trial is seeded from ``run_seed(master, C, m, run)`` so a cell's result
does not depend on which other cells are part of the sweep, nor on the
order in which a worker pool finishes them.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import svgplot
from .dart import DartParams, arm_baseline_run, mcdart_run
from .fileio import ensure_dir
from .metrics import class_counts, pixel_error
from .phantom import PhantomSpec, disk_mask, generate_phantom, generate_spectra, synthesize
from .projector import GridSpec, ParallelGeometry, build_operator


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    size: int = 64
    angles: tuple[int, ...] = (32,)
    detector: int | None = None
    channels: tuple[int, ...] = tuple(range(1, 11))
    materials: tuple[int, ...] = tuple(range(2, 11))
    runs: int = 10
    start_iterations: int = 10
    dart_iterations: int = 10
    arm_iterations: int = 10
    beta: float = 0.99
    connectivity: int = 8
    seed: int = 0
    out_dir: str = "results"
    workers: int = 1
    plot: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.size < 1:
            raise ConfigError("size must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not self.angles or min(self.angles) < 1:
            raise ConfigError("angle counts must be >= 1")
        if not self.channels or min(self.channels) < 1:
            raise ConfigError("channel counts must be >= 1")
        if not self.materials or min(self.materials) < 1:
            raise ConfigError("material counts must be >= 1")
        if self.detector is not None and self.detector < 1:
            raise ConfigError("detector must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must be in [0, 1]")
        for name in ("start_iterations", "dart_iterations", "arm_iterations"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def detector_bins(self) -> int:
        return self.size if self.detector is None else self.detector

    @property
    def single_angle_count(self) -> int:
        if len(self.angles) != 1:
            raise ConfigError(f"this command takes a single angle count, got {list(self.angles)}")
        return self.angles[0]

    def dart_params(self, rng_seed: int) -> DartParams:
        return DartParams(self.start_iterations, self.dart_iterations, self.arm_iterations,
                          self.beta, self.connectivity, rng_seed)

    def describe(self) -> dict:
        """Everything that influences results (not where or how fast they are written)."""
        d = dataclasses.asdict(self)
        for k in ("out_dir", "workers", "plot"):
            d.pop(k)
        d["detector"] = self.detector_bins
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


PAPER_SCALE = {"size": 128, "detector": 128, "runs": 100}

COMMAND_DEFAULTS = {
    "sweep": {},
    "angles": {"angles": (2, 32, 128), "channels": (1, 10), "materials": (2, 10)},
    "converge": {"angles": (8,), "channels": (10,), "materials": (4,), "start_iterations": 2},
    "synthesize": {"channels": (1,), "materials": (2,)},
}

# config-file keys, normalised to lower_snake_case, -> field
_KEYS = {
    "size": "size", "grid_size": "size", "grid": "size",
    "angles": "angles", "angle_count": "angles", "angle_counts": "angles",
    "detector": "detector", "detector_size": "detector", "detector_bins": "detector",
    "channels": "channels", "c": "channels",
    "materials": "materials", "m": "materials",
    "runs": "runs",
    "start_iterations": "start_iterations", "start_iters": "start_iterations",
    "mc_dart_iterations_k": "dart_iterations", "mc_dart_iterations": "dart_iterations",
    "dart_iterations": "dart_iterations", "dart_iters": "dart_iterations", "k": "dart_iterations",
    "arm_iterations": "arm_iterations", "arm_iters": "arm_iterations",
    "fix_probability": "beta", "beta": "beta",
    "connectivity": "connectivity",
    "seed": "seed", "master_seed": "seed",
    "out_dir": "out_dir", "output_directory": "out_dir",
    "workers": "workers",
    "arm": "arm",
}


def _normalise_key(key: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", key.strip().lower()).strip("_")


def parse_int_list(text: str) -> tuple[int, ...]:
    """``"1,2,5"``, ``"2-10"`` or mixtures thereof."""
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        span = re.fullmatch(r"(\d+)-(\d+)", part)
        try:
            out.extend(range(int(span[1]), int(span[2]) + 1) if span else [int(part)])
        except ValueError:
            raise ConfigError(f"cannot parse integer list {text!r}") from None
    if not out:
        raise ConfigError(f"empty integer list {text!r}")
    return tuple(out)


def _convert(name: str, value: str):
    try:
        if name in ("angles", "channels", "materials"):
            return parse_int_list(value)
        if name == "beta":
            return float(value)
        if name == "out_dir":
            return str(value)
        if name == "detector" and str(value).lower() in ("", "none", "auto"):
            return None
        return int(value)
    except ValueError:
        raise ConfigError(f"invalid value {value!r} for {name}") from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        name = _KEYS.get(_normalise_key(key))
        if name is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if name == "arm":
            if value.strip().upper() != "SIRT":
                raise ConfigError(f"{path}:{lineno}: only SIRT is available as ARM")
            continue
        values[name] = _convert(name, value)
    return values


def make_config(command: str, file_values: dict | None = None, overrides: dict | None = None,
                paper_scale: bool = False) -> ExperimentConfig:
    """Defaults < per-command defaults < paper-scale profile < file < flags."""
    values = dict(COMMAND_DEFAULTS.get(command, {}))
    if paper_scale:
        values.update(PAPER_SCALE)
    values.update(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from None


# -- seeding -------------------------------------------------------------------

def run_seed(master: int, C: int, m: int, run: int) -> int:
    """Stable 64-bit seed for one (C, m, run) trial."""
    digest = hashlib.blake2b(f"{master}/{C}/{m}/{run}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def trial_seeds(seed: int) -> tuple[int, int, int]:
    """(phantom, spectra, dart) seeds split from a trial seed."""
    s = np.random.SeedSequence(seed).generate_state(3, dtype=np.uint64)
    return int(s[0]), int(s[1]), int(s[2])


@lru_cache(maxsize=8)
def cached_operator(size: int, n_angles: int, detector: int):
    return build_operator(GridSpec(size, size), ParallelGeometry.equidistant(n_angles, detector))


def make_problem(config: ExperimentConfig, n_angles: int, C: int, m: int, run: int):
    seed = run_seed(config.seed, C, m, run)
    phantom_seed, spectra_seed, dart_seed = trial_seeds(seed)
    op = cached_operator(config.size, n_angles, config.detector_bins)
    spec = PhantomSpec(op.grid, m, rng_seed=phantom_seed)
    phantom = generate_phantom(spec)
    spectra = generate_spectra(m, C, np.random.default_rng(spectra_seed))
    problem = synthesize(phantom, spectra, op)
    return seed, dart_seed, disk_mask(spec), problem


# -- trials --------------------------------------------------------------------

def _trial(args):
    config, n_angles, C, m, run = args
    t0 = time.perf_counter()
    seed, dart_seed, disk, problem = make_problem(config, n_angles, C, m, run)
    _, labels, _ = mcdart_run(problem.op, problem.sinograms, problem.spectra, config.dart_params(dart_seed))
    rep = pixel_error(labels, problem.phantom, disk)
    return {
        "angle_count": n_angles, "C": C, "m": m, "run": run, "seed": seed,
        "mismatched": rep.mismatched, "region_size": rep.region_size,
        "pixel_error_pct": rep.percentage, "wall_time_s": time.perf_counter() - t0,
    }


def _map(func, tasks, workers: int):
    if workers <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def run_trials(config: ExperimentConfig, cells) -> list[dict]:
    """Run every ``(angle_count, C, m)`` cell ``config.runs`` times."""
    tasks = [(config, a, C, m, r) for a, C, m in cells for r in range(config.runs)]
    return _map(_trial, tasks, config.workers)


def cell_means(records: list[dict], keys=("angle_count", "C", "m")) -> list[dict]:
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r["pixel_error_pct"])
    return [dict(zip(keys, k), runs=len(v), mean_error_pct=math.fsum(v) / len(v)) for k, v in groups.items()]


# -- CSV -------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, config: ExperimentConfig, command: str) -> Path:
    buf = io.StringIO()
    buf.write(f"# mcdart {command} config: {json.dumps(config.describe(), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> list[dict]:
    """Rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- studies -----------------------------------------------------------------------

def run_sweep(config: ExperimentConfig) -> dict:
    """Pixel error over the (C, m) grid; writes run, cell and timing CSVs."""
    n_angles = config.single_angle_count
    cells = [(n_angles, C, m) for C in config.channels for m in config.materials]
    records = run_trials(config, cells)
    means = cell_means(records, keys=("C", "m"))
    out = ensure_dir(config.out_dir)
    files = {
        "runs": write_csv(out / "sweep_runs.csv",
                          ["C", "m", "run", "seed", "mismatched", "region_size", "pixel_error_pct"],
                          records, config, "sweep"),
        "cells": write_csv(out / "sweep_cells.csv", ["C", "m", "runs", "mean_error_pct"], means, config, "sweep"),
        "timing": write_csv(out / "sweep_timing.csv", ["C", "m", "run", "wall_time_s"], records, config, "sweep"),
    }
    if config.plot:
        lookup = {(r["C"], r["m"]): r["mean_error_pct"] for r in means}
        grid = [[lookup[(C, m)] for C in config.channels] for m in reversed(config.materials)]
        svg = svgplot.heatmap(grid, list(reversed(config.materials)), list(config.channels),
                              title="Pixel error (%) in the inner disk",
                              row_title="materials m", col_title="channels C")
        files["plot"] = out / "sweep_heatmap.svg"
        files["plot"].write_text(svg)
    return {"records": records, "cells": means, "files": files}


def run_angles(config: ExperimentConfig) -> dict:
    cells = [(a, C, m) for a in config.angles for C in config.channels for m in config.materials]
    records = run_trials(config, cells)
    means = cell_means(records)
    out = ensure_dir(config.out_dir)
    files = {
        "cells": write_csv(out / "angles.csv", ["angle_count", "C", "m", "mean_error_pct", "runs"],
                           means, config, "angles"),
        "runs": write_csv(out / "angles_runs.csv",
                          ["angle_count", "C", "m", "run", "seed", "mismatched", "region_size", "pixel_error_pct"],
                          records, config, "angles"),
    }
    return {"records": records, "cells": means, "files": files}


@dataclass
class ConvergeRun:
    run: int
    seed: int
    true_counts: np.ndarray
    disk_size: int
    mcdart_counts: np.ndarray       # (K + 1, m + 1) over the disk
    mcdart_work: np.ndarray
    mcdart_error: np.ndarray
    baseline_counts: np.ndarray     # (checkpoints, m + 1)
    baseline_work: np.ndarray
    baseline_error: np.ndarray


def _converge_trial(args) -> ConvergeRun:
    config, run = args
    n_angles = config.single_angle_count
    (C,), (m,) = config.channels, config.materials
    seed, dart_seed, disk, problem = make_problem(config, n_angles, C, m, run)
    op, P, spectra, y = problem.op, problem.sinograms, problem.spectra, problem.phantom
    _, _, trace = mcdart_run(op, P, spectra, config.dart_params(dart_seed), reference=y, region=disk)
    base = arm_baseline_run(op, P, spectra, config.dart_iterations * config.arm_iterations,
                            max(config.arm_iterations, 1), config.start_iterations, reference=y, region=disk)

    def counts(tr):
        return np.array([class_counts(r.labels, disk, m + 1) for r in tr])

    return ConvergeRun(
        run, seed, class_counts(y, disk, m + 1), int(disk.sum()),
        counts(trace), np.array([r.arm_work for r in trace]), trace.pixel_errors(),
        counts(base), np.array([r.arm_work for r in base]), base.pixel_errors(),
    )


def run_converge(config: ExperimentConfig) -> dict:
    """MC-DART class-count trajectories against a plain ARM baseline of equal work."""
    if len(config.channels) != 1 or len(config.materials) != 1:
        raise ConfigError("converge takes a single channel count and a single material count")
    if config.dart_iterations * config.arm_iterations == 0:
        raise ConfigError("converge needs dart_iterations and arm_iterations >= 1")
    runs = _map(_converge_trial, [(config, r) for r in range(config.runs)], config.workers)
    out = ensure_dir(config.out_dir)

    count_rows, error_rows, summary = [], [], []
    for cr in runs:
        for method, counts, work, err in (("mcdart", cr.mcdart_counts, cr.mcdart_work, cr.mcdart_error),
                                          ("baseline", cr.baseline_counts, cr.baseline_work, cr.baseline_error)):
            for rec in range(len(counts)):
                error_rows.append({"method": method, "run": cr.run, "record": rec, "arm_work": int(work[rec]),
                                   "pixel_error_pct": float(err[rec])})
                for label, cnt in enumerate(counts[rec]):
                    count_rows.append({"method": method, "run": cr.run, "record": rec, "arm_work": int(work[rec]),
                                       "label": label, "count": int(cnt), "true_count": int(cr.true_counts[label])})
        summary.append({"run": cr.run, "seed": cr.seed, "disk_size": cr.disk_size,
                        "mcdart_final_pct": float(cr.mcdart_error[-1]),
                        "baseline_final_pct": float(cr.baseline_error[-1])})
    files = {
        "counts": write_csv(out / "converge_counts.csv",
                            ["method", "run", "record", "arm_work", "label", "count", "true_count"],
                            count_rows, config, "converge"),
        "error": write_csv(out / "converge_error.csv",
                           ["method", "run", "record", "arm_work", "pixel_error_pct"], error_rows, config, "converge"),
        "summary": write_csv(out / "converge_summary.csv",
                             ["run", "seed", "disk_size", "mcdart_final_pct", "baseline_final_pct"],
                             summary, config, "converge"),
    }
    if config.plot:
        first = runs[0]
        m = len(first.true_counts) - 1
        for method, counts, work in (("mcdart", first.mcdart_counts, first.mcdart_work),
                                     ("baseline", first.baseline_counts, first.baseline_work)):
            series = {f"class {s}": (list(work), list(counts[:, s])) for s in range(1, m + 1)}
            dashed = {f"class {s}": float(first.true_counts[s]) for s in range(1, m + 1)}
            path = out / f"converge_counts_{method}.svg"
            path.write_text(svgplot.line_chart(series, title=f"Pixels per class ({method})",
                                               x_title="ARM iterations", y_title="pixels", dashed=dashed))
            files[f"plot_{method}"] = path
        path = out / "converge_error.svg"
        path.write_text(svgplot.line_chart(
            {"MC-DART": (list(first.mcdart_work), list(first.mcdart_error)),
             "ARM only": (list(first.baseline_work), list(first.baseline_error))},
            title="Pixel error over ARM work", x_title="ARM iterations", y_title="pixel error (%)"))
        files["plot_error"] = path
    return {"runs": runs, "summary": summary, "files": files}
