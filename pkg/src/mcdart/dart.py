"""DART and multi-channel DART.

Both loops share one implementation. Each iteration segments the current
reconstruction, detects label boundaries, draws the free set and re-solves
the free voxels per channel with the fixed voxels held at their segmented
attenuations.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metrics import class_counts, pixel_error
from .projector import GridSpec, ProjectionOperator
from .segmentation import MaterialSpectra, segment_multi, segment_single
from .solvers import Arm, masked_arm, sirt_run

# purpose tags for the seeded streams
_MASK_STREAM = 1


@dataclass(frozen=True)
class DartParams:
    start_iterations: int = 10
    dart_iterations: int = 10
    arm_iterations: int = 10
    fix_probability: float = 0.99
    connectivity: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fix_probability <= 1.0:
            raise ValueError(f"fix_probability must be in [0, 1], got {self.fix_probability}")
        for name in ("start_iterations", "dart_iterations", "arm_iterations"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass
class DartRecord:
    iteration: int
    arm_work: int
    labels: np.ndarray
    class_counts: np.ndarray
    residual_norms: np.ndarray
    pixel_error: float | None = None


@dataclass
class DartTrace:
    records: list[DartRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)

    def class_count_matrix(self) -> np.ndarray:
        return np.array([r.class_counts for r in self.records])

    def pixel_errors(self) -> np.ndarray:
        return np.array([np.nan if r.pixel_error is None else r.pixel_error for r in self.records])


def stream(seed: int, iteration: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (iteration, purpose) pair of a run."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), iteration, purpose]))


def detect_boundary(labels, grid: GridSpec, connectivity: int = 8) -> np.ndarray:
    """Boolean map of voxels with at least one differently labelled neighbour.

    Borders are not periodic.
    """
    y = np.asarray(labels).reshape(grid.shape)
    b = np.zeros(y.shape, dtype=bool)
    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    elif connectivity != 4:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    H, W = y.shape
    for dr, dc in offsets:
        # compare y[r, c] with y[r + dr, c + dc] over the overlapping window
        r0, r1 = 0, H - dr
        c0, c1 = max(0, -dc), W - max(0, dc)
        a = y[r0:r1, c0:c1]
        n = y[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        diff = a != n
        b[r0:r1, c0:c1] |= diff
        b[r0 + dr:r1 + dr, c0 + dc:c1 + dc] |= diff
    return b.ravel()


def sample_free_set(boundary, fix_probability: float, rng: np.random.Generator) -> np.ndarray:
    """Boundary voxels plus each other voxel independently with prob. ``1 - beta``."""
    if not 0.0 <= fix_probability <= 1.0:
        raise ValueError(f"fix_probability must be in [0, 1], got {fix_probability}")
    boundary = np.asarray(boundary, dtype=bool)
    return boundary | (rng.random(boundary.size) < 1.0 - fix_probability)


def _record(k, work, labels, X, op, P, n_labels, reference, region):
    residuals = np.array([np.linalg.norm(P[c] - op.apply(X[c])) for c in range(len(X))])
    err = None
    if reference is not None:
        err = pixel_error(labels, reference, region).percentage
    counts = class_counts(labels, None, n_labels)
    return DartRecord(k, work, labels, counts, residuals, err)


def _run(op, P, spectra, params, segment: Callable, reference, region, arm: Arm, x_init=None):
    n = op.grid.n
    C = len(P)
    n_labels = spectra.m + 1
    if x_init is None:
        x_init = np.zeros((C, n))
    x_init = np.asarray(x_init, dtype=np.float64).reshape(C, n)
    X = [arm(op, P[c], x_init[c], params.start_iterations) for c in range(C)]
    labels = segment(np.array(X))
    work = params.start_iterations
    trace = DartTrace([_record(0, work, labels, X, op, P, n_labels, reference, region)])

    for k in range(1, params.dart_iterations + 1):
        boundary = detect_boundary(labels, op.grid, params.connectivity)
        free = sample_free_set(boundary, params.fix_probability, stream(params.rng_seed, k, _MASK_STREAM))
        sub = op.restrict(free) if free.any() and not free.all() else None
        X = [
            masked_arm(op, P[c], free, X[c], spectra.attenuation(labels, c), params.arm_iterations,
                       arm=arm, restricted=sub)
            for c in range(C)
        ]
        labels = segment(np.array(X))
        work += params.arm_iterations
        trace.records.append(_record(k, work, labels, X, op, P, n_labels, reference, region))
    return np.array(X), labels, trace


def _check_sinograms(op, P, C):
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
    if P.shape[0] != C:
        raise ValueError(f"got {P.shape[0]} sinograms for {C} channels")
    if P.shape[1] != op.geometry.l:
        raise ValueError(f"sinograms must have length {op.geometry.l}, got {P.shape[1]}")
    return P


def dart_run(op: ProjectionOperator, p, spectra: MaterialSpectra, params: DartParams,
             reference=None, region=None, arm: Arm = sirt_run, x_init=None):
    """Single-channel DART with threshold segmentation.

    Returns ``(x, labels, trace)``; the trace holds ``K + 1`` records (after
    initialisation and after each iteration). ``reference``/``region`` add
    pixel error to every record. The initial ARM starts from zero unless
    ``x_init`` is given.
    """
    if spectra.channels != 1:
        raise ValueError(f"dart_run needs single-channel spectra, got C = {spectra.channels}")
    P = _check_sinograms(op, p, 1)
    X, labels, trace = _run(op, P, spectra, params, lambda X: segment_single(X[0], spectra),
                            reference, region, arm, x_init)
    return X[0], labels, trace


def mcdart_run(op: ProjectionOperator, P, spectra: MaterialSpectra, params: DartParams,
               reference=None, region=None, arm: Arm = sirt_run, x_init=None):
    """Multi-channel DART. ``P`` has shape ``(C, l)``; returns ``(X, labels, trace)``
    with ``X`` of shape ``(C, n)``."""
    P = _check_sinograms(op, P, spectra.channels)
    return _run(op, P, spectra, params, lambda X: segment_multi(X, spectra), reference, region, arm, x_init)


def arm_baseline_run(op: ProjectionOperator, P, spectra: MaterialSpectra, total_arm_iterations: int,
                     checkpoint_every: int, start_iterations: int = 0, reference=None, region=None,
                     arm: Arm = sirt_run) -> DartTrace:
    """Plain per-channel ARM with observation-only segmentations.

    After ``start_iterations`` the ARM continues for ``total_arm_iterations``
    and the stack is segmented every ``checkpoint_every`` iterations. The
    segmentations never feed back into the reconstruction. Without any
    checkpoint the trace holds the single post-initialisation record.
    """
    if total_arm_iterations < 0 or checkpoint_every < 1 or total_arm_iterations % checkpoint_every:
        raise ValueError("checkpoint_every must be >= 1 and divide total_arm_iterations")
    P = _check_sinograms(op, P, spectra.channels)
    n = op.grid.n
    n_labels = spectra.m + 1
    X = [arm(op, P[c], np.zeros(n), start_iterations) for c in range(len(P))]
    work = start_iterations
    if total_arm_iterations == 0:
        labels = segment_multi(np.array(X), spectra)
        return DartTrace([_record(0, work, labels, X, op, P, n_labels, reference, region)])
    trace = DartTrace()
    for k in range(1, total_arm_iterations // checkpoint_every + 1):
        X = [arm(op, P[c], X[c], checkpoint_every) for c in range(len(P))]
        work += checkpoint_every
        labels = segment_multi(np.array(X), spectra)
        trace.records.append(_record(k, work, labels, X, op, P, n_labels, reference, region))
    return trace
