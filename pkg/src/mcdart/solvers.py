"""SIRT and the masked subproblem solved in every DART iteration."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .projector import ProjectionOperator

#: signature shared by pluggable ARMs: (op, p, x0, iterations) -> x
Arm = Callable[[ProjectionOperator, np.ndarray, np.ndarray, int], np.ndarray]


def _inverse_or_zero(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    nz = v > 0
    out[nz] = 1.0 / v[nz]
    return out


def sirt_weights(op: ProjectionOperator) -> tuple[np.ndarray, np.ndarray]:
    """Inverse row sums R and inverse column sums C; empty rows/columns get 0."""
    n, l = op.grid.n, op.geometry.l
    R = _inverse_or_zero(op.apply(np.ones(n)))
    C = _inverse_or_zero(op.adjoint(np.ones(l)))
    return R, C


def sirt_run(op: ProjectionOperator, p, x0, iterations: int) -> np.ndarray:
    """Run ``iterations`` SIRT steps ``x <- x + C W^T R (p - W x)`` from ``x0``.

    Unit relaxation, no clamping.
    """
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    p = op._check_sino(p)
    x = op._check_image(x0).copy()
    if iterations == 0:
        return x
    R, C = sirt_weights(op)
    for _ in range(iterations):
        x += C * op.adjoint(R * (p - op.apply(x)))
    return x


def residual_sinogram(op: ProjectionOperator, p, y_fixed, free) -> np.ndarray:
    """Data minus the projection of the fixed voxels: ``p - W (y_fixed * ~free)``."""
    p = op._check_sino(p)
    y_fixed = op._check_image(y_fixed)
    free = _check_mask(op, free)
    if free.all():
        return p.copy()
    return p - op.apply(np.where(free, 0.0, y_fixed))


def masked_arm(
    op: ProjectionOperator,
    p,
    free,
    x_prev,
    y_fixed,
    iterations: int,
    arm: Arm = sirt_run,
    restricted: ProjectionOperator | None = None,
) -> np.ndarray:
    """Re-solve the free voxels against the residual sinogram.

    Free voxels start from ``x_prev``; fixed voxels are copied from
    ``y_fixed`` untouched. ``restricted`` may carry ``op.restrict(free)`` when
    the caller reuses one mask for several right-hand sides.
    """
    free = _check_mask(op, free)
    x_prev = op._check_image(x_prev)
    y_fixed = op._check_image(y_fixed)
    if not free.any():
        return y_fixed.copy()
    p_bar = residual_sinogram(op, p, y_fixed, free)
    sub = op.restrict(free) if restricted is None else restricted
    x_bar = arm(sub, p_bar, np.where(free, x_prev, 0.0), iterations)
    return np.where(free, x_bar, y_fixed)


def _check_mask(op: ProjectionOperator, free) -> np.ndarray:
    free = np.asarray(free, dtype=bool)
    if free.shape != (op.grid.n,):
        raise ValueError(f"mask must have length {op.grid.n}, got shape {free.shape}")
    return free
