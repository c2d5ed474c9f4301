"""Pixel error and per-class pixel counts over a region."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PixelErrorReport:
    mismatched: int
    region_size: int

    @property
    def percentage(self) -> float:
        if self.region_size == 0:
            return 0.0
        return 100.0 * self.mismatched / self.region_size


def _region_index(region, n: int) -> np.ndarray:
    """Accepts None (everything), a boolean mask of length n or an index array."""
    if region is None:
        return np.arange(n)
    region = np.asarray(region)
    if region.dtype == bool:
        if region.shape != (n,):
            raise ValueError(f"region mask must have length {n}, got shape {region.shape}")
        return np.flatnonzero(region)
    if region.size and (region.min() < 0 or region.max() >= n):
        raise ValueError("region indices out of range")
    return region.astype(np.intp)


def pixel_error(result, reference, region=None) -> PixelErrorReport:
    result = np.asarray(result).ravel()
    reference = np.asarray(reference).ravel()
    if result.shape != reference.shape:
        raise ValueError(f"label images differ in size: {result.shape} vs {reference.shape}")
    idx = _region_index(region, result.size)
    return PixelErrorReport(int(np.count_nonzero(result[idx] != reference[idx])), int(idx.size))


def class_counts(labels, region=None, n_labels: int | None = None) -> np.ndarray:
    """Pixel count per label (index = label) over ``region``."""
    labels = np.asarray(labels).ravel()
    idx = _region_index(region, labels.size)
    if n_labels is None:
        n_labels = int(labels.max()) + 1 if labels.size else 0
    return np.bincount(labels[idx], minlength=n_labels)
