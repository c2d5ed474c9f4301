"""Material spectra and the two segmentation rules.

Labels run ``0..m`` with 0 the background (zero attenuation everywhere).
Images for several channels are stacked as a ``(C, n)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class MaterialSpectra:
    """Attenuation table ``mu[label, channel]`` of shape ``(m + 1, C)``."""

    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64, ndmin=2)
        if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] < 1:
            raise ValueError(f"spectra table must be (m + 1, C) with m, C >= 1, got {table.shape}")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ValueError("attenuations must be finite and non-negative")
        if np.any(table[0] != 0):
            raise ValueError("background row (label 0) must be zero")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_materials(cls, mu) -> "MaterialSpectra":
        """Build from the material rows only (labels 1..m); prepends background."""
        mu = np.array(mu, dtype=np.float64, ndmin=2)
        return cls(np.vstack([np.zeros((1, mu.shape[1])), mu]))

    @property
    def m(self) -> int:
        return self.table.shape[0] - 1

    @property
    def channels(self) -> int:
        return self.table.shape[1]

    def channel(self, c: int) -> "MaterialSpectra":
        return MaterialSpectra(self.table[:, [c]])

    def attenuation(self, labels, c: int) -> np.ndarray:
        """Per-voxel attenuation image ``mu(y, E_c)``."""
        return self.table[np.asarray(labels), c]

    def __eq__(self, other):
        return isinstance(other, MaterialSpectra) and np.array_equal(self.table, other.table)


def segment_single(x, spectra: MaterialSpectra) -> np.ndarray:
    """Threshold a single-channel image at the midpoints between attenuations.

    A value exactly on a midpoint goes to the higher attenuation. Labels that
    share an attenuation value resolve to the lowest label.
    """
    if spectra.channels != 1:
        raise ValueError(f"single-channel segmentation needs C = 1, got {spectra.channels}")
    x = np.asarray(x, dtype=np.float64)
    rho = spectra.table[:, 0]
    order = np.argsort(rho, kind="stable")
    values, first = np.unique(rho[order], return_index=True)
    labels = order[first]
    if values.size == 1:
        return np.zeros(x.shape, dtype=np.intp)
    thresholds = 0.5 * (values[:-1] + values[1:])
    return labels[np.searchsorted(thresholds, x, side="right")]


def segment_multi(X, spectra: MaterialSpectra) -> np.ndarray:
    """Nearest-centroid labelling in channel space (Euclidean distance).

    ``X`` has shape ``(C, n)``. Ties go to the lowest label.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] != spectra.channels:
        raise ValueError(f"stack has {X.shape[0]} channels, spectra has {spectra.channels}")
    d2 = np.zeros((spectra.m + 1, X.shape[1]))
    for c in range(X.shape[0]):
        d2 += (X[c][None, :] - spectra.table[:, c][:, None]) ** 2
    return np.argmin(d2, axis=0)
