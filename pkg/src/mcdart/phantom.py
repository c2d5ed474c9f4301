"""Random parcellation phantoms, random spectra and noiseless data synthesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .projector import GridSpec, ProjectionOperator
from .segmentation import MaterialSpectra

MAX_ATTEMPTS = 1000
_BALANCE_STEPS = 200


class PhantomGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhantomSpec:
    grid: GridSpec
    materials: int
    disk_radius_fraction: float = 0.48
    balance_tolerance: float = 1.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.materials < 1:
            raise ValueError("materials must be >= 1")
        if not 0 < self.disk_radius_fraction <= 0.5:
            raise ValueError("disk_radius_fraction must be in (0, 0.5]")
        if self.balance_tolerance < 1:
            raise ValueError("balance_tolerance must be >= 1")

    @property
    def radius(self) -> float:
        g = self.grid
        return self.disk_radius_fraction * min(g.width, g.height) * g.pixel_size


@dataclass
class SynthesizedProblem:
    phantom: np.ndarray
    spectra: MaterialSpectra
    sinograms: np.ndarray
    op: ProjectionOperator

    @property
    def grid(self) -> GridSpec:
        return self.op.grid

    @property
    def geometry(self):
        return self.op.geometry


def disk_mask(spec: PhantomSpec) -> np.ndarray:
    """Pixels whose centre lies inside the phantom disk (flattened)."""
    x, y = spec.grid.pixel_centers()
    return x * x + y * y <= spec.radius ** 2


def _balance_ratio(areas: np.ndarray) -> float:
    return np.inf if areas.min() == 0 else areas.max() / areas.min()


def generate_phantom(spec: PhantomSpec, max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Label image: background outside the disk, ``m`` convex regions inside.

    Seeds are drawn uniformly in the disk and every disk pixel takes the label
    of the seed minimising ``|p - seed|^2 - w_seed`` (a power diagram). The
    weights start at zero, i.e. at the plain nearest-seed partition, and are
    adapted until the largest/smallest region area ratio is within
    ``balance_tolerance``. Seeds that do not balance are redrawn, up to
    ``max_attempts`` times.
    """
    inside = disk_mask(spec)
    x, y = spec.grid.pixel_centers()
    px, py = x[inside], y[inside]
    m = spec.materials
    labels = np.zeros(spec.grid.n, dtype=np.intp)
    if inside.sum() < m:
        raise PhantomGenerationError(
            f"disk holds {inside.sum()} pixels, fewer than {m} materials (seed {spec.rng_seed})")
    if m == 1:
        labels[inside] = 1
        return labels

    rng = np.random.default_rng(spec.rng_seed)
    R = spec.radius
    target = inside.sum() / m
    best = np.inf
    for _ in range(max_attempts):
        r = R * np.sqrt(rng.random(m))
        phi = 2 * np.pi * rng.random(m)
        sx, sy = r * np.cos(phi), r * np.sin(phi)
        d2 = (px[None, :] - sx[:, None]) ** 2 + (py[None, :] - sy[:, None]) ** 2
        w = np.zeros(m)
        for _ in range(_BALANCE_STEPS):
            own = np.argmin(d2 - w[:, None], axis=0)
            areas = np.bincount(own, minlength=m)
            ratio = _balance_ratio(areas)
            if ratio <= spec.balance_tolerance:
                labels[inside] = own + 1
                return labels
            # pixel counts -> world area units of the weights
            w += 0.3 * (target - areas) * spec.grid.pixel_size ** 2
        best = min(best, ratio)
    raise PhantomGenerationError(
        f"no phantom within balance tolerance {spec.balance_tolerance} after {max_attempts} attempts "
        f"(seed {spec.rng_seed}, best ratio {best:.3f})")


def generate_spectra(m: int, C: int, rng: np.random.Generator) -> MaterialSpectra:
    """Independent U(0, 1) attenuation per (material, channel); background zero."""
    if m < 1 or C < 1:
        raise ValueError("m and C must be >= 1")
    return MaterialSpectra.from_materials(rng.random((m, C)))


def synthesize(phantom, spectra: MaterialSpectra, op: ProjectionOperator) -> SynthesizedProblem:
    """Noiseless per-channel sinograms ``W mu(phantom, E_c)``."""
    phantom = np.asarray(phantom)
    if phantom.shape != (op.grid.n,):
        raise ValueError(f"phantom must have length {op.grid.n}, got shape {phantom.shape}")
    if phantom.min() < 0 or phantom.max() > spectra.m:
        raise ValueError("phantom labels outside the spectra table")
    P = np.array([op.apply(spectra.attenuation(phantom, c)) for c in range(spectra.channels)])
    return SynthesizedProblem(phantom, spectra, P, op)
