"""2D parallel-beam geometry and the projection operator W.

Conventions
-----------
The pixel grid is centred on the origin. Image vectors are row-major with
row 0 at the top (largest y), so pixel ``(r, c)`` has index ``r * width + c``
and centre ``((c - (width - 1) / 2) * ps, ((height - 1) / 2 - r) * ps)``.

At angle ``theta`` rays travel along ``d = (-sin theta, cos theta)`` and the
detector axis is ``u = (cos theta, sin theta)``; at 0 rad rays run parallel
to the columns (+y) and angles increase counter-clockwise. Sinogram entries
are ordered angle-major: ``i = angle_index * detector_bins + bin``.

Pixels are half-open squares ``[-ps/2, ps/2)`` around their centre in both
axes, so a ray running exactly along a pixel edge belongs to one pixel only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.pixel_size > 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates (x, y) of every pixel centre, flattened row-major."""
        ps = self.pixel_size
        cx = (np.arange(self.width) - (self.width - 1) / 2) * ps
        cy = ((self.height - 1) / 2 - np.arange(self.height)) * ps
        X, Y = np.meshgrid(cx, cy)
        return X.ravel(), Y.ravel()


@dataclass(frozen=True)
class ParallelGeometry:
    angles: tuple[float, ...]
    detector_bins: int
    detector_pixel_size: float = 1.0
    detector_offset: float = 0.0

    def __post_init__(self):
        angles = tuple(float(a) for a in np.atleast_1d(np.asarray(self.angles, dtype=float)))
        object.__setattr__(self, "angles", angles)
        if len(angles) == 0:
            raise ValueError("geometry needs at least one angle")
        if not np.all(np.isfinite(angles)):
            raise ValueError("angles must be finite")
        if self.detector_bins < 1:
            raise ValueError(f"detector_bins must be >= 1, got {self.detector_bins}")
        if not self.detector_pixel_size > 0:
            raise ValueError("detector_pixel_size must be positive")

    @classmethod
    def equidistant(cls, n_angles: int, detector_bins: int, **kwargs) -> "ParallelGeometry":
        """``n_angles`` angles evenly spread over [0, pi)."""
        if n_angles < 1:
            raise ValueError("geometry needs at least one angle")
        angles = np.linspace(0.0, np.pi, n_angles, endpoint=False)
        return cls(tuple(angles), detector_bins, **kwargs)

    @property
    def n_angles(self) -> int:
        return len(self.angles)

    @property
    def l(self) -> int:
        return self.n_angles * self.detector_bins

    def bin_centers(self) -> np.ndarray:
        b = np.arange(self.detector_bins)
        return (b - (self.detector_bins - 1) / 2) * self.detector_pixel_size + self.detector_offset


class Representation(str, enum.Enum):
    SPARSE = "sparse"
    MATRIX_FREE = "matrix-free"


def _ray_directions(theta: float) -> tuple[float, float, float, float]:
    c, s = np.cos(theta), np.sin(theta)
    # u = detector axis, d = ray direction
    return c, s, -s, c


def _siddon_angle(grid: GridSpec, theta: float, t: np.ndarray):
    """Exact ray/pixel intersection lengths for all rays of one angle.

    Returns flat arrays (ray, pixel, length) with ``ray`` indexing into ``t``.
    """
    ps = grid.pixel_size
    W, H = grid.width, grid.height
    x0, y0 = -W * ps / 2, -H * ps / 2
    ux, uy, dx, dy = _ray_directions(theta)
    px, py = t * ux, t * uy  # point on each ray closest to the origin

    xe = x0 + np.arange(W + 1) * ps
    ye = y0 + np.arange(H + 1) * ps

    with np.errstate(divide="ignore", invalid="ignore"):
        if dx != 0:
            ax = (xe[None, :] - px[:, None]) / dx
            lo_x, hi_x = np.minimum(ax[:, 0], ax[:, -1]), np.maximum(ax[:, 0], ax[:, -1])
        else:
            inside = (px >= x0) & (px < x0 + W * ps)
            lo_x = np.where(inside, -np.inf, np.inf)
            hi_x = np.where(inside, np.inf, -np.inf)
            ax = None
        if dy != 0:
            ay = (ye[None, :] - py[:, None]) / dy
            lo_y, hi_y = np.minimum(ay[:, 0], ay[:, -1]), np.maximum(ay[:, 0], ay[:, -1])
        else:
            inside = (py >= y0) & (py < y0 + H * ps)
            lo_y = np.where(inside, -np.inf, np.inf)
            hi_y = np.where(inside, np.inf, -np.inf)
            ay = None

    s_lo = np.maximum(lo_x, lo_y)
    s_hi = np.minimum(hi_x, hi_y)
    hit = s_hi > s_lo
    if not np.any(hit):
        return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)

    s_lo, s_hi = s_lo[hit], s_hi[hit]
    rays = np.flatnonzero(hit)
    parts = [s_lo[:, None], s_hi[:, None]]
    for a in (ax, ay):
        if a is not None:
            parts.append(np.clip(a[hit], s_lo[:, None], s_hi[:, None]))
    alphas = np.sort(np.concatenate(parts, axis=1), axis=1)

    seg = np.diff(alphas, axis=1)
    mid = 0.5 * (alphas[:, 1:] + alphas[:, :-1])
    keep = seg > 0
    ray_idx = np.broadcast_to(rays[:, None], seg.shape)[keep]
    mid = mid[keep]
    length = seg[keep]
    mx = px[ray_idx] + mid * dx
    my = py[ray_idx] + mid * dy
    col = np.clip(np.floor((mx - x0) / ps).astype(np.intp), 0, W - 1)
    row = H - 1 - np.clip(np.floor((my - y0) / ps).astype(np.intp), 0, H - 1)
    return ray_idx, row * W + col, length


def siddon_matrix(grid: GridSpec, geometry: ParallelGeometry) -> sp.csr_matrix:
    """Assemble W (l x n) from Siddon ray traversal, one ray per bin centre."""
    t = geometry.bin_centers()
    B = geometry.detector_bins
    rows, cols, vals = [], [], []
    for a, theta in enumerate(geometry.angles):
        r, c, v = _siddon_angle(grid, theta, t)
        rows.append(r + a * B)
        cols.append(c)
        vals.append(v)
    W = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(geometry.l, grid.n),
    ).tocsr()
    W.sum_duplicates()
    return W


def _slab_chords(delta: np.ndarray, ux, uy, dx, dy, a: float) -> np.ndarray:
    """Chord length through a centred square of side ``a`` for rays offset by
    ``delta`` along the detector axis (pixel-driven, per-pixel slab clipping)."""
    half = a / 2

    def slab(v, d):
        if d == 0:
            inside = (v >= -half) & (v < half)
            return np.where(inside, -np.inf, np.inf), np.where(inside, np.inf, -np.inf)
        e0 = (-half - v) / d
        e1 = (half - v) / d
        return np.minimum(e0, e1), np.maximum(e0, e1)

    lo_x, hi_x = slab(delta * ux, dx)
    lo_y, hi_y = slab(delta * uy, dy)
    return np.maximum(np.minimum(hi_x, hi_y) - np.maximum(lo_x, lo_y), 0.0)


class ProjectionOperator:
    """Linear map from images (length n) to sinograms (length l)."""

    representation: Representation

    def __init__(self, grid: GridSpec, geometry: ParallelGeometry):
        self.grid = grid
        self.geometry = geometry

    @property
    def shape(self) -> tuple[int, int]:
        return (self.geometry.l, self.grid.n)

    def _check_image(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.grid.n,):
            raise ValueError(f"image vector must have length {self.grid.n}, got shape {x.shape}")
        return x

    def _check_sino(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.geometry.l,):
            raise ValueError(f"sinogram vector must have length {self.geometry.l}, got shape {s.shape}")
        return s

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, s) -> np.ndarray:
        raise NotImplementedError

    apply_adjoint = adjoint

    def restrict(self, free) -> "ProjectionOperator":
        """Operator over the free columns only; fixed columns contribute nothing.

        Input and output lengths are unchanged: fixed entries of ``x`` are
        ignored by :meth:`apply` and come back as zero from :meth:`adjoint`.
        """
        free = np.asarray(free, dtype=bool)
        if free.shape != (self.grid.n,):
            raise ValueError(f"mask must have length {self.grid.n}, got shape {free.shape}")
        if free.all():
            return self
        return RestrictedOperator(self, free)


class SparseProjector(ProjectionOperator):
    representation = Representation.SPARSE

    def __init__(self, grid: GridSpec, geometry: ParallelGeometry, matrix: sp.spmatrix | None = None):
        super().__init__(grid, geometry)
        self.matrix = siddon_matrix(grid, geometry) if matrix is None else sp.csr_matrix(matrix)
        self._csc = None

    @property
    def csc(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self.matrix.tocsc()
        return self._csc

    def apply(self, x):
        return self.matrix @ self._check_image(x)

    def adjoint(self, s):
        return self.matrix.T @ self._check_sino(s)

    apply_adjoint = adjoint


class MatrixFreeProjector(ProjectionOperator):
    """Same coefficients as :class:`SparseProjector`, recomputed on every call
    with a pixel-driven kernel instead of ray traversal."""

    representation = Representation.MATRIX_FREE

    def __init__(self, grid: GridSpec, geometry: ParallelGeometry):
        super().__init__(grid, geometry)
        self._cx, self._cy = grid.pixel_centers()

    def _footprint(self, theta: float):
        g, geo = self.grid, self.geometry
        ux, uy, dx, dy = _ray_directions(theta)
        tc = self._cx * ux + self._cy * uy
        dps = geo.detector_pixel_size
        fpos = (tc - geo.detector_offset) / dps + (geo.detector_bins - 1) / 2
        reach = g.pixel_size / 2 * (abs(ux) + abs(uy)) / dps
        first = np.floor(fpos - reach).astype(np.intp)
        width = int(np.ceil(2 * reach)) + 2
        bins = first[:, None] + np.arange(width)[None, :]
        valid = (bins >= 0) & (bins < geo.detector_bins)
        bins = np.clip(bins, 0, geo.detector_bins - 1)
        t = geo.bin_centers()[bins]
        L = _slab_chords(t - tc[:, None], ux, uy, dx, dy, g.pixel_size)
        L[~valid] = 0.0
        return bins, L

    def apply(self, x):
        x = self._check_image(x)
        B = self.geometry.detector_bins
        out = np.zeros(self.geometry.l)
        for a, theta in enumerate(self.geometry.angles):
            bins, L = self._footprint(theta)
            out[a * B:(a + 1) * B] = np.bincount(bins.ravel(), weights=(L * x[:, None]).ravel(), minlength=B)
        return out

    def adjoint(self, s):
        s = self._check_sino(s)
        B = self.geometry.detector_bins
        out = np.zeros(self.grid.n)
        for a, theta in enumerate(self.geometry.angles):
            bins, L = self._footprint(theta)
            out += (L * s[a * B:(a + 1) * B][bins]).sum(axis=1)
        return out

    apply_adjoint = adjoint


class RestrictedOperator(ProjectionOperator):
    """Column restriction of a base operator to a set of free voxels."""

    def __init__(self, parent: ProjectionOperator, free: np.ndarray):
        super().__init__(parent.grid, parent.geometry)
        self.parent = parent
        self.free = free
        self.representation = parent.representation
        self._idx = np.flatnonzero(free)
        self._sub = parent.csc[:, self._idx] if isinstance(parent, SparseProjector) else None

    def apply(self, x):
        x = self._check_image(x)
        if self._sub is not None:
            return self._sub @ x[self._idx]
        return self.parent.apply(np.where(self.free, x, 0.0))

    def adjoint(self, s):
        s = self._check_sino(s)
        if self._sub is not None:
            out = np.zeros(self.grid.n)
            out[self._idx] = self._sub.T @ s
            return out
        return np.where(self.free, self.parent.adjoint(s), 0.0)

    apply_adjoint = adjoint

    def restrict(self, free):
        free = np.asarray(free, dtype=bool)
        if free.shape != (self.grid.n,):
            raise ValueError(f"mask must have length {self.grid.n}, got shape {free.shape}")
        return self.parent.restrict(self.free & free)


def build_operator(
    grid: GridSpec,
    geometry: ParallelGeometry,
    representation: Representation | str = Representation.SPARSE,
) -> ProjectionOperator:
    representation = Representation(representation)
    if representation is Representation.SPARSE:
        return SparseProjector(grid, geometry)
    return MatrixFreeProjector(grid, geometry)


def apply(op: ProjectionOperator, x) -> np.ndarray:
    return op.apply(x)


def apply_adjoint(op: ProjectionOperator, s) -> np.ndarray:
    return op.adjoint(s)


def restrict(op: ProjectionOperator, free) -> ProjectionOperator:
    return op.restrict(free)
