"""Orientation/height descriptor of sliding windows over a height field.

A frame is partitioned into small non-overlapping square cells; each cell
holds an L2-normalized histogram of gradient orientations weighted by
gradient magnitude.  A window descriptor concatenates the histograms of the
cells it covers and appends an L1-normalized histogram of the window's
height values, so shape-similar but height-dissimilar objects separate.

Cells are computed once per frame and shared by every overlapping window,
which is what makes dense sliding-window scanning cheap: the window stride is
a multiple of the cell size, so window descriptors are pure gathers.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .depth import HeightField
from .errors import BoundsError, ConfigError, DimensionError

ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class WindowSpec:
    """Square sliding window measured in cells."""

    window_cells: int
    stride_cells: int

    def __post_init__(self) -> None:
        if self.window_cells < 1 or self.stride_cells < 1:
            raise ConfigError("window_cells and stride_cells must be >= 1")


@dataclass(frozen=True)
class FeatureConfig:
    """Full feature-extraction configuration, embedded in model files.

    n_height_bins = 0 drops the height histogram and yields the plain
    orientation-only descriptor.
    """

    cell_size: int = 6
    n_bins: int = 8
    window_cells: int = 11
    stride_cells: int = 1
    n_height_bins: int = 16
    h_max_mm: float = 2200.0

    def __post_init__(self) -> None:
        if self.cell_size < 2:
            raise ConfigError("cell_size must be >= 2")
        if self.n_bins < 4 or self.n_bins % 4 != 0:
            raise ConfigError("n_bins must be >= 4 and divisible by 4")
        if self.window_cells < 1 or self.stride_cells < 1:
            raise ConfigError("window_cells and stride_cells must be >= 1")
        if self.n_height_bins < 0:
            raise ConfigError("n_height_bins must be >= 0")
        if self.n_height_bins > 0 and self.h_max_mm <= 0:
            raise ConfigError("h_max_mm must be positive")

    @property
    def window_px(self) -> int:
        return self.window_cells * self.cell_size

    @property
    def stride_px(self) -> int:
        return self.stride_cells * self.cell_size

    @property
    def hog_len(self) -> int:
        return self.window_cells * self.window_cells * self.n_bins

    @property
    def feature_len(self) -> int:
        return self.hog_len + self.n_height_bins

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.window_cells, self.stride_cells)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            cell_size=int(d["cell_size"]),
            n_bins=int(d["n_bins"]),
            window_cells=int(d["window_cells"]),
            stride_cells=int(d["stride_cells"]),
            n_height_bins=int(d["n_height_bins"]),
            h_max_mm=float(d["h_max_mm"]),
        )


@dataclass(frozen=True)
class GradientField:
    """Per-pixel gradient of a height field in cartesian and polar form."""

    gx: np.ndarray
    gy: np.ndarray
    gr: np.ndarray
    gphi: np.ndarray  # radians in [0, 2*pi)


@dataclass(frozen=True)
class CellGrid:
    """Per-cell normalized orientation histograms for a whole frame."""

    cells_x: int
    cells_y: int
    cell_size: int
    n_bins: int
    histograms: np.ndarray  # (cells_y, cells_x, n_bins)


def to_polar(gx: np.ndarray | float, gy: np.ndarray | float):
    """Polar form of a gradient: magnitude and orientation in [0, 2*pi).

    (0, 0) maps to (0, 0) by convention; the zero weight makes the angle
    choice inert.
    """
    gr = np.hypot(gx, gy)
    gphi = np.arctan2(gy, gx)
    gphi = np.where(gphi < 0, gphi + 2.0 * np.pi, gphi)
    # atan2 can round to exactly -0.0 + 2*pi == 2*pi; fold back into range
    gphi = np.where(gphi >= 2.0 * np.pi, 0.0, gphi)
    return gr, gphi


def compute_gradient(field: HeightField) -> GradientField:
    """Finite-difference gradient of the height field.

    Interior pixels use central differences (h[i+1] - h[i-1]) / 2; border
    pixels fall back to one-sided first differences.  A pixel whose stencil
    touches an invalid pixel (itself included) gets zero magnitude so sensor
    dropouts never contribute orientation energy.
    """
    if field.height < 3 or field.width < 3:
        raise DimensionError("gradient needs a field of at least 3x3 pixels")
    h = field.h
    valid = field.valid

    gx = np.empty_like(h)
    gx[:, 1:-1] = (h[:, 2:] - h[:, :-2]) * 0.5
    gx[:, 0] = h[:, 1] - h[:, 0]
    gx[:, -1] = h[:, -1] - h[:, -2]

    gy = np.empty_like(h)
    gy[1:-1, :] = (h[2:, :] - h[:-2, :]) * 0.5
    gy[0, :] = h[1, :] - h[0, :]
    gy[-1, :] = h[-1, :] - h[-2, :]

    okx = np.empty_like(valid)
    okx[:, 1:-1] = valid[:, 2:] & valid[:, :-2]
    okx[:, 0] = valid[:, 0] & valid[:, 1]
    okx[:, -1] = valid[:, -2] & valid[:, -1]

    oky = np.empty_like(valid)
    oky[1:-1, :] = valid[2:, :] & valid[:-2, :]
    oky[0, :] = valid[0, :] & valid[1, :]
    oky[-1, :] = valid[-2, :] & valid[-1, :]

    good = valid & okx & oky
    gx[~good] = 0.0
    gy[~good] = 0.0
    gr, gphi = to_polar(gx, gy)
    return GradientField(gx=gx, gy=gy, gr=gr, gphi=gphi)


def orientation_bins(gphi: np.ndarray, n_bins: int) -> np.ndarray:
    """Hard-assign each orientation to one of n_bins bins over [0, 2*pi)."""
    bin_width = 2.0 * np.pi / n_bins
    return (np.floor(gphi / bin_width).astype(np.int64)) % n_bins


def cell_histograms(grad: GradientField, cell_size: int, n_bins: int) -> CellGrid:
    """Bin gradients into per-cell orientation histograms, L2-normalized.

    Trailing pixels not covered by a full cell are dropped so every cell has
    identical size.  Cells whose histogram norm falls below ZERO_NORM_EPS are
    left as exact zero vectors (flat floor regions are common).
    """
    if n_bins < 4 or n_bins % 4 != 0:
        raise ConfigError("n_bins must be >= 4 and divisible by 4")
    if cell_size < 2:
        raise ConfigError("cell_size must be >= 2")
    H, W = grad.gr.shape
    cy, cx = H // cell_size, W // cell_size
    if cy < 1 or cx < 1:
        raise DimensionError("field smaller than one cell")
    gr = grad.gr[: cy * cell_size, : cx * cell_size]
    gphi = grad.gphi[: cy * cell_size, : cx * cell_size]

    b = orientation_bins(gphi, n_bins)
    row_cell = np.repeat(np.arange(cy, dtype=np.int64), cell_size)
    col_cell = np.repeat(np.arange(cx, dtype=np.int64), cell_size)
    flat = (row_cell[:, None] * cx + col_cell[None, :]) * n_bins + b
    hist = np.bincount(flat.ravel(), weights=gr.ravel(), minlength=cy * cx * n_bins)
    hist = hist.reshape(cy, cx, n_bins)

    norm = np.sqrt(np.einsum("ijk,ijk->ij", hist, hist))
    keep = norm > ZERO_NORM_EPS
    scale = np.where(keep, 1.0 / np.where(keep, norm, 1.0), 0.0)
    hist *= scale[..., None]
    return CellGrid(
        cells_x=cx, cells_y=cy, cell_size=cell_size, n_bins=n_bins, histograms=hist
    )


def window_descriptor(
    grid: CellGrid, origin_cell: tuple[int, int], spec: WindowSpec
) -> np.ndarray:
    """Concatenate a window's cell histograms in row-major cell order."""
    cx0, cy0 = origin_cell
    wc = spec.window_cells
    if cx0 < 0 or cy0 < 0 or cx0 + wc > grid.cells_x or cy0 + wc > grid.cells_y:
        raise BoundsError(
            f"window at cell ({cx0},{cy0}) size {wc} exceeds "
            f"{grid.cells_x}x{grid.cells_y} grid"
        )
    return grid.histograms[cy0 : cy0 + wc, cx0 : cx0 + wc].reshape(-1).copy()


def height_histogram(
    field: HeightField,
    window_px: tuple[int, int, int, int],
    n_height_bins: int,
    h_max_mm: float,
) -> np.ndarray:
    """L1-normalized histogram of valid heights in a pixel rectangle.

    Bins are uniform over [0, h_max_mm); values >= h_max_mm land in the top
    bin.  A window with no valid pixel yields the zero vector.
    """
    x0, y0, w, h = window_px
    if x0 < 0 or y0 < 0 or x0 + w > field.width or y0 + h > field.height:
        raise BoundsError(f"window {window_px} exceeds frame bounds")
    hh = field.h[y0 : y0 + h, x0 : x0 + w]
    vv = field.valid[y0 : y0 + h, x0 : x0 + w]
    vals = hh[vv]
    if vals.size == 0:
        return np.zeros(n_height_bins)
    idx = height_bins(vals, n_height_bins, h_max_mm)
    counts = np.bincount(idx, minlength=n_height_bins).astype(np.float64)
    return counts / vals.size


def height_bins(values: np.ndarray, n_height_bins: int, h_max_mm: float) -> np.ndarray:
    """Uniform bin index over [0, h_max_mm), clamping overflow to the top bin."""
    idx = np.floor(values * (n_height_bins / h_max_mm)).astype(np.int64)
    return np.clip(idx, 0, n_height_bins - 1)


def hahog(
    grid: CellGrid,
    field: HeightField,
    origin_cell: tuple[int, int],
    spec: WindowSpec,
    cfg: FeatureConfig,
) -> np.ndarray:
    """Window descriptor: concatenated cell histograms plus height histogram."""
    hog = window_descriptor(grid, origin_cell, spec)
    if cfg.n_height_bins == 0:
        return hog
    cx0, cy0 = origin_cell
    px = (
        cx0 * grid.cell_size,
        cy0 * grid.cell_size,
        spec.window_cells * grid.cell_size,
        spec.window_cells * grid.cell_size,
    )
    hh = height_histogram(field, px, cfg.n_height_bins, cfg.h_max_mm)
    return np.concatenate([hog, hh])


def precompute_frame_cells(field: HeightField, cfg: FeatureConfig) -> CellGrid:
    """Compute the frame's cell histograms once, for reuse by every window."""
    grid_x = field.width // cfg.cell_size
    grid_y = field.height // cfg.cell_size
    if grid_x < cfg.window_cells or grid_y < cfg.window_cells:
        raise DimensionError(
            f"frame {field.width}x{field.height} px holds no "
            f"{cfg.window_cells}-cell window at cell size {cfg.cell_size}"
        )
    return cell_histograms(compute_gradient(field), cfg.cell_size, cfg.n_bins)


def window_origins(field: HeightField, cfg: FeatureConfig) -> tuple[np.ndarray, np.ndarray]:
    """Valid window origin cells (xs, ys) on the stride lattice."""
    grid_x = field.width // cfg.cell_size
    grid_y = field.height // cfg.cell_size
    xs = np.arange(0, grid_x - cfg.window_cells + 1, cfg.stride_cells)
    ys = np.arange(0, grid_y - cfg.window_cells + 1, cfg.stride_cells)
    return xs, ys


def cell_height_counts(
    field: HeightField, cfg: FeatureConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell height-bin counts and valid-pixel counts (unnormalized).

    Window height histograms are exact sums of these integer counts because
    cells tile the window footprint, which keeps the shared path bit-equal to
    direct per-window counting.
    """
    cs = cfg.cell_size
    cy, cx = field.height // cs, field.width // cs
    hh = field.h[: cy * cs, : cx * cs]
    vv = field.valid[: cy * cs, : cx * cs]
    idx = height_bins(hh, cfg.n_height_bins, cfg.h_max_mm)
    row_cell = np.repeat(np.arange(cy, dtype=np.int64), cs)
    col_cell = np.repeat(np.arange(cx, dtype=np.int64), cs)
    cell_id = row_cell[:, None] * cx + col_cell[None, :]
    flat = np.where(vv, cell_id * cfg.n_height_bins + idx, -1).ravel()
    flat = flat[flat >= 0]
    counts = np.bincount(flat, minlength=cy * cx * cfg.n_height_bins)
    counts = counts.reshape(cy, cx, cfg.n_height_bins)
    nvalid = np.bincount(cell_id.ravel()[vv.ravel()], minlength=cy * cx)
    return counts, nvalid.reshape(cy, cx)


def _sliding_block_sum(arr: np.ndarray, wc: int, stride: int) -> np.ndarray:
    """Sum of wc x wc blocks at every stride offset; arr is (cy, cx[, k])."""
    if arr.ndim == 2:
        arr = arr[..., None]
        squeeze = True
    else:
        squeeze = False
    c = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1, arr.shape[2]), dtype=arr.dtype)
    np.cumsum(arr, axis=0, out=c[1:, 1:])
    np.cumsum(c[1:, 1:], axis=1, out=c[1:, 1:])
    ys = np.arange(0, arr.shape[0] - wc + 1, stride)
    xs = np.arange(0, arr.shape[1] - wc + 1, stride)
    out = (
        c[np.ix_(ys + wc, xs + wc)]
        - c[np.ix_(ys, xs + wc)]
        - c[np.ix_(ys + wc, xs)]
        + c[np.ix_(ys, xs)]
    )
    return out[..., 0] if squeeze else out


def frame_descriptors(
    field: HeightField, cfg: FeatureConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Descriptors of every window on the stride lattice, sharing cell work.

    Returns (features, xs, ys): features has shape (len(ys), len(xs),
    feature_len) indexed by origin cell; xs/ys are the origin-cell lattices.
    """
    grid = precompute_frame_cells(field, cfg)
    xs, ys = window_origins(field, cfg)
    wc = cfg.window_cells
    hist = grid.histograms

    # gather all window HOGs via a strided view over the cell grid;
    # axes come out as (oy, ox, bin, wy, wx) and flatten to row-major
    # cells then bins after the moveaxis
    view = np.lib.stride_tricks.sliding_window_view(hist, (wc, wc), axis=(0, 1))
    view = view[:: cfg.stride_cells, :: cfg.stride_cells]
    hog = np.ascontiguousarray(np.moveaxis(view, 2, 4)).reshape(
        len(ys), len(xs), cfg.hog_len
    )
    if cfg.n_height_bins == 0:
        return hog, xs, ys

    counts, nvalid = cell_height_counts(field, cfg)
    win_counts = _sliding_block_sum(counts, wc, cfg.stride_cells).astype(np.float64)
    win_valid = _sliding_block_sum(nvalid, wc, cfg.stride_cells).astype(np.float64)
    denom = np.where(win_valid > 0, win_valid, 1.0)
    hh = win_counts / denom[..., None]
    hh[win_valid == 0] = 0.0
    return np.concatenate([hog, hh], axis=2), xs, ys


def patch_features(patch: HeightField, cfg: FeatureConfig) -> np.ndarray:
    """Descriptor of a standalone window-sized patch (training samples)."""
    if (
        patch.width != cfg.window_px
        or patch.height != cfg.window_px
    ):
        raise DimensionError(
            f"patch must be exactly {cfg.window_px}x{cfg.window_px} px"
        )
    grid = precompute_frame_cells(patch, cfg)
    return hahog(grid, patch, (0, 0), cfg.window, cfg)
