"""Multi-scale texture extraction.

Reduces each soft co-occurrence matrix to a single contrast value,
t = sum_ij (i - j)^2 * G(i, j) over 1-based bin indices, and lays those
values out on a (distances x angles) grid. Rows follow the distance list,
columns the angle list, and accumulation is row-major so results are
bitwise reproducible regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .glcm import ALLOWED_ANGLES, BinningConfig, Offset, SoftGlcm, soft_glcm_backward, soft_glcm_forward
from .image import GrayImage


@dataclass(frozen=True)
class OffsetGrid:
    """Ordered distance and angle sets defining the extraction grid."""

    distances: tuple[int, ...] = (1, 3, 5, 7)
    angles: tuple[int, ...] = (0, 45, 90, 135)

    def __post_init__(self):
        ds = tuple(int(d) for d in self.distances)
        qs = tuple(int(q) for q in self.angles)
        if not ds or not qs:
            raise ValueError("offset grid needs at least one distance and one angle")
        if any(d < 1 for d in ds) or any(b <= a for a, b in zip(ds, ds[1:])):
            raise ValueError(f"distances must be strictly increasing and >= 1, got {ds}")
        if len(set(qs)) != len(qs) or any(q not in ALLOWED_ANGLES for q in qs):
            raise ValueError(f"angles must be distinct values from {ALLOWED_ANGLES}, got {qs}")
        object.__setattr__(self, "distances", ds)
        object.__setattr__(self, "angles", qs)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.distances), len(self.angles)

    def offsets(self) -> list[Offset]:
        return [Offset(d, q) for d in self.distances for q in self.angles]


@dataclass(frozen=True)
class TextureMatrix:
    """Contrast values on the offset grid, shape (len(distances), len(angles))."""

    values: np.ndarray
    grid: OffsetGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"texture values {v.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("texture values must be finite")
        if v.min() < -1e-9:
            raise ValueError("contrast values must be non-negative")
        object.__setattr__(self, "values", v)


def index_contrast_weights(n: int) -> np.ndarray:
    """(i - j)^2 over bin-index pairs; identical for 0- and 1-based indexing."""
    idx = np.arange(n, dtype=np.float64)
    return (idx[:, None] - idx[None, :]) ** 2


def contrast_descriptor(glcm: SoftGlcm) -> float:
    """Index-squared contrast of a normalized co-occurrence matrix."""
    return float((index_contrast_weights(glcm.n_bins) * glcm.matrix).sum())


def texture_matrix(img: GrayImage, grid: OffsetGrid, bins: BinningConfig,
                   workers: int = 1) -> TextureMatrix:
    """Contrast of the soft co-occurrence matrix at every grid offset."""
    offsets = grid.offsets()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(lambda o: contrast_descriptor(soft_glcm_forward(img, o, bins)),
                                  offsets))
    else:
        cells = [contrast_descriptor(soft_glcm_forward(img, o, bins)) for o in offsets]
    values = np.array(cells, dtype=np.float64).reshape(grid.shape)
    return TextureMatrix(values, grid)


def texture_matrix_backward(img: GrayImage, grid: OffsetGrid, bins: BinningConfig,
                            upstream: np.ndarray, workers: int = 1) -> np.ndarray:
    """Image gradient of L = sum(upstream * texture_matrix).

    The contrast weights fold into each offset's upstream co-occurrence
    gradient, then the per-offset image gradients add up.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != grid.shape:
        raise ValueError(f"upstream must match grid shape {grid.shape}, got {upstream.shape}")
    weights = index_contrast_weights(bins.n_bins)
    offsets = grid.offsets()
    scales = upstream.reshape(-1)

    def one(k: int) -> np.ndarray:
        return soft_glcm_backward(img, offsets[k], bins, scales[k] * weights)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(offsets))))
    else:
        parts = [one(k) for k in range(len(offsets))]
    grad = np.zeros_like(img.data)
    for part in parts:
        grad += part
    return grad
