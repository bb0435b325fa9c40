"""Differentiable gray-level co-occurrence matrices.

A classic co-occurrence matrix counts how often intensity bins i and j
appear at the two ends of a fixed pixel displacement. The hard binning
makes it piecewise constant, so here each pixel is assigned to every bin
with a Gaussian membership weight instead. Co-occurrence then becomes a
sum of products of memberships, which is smooth in the pixel values, and
the backward pass below propagates gradients through both the pair
products and the final normalization.

Conventions: u indexes columns and v indexes rows, so an angle of 0
degrees pairs each pixel with one d columns to its right and 90 degrees
with one d rows down. Pairs whose neighbor falls outside the image are
dropped. The matrix is directed (no transpose added).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError, NumericError
from .image import GrayImage, PixelDomain

ALLOWED_ANGLES = (0, 45, 90, 135)

_COS = {0: 1.0, 45: math.sqrt(0.5), 90: 0.0, 135: -math.sqrt(0.5)}
_SIN = {0: 0.0, 45: math.sqrt(0.5), 90: 1.0, 135: math.sqrt(0.5)}


@dataclass(frozen=True)
class BinningConfig:
    """Bin centers and the Gaussian assignment width sigma."""

    bin_centers: np.ndarray
    sigma: float

    def __post_init__(self):
        centers = np.asarray(self.bin_centers, dtype=np.float64)
        if centers.ndim != 1 or centers.size < 2:
            raise ValueError("need at least two bin centers")
        if not np.all(np.diff(centers) > 0):
            raise ValueError("bin centers must be strictly increasing")
        if not np.all(np.isfinite(centers)):
            raise ValueError("bin centers must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "bin_centers", centers)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n_bins(self) -> int:
        return int(self.bin_centers.size)

    @classmethod
    def uniform(cls, n_bins: int = 32, sigma: float | None = None) -> "BinningConfig":
        """n_bins evenly spaced centers over [-1, 1]; sigma defaults to half the spacing."""
        if n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        centers = np.linspace(-1.0, 1.0, n_bins)
        if sigma is None:
            sigma = (centers[1] - centers[0]) / 2.0
        return cls(centers, sigma)


@dataclass(frozen=True)
class Offset:
    """A (distance, angle) pair with its integer lattice displacement."""

    d: int
    theta: int

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError(f"offset distance must be >= 1, got {self.d}")
        if self.theta not in ALLOWED_ANGLES:
            raise ValueError(f"angle must be one of {ALLOWED_ANGLES}, got {self.theta}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "theta", int(self.theta))

    @property
    def displacement(self) -> tuple[int, int]:
        """(du, dv): column and row shift, rounded to the integer lattice."""
        du = int(round(self.d * _COS[self.theta]))
        dv = int(round(self.d * _SIN[self.theta]))
        assert (du, dv) != (0, 0)
        return du, dv


@dataclass(frozen=True)
class SoftGlcm:
    """Normalized n x n co-occurrence matrix for one offset."""

    matrix: np.ndarray
    offset: Offset
    valid_pairs: int
    _NORM_TOL = 1e-6

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"co-occurrence matrix must be square, got {m.shape}")
        if m.min() < 0:
            raise ValueError("co-occurrence entries must be non-negative")
        if abs(m.sum() - 1.0) > self._NORM_TOL:
            raise ValueError(f"co-occurrence matrix must sum to 1, got {m.sum()!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def n_bins(self) -> int:
        return self.matrix.shape[0]


def soft_assignment(img: GrayImage, bins: BinningConfig) -> np.ndarray:
    """Gaussian bin memberships, shape (h, w, n_bins).

    a_k(x) = exp(-(x - b_k)^2 / (2 sigma^2)), so a pixel sitting exactly on
    a bin center gets weight 1 for that bin.
    """
    if img.domain != PixelDomain.NORMALIZED:
        raise DomainError(f"soft assignment expects a normalized image, got '{img.domain.value}'")
    diff = img.data[:, :, None] - bins.bin_centers[None, None, :]
    return np.exp(-(diff * diff) / (2.0 * bins.sigma * bins.sigma))


def pair_slices(shape: tuple[int, int], displacement: tuple[int, int]):
    """Slices selecting the source block and its displaced neighbor block.

    Returns (src_rows, src_cols, nbr_rows, nbr_cols) or None when no pixel
    pair is in bounds.
    """
    h, w = shape
    du, dv = displacement
    r_lo, r_hi = max(0, -dv), h - max(0, dv)
    c_lo, c_hi = max(0, -du), w - max(0, du)
    if r_lo >= r_hi or c_lo >= c_hi:
        return None
    return (slice(r_lo, r_hi), slice(c_lo, c_hi),
            slice(r_lo + dv, r_hi + dv), slice(c_lo + du, c_hi + du))


def soft_glcm_forward(img: GrayImage, offset: Offset, bins: BinningConfig) -> SoftGlcm:
    """Accumulate soft co-occurrence over all in-bounds pairs and normalize."""
    a = soft_assignment(img, bins)
    sl = pair_slices(img.data.shape, offset.displacement)
    if sl is None:
        raise GeometryError(
            f"offset d={offset.d}, theta={offset.theta}: no in-bounds pixel pairs "
            f"for a {img.height}x{img.width} image")
    sr, sc, nr, nc = sl
    n = bins.n_bins
    src = a[sr, sc].reshape(-1, n)
    nbr = a[nr, nc].reshape(-1, n)
    g = src.T @ nbr
    total = g.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericError(
            f"offset d={offset.d}, theta={offset.theta}: co-occurrence mass is {total!r}; "
            "sigma is too small for the pixel values")
    return SoftGlcm(g / total, offset, src.shape[0])


def soft_glcm_backward(img: GrayImage, offset: Offset, bins: BinningConfig,
                       upstream: np.ndarray) -> np.ndarray:
    """Gradient of L = sum(upstream * glcm) with respect to the image.

    Accounts for the normalization quotient and for each pixel's two roles
    (source of a pair and neighbor of another). Returns an (h, w) array.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    n = bins.n_bins
    if upstream.shape != (n, n):
        raise ValueError(f"upstream gradient must be {n}x{n}, got {upstream.shape}")

    a = soft_assignment(img, bins)
    sl = pair_slices(img.data.shape, offset.displacement)
    if sl is None:
        raise GeometryError(
            f"offset d={offset.d}, theta={offset.theta}: no in-bounds pixel pairs "
            f"for a {img.height}x{img.width} image")
    sr, sc, nr, nc = sl
    src = a[sr, sc].reshape(-1, n)
    nbr = a[nr, nc].reshape(-1, n)
    g = src.T @ nbr
    total = g.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericError(
            f"offset d={offset.d}, theta={offset.theta}: co-occurrence mass is {total!r}; "
            "sigma is too small for the pixel values")
    # d/dg of sum(upstream * g / total): quotient rule against the grand total.
    u_eff = upstream / total - (upstream * g).sum() / (total * total)

    inv_s2 = 1.0 / (bins.sigma * bins.sigma)
    x_src = img.data[sr, sc].reshape(-1)
    x_nbr = img.data[nr, nc].reshape(-1)
    dsrc = src * ((bins.bin_centers[None, :] - x_src[:, None]) * inv_s2)
    dnbr = nbr * ((bins.bin_centers[None, :] - x_nbr[:, None]) * inv_s2)

    grad_src = (dsrc * (nbr @ u_eff.T)).sum(axis=1)
    grad_nbr = (dnbr * (src @ u_eff)).sum(axis=1)

    grad = np.zeros_like(img.data)
    block = (sr.stop - sr.start, sc.stop - sc.start)
    grad[sr, sc] += grad_src.reshape(block)
    grad[nr, nc] += grad_nbr.reshape(block)
    return grad
