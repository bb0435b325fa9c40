"""Shared fixtures and independent brute-force oracles.

The oracles here are deliberately written as plain Python loops so they
share no code path with the vectorized implementations they check.
"""

import math

import numpy as np
import pytest

from texkit import BinningConfig, GrayImage, OffsetGrid, PixelDomain


# ---------------------------------------------------------------------------
# Image fixtures
# ---------------------------------------------------------------------------

def make_stripes(n=16, amp=0.5, period=2, axis=1):
    """Periodic two-value stripes; axis=1 varies by column, axis=0 by row."""
    idx = (np.arange(n) // (period // 2)) % 2
    vals = np.where(idx == 0, -amp, amp)
    data = np.broadcast_to(vals[None, :] if axis == 1 else vals[:, None], (n, n)).copy()
    return GrayImage(data, PixelDomain.NORMALIZED)


def make_constant(n=16, value=0.0):
    return GrayImage(np.full((n, n), float(value)), PixelDomain.NORMALIZED)


def make_checkerboard(n=8, lo=-0.5, hi=0.5):
    r, c = np.indices((n, n))
    return GrayImage(np.where((r + c) % 2 == 0, lo, hi), PixelDomain.NORMALIZED)


def random_image(rng, n=8, bound=0.9):
    return GrayImage(rng.uniform(-bound, bound, (n, n)), PixelDomain.NORMALIZED)


@pytest.fixture
def stripes16():
    return make_stripes(16)


@pytest.fixture
def constant16():
    return make_constant(16)


@pytest.fixture
def bins2():
    return BinningConfig([-0.5, 0.5], sigma=0.5)


@pytest.fixture
def bins2_hard():
    # Sigma far below the bin spacing: soft assignment behaves like hard binning.
    return BinningConfig([-0.5, 0.5], sigma=0.005)


@pytest.fixture
def default_grid():
    return OffsetGrid()


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def displacement_oracle(d, theta):
    rad = math.radians(theta)
    return int(round(d * math.cos(rad))), int(round(d * math.sin(rad)))


def nearest_bin_oracle(value, centers):
    best, best_dist = 0, abs(value - centers[0])
    for k in range(1, len(centers)):
        dist = abs(value - centers[k])
        if dist < best_dist:
            best, best_dist = k, dist
    return best


def hard_glcm_oracle(img: GrayImage, d, theta, centers):
    """Integer-binned directed co-occurrence matrix, normalized; loop based."""
    centers = list(centers)
    n = len(centers)
    du, dv = displacement_oracle(d, theta)
    h, w = img.data.shape
    counts = np.zeros((n, n))
    pairs = 0
    for v in range(h):
        for u in range(w):
            uu, vv = u + du, v + dv
            if 0 <= uu < w and 0 <= vv < h:
                i = nearest_bin_oracle(img.data[v, u], centers)
                j = nearest_bin_oracle(img.data[vv, uu], centers)
                counts[i, j] += 1
                pairs += 1
    if pairs == 0:
        raise AssertionError("oracle: no valid pairs")
    return counts / counts.sum(), pairs


def contrast_oracle(matrix):
    n = matrix.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += (i - j) ** 2 * matrix[i, j]
    return total


def bilinear_oracle(data, spacing, target):
    """Separable bilinear resampling with edge clamping; loop based."""
    h, w = data.shape
    sr, sc = spacing
    out_h = max(1, round(h * sr / target))
    out_w = max(1, round(w * sc / target))
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        y = min(max(i * target / sr, 0.0), h - 1.0)
        y0 = int(math.floor(y))
        y1 = min(y0 + 1, h - 1)
        fy = y - y0
        for j in range(out_w):
            x = min(max(j * target / sc, 0.0), w - 1.0)
            x0 = int(math.floor(x))
            x1 = min(x0 + 1, w - 1)
            fx = x - x0
            top = data[y0, x0] * (1 - fx) + data[y0, x1] * fx
            bot = data[y1, x0] * (1 - fx) + data[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bot * fy
    return out


def central_difference(f, x0, step=1e-4):
    """Gradient of scalar f at array x0 by central differences, loop based."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    for idx in np.ndindex(x0.shape):
        plus, minus = x0.copy(), x0.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (f(plus) - f(minus)) / (2 * step)
    return grad


def max_rel_err(a, b, floor=1e-6):
    """Worst absolute deviation relative to the block's largest gradient.

    Per-component denominators would amplify finite-difference truncation
    noise on near-zero components, so the block magnitude sets the scale.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.abs(a).max(), np.abs(b).max(), floor)
    return float(np.abs(a - b).max() / scale)
