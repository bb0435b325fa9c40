"""Hard-binned co-occurrence features for evaluation.

Unlike the differentiable loss path, the evaluation features follow the
standard radiomics convention: each pixel goes to its nearest bin center,
counts are accumulated over the four angles at one distance, the matrix
is symmetrized (both pair directions counted), and six classic texture
statistics are read off the normalized matrix.

Feature definitions on the normalized matrix P with bin indices i, j:
  contrast      sum (i-j)^2 P(i,j)
  dissimilarity sum |i-j| P(i,j)
  homogeneity   sum P(i,j) / (1 + (i-j)^2)
  energy        sum P(i,j)^2              (angular second moment)
  entropy       -sum P log2 P             (over nonzero cells)
  correlation   (sum ij P - mu_i mu_j) / (sigma_i sigma_j), 1.0 when flat
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, GeometryError
from .formatting import sci9
from .glcm import BinningConfig, Offset, pair_slices
from .image import GrayImage

FEATURE_NAMES = ("contrast", "dissimilarity", "homogeneity", "energy", "entropy", "correlation")


@dataclass(frozen=True)
class FeatureVector:
    contrast: float
    dissimilarity: float
    homogeneity: float
    energy: float
    entropy: float
    correlation: float

    def __post_init__(self):
        if not 0.0 < self.energy <= 1.0 + 1e-12:
            raise ValueError(f"energy must be in (0, 1], got {self.energy}")
        if not 0.0 < self.homogeneity <= 1.0 + 1e-12:
            raise ValueError(f"homogeneity must be in (0, 1], got {self.homogeneity}")
        if self.entropy < -1e-12:
            raise ValueError(f"entropy must be non-negative, got {self.entropy}")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def hard_bin_indices(img: GrayImage, bins: BinningConfig) -> np.ndarray:
    """Nearest bin-center index per pixel; midpoint ties go to the lower bin."""
    centers = bins.bin_centers
    mids = (centers[:-1] + centers[1:]) / 2.0
    return np.searchsorted(mids, img.data, side="left")


def hard_glcm_counts(img: GrayImage, offset: Offset, bins: BinningConfig) -> np.ndarray:
    """Directed integer co-occurrence counts for one offset (unnormalized)."""
    idx = hard_bin_indices(img, bins)
    sl = pair_slices(img.data.shape, offset.displacement)
    if sl is None:
        raise GeometryError(
            f"offset d={offset.d}, theta={offset.theta}: no in-bounds pixel pairs "
            f"for a {img.height}x{img.width} image")
    sr, sc, nr, nc = sl
    n = bins.n_bins
    flat = idx[sr, sc].reshape(-1) * n + idx[nr, nc].reshape(-1)
    return np.bincount(flat, minlength=n * n).astype(np.float64).reshape(n, n)


def glcm_feature_vector(img: GrayImage, d: int = 1,
                        bins: BinningConfig | None = None) -> FeatureVector:
    """Six texture statistics of the angle-averaged symmetric hard GLCM at distance d."""
    bins = bins if bins is not None else BinningConfig.uniform()
    counts = np.zeros((bins.n_bins, bins.n_bins))
    for theta in (0, 45, 90, 135):
        c = hard_glcm_counts(img, Offset(d, theta), bins)
        counts += c + c.T
    p = counts / counts.sum()

    idx = np.arange(bins.n_bins, dtype=np.float64)
    di = idx[:, None] - idx[None, :]
    contrast = float((di * di * p).sum())
    dissimilarity = float((np.abs(di) * p).sum())
    homogeneity = float((p / (1.0 + di * di)).sum())
    energy = float((p * p).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())

    px = p.sum(axis=1)
    mu = float(idx @ px)
    var = float(((idx - mu) ** 2) @ px)
    if var <= 0.0:
        correlation = 1.0
    else:
        correlation = float(((idx[:, None] * idx[None, :] * p).sum() - mu * mu) / var)
    return FeatureVector(contrast, dissimilarity, homogeneity, energy, entropy, correlation)


@dataclass
class FeatureTable:
    """Named feature columns over a list of image ids (CSV rows = images)."""

    ids: list[str]
    features: list[str]
    values: np.ndarray  # shape (len(ids), len(features))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.ids), len(self.features)):
            raise ValueError(f"table shape {v.shape} does not match "
                             f"{len(self.ids)} ids x {len(self.features)} features")
        self.values = v

    def column(self, feature: str) -> np.ndarray:
        try:
            return self.values[:, self.features.index(feature)]
        except ValueError:
            raise KeyError(f"no feature column '{feature}'") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["image_id", *self.features])
        for i, image_id in enumerate(self.ids):
            writer.writerow([image_id, *(sci9(v) for v in self.values[i])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "<table>") -> "FeatureTable":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r]
        if not rows or len(rows[0]) < 2 or rows[0][0] != "image_id":
            raise FormatError(f"{name}: expected header 'image_id,<feature>,...'")
        features = rows[0][1:]
        ids, values = [], []
        for lineno, row in enumerate(rows[1:], 2):
            if len(row) != len(features) + 1:
                raise FormatError(f"{name}:{lineno}: expected {len(features) + 1} cells, got {len(row)}")
            ids.append(row[0])
            try:
                values.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise FormatError(f"{name}:{lineno}: {exc}") from None
        if not ids:
            raise FormatError(f"{name}: table has no rows")
        return cls(ids, features, np.asarray(values))

    @classmethod
    def read(cls, path: str | Path) -> "FeatureTable":
        path = Path(path)
        try:
            return cls.from_csv(path.read_text(), str(path))
        except FileNotFoundError:
            raise FormatError(f"no such table file: {path}") from None


def feature_table(images: dict[str, GrayImage], d: int = 1,
                  bins: BinningConfig | None = None) -> FeatureTable:
    """Feature vectors for a set of images, keyed by image id."""
    ids = list(images)
    values = [[glcm_feature_vector(images[i], d, bins).as_dict()[f] for f in FEATURE_NAMES]
              for i in ids]
    return FeatureTable(ids, list(FEATURE_NAMES), np.asarray(values))
