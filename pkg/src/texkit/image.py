"""Image data model, CT preprocessing steps, and grid file I/O.

Images are 2-D row-major float grids tagged with a pixel-value domain:
raw scanner counts, Hounsfield units, or values normalized to [-1, 1].
The preprocessing chain mirrors the usual CT pipeline: affine rescale of
raw counts to HU, resampling to a uniform pixel spacing, centering a
region of interest on a fixed square canvas, and normalization.

Two file formats are supported: a small self-describing binary grid
format (``.img``) and 16-bit grayscale PGM (``.pgm``, values stored as
HU + 1024).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, GeometryError


class PixelDomain(str, Enum):
    RAW_COUNTS = "raw"
    HOUNSFIELD = "hounsfield"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class GrayImage:
    """A 2-D scalar grid with pixel-value domain metadata.

    ``data`` is a (height, width) float64 array; treat it as immutable.
    ``spacing`` is the physical pixel size in mm as (row, column).
    """

    data: np.ndarray
    domain: PixelDomain
    spacing: tuple[float, float] | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"image data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must have at least one row and one column")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains non-finite values")
        if self.domain == PixelDomain.NORMALIZED and (arr.min() < -1.0 or arr.max() > 1.0):
            raise ValueError("normalized image has values outside [-1, 1]")
        if self.spacing is not None:
            sr, sc = self.spacing
            if sr <= 0 or sc <= 0:
                raise ValueError(f"pixel spacing must be positive, got {self.spacing}")
            object.__setattr__(self, "spacing", (float(sr), float(sc)))
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PreprocessConfig:
    """Settings for the HU preprocessing pipeline."""

    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0
    target_spacing: float = 1.0
    canvas_size: int = 512
    background: float = -1024.0
    clamp_window: tuple[float, float] = (-1024.0, 3071.0)

    def __post_init__(self):
        if self.canvas_size <= 0:
            raise ValueError("canvas_size must be positive")
        if self.target_spacing <= 0:
            raise ValueError("target_spacing must be positive")
        lo, hi = self.clamp_window
        if not lo < hi:
            raise ValueError(f"clamp_window must satisfy min < max, got {self.clamp_window}")


def rescale_to_hu(img: GrayImage, slope: float, intercept: float) -> GrayImage:
    """Map raw scanner counts to Hounsfield units: hu = slope * raw + intercept."""
    if img.domain != PixelDomain.RAW_COUNTS:
        raise DomainError(f"rescale_to_hu expects raw counts, got domain '{img.domain.value}'")
    return GrayImage(slope * img.data + intercept, PixelDomain.HOUNSFIELD, img.spacing)


def resample2d(img: GrayImage, target: float, spacing: tuple[float, float] | None = None) -> GrayImage:
    """Resample to a uniform pixel spacing of (target, target) mm.

    Uses bilinear interpolation with pixel centers on the integer lattice
    and edge clamping. The output grid has round(size * spacing / target)
    pixels per axis. When the spacing already equals the target the image
    is returned unchanged (exact identity).
    """
    if target <= 0:
        raise ValueError("target spacing must be positive")
    spacing = spacing if spacing is not None else img.spacing
    if spacing is None:
        raise ValueError("resample2d needs a pixel spacing: none supplied and none on the image")
    sr, sc = float(spacing[0]), float(spacing[1])
    if sr <= 0 or sc <= 0:
        raise ValueError(f"pixel spacing must be positive, got {spacing}")
    if sr == target and sc == target:
        return GrayImage(img.data.copy(), img.domain, (target, target))

    h, w = img.data.shape
    out_h = max(1, int(round(h * sr / target)))
    out_w = max(1, int(round(w * sc / target)))
    # Output pixel i sits at input coordinate i * target / spacing, clamped to the grid.
    rows = np.clip(np.arange(out_h) * (target / sr), 0.0, h - 1.0)
    cols = np.clip(np.arange(out_w) * (target / sc), 0.0, w - 1.0)
    r0 = np.floor(rows).astype(int)
    c0 = np.floor(cols).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    d = img.data
    top = d[np.ix_(r0, c0)] * (1 - fc) + d[np.ix_(r0, c1)] * fc
    bot = d[np.ix_(r1, c0)] * (1 - fc) + d[np.ix_(r1, c1)] * fc
    out = top * (1 - fr) + bot * fr
    return GrayImage(out, img.domain, (target, target))


def crop_center_pad(img: GrayImage, bbox: tuple[int, int, int, int], cfg: PreprocessConfig) -> GrayImage:
    """Center the bbox content on a square background canvas.

    ``bbox`` is (row0, col0, row1, col1), half-open: rows row0..row1-1 and
    columns col0..col1-1 are kept. Centering ties resolve toward the
    top-left corner. Everything outside the content is cfg.background.
    """
    r0, c0, r1, c1 = (int(v) for v in bbox)
    h, w = img.data.shape
    if r0 >= r1 or c0 >= c1:
        raise ValueError(f"bbox is empty or inverted: {bbox}")
    if r0 < 0 or c0 < 0 or r1 > h or c1 > w:
        raise ValueError(f"bbox {bbox} outside image bounds {h}x{w}")
    bh, bw = r1 - r0, c1 - c0
    n = cfg.canvas_size
    if bh > n or bw > n:
        raise GeometryError(f"bbox content {bh}x{bw} does not fit on a {n}x{n} canvas")
    out = np.full((n, n), float(cfg.background), dtype=np.float64)
    rs = (n - bh) // 2
    cs = (n - bw) // 2
    out[rs:rs + bh, cs:cs + bw] = img.data[r0:r1, c0:c1]
    return GrayImage(out, img.domain, img.spacing)


def normalize_unit(img: GrayImage, window: tuple[float, float]) -> GrayImage:
    """Clamp to the HU window and map it affinely onto [-1, 1]."""
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"degenerate window: {window}")
    clamped = np.clip(img.data, lo, hi)
    out = 2.0 * (clamped - lo) / (hi - lo) - 1.0
    # Guard the domain invariant against rounding at the upper edge.
    np.clip(out, -1.0, 1.0, out=out)
    return GrayImage(out, PixelDomain.NORMALIZED, img.spacing)


def preprocess(img: GrayImage, cfg: PreprocessConfig,
               bbox: tuple[int, int, int, int] | None = None) -> GrayImage:
    """Full pipeline: rescale raw counts, resample, center on canvas, normalize.

    The resample step runs only when the image carries spacing metadata;
    ``bbox`` (in resampled coordinates) defaults to the full image.
    """
    if img.domain == PixelDomain.RAW_COUNTS:
        img = rescale_to_hu(img, cfg.rescale_slope, cfg.rescale_intercept)
    if img.spacing is not None:
        img = resample2d(img, cfg.target_spacing)
    if bbox is None:
        bbox = (0, 0, img.height, img.width)
    img = crop_center_pad(img, bbox, cfg)
    return normalize_unit(img, cfg.clamp_window)


# ---------------------------------------------------------------------------
# File I/O
#
# Native grid format (.img), little-endian:
#   magic "TEXK" | version u8 | domain u8 | flags u8 (bit0: spacing) | pad u8
#   width u32 | height u32 | [spacing 2 x f64] | data h*w float32 row-major
# Values are stored as IEEE-754 binary32; grids round-trip losslessly when
# their values are binary32-representable (always true for loaded grids).
# ---------------------------------------------------------------------------

_MAGIC = b"TEXK"
_VERSION = 1
_DOMAIN_TAGS = {PixelDomain.RAW_COUNTS: 0, PixelDomain.HOUNSFIELD: 1, PixelDomain.NORMALIZED: 2}
_TAG_DOMAINS = {v: k for k, v in _DOMAIN_TAGS.items()}


def save_image(img: GrayImage, path: str | Path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".img":
        path.write_bytes(_encode_native(img))
    elif suffix == ".pgm":
        path.write_bytes(_encode_pgm(img))
    else:
        raise FormatError(f"unsupported image format '{suffix}' (expected .img or .pgm)")


def load_image(path: str | Path) -> GrayImage:
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(f"no such image file: {path}") from None
    if suffix == ".img":
        return _decode_native(blob, str(path))
    if suffix == ".pgm":
        return _decode_pgm(blob, str(path))
    raise FormatError(f"unsupported image format '{suffix}' (expected .img or .pgm)")


def _encode_native(img: GrayImage) -> bytes:
    flags = 1 if img.spacing is not None else 0
    header = _MAGIC + struct.pack("<BBBBII", _VERSION, _DOMAIN_TAGS[img.domain], flags, 0,
                                  img.width, img.height)
    if img.spacing is not None:
        header += struct.pack("<dd", *img.spacing)
    return header + img.data.astype("<f4").tobytes()


def _decode_native(blob: bytes, name: str) -> GrayImage:
    head = struct.calcsize("<4sBBBBII")
    if len(blob) < head:
        raise FormatError(f"{name}: truncated header")
    magic, version, tag, flags, _, width, height = struct.unpack_from("<4sBBBBII", blob)
    if magic != _MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    if tag not in _TAG_DOMAINS:
        raise FormatError(f"{name}: unknown domain tag {tag}")
    if width < 1 or height < 1:
        raise FormatError(f"{name}: invalid dimensions {width}x{height}")
    offset = head
    spacing = None
    if flags & 1:
        if len(blob) < offset + 16:
            raise FormatError(f"{name}: truncated spacing block")
        spacing = struct.unpack_from("<dd", blob, offset)
        offset += 16
    need = height * width * 4
    if len(blob) - offset != need:
        raise FormatError(f"{name}: expected {need} data bytes, found {len(blob) - offset}")
    data = np.frombuffer(blob, dtype="<f4", count=height * width, offset=offset)
    try:
        return GrayImage(data.astype(np.float64).reshape(height, width),
                         _TAG_DOMAINS[tag], spacing)
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from None


def _encode_pgm(img: GrayImage) -> bytes:
    if img.domain != PixelDomain.HOUNSFIELD:
        raise DomainError("PGM stores HU + 1024; convert the image to Hounsfield units first")
    enc = np.clip(np.round(img.data + 1024.0), 0, 65535).astype(">u2")
    return f"P5\n{img.width} {img.height}\n65535\n".encode("ascii") + enc.tobytes()


def _decode_pgm(blob: bytes, name: str) -> GrayImage:
    fields, offset = [], 0
    while len(fields) < 4:
        if offset >= len(blob):
            raise FormatError(f"{name}: truncated PGM header")
        ch = blob[offset:offset + 1]
        if ch == b"#":
            nl = blob.find(b"\n", offset)
            if nl < 0:
                raise FormatError(f"{name}: unterminated PGM comment")
            offset = nl + 1
        elif ch.isspace():
            offset += 1
        else:
            end = offset
            while end < len(blob) and not blob[end:end + 1].isspace():
                end += 1
            fields.append(blob[offset:end])
            offset = end
    offset += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise FormatError(f"{name}: not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError:
        raise FormatError(f"{name}: malformed PGM header") from None
    if maxval != 65535:
        raise FormatError(f"{name}: expected 16-bit PGM (maxval 65535), got {maxval}")
    if width < 1 or height < 1:
        raise FormatError(f"{name}: invalid dimensions {width}x{height}")
    need = width * height * 2
    if len(blob) - offset < need:
        raise FormatError(f"{name}: expected {need} data bytes, found {len(blob) - offset}")
    raw = np.frombuffer(blob, dtype=">u2", count=width * height, offset=offset)
    return GrayImage(raw.astype(np.float64).reshape(height, width) - 1024.0,
                     PixelDomain.HOUNSFIELD)
