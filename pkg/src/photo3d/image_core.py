"""Raster types, PNG/PFM file I/O, and the separable filter primitives.

Everything downstream (layering, inpainting, rendering) is built on the
three carriers defined here: ``ImageBuffer`` for generic rasters,
``DisparityMap`` for normalized inverse depth, and ``GradientField`` for
Sobel responses.  All pixel data is float64 in [0, 1], row-major, with
shape (H, W, C) for images and (H, W) for disparity.

Border policy is clamp-to-edge for every filter, and sRGB values are
treated as linear throughout (documented simplification).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

__all__ = [
    "ImageIOError",
    "UnsupportedFormatError",
    "ImageBuffer",
    "DisparityMap",
    "GradientField",
    "load_image",
    "save_image",
    "load_disparity",
    "read_pfm",
    "write_pfm",
    "gaussian_blur",
    "max_pool_dilate",
    "sobel_gradient",
    "resize_bilinear",
]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _checked_unit_range(data: np.ndarray, kind: str) -> np.ndarray:
    # Tolerates float round-off from unit-sum kernels, rejects real violations.
    if not np.isfinite(data).all():
        raise ValueError(f"{kind} samples must be finite")
    if data.size and (data.min() < -1e-9 or data.max() > 1.0 + 1e-9):
        raise ValueError(f"{kind} samples must lie in [0, 1]; got [{data.min()}, {data.max()}]")
    return np.clip(data, 0.0, 1.0)


class ImageIOError(ValueError):
    """Raised when an image or disparity file cannot be read or written."""


class UnsupportedFormatError(ImageIOError):
    """Raised when a file is not one of the supported on-disk formats."""


@dataclass
class ImageBuffer:
    """H x W x C float raster in [0, 1] with 1, 3, or 4 channels."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        if self.data.ndim != 3 or self.data.shape[2] not in (1, 3, 4):
            raise ValueError(f"ImageBuffer needs (H, W, C) with C in (1, 3, 4); got {self.data.shape}")
        self.data = _checked_unit_range(self.data, "ImageBuffer")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy())


@dataclass
class DisparityMap:
    """H x W normalized disparity (inverse depth) in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError(f"DisparityMap needs (H, W); got {self.data.shape}")
        self.data = _checked_unit_range(self.data, "DisparityMap")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def copy(self) -> "DisparityMap":
        return DisparityMap(self.data.copy())


@dataclass
class GradientField:
    """Per-pixel Sobel responses gx, gy plus the squared magnitude."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.gx = np.asarray(self.gx, dtype=np.float64)
        self.gy = np.asarray(self.gy, dtype=np.float64)
        if self.gx.shape != self.gy.shape or self.gx.ndim != 2:
            raise ValueError("gx and gy must be matching 2D arrays")
        self.magnitude_sq = self.gx * self.gx + self.gy * self.gy

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def height(self) -> int:
        return self.gx.shape[0]


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _require_png(path: Path):
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(_PNG_MAGIC))
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if magic != _PNG_MAGIC:
        raise UnsupportedFormatError(f"{path}: not a PNG file (bad magic bytes)")


def load_image(path) -> ImageBuffer:
    """Load an 8- or 16-bit PNG as an ImageBuffer scaled to [0, 1].

    Samples are divided by the bit-depth maximum (255 or 65535); the
    channel count of the file is preserved.

    Raises
    ------
    ImageIOError
        If the file is missing or cannot be decoded.
    UnsupportedFormatError
        If the file is not a PNG or uses an unsupported sample type.
    """
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"cannot read {path}: no such file")
    _require_png(path)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"cannot read {path}: PNG decode failed")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedFormatError(f"{path}: unsupported PNG sample type {raw.dtype}")
    data = raw.astype(np.float64) / scale
    if data.ndim == 3 and data.shape[2] == 3:
        data = data[:, :, ::-1]  # BGR -> RGB
    elif data.ndim == 3 and data.shape[2] == 4:
        data = data[:, :, [2, 1, 0, 3]]  # BGRA -> RGBA
    return ImageBuffer(data)


def save_image(path, img: ImageBuffer, bit_depth: int = 8):
    """Write an ImageBuffer as an 8- or 16-bit PNG."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    path = Path(path)
    data = np.clip(img.data, 0.0, 1.0)
    if bit_depth == 8:
        raw = np.round(data * 255.0).astype(np.uint8)
    else:
        raw = np.round(data * 65535.0).astype(np.uint16)
    if raw.shape[2] == 3:
        raw = raw[:, :, ::-1]
    elif raw.shape[2] == 4:
        raw = raw[:, :, [2, 1, 0, 3]]
    else:
        raw = raw[:, :, 0]
    if not cv2.imwrite(str(path), raw):
        raise ImageIOError(f"cannot write {path}")


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into a float32 array, (H, W) or (H, W, 3).

    The scale header is honored: its sign selects endianness and its
    magnitude multiplies the samples (a magnitude of 1 keeps the payload
    bit-exact).  Rows are stored bottom-up on disk and flipped on read.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header = _read_pfm_token(fh)
            if header == b"Pf":
                channels = 1
            elif header == b"PF":
                channels = 3
            else:
                raise UnsupportedFormatError(f"{path}: not a PFM file (header {header!r})")
            width = int(_read_pfm_token(fh))
            height = int(_read_pfm_token(fh))
            scale = float(_read_pfm_token(fh))
            count = width * height * channels
            payload = fh.read(count * 4)
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if len(payload) != count * 4:
        raise ImageIOError(f"cannot read {path}: truncated PFM payload")
    endian = "<" if scale < 0 else ">"
    data = np.frombuffer(payload, dtype=f"{endian}f4").astype(np.float32)
    if abs(scale) != 1.0:
        data = data * np.float32(abs(scale))
    if channels == 1:
        data = data.reshape(height, width)
    else:
        data = data.reshape(height, width, 3)
    return np.flipud(data).copy()


def _read_pfm_token(fh) -> bytes:
    # Tokens are separated by single whitespace bytes (spaces or newlines).
    token = b""
    while True:
        c = fh.read(1)
        if not c:
            raise ImageIOError("unexpected end of PFM header")
        if c in b" \t\r\n":
            if token:
                return token
            continue
        token += c


def write_pfm(path, data: np.ndarray):
    """Write a float array as little-endian PFM (scale -1.0), bit-exact."""
    data = np.asarray(data)
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports (H, W) or (H, W, 3); got {data.shape}")
    height, width = data.shape[:2]
    payload = np.flipud(data).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + b"\n")
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(payload)


def load_disparity(path, normalize: bool = False) -> DisparityMap:
    """Load disparity from PFM or grayscale PNG.

    With ``normalize`` the values are min-max rescaled over all pixels;
    otherwise they are clamped to [0, 1] (PNG samples are already scaled
    by their bit-depth maximum and never need the clamp).

    Raises
    ------
    ImageIOError
        For unreadable files, NaN/Inf samples (the message counts them),
        or a flat map under ``normalize`` (degenerate disparity).
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        data = read_pfm(path)
        if data.ndim != 2:
            raise UnsupportedFormatError(f"{path}: disparity PFM must be single-channel")
        bad = ~np.isfinite(data)
        if bad.any():
            raise ImageIOError(f"{path}: {int(bad.sum())} non-finite disparity pixels")
        data = data.astype(np.float64)
    elif suffix == ".png":
        img = load_image(path)
        if img.channels != 1:
            raise UnsupportedFormatError(f"{path}: disparity PNG must be grayscale, got {img.channels} channels")
        data = img.data[:, :, 0]
    else:
        raise UnsupportedFormatError(f"{path}: disparity must be .pfm or .png")
    if normalize:
        lo, hi = float(data.min()), float(data.max())
        if hi <= lo:
            raise ImageIOError(f"{path}: degenerate disparity (max == min == {lo})")
        data = (data - lo) / (hi - lo)
    else:
        data = np.clip(data, 0.0, 1.0)
    return DisparityMap(data)


# ---------------------------------------------------------------------------
# Filter primitives
# ---------------------------------------------------------------------------

def _unwrap(img):
    if isinstance(img, (ImageBuffer, DisparityMap)):
        return img.data
    return np.asarray(img, dtype=np.float64)


def _rewrap(img, data):
    if isinstance(img, ImageBuffer):
        return ImageBuffer(data)
    if isinstance(img, DisparityMap):
        return DisparityMap(data)
    return data


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian with radius ceil(3*sigma), normalized to sum 1."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img, sigma: float):
    """Separable Gaussian blur with clamp-to-edge borders; sigma=0 is identity."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    data = _unwrap(img)
    if sigma == 0:
        return _rewrap(img, data.copy())
    kernel = gaussian_kernel_1d(sigma)
    out = ndimage.correlate1d(data, kernel, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="nearest")
    return _rewrap(img, out)


def max_pool_dilate(img, radius: int):
    """Max over the (2r+1)x(2r+1) window per pixel, clamp-to-edge; r=0 is identity.

    Multichannel input is pooled per channel.
    """
    if radius < 0 or int(radius) != radius:
        raise ValueError(f"radius must be a non-negative integer, got {radius}")
    data = _unwrap(img)
    if radius == 0:
        return _rewrap(img, data.copy())
    size = 2 * int(radius) + 1
    footprint = (size, size) + (1,) * (data.ndim - 2)
    out = ndimage.maximum_filter(data, size=footprint, mode="nearest")
    return _rewrap(img, out)


def sobel_gradient(disparity: DisparityMap) -> GradientField:
    """3x3 Sobel gradients scaled by 1/8, clamp-to-edge borders.

    The 1/8 scale makes a unit ramp (slope 1 per pixel) produce |gx| = 1,
    fixing the physical meaning of any coefficient applied to the
    squared magnitude downstream.
    """
    data = _unwrap(disparity)
    if data.shape[0] < 3 or data.shape[1] < 3:
        raise ValueError(f"sobel_gradient needs at least 3x3 input, got {data.shape}")
    smooth = np.array([1.0, 2.0, 1.0]) / 4.0
    diff = np.array([-1.0, 0.0, 1.0]) / 2.0
    gx = ndimage.correlate1d(data, smooth, axis=0, mode="nearest")
    gx = ndimage.correlate1d(gx, diff, axis=1, mode="nearest")
    gy = ndimage.correlate1d(data, smooth, axis=1, mode="nearest")
    gy = ndimage.correlate1d(gy, diff, axis=0, mode="nearest")
    return GradientField(gx=gx, gy=gy)


def resize_bilinear(img, new_width: int, new_height: int):
    """Bilinear resize with half-pixel-center alignment; same size is identity."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target size must be >= 1, got {new_width}x{new_height}")
    data = _unwrap(img)
    src_h, src_w = data.shape[:2]
    if (new_width, new_height) == (src_w, src_h):
        return _rewrap(img, data.copy())
    out = _resample_axis(data, new_height, axis=0)
    out = _resample_axis(out, new_width, axis=1)
    return _rewrap(img, out)


def _resample_axis(data: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    src_len = data.shape[axis]
    # Half-pixel centers: dst center i+0.5 maps to src coordinate below.
    pos = (np.arange(new_len, dtype=np.float64) + 0.5) * (src_len / new_len) - 0.5
    pos = np.clip(pos, 0.0, src_len - 1.0)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, src_len - 1)
    frac = pos - lo
    shape = [1] * data.ndim
    shape[axis] = new_len
    frac = frac.reshape(shape)
    take_lo = np.take(data, lo, axis=axis)
    take_hi = np.take(data, hi, axis=axis)
    return take_lo * (1.0 - frac) + take_hi * frac
