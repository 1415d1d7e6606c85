"""Shared fixtures and reference implementations.

The scanline reference here is the test oracle for the optimized
(dis)occlusion maps: a direct per-offset enumeration, O(n*m), written
with none of the production code's doubling shortcuts.  A second,
pure-Python triple loop validates the numpy reference itself on tiny
inputs.
"""

import numpy as np
import pytest

from photo3d.image_core import DisparityMap, ImageBuffer


def scanline_reference(d: np.ndarray, rho: float, gamma: float, m: int,
                       flip: bool = False) -> np.ndarray:
    """Per-offset enumeration of the scanline soft mask.

    flip=False: disocclusion (center minus neighbor); flip=True:
    occlusion (neighbor minus center).  Out-of-bounds offsets skipped.
    """
    d = np.asarray(d, dtype=np.float64)
    h, w = d.shape
    best = np.full((h, w), -np.inf)
    for k in range(1, m + 1):
        for axis, sign in ((0, 1), (0, -1), (1, 1), (1, -1)):
            nb = np.full((h, w), np.nan)
            if axis == 0 and sign == 1:
                nb[: h - k, :] = d[k:, :]
            elif axis == 0:
                nb[k:, :] = d[: h - k, :]
            elif sign == 1:
                nb[:, : w - k] = d[:, k:]
            else:
                nb[:, k:] = d[:, : w - k]
            diff = (nb - d if flip else d - nb) - rho * k
            ok = ~np.isnan(nb)
            best[ok] = np.maximum(best[ok], diff[ok])
    return np.tanh(gamma * np.maximum(best, 0.0))


def scanline_micro(d: np.ndarray, rho: float, gamma: float, m: int,
                   flip: bool = False) -> np.ndarray:
    """Pure-Python loop version, for cross-checking scanline_reference."""
    h, w = d.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            best = -np.inf
            for k in range(1, m + 1):
                for dy, dx in ((k, 0), (-k, 0), (0, k), (0, -k)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w:
                        diff = d[ny, nx] - d[y, x] if flip else d[y, x] - d[ny, nx]
                        best = max(best, diff - rho * k)
            out[y, x] = np.tanh(gamma * max(best, 0.0))
    return out


def half_plane_disparity(h: int = 64, w: int = 64, left: float = 0.8,
                         right: float = 0.2) -> DisparityMap:
    d = np.full((h, w), right)
    d[:, : w // 2] = left
    return DisparityMap(d)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_field(rng: np.random.Generator, h: int, w: int, lo: float = 0.0,
                 hi: float = 1.0, cells: int = 8) -> np.ndarray:
    """Smooth random field via bilinear upsampling of a coarse grid."""
    from photo3d.image_core import resize_bilinear
    coarse = rng.uniform(lo, hi, (max(2, h // cells), max(2, w // cells)))
    return np.clip(resize_bilinear(coarse, w, h), 0.0, 1.0)


def checker_image(h: int, w: int, period: int = 8) -> ImageBuffer:
    yy, xx = np.mgrid[0:h, 0:w]
    val = ((yy // period + xx // period) % 2).astype(np.float64)
    return ImageBuffer(np.repeat(val[:, :, None], 3, axis=2))


def textured_image(rng: np.random.Generator, h: int, w: int) -> ImageBuffer:
    """Smooth multi-channel test texture with enough structure for
    correlation and metric tests."""
    chans = [smooth_field(rng, h, w, 0.05, 0.95, cells=6) for _ in range(3)]
    return ImageBuffer(np.stack(chans, axis=-1))
