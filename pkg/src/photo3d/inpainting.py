"""Depth-aware background completion and training-mask synthesis.

Fills a masked region of an RGB-D view so the result looks like the
*background* surface continuing behind the foreground rather than a mix
of both sides.  Disparity is completed first by diffusion anchored only
to background-side boundary pixels; color is then diffused with edge
weights that fall off across disparity jumps in the completed map, so
color does not bleed across depth discontinuities.

Both phases are Jacobi iterations of convex per-pixel averages, so the
maximum principle holds: filled values stay inside the range spanned by
their anchors.

Also provides the mask generators used to build self-supervised
inpainting datasets: thresholded occlusion masks from disparity, and
random stroke masks for matte-free content.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from numba import njit

from .image_core import DisparityMap, ImageBuffer, load_disparity, load_image
from .soft_layering import DisocclusionParams, SoftMask, occlusion_map

__all__ = [
    "BinaryMask",
    "InpaintParams",
    "InpaintedBackground",
    "MaskDatasetSpec",
    "binarize_mask",
    "random_stroke_mask",
    "generate_training_masks",
    "inpaint_rgbd",
    "inject_external_inpaint",
]


@dataclass
class BinaryMask:
    """Boolean (H, W) mask; True marks pixels to fill."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.bool_:
            raise ValueError(f"mask must be boolean, got dtype {data.dtype}")
        if data.ndim != 2:
            raise ValueError(f"mask must be 2D, got {data.shape}")
        self.data = data

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class InpaintParams:
    """Diffusion inpainting parameters.

    mask_threshold binarizes the soft disocclusion map into the solve
    region; depth_guidance_strength scales the disparity-difference
    penalty in the color-phase edge weights; background_quantile picks
    the boundary disparity level at or below which boundary pixels count
    as background anchors.
    """

    mask_threshold: float = 0.5
    depth_guidance_strength: float = 50.0
    background_quantile: float = 0.3
    max_iterations: int = 10000
    convergence_tol: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.mask_threshold < 1.0:
            raise ValueError(f"mask_threshold must be in (0, 1), got {self.mask_threshold}")
        if not self.depth_guidance_strength >= 0:
            raise ValueError(f"depth_guidance_strength must be >= 0, got {self.depth_guidance_strength}")
        if not 0.0 < self.background_quantile <= 1.0:
            raise ValueError(f"background_quantile must be in (0, 1], got {self.background_quantile}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be > 0, got {self.convergence_tol}")


@dataclass
class InpaintedBackground:
    """Completed background layer: color, disparity, and diagnostics.

    background_level is the boundary disparity quantile that picked the
    anchors (NaN when the mask was empty); converged reports whether both
    diffusion phases hit convergence_tol before max_iterations.
    """

    rgb: ImageBuffer
    disparity: DisparityMap
    background_level: float
    converged: bool


@dataclass(frozen=True)
class MaskDatasetSpec:
    """Controls for the self-supervised mask generator.

    mix_ratio is the fraction of samples drawn from thresholded
    occlusion maps; the rest are random strokes.  Stroke geometry ranges
    are inclusive and in pixels.
    """

    occlusion_params: DisocclusionParams = DisocclusionParams()
    stroke_count_range: tuple[int, int] = (1, 4)
    stroke_width_range: tuple[int, int] = (6, 24)
    stroke_length_range: tuple[float, float] = (40.0, 160.0)
    mix_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("stroke_count_range", "stroke_width_range", "stroke_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
        if self.stroke_width_range[0] < 1:
            raise ValueError("stroke_width_range values must be >= 1")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ValueError(f"mix_ratio must be in [0, 1], got {self.mix_ratio}")


def binarize_mask(soft: SoftMask | np.ndarray, tau: float) -> BinaryMask:
    """Threshold a soft mask at tau: True where value >= tau.

    Rejects an all-True result; inpainting needs at least one source
    pixel.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    data = soft.data if isinstance(soft, SoftMask) else np.asarray(soft, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"soft mask must be 2D, got {data.shape}")
    mask = data >= tau
    if mask.all():
        raise ValueError("mask covers every pixel; no source pixels remain")
    return BinaryMask(mask)


def random_stroke_mask(width: int, height: int, spec: MaskDatasetSpec,
                       rng: np.random.Generator) -> BinaryMask:
    """Random free-form stroke mask, the usual stand-in for user scribbles.

    Each stroke is a random walk: uniform-random start pixel, segments
    with uniform-random heading changes, drawn with a round brush whose
    width is drawn from spec.stroke_width_range.  Deterministic given
    the generator state.
    """
    if width < 1 or height < 1:
        raise ValueError(f"mask dimensions must be positive, got {width}x{height}")
    canvas = np.zeros((height, width), dtype=np.uint8)
    n_lo, n_hi = spec.stroke_count_range
    for _ in range(int(rng.integers(n_lo, n_hi + 1))):
        brush = int(rng.integers(spec.stroke_width_range[0], spec.stroke_width_range[1] + 1))
        total = float(rng.uniform(*spec.stroke_length_range))
        step = max(total / 6.0, 1.0)
        x = float(rng.uniform(0, width))
        y = float(rng.uniform(0, height))
        angle = float(rng.uniform(0, 2 * np.pi))
        cv2.circle(canvas, (int(round(x)), int(round(y))), brush // 2, 1, -1)
        walked = 0.0
        while walked < total:
            angle += float(rng.uniform(-0.9, 0.9))
            nx = float(np.clip(x + step * np.cos(angle), 0, width - 1))
            ny = float(np.clip(y + step * np.sin(angle), 0, height - 1))
            cv2.line(canvas, (int(round(x)), int(round(y))), (int(round(nx)), int(round(ny))),
                     1, brush, lineType=cv2.LINE_8)
            cv2.circle(canvas, (int(round(nx)), int(round(ny))), brush // 2, 1, -1)
            x, y = nx, ny
            walked += step
    return BinaryMask(canvas.astype(bool))


def generate_training_masks(disparity: DisparityMap, spec: MaskDatasetSpec,
                            rng: np.random.Generator) -> tuple[BinaryMask, str]:
    """One training mask for self-supervised inpainting from an RGB-D view.

    With probability mix_ratio it is the thresholded occlusion map of
    the disparity (regions a real camera move would need filled),
    otherwise a random stroke mask.  An all-empty occlusion mask falls
    back to strokes so every draw is usable.  The label is one of
    "occlusion", "stroke", "stroke_fallback".
    """
    use_occlusion = rng.uniform() < spec.mix_ratio
    if use_occlusion:
        occ = occlusion_map(disparity, spec.occlusion_params)
        mask = binarize_mask(occ, InpaintParams().mask_threshold)
        if mask.count() > 0:
            return mask, "occlusion"
        return random_stroke_mask(disparity.width, disparity.height, spec, rng), "stroke_fallback"
    return random_stroke_mask(disparity.width, disparity.height, spec, rng), "stroke"


# ---------------------------------------------------------------------------
# Diffusion inpainting
# ---------------------------------------------------------------------------

def _neighbor_stack(values: np.ndarray) -> np.ndarray:
    """(4, H, W[, C]) stack of 4-neighbors with edge replication."""
    out = np.empty((4,) + values.shape, dtype=values.dtype)
    out[0, 0], out[0, 1:] = values[0], values[:-1]      # from above
    out[1, -1], out[1, :-1] = values[-1], values[1:]    # from below
    out[2, :, 0], out[2, :, 1:] = values[:, 0], values[:, :-1]  # from left
    out[3, :, -1], out[3, :, :-1] = values[:, -1], values[:, 1:]  # from right
    return out


def _boundary_ring(mask: np.ndarray) -> np.ndarray:
    """Source pixels 4-adjacent to the masked region."""
    ring = np.zeros_like(mask)
    ring[:-1] |= mask[1:]
    ring[1:] |= mask[:-1]
    ring[:, :-1] |= mask[:, 1:]
    ring[:, 1:] |= mask[:, :-1]
    return ring & ~mask


@njit(cache=True)
def _jacobi_sweeps(values, act, nbr, w, wsum, max_iterations, tol):
    """Simultaneous-update relaxation over the active rows of `values`.

    values: (N, C) flat field, modified in place at active rows only;
    act: (A,) flat indices; nbr: (A, 4) flat neighbor indices; w: (A, 4)
    non-negative weights (zero = no flux); wsum: (A,) positive row sums.
    Fixed traversal order keeps results bit-deterministic.
    """
    n_active = act.shape[0]
    channels = values.shape[1]
    update = np.empty((n_active, channels))
    for it in range(max_iterations):
        delta = 0.0
        for a in range(n_active):
            i = act[a]
            for ch in range(channels):
                acc = 0.0
                for e in range(4):
                    acc += w[a, e] * values[nbr[a, e], ch]
                nv = acc / wsum[a]
                diff = abs(nv - values[i, ch])
                if diff > delta:
                    delta = diff
                update[a, ch] = nv
        for a in range(n_active):
            i = act[a]
            for ch in range(channels):
                values[i, ch] = update[a, ch]
        if delta < tol:
            return True
    return False


def _diffuse(init: np.ndarray, anchors: np.ndarray, anchor_values: np.ndarray,
             free: np.ndarray, weights: np.ndarray | None,
             max_iterations: int, tol: float) -> tuple[np.ndarray, bool]:
    """Jacobi diffusion on the free pixels with Dirichlet anchors.

    weights, if given, is a (4, H, W) stack scaling each incoming
    neighbor; neighbors that are neither free nor anchors get zero
    weight (no-flux), and a free pixel with no usable neighbor keeps its
    initial value.  Returns the field and a convergence flag.
    """
    field = np.ascontiguousarray(init, dtype=np.float64)
    field[anchors] = anchor_values
    usable = free | anchors
    if weights is None:
        weights = np.ones((4,) + free.shape)
    weights = np.where(_neighbor_stack(usable), weights, 0.0)
    wsum = weights.sum(axis=0)
    active = free & (wsum > 0)
    if not active.any():
        return field, True

    h, w_dim = free.shape
    rows, cols = np.meshgrid(np.arange(h), np.arange(w_dim), indexing="ij")
    # Neighbor order matches _neighbor_stack: above, below, left, right,
    # with edge replication.
    nbr_full = np.stack([
        np.maximum(rows - 1, 0) * w_dim + cols,
        np.minimum(rows + 1, h - 1) * w_dim + cols,
        rows * w_dim + np.maximum(cols - 1, 0),
        rows * w_dim + np.minimum(cols + 1, w_dim - 1),
    ], axis=-1)

    act = np.flatnonzero(active.ravel())
    nbr = np.ascontiguousarray(nbr_full.reshape(-1, 4)[act])
    w_act = np.ascontiguousarray(weights.reshape(4, -1)[:, act].T)
    wsum_act = np.ascontiguousarray(wsum.ravel()[act])

    flat = field.reshape(h * w_dim, -1)
    converged = _jacobi_sweeps(flat, act, nbr, w_act, wsum_act, max_iterations, tol)
    return field, bool(converged)


def inpaint_rgbd(rgb: ImageBuffer, disparity: DisparityMap, mask: BinaryMask,
                 params: InpaintParams = InpaintParams()) -> InpaintedBackground:
    """Fill the masked region with background-consistent color and disparity.

    Phase 1 diffuses disparity into the hole anchored only to boundary
    pixels at or below the background disparity level (the
    background_quantile of boundary disparities); foreground-side
    boundary pixels exert no pull.  Phase 2 diffuses color with neighbor
    weights exp(-lambda * |d(p) - d(q)|) on the completed disparity,
    anchored to boundary pixels whose source disparity is within the
    background level (+ 1e-3 slack).  Pixels outside the mask pass
    through bit-exact.
    """
    if rgb.data.shape[:2] != disparity.data.shape or mask.data.shape != disparity.data.shape:
        raise ValueError(
            f"dimension mismatch: rgb {rgb.data.shape[:2]}, disparity {disparity.data.shape}, mask {mask.data.shape}"
        )
    if not mask.data.any():
        return InpaintedBackground(rgb.copy(), DisparityMap(disparity.data.copy()),
                                   background_level=float("nan"), converged=True)
    # Diffusion only touches the hole and its 1-pixel ring, so solve on the
    # padded bounding box and paste back; anchors pin the crop edges.
    rows = np.flatnonzero(mask.data.any(axis=1))
    cols = np.flatnonzero(mask.data.any(axis=0))
    r = slice(max(rows[0] - 1, 0), min(rows[-1] + 2, mask.data.shape[0]))
    c = slice(max(cols[0] - 1, 0), min(cols[-1] + 2, mask.data.shape[1]))
    m = mask.data[r, c]
    d = disparity.data[r, c]
    ring = _boundary_ring(m)
    if not ring.any():
        raise ValueError("mask covers the whole image; no boundary pixels to anchor the fill")
    ring_vals = d[ring]
    d_bg = float(np.quantile(ring_vals, params.background_quantile))
    bg_anchor = ring & (d <= d_bg)
    if not bg_anchor.any():
        bg_anchor = ring & (d <= ring_vals.min())

    init = np.full_like(d, d[bg_anchor].mean())
    d_filled, d_conv = _diffuse(init, bg_anchor, d[bg_anchor], m, None,
                                params.max_iterations, params.convergence_tol)
    crop_d = d.copy()
    crop_d[m] = d_filled[m]

    color_anchor = ring & (d <= d_bg + 1e-3)
    if not color_anchor.any():
        color_anchor = bg_anchor
    crop_rgb = rgb.data[r, c]
    diff = np.abs(crop_d[None] - _neighbor_stack(crop_d))
    weights = np.exp(-params.depth_guidance_strength * diff)
    init_rgb = np.full_like(crop_rgb, crop_rgb[color_anchor].mean(axis=0))
    rgb_filled, c_conv = _diffuse(init_rgb, color_anchor, crop_rgb[color_anchor], m, weights,
                                  params.max_iterations, params.convergence_tol)

    out_d = disparity.data.copy()
    out_d[r, c][m] = crop_d[m]
    out_rgb = rgb.data.copy()
    out_rgb[r, c][m] = rgb_filled[m]

    return InpaintedBackground(ImageBuffer(out_rgb), DisparityMap(out_d),
                               background_level=d_bg, converged=bool(d_conv and c_conv))


def inject_external_inpaint(rgb_path, disparity_path, mask: BinaryMask,
                            original: tuple[ImageBuffer, DisparityMap]) -> InpaintedBackground:
    """Adopt an externally computed fill (e.g. a learned model's output)
    from files, keeping source pixels outside the mask bit-exact."""
    orig_rgb, orig_d = original
    filled_rgb = load_image(rgb_path)
    filled_d = load_disparity(disparity_path)
    shapes = {orig_rgb.data.shape[:2], orig_d.data.shape, mask.data.shape,
              filled_rgb.data.shape[:2], filled_d.data.shape}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch across inpaint inputs: {sorted(shapes)}")
    if orig_rgb.channels != filled_rgb.channels:
        raise ValueError(f"channel mismatch: original {orig_rgb.channels} vs external {filled_rgb.channels}")
    m = mask.data
    out_rgb = orig_rgb.data.copy()
    out_rgb[m] = filled_rgb.data[m]
    out_d = orig_d.data.copy()
    out_d[m] = filled_d.data[m]
    return InpaintedBackground(ImageBuffer(out_rgb), DisparityMap(out_d),
                               background_level=float("nan"), converged=True)
