"""End-to-end orchestration: image + disparity in, layer bundle out,
novel-view frames, bundle serialization, and PSNR/SSIM evaluation.

The layer bundle is the product of the whole pipeline: a foreground
RGB + visibility + disparity triple plus the inpainted background
RGB + disparity pair, with the camera model needed to render them.
"""

from __future__ import annotations

import dataclasses
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .geometry_render import (
    CameraIntrinsics,
    CameraPose,
    DepthMapping,
    build_mesh,
    composite,
    render_layer,
    synthesize_view,
)
from .image_core import (
    DisparityMap,
    ImageBuffer,
    gaussian_kernel_1d,
    load_disparity,
    load_image,
    read_pfm,
    save_image,
    write_pfm,
)
from .inpainting import InpaintParams, binarize_mask, inject_external_inpaint, inpaint_rgbd
from .soft_layering import (
    DisocclusionParams,
    MatteInput,
    VisibilityMap,
    VisibilityParams,
    disocclusion_map,
    fuse_matte_visibility,
    occlusion_map,
    preprocess_disparity,
    visibility_map,
)

__all__ = [
    "LayerBundle",
    "PipelineConfig",
    "MetricsReport",
    "PipelineError",
    "process",
    "export_bundle",
    "load_bundle",
    "render_path",
    "psnr",
    "ssim",
    "metrics_report",
]

MANIFEST_VERSION = 1
PSNR_CAP = 99.0


class PipelineError(RuntimeError):
    """Component failure wrapped with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


@dataclass
class LayerBundle:
    """Two-layer scene: foreground RGBDA + inpainted background RGBD."""

    fg_rgb: ImageBuffer
    fg_visibility: VisibilityMap
    fg_disparity: DisparityMap
    bg_rgb: ImageBuffer
    bg_disparity: DisparityMap
    intrinsics: CameraIntrinsics
    mapping: DepthMapping

    def __post_init__(self):
        dims = {
            self.fg_rgb.data.shape[:2],
            self.fg_visibility.data.shape,
            self.fg_disparity.data.shape,
            self.bg_rgb.data.shape[:2],
            self.bg_disparity.data.shape,
            (self.intrinsics.height, self.intrinsics.width),
        }
        if len(dims) != 1:
            raise ValueError(f"bundle rasters/intrinsics disagree on dimensions: {sorted(dims)}")
        if self.fg_rgb.channels != self.bg_rgb.channels:
            raise ValueError(f"fg/bg channel mismatch: {self.fg_rgb.channels} vs {self.bg_rgb.channels}")


@dataclass
class PipelineConfig:
    """Inputs, parameters, and output location for one pipeline run."""

    image_path: str
    disparity_path: str
    matte_path: str | None = None
    external_inpaint_rgb: str | None = None
    external_inpaint_disparity: str | None = None
    normalize_disparity: bool = False
    visibility: VisibilityParams = VisibilityParams()
    disocclusion: DisocclusionParams = DisocclusionParams()
    inpaint: InpaintParams = InpaintParams()
    mapping: DepthMapping = DepthMapping()
    preprocess_sigma: float = 1.5
    preprocess_pool_radius: int = 2
    matte_dilation_radius: int = 8
    focal_scale: float = 0.8
    path_radius: float = 0.05
    path_depth_offset: float = 0.0
    path_target_depth: float = 5.0
    path_frames: int = 60
    mesh_downsample: int = 1
    output_dir: str = "out"

    _NESTED = {
        "visibility": VisibilityParams,
        "disocclusion": DisocclusionParams,
        "inpaint": InpaintParams,
        "mapping": DepthMapping,
    }

    def __post_init__(self):
        if self.preprocess_sigma < 0:
            raise ValueError(f"preprocess_sigma must be >= 0, got {self.preprocess_sigma}")
        if self.preprocess_pool_radius < 0:
            raise ValueError(f"preprocess_pool_radius must be >= 0, got {self.preprocess_pool_radius}")
        if self.matte_dilation_radius < 0:
            raise ValueError(f"matte_dilation_radius must be >= 0, got {self.matte_dilation_radius}")
        if self.focal_scale <= 0:
            raise ValueError(f"focal_scale must be positive, got {self.focal_scale}")
        if (self.external_inpaint_rgb is None) != (self.external_inpaint_disparity is None):
            raise ValueError("external inpaint requires both the RGB and the disparity file")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            if key in cls._NESTED and isinstance(value, dict):
                kwargs[key] = cls._NESTED[key](**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def process(config: PipelineConfig, *, artifacts: dict | None = None) -> LayerBundle:
    """Run the full decomposition: load, preprocess, visibility (matte-fused
    if a matte is given), disocclusion mask, background inpainting.

    Component errors surface as PipelineError tagged with the stage.
    When a dict is passed as artifacts, intermediate maps are recorded
    under "visibility_raw", "occlusion", "disocclusion", and "inpaint_mask".
    """
    with _stage("load"):
        for label, p in (("image", config.image_path), ("disparity", config.disparity_path),
                         ("matte", config.matte_path)):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"{label} file not found: {p}")
        image = load_image(config.image_path)
        if image.channels == 4:
            image = ImageBuffer(image.data[:, :, :3])
        elif image.channels == 1:
            image = ImageBuffer(np.repeat(image.data, 3, axis=2))
        disparity_raw = load_disparity(config.disparity_path, normalize=config.normalize_disparity)
        if disparity_raw.data.shape != image.data.shape[:2]:
            raise ValueError(
                f"disparity {disparity_raw.data.shape} does not match image {image.data.shape[:2]}"
            )
        matte = None
        if config.matte_path is not None:
            matte_img = load_image(config.matte_path)
            if matte_img.channels != 1:
                raise ValueError(f"matte must be single-channel, got {matte_img.channels} channels")
            if matte_img.data.shape[:2] != image.data.shape[:2]:
                raise ValueError(
                    f"matte {matte_img.data.shape[:2]} does not match image {image.data.shape[:2]}"
                )
            matte = matte_img.data[:, :, 0]
        intrinsics = CameraIntrinsics.default(image.width, image.height, config.focal_scale)

    with _stage("preprocess"):
        disparity = preprocess_disparity(disparity_raw, config.preprocess_sigma,
                                         config.preprocess_pool_radius)

    with _stage("visibility"):
        vis = visibility_map(disparity, config.visibility)
        if artifacts is not None:
            artifacts["visibility_raw"] = vis
        if matte is not None:
            occ = occlusion_map(disparity, config.disocclusion)
            vis = fuse_matte_visibility(vis, MatteInput(matte, config.matte_dilation_radius), occ)
            if artifacts is not None:
                artifacts["occlusion"] = occ

    with _stage("disocclusion"):
        soft = disocclusion_map(disparity, config.disocclusion)
        mask = binarize_mask(soft, config.inpaint.mask_threshold)
        if artifacts is not None:
            artifacts["disocclusion"] = soft
            artifacts["inpaint_mask"] = mask

    with _stage("inpaint"):
        if config.external_inpaint_rgb is not None:
            background = inject_external_inpaint(config.external_inpaint_rgb,
                                                 config.external_inpaint_disparity,
                                                 mask, (image, disparity))
        else:
            background = inpaint_rgbd(image, disparity, mask, config.inpaint)

    return LayerBundle(fg_rgb=image, fg_visibility=vis, fg_disparity=disparity,
                       bg_rgb=background.rgb, bg_disparity=background.disparity,
                       intrinsics=intrinsics, mapping=config.mapping)


# ---------------------------------------------------------------------------
# Bundle serialization
# ---------------------------------------------------------------------------

_FG_RGB = "fg_rgb.png"
_FG_ALPHA = "fg_alpha.png"
_FG_DISP = "fg_disp.pfm"
_BG_RGB = "bg_rgb.png"
_BG_DISP = "bg_disp.pfm"


def export_bundle(bundle: LayerBundle, out_dir) -> Path:
    """Write a bundle directory: manifest.json plus 16-bit PNG color/alpha
    and PFM disparity assets.  Returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / _FG_RGB, bundle.fg_rgb, bit_depth=16)
    save_image(out / _FG_ALPHA, ImageBuffer(bundle.fg_visibility.data), bit_depth=16)
    write_pfm(out / _FG_DISP, bundle.fg_disparity.data)
    save_image(out / _BG_RGB, bundle.bg_rgb, bit_depth=16)
    write_pfm(out / _BG_DISP, bundle.bg_disparity.data)
    manifest = {
        "version": MANIFEST_VERSION,
        "intrinsics": {
            "fx": bundle.intrinsics.fx,
            "fy": bundle.intrinsics.fy,
            "cx": bundle.intrinsics.cx,
            "cy": bundle.intrinsics.cy,
            "width": bundle.intrinsics.width,
            "height": bundle.intrinsics.height,
        },
        "mapping": {"d_min": bundle.mapping.d_min},
        "layers": {
            "fg": {"rgb": _FG_RGB, "alpha": _FG_ALPHA, "disparity": _FG_DISP},
            "bg": {"rgb": _BG_RGB, "disparity": _BG_DISP},
        },
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


def _require(mapping: dict, key: str, context: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ValueError(f"manifest missing field '{context}.{key}'" if context else
                         f"manifest missing field '{key}'")
    return mapping[key]


def load_bundle(bundle_dir) -> LayerBundle:
    """Read a bundle directory written by export_bundle."""
    root = Path(bundle_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json in {root}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = _require(manifest, "version", "")
    if version != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {version!r}; this reader handles {MANIFEST_VERSION}")
    intr = _require(manifest, "intrinsics", "")
    intrinsics = CameraIntrinsics(
        fx=float(_require(intr, "fx", "intrinsics")),
        fy=float(_require(intr, "fy", "intrinsics")),
        cx=float(_require(intr, "cx", "intrinsics")),
        cy=float(_require(intr, "cy", "intrinsics")),
        width=int(_require(intr, "width", "intrinsics")),
        height=int(_require(intr, "height", "intrinsics")),
    )
    mapping = DepthMapping(float(_require(_require(manifest, "mapping", ""), "d_min", "mapping")))
    layers = _require(manifest, "layers", "")
    fg = _require(layers, "fg", "layers")
    bg = _require(layers, "bg", "layers")
    fg_rgb = load_image(root / _require(fg, "rgb", "layers.fg"))
    fg_alpha = load_image(root / _require(fg, "alpha", "layers.fg"))
    fg_disp = DisparityMap(read_pfm(root / _require(fg, "disparity", "layers.fg")))
    bg_rgb = load_image(root / _require(bg, "rgb", "layers.bg"))
    bg_disp = DisparityMap(read_pfm(root / _require(bg, "disparity", "layers.bg")))
    if fg_alpha.channels != 1:
        raise ValueError(f"fg alpha must be single-channel, got {fg_alpha.channels}")
    return LayerBundle(fg_rgb=fg_rgb, fg_visibility=VisibilityMap(fg_alpha.data[:, :, 0]),
                       fg_disparity=fg_disp, bg_rgb=bg_rgb, bg_disparity=bg_disp,
                       intrinsics=intrinsics, mapping=mapping)


def render_path(bundle: LayerBundle, path: list[CameraPose], out_dir, *,
                mesh_downsample: int = 1) -> tuple[list[Path], dict]:
    """Render one frame per pose into out_dir as zero-padded PNGs.

    Meshes are built once and reused across frames.  Returns the frame
    paths and a timing report (also written to timings.json; timings are
    diagnostic and excluded from determinism guarantees).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    fg_mesh = build_mesh(bundle.fg_disparity, bundle.intrinsics, bundle.mapping, mesh_downsample)
    bg_mesh = build_mesh(bundle.bg_disparity, bundle.intrinsics, bundle.mapping, mesh_downsample)
    mesh_ms = (time.perf_counter() - t0) * 1000.0

    digits = max(4, len(str(max(len(path) - 1, 0))))
    files: list[Path] = []
    frame_stats = []
    for k, pose in enumerate(path):
        t1 = time.perf_counter()
        fg = render_layer(fg_mesh, bundle.fg_rgb, bundle.fg_visibility, pose, bundle.intrinsics)
        bg = render_layer(bg_mesh, bundle.bg_rgb, None, pose, bundle.intrinsics)
        frame = composite(fg, bg)
        t2 = time.perf_counter()
        frame_path = out / f"frame_{k:0{digits}d}.png"
        save_image(frame_path, frame, bit_depth=8)
        t3 = time.perf_counter()
        files.append(frame_path)
        frame_stats.append({
            "file": frame_path.name,
            "render_ms": (t2 - t1) * 1000.0,
            "write_ms": (t3 - t2) * 1000.0,
        })
    timings = {
        "mesh_build_ms": mesh_ms,
        "frames": frame_stats,
        "total_ms": (time.perf_counter() - t0) * 1000.0,
    }
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2)
        fh.write("\n")
    return files, timings


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    """Per-pair and aggregate PSNR/SSIM; lpips reserved as null."""

    border_crop_fraction: float
    pairs: list[dict] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([p["psnr"] for p in self.pairs]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([p["ssim"] for p in self.pairs]))

    def as_dict(self) -> dict:
        return {
            "border_crop_fraction": self.border_crop_fraction,
            "pairs": self.pairs,
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "lpips": None,
        }


def _cropped_pair(a: ImageBuffer, b: ImageBuffer, border_crop: float) -> tuple[np.ndarray, np.ndarray]:
    if a.data.shape != b.data.shape:
        raise ValueError(f"image dimensions differ: {a.data.shape} vs {b.data.shape}")
    if not 0.0 <= border_crop < 0.5:
        raise ValueError(f"border_crop must be in [0, 0.5), got {border_crop}")
    h, w = a.data.shape[:2]
    dy = int(h * border_crop)
    dx = int(w * border_crop)
    return a.data[dy:h - dy, dx:w - dx], b.data[dy:h - dy, dx:w - dx]


def psnr(a: ImageBuffer, b: ImageBuffer, border_crop: float = 0.2) -> float:
    """PSNR in dB over the border-cropped region, capped at 99."""
    ca, cb = _cropped_pair(a, b, border_crop)
    mse = float(np.mean((ca - cb) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def ssim(a: ImageBuffer, b: ImageBuffer, border_crop: float = 0.2) -> float:
    """Single-scale SSIM (11x11 Gaussian window, sigma 1.5) over the
    border-cropped region, averaged over valid window positions and
    channels."""
    ca, cb = _cropped_pair(a, b, border_crop)
    kernel = gaussian_kernel_1d(1.5)
    radius = len(kernel) // 2
    if ca.shape[0] < 2 * radius + 1 or ca.shape[1] < 2 * radius + 1:
        raise ValueError(f"image too small for SSIM window after crop: {ca.shape[:2]}")
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2

    def win_mean(x: np.ndarray) -> np.ndarray:
        out = correlate1d(x, kernel, axis=0, mode="constant")
        out = correlate1d(out, kernel, axis=1, mode="constant")
        return out[radius:-radius, radius:-radius]

    scores = []
    for ch in range(ca.shape[2]):
        x = ca[:, :, ch]
        y = cb[:, :, ch]
        mu_x = win_mean(x)
        mu_y = win_mean(y)
        xx = win_mean(x * x) - mu_x * mu_x
        yy = win_mean(y * y) - mu_y * mu_y
        xy = win_mean(x * y) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
        den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
        scores.append(num / den)
    return float(np.mean(scores))


def metrics_report(pred_dir, gt_dir, border_crop: float = 0.2) -> MetricsReport:
    """Evaluate same-named PNGs from two directories pairwise."""
    pred_root = Path(pred_dir)
    gt_root = Path(gt_dir)
    pred_names = {p.name for p in pred_root.glob("*.png")}
    gt_names = {p.name for p in gt_root.glob("*.png")}
    unmatched = sorted(pred_names ^ gt_names)
    if unmatched:
        raise ValueError(f"unmatched file names between {pred_root} and {gt_root}: {', '.join(unmatched)}")
    common = sorted(pred_names & gt_names)
    if not common:
        raise ValueError(f"no matching PNG pairs between {pred_root} and {gt_root}")
    report = MetricsReport(border_crop_fraction=border_crop)
    for name in common:
        a = load_image(pred_root / name)
        b = load_image(gt_root / name)
        report.pairs.append({
            "name": name,
            "psnr": psnr(a, b, border_crop),
            "ssim": ssim(a, b, border_crop),
        })
    return report
