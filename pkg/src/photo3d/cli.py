"""Command-line entry points for the layered 3D photo pipeline.

Subcommands: process (decompose image+disparity into a layer bundle),
render (novel-view frames along a circular path), masks (training-mask
dataset generation), inpaint (standalone RGBD hole filling), metrics
(PSNR/SSIM between directories), export/inspect (bundle utilities).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .geometry_render import circular_path
from .image_core import ImageBuffer, load_disparity, load_image, save_image, write_pfm
from .inpainting import (
    BinaryMask,
    InpaintParams,
    MaskDatasetSpec,
    generate_training_masks,
    inpaint_rgbd,
)
from .pipeline import (
    PipelineConfig,
    export_bundle,
    load_bundle,
    metrics_report,
    process,
    render_path,
)

# flag name -> (config section or None, field)
_CONFIG_FLAGS = {
    "image": (None, "image_path"),
    "disparity": (None, "disparity_path"),
    "matte": (None, "matte_path"),
    "external_rgb": (None, "external_inpaint_rgb"),
    "external_disparity": (None, "external_inpaint_disparity"),
    "normalize_disparity": (None, "normalize_disparity"),
    "sigma": (None, "preprocess_sigma"),
    "pool_radius": (None, "preprocess_pool_radius"),
    "matte_dilation": (None, "matte_dilation_radius"),
    "focal_scale": (None, "focal_scale"),
    "mesh_downsample": (None, "mesh_downsample"),
    "output": (None, "output_dir"),
    "beta": ("visibility", "beta"),
    "rho": ("disocclusion", "rho"),
    "gamma": ("disocclusion", "gamma"),
    "m": ("disocclusion", "m"),
    "downsample_factor": ("disocclusion", "downsample_factor"),
    "mask_threshold": ("inpaint", "mask_threshold"),
    "depth_guidance": ("inpaint", "depth_guidance_strength"),
    "background_quantile": ("inpaint", "background_quantile"),
    "max_iterations": ("inpaint", "max_iterations"),
    "convergence_tol": ("inpaint", "convergence_tol"),
    "d_min": ("mapping", "d_min"),
}


def _build_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file first, command-line flags override."""
    raw: dict = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"config file must hold a JSON object: {args.config}")
    for flag, (section, name) in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if section is None:
            raw[name] = value
        else:
            raw.setdefault(section, {})[name] = value
    if "image_path" not in raw or "disparity_path" not in raw:
        raise ValueError("an input image and disparity are required (flags or config file)")
    return PipelineConfig.from_dict(raw)


def _add_process_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--image", help="input RGB PNG")
    p.add_argument("--disparity", help="input disparity (PFM or 16-bit PNG)")
    p.add_argument("--matte", help="optional alpha matte PNG (single channel)")
    p.add_argument("--external-rgb", dest="external_rgb", help="externally inpainted RGB to inject")
    p.add_argument("--external-disparity", dest="external_disparity",
                   help="externally inpainted disparity to inject")
    p.add_argument("--normalize-disparity", dest="normalize_disparity",
                   action="store_const", const=True, help="min-max normalize disparity on load")
    p.add_argument("--beta", type=float, help="visibility gradient scale")
    p.add_argument("--rho", type=float, help="scanline distance penalty")
    p.add_argument("--gamma", type=float, help="soft mask steepness")
    p.add_argument("--m", type=int, help="scanline half-extent in pixels")
    p.add_argument("--downsample-factor", dest="downsample_factor", type=int,
                   help="compute (dis)occlusion maps at reduced resolution")
    p.add_argument("--mask-threshold", dest="mask_threshold", type=float)
    p.add_argument("--depth-guidance", dest="depth_guidance", type=float,
                   help="color diffusion depth-edge weight strength")
    p.add_argument("--background-quantile", dest="background_quantile", type=float)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--convergence-tol", dest="convergence_tol", type=float)
    p.add_argument("--d-min", dest="d_min", type=float, help="disparity clamp for depth mapping")
    p.add_argument("--sigma", type=float, help="preprocess Gaussian sigma")
    p.add_argument("--pool-radius", dest="pool_radius", type=int, help="preprocess max-pool radius")
    p.add_argument("--matte-dilation", dest="matte_dilation", type=int)
    p.add_argument("--focal-scale", dest="focal_scale", type=float,
                   help="focal length as a fraction of max(W, H)")
    p.add_argument("--mesh-downsample", dest="mesh_downsample", type=int)
    p.add_argument("-o", "--output", help="bundle output directory")


def _cmd_process(args) -> int:
    config = _build_config(args)
    artifacts: dict | None = {} if args.dump_intermediates else None
    bundle = process(config, artifacts=artifacts)
    out = Path(config.output_dir)
    manifest = export_bundle(bundle, out)
    if artifacts is not None:
        inter = out / "intermediates"
        inter.mkdir(exist_ok=True)
        save_image(inter / "visibility_raw.png", ImageBuffer(artifacts["visibility_raw"].data), bit_depth=16)
        write_pfm(inter / "disocclusion.pfm", artifacts["disocclusion"].data)
        if "occlusion" in artifacts:
            write_pfm(inter / "occlusion.pfm", artifacts["occlusion"].data)
        save_image(inter / "inpaint_mask.png", ImageBuffer(artifacts["inpaint_mask"].data.astype(np.float64)))
    print(f"bundle written to {manifest.parent} ({bundle.intrinsics.width}x{bundle.intrinsics.height})")
    return 0


def _cmd_render(args) -> int:
    bundle = load_bundle(args.bundle)
    path = circular_path(args.radius, args.depth_offset, args.frames,
                         bundle.intrinsics, args.target_depth)
    files, timings = render_path(bundle, path, args.output, mesh_downsample=args.mesh_downsample)
    print(f"{len(files)} frames written to {args.output} "
          f"(mesh {timings['mesh_build_ms']:.0f} ms, total {timings['total_ms']:.0f} ms)")
    return 0


def _cmd_masks(args) -> int:
    disparity = load_disparity(args.disparity, normalize=bool(args.normalize_disparity))
    image = load_image(args.image)
    spec = MaskDatasetSpec(
        stroke_count_range=tuple(args.stroke_count_range),
        stroke_width_range=tuple(args.stroke_width_range),
        stroke_length_range=tuple(args.stroke_length_range),
        mix_ratio=args.mix_ratio,
        seed=args.seed,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(args.count):
        seed_i = args.seed + i
        rng = np.random.default_rng(seed_i)
        mask, kind = generate_training_masks(disparity, spec, rng)
        save_image(out / f"{i:05d}_image.png", image)
        write_pfm(out / f"{i:05d}_disparity.pfm", disparity.data)
        save_image(out / f"{i:05d}_mask.png", ImageBuffer(mask.data.astype(np.float64)))
        lines.append(json.dumps({"id": i, "mask_kind": kind, "seed": seed_i}))
    with open(out / "masks.jsonl", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"{args.count} samples written to {out}")
    return 0


def _cmd_inpaint(args) -> int:
    image = load_image(args.image)
    if image.channels == 4:
        image = ImageBuffer(image.data[:, :, :3])
    disparity = load_disparity(args.disparity, normalize=bool(args.normalize_disparity))
    mask_img = load_image(args.mask)
    if mask_img.channels != 1:
        raise ValueError(f"mask must be a single-channel PNG, got {mask_img.channels} channels")
    mask = BinaryMask(mask_img.data[:, :, 0] > 0.5)
    params = InpaintParams(
        mask_threshold=args.mask_threshold,
        depth_guidance_strength=args.depth_guidance,
        background_quantile=args.background_quantile,
        max_iterations=args.max_iterations,
        convergence_tol=args.convergence_tol,
    )
    result = inpaint_rgbd(image, disparity, mask, params)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / "inpainted_rgb.png", result.rgb, bit_depth=16)
    write_pfm(out / "inpainted_disp.pfm", result.disparity.data)
    info = {"background_level": result.background_level, "converged": result.converged,
            "masked_pixels": mask.count()}
    with open(out / "inpaint.json", "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2)
        fh.write("\n")
    if not result.converged:
        print("warning: diffusion did not reach convergence_tol within max_iterations", file=sys.stderr)
    print(f"inpainted layer written to {out}")
    return 0


def _cmd_metrics(args) -> int:
    report = metrics_report(args.pred, args.gt, args.border_crop)
    payload = json.dumps(report.as_dict(), indent=2)
    if args.output is not None:
        Path(args.output).write_text(payload + "\n", encoding="utf-8")
        print(f"report written to {args.output}")
    else:
        print(payload)
    return 0


def _cmd_export(args) -> int:
    bundle = load_bundle(args.bundle)
    manifest = export_bundle(bundle, args.output)
    print(f"bundle re-exported to {manifest.parent}")
    return 0


def _cmd_inspect(args) -> int:
    bundle = load_bundle(args.bundle)
    info = {
        "size": [bundle.intrinsics.width, bundle.intrinsics.height],
        "intrinsics": {"fx": bundle.intrinsics.fx, "fy": bundle.intrinsics.fy,
                       "cx": bundle.intrinsics.cx, "cy": bundle.intrinsics.cy},
        "d_min": bundle.mapping.d_min,
        "fg_disparity_range": [float(bundle.fg_disparity.data.min()), float(bundle.fg_disparity.data.max())],
        "bg_disparity_range": [float(bundle.bg_disparity.data.min()), float(bundle.bg_disparity.data.max())],
        "visibility_mean": float(bundle.fg_visibility.data.mean()),
        "visibility_min": float(bundle.fg_visibility.data.min()),
    }
    print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photo3d",
                                     description="Two-layer 3D photo pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", help="decompose an image + disparity into a layer bundle")
    _add_process_flags(p)
    p.add_argument("--dump-intermediates", action="store_true",
                   help="also write visibility/disocclusion/mask intermediates")
    p.set_defaults(func=_cmd_process)

    p = sub.add_parser("render", help="render novel-view frames along a circular path")
    p.add_argument("--bundle", required=True, help="bundle directory (manifest.json)")
    p.add_argument("-o", "--output", required=True, help="frame output directory")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--radius", type=float, default=0.05, help="circle radius in world units")
    p.add_argument("--depth-offset", dest="depth_offset", type=float, default=0.0)
    p.add_argument("--target-depth", dest="target_depth", type=float, default=5.0,
                   help="look-at point depth on the optical axis")
    p.add_argument("--mesh-downsample", dest="mesh_downsample", type=int, default=1)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("masks", help="generate a self-supervised inpainting mask dataset")
    p.add_argument("--image", required=True)
    p.add_argument("--disparity", required=True)
    p.add_argument("--normalize-disparity", dest="normalize_disparity",
                   action="store_const", const=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mix-ratio", dest="mix_ratio", type=float, default=0.5,
                   help="fraction of samples using occlusion masks")
    p.add_argument("--stroke-count-range", dest="stroke_count_range", type=int, nargs=2,
                   default=[1, 4], metavar=("LO", "HI"))
    p.add_argument("--stroke-width-range", dest="stroke_width_range", type=int, nargs=2,
                   default=[6, 24], metavar=("LO", "HI"))
    p.add_argument("--stroke-length-range", dest="stroke_length_range", type=float, nargs=2,
                   default=[40.0, 160.0], metavar=("LO", "HI"))
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_masks)

    p = sub.add_parser("inpaint", help="fill a masked region of an RGB-D pair")
    p.add_argument("--image", required=True)
    p.add_argument("--disparity", required=True)
    p.add_argument("--mask", required=True, help="PNG mask, nonzero = fill")
    p.add_argument("--normalize-disparity", dest="normalize_disparity",
                   action="store_const", const=True)
    p.add_argument("--mask-threshold", dest="mask_threshold", type=float, default=0.5)
    p.add_argument("--depth-guidance", dest="depth_guidance", type=float, default=50.0)
    p.add_argument("--background-quantile", dest="background_quantile", type=float, default=0.3)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=10000)
    p.add_argument("--convergence-tol", dest="convergence_tol", type=float, default=1e-5)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_inpaint)

    p = sub.add_parser("metrics", help="PSNR/SSIM between same-named PNGs in two directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--border-crop", dest="border_crop", type=float, default=0.2)
    p.add_argument("-o", "--output", help="write JSON report here instead of stdout")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("export", help="load a bundle and re-export it (validates the round trip)")
    p.add_argument("--bundle", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("inspect", help="print a summary of a bundle")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surfaced as a message, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
