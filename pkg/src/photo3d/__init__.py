"""Two-layer 3D photography pipeline.

Turns a single RGB image plus a disparity map (and optionally an alpha
matte) into a foreground RGBDA + inpainted background RGBD bundle, and
renders novel views from it with a software rasterizer.
"""

from .geometry_render import (
    CameraIntrinsics,
    CameraPose,
    DepthMapping,
    RenderedLayer,
    TriangleMesh,
    build_mesh,
    circular_path,
    composite,
    disparity_to_depth,
    render_layer,
    synthesize_view,
)
from .image_core import (
    DisparityMap,
    GradientField,
    ImageBuffer,
    ImageIOError,
    UnsupportedFormatError,
    load_disparity,
    load_image,
    read_pfm,
    save_image,
    write_pfm,
)
from .inpainting import (
    BinaryMask,
    InpaintParams,
    InpaintedBackground,
    MaskDatasetSpec,
    binarize_mask,
    generate_training_masks,
    inject_external_inpaint,
    inpaint_rgbd,
    random_stroke_mask,
)
from .pipeline import (
    LayerBundle,
    MetricsReport,
    PipelineConfig,
    PipelineError,
    export_bundle,
    load_bundle,
    metrics_report,
    process,
    psnr,
    render_path,
    ssim,
)
from .soft_layering import (
    DisocclusionParams,
    MatteInput,
    SoftMask,
    VisibilityMap,
    VisibilityParams,
    disocclusion_map,
    fuse_matte_visibility,
    occlusion_map,
    preprocess_disparity,
    visibility_map,
)

__version__ = "0.1.0"
