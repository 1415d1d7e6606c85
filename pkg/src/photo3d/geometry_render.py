"""Pinhole geometry, grid meshing, layer rendering, and camera paths.

Disparity back-projects to a 3D point per pixel (z = 1/max(d, d_min));
grid neighbors connect into triangles; a software z-buffer rasterizer
renders each textured layer into a novel view; foreground composites
over background by its resampled visibility.

Conventions: camera looks down +z with y down; world frame = source
camera frame; pixel centers at integer coordinates; poses map world to
camera, X_cam = R X + t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .image_core import DisparityMap, ImageBuffer
from .rasterize import raster_triangles
from .soft_layering import VisibilityMap

if TYPE_CHECKING:
    from .pipeline import LayerBundle

__all__ = [
    "Z_NEAR",
    "CameraIntrinsics",
    "CameraPose",
    "DepthMapping",
    "TriangleMesh",
    "RenderedLayer",
    "disparity_to_depth",
    "build_mesh",
    "render_layer",
    "composite",
    "circular_path",
    "synthesize_view",
]

Z_NEAR = 1e-3


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}")

    @classmethod
    def default(cls, width: int, height: int, focal_scale: float = 0.8) -> "CameraIntrinsics":
        """fx = fy = focal_scale * max(W, H), principal point at the grid center."""
        f = focal_scale * max(width, height)
        return cls(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                   width=width, height=height)


@dataclass(frozen=True)
class CameraPose:
    """Rigid world-to-camera transform: X_cam = rotation @ X + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-6):
            raise ValueError("rotation must be orthonormal within 1e-6")
        if abs(np.linalg.det(rot) - 1.0) > 1e-6:
            raise ValueError(f"rotation must have det +1, got {np.linalg.det(rot)}")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def look_at(cls, position, target, up=(0.0, 1.0, 0.0)) -> "CameraPose":
        """Pose positioned at `position`, z-axis toward `target`.

        `up` is the world +y direction (down in image space, matching
        the y-down camera); the default keeps a zero-roll horizon.
        """
        position = np.asarray(position, dtype=np.float64).reshape(3)
        target = np.asarray(target, dtype=np.float64).reshape(3)
        forward = target - position
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("look_at target coincides with camera position")
        forward = forward / norm
        right = np.cross(up, forward)
        rnorm = np.linalg.norm(right)
        if rnorm < 1e-9:
            raise ValueError("view direction is parallel to the up vector")
        right = right / rnorm
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward])
        return cls(rot, -rot @ position)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to (N, 3) world points."""
        return points @ self.rotation.T + self.translation


@dataclass(frozen=True)
class DepthMapping:
    """Disparity-to-depth mapping z = 1 / max(d, d_min)."""

    d_min: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.d_min < 1.0:
            raise ValueError(f"d_min must be in (0, 1), got {self.d_min}")


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with per-vertex texture coordinates."""

    vertices: np.ndarray
    texcoords: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.texcoords = np.ascontiguousarray(self.texcoords, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError(f"vertices must be (N, 3), got {self.vertices.shape}")
        if self.texcoords.shape != (len(self.vertices), 2):
            raise ValueError(f"texcoords must be (N, 2), got {self.texcoords.shape}")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle indices out of range")


@dataclass
class RenderedLayer:
    """One layer rendered into a target view."""

    rgb: ImageBuffer
    alpha: np.ndarray
    coverage: np.ndarray
    zbuffer: np.ndarray

    def __post_init__(self):
        shape = self.alpha.shape
        if self.rgb.data.shape[:2] != shape or self.coverage.shape != shape or self.zbuffer.shape != shape:
            raise ValueError("rendered layer rasters must share dimensions")
        if not np.isfinite(self.zbuffer[self.coverage > 0]).all():
            raise ValueError("zbuffer must be finite on covered pixels")


def disparity_to_depth(disparity, mapping: DepthMapping = DepthMapping()) -> np.ndarray:
    """Depth z = 1 / max(d, d_min), elementwise."""
    d = disparity.data if isinstance(disparity, DisparityMap) else np.asarray(disparity, dtype=np.float64)
    return 1.0 / np.maximum(d, mapping.d_min)


def _grid_coords(size: int, step: int) -> np.ndarray:
    coords = np.arange(0, size, step)
    if coords[-1] != size - 1:
        coords = np.append(coords, size - 1)
    return coords


def build_mesh(disparity: DisparityMap, intr: CameraIntrinsics,
               mapping: DepthMapping = DepthMapping(), downsample: int = 1) -> TriangleMesh:
    """Back-project a disparity grid into a camera-space triangle mesh.

    Vertices sit at every downsample-th pixel (always including the last
    row/column); each grid cell splits into two triangles along its
    top-left to bottom-right diagonal.  Texture coordinates address the
    full-resolution image at the vertex's pixel center.
    """
    if downsample < 1 or int(downsample) != downsample:
        raise ValueError(f"downsample must be an integer >= 1, got {downsample}")
    h, w = disparity.data.shape
    if (w, h) != (intr.width, intr.height):
        raise ValueError(f"disparity {w}x{h} does not match intrinsics {intr.width}x{intr.height}")
    xs = _grid_coords(w, downsample)
    ys = _grid_coords(h, downsample)
    grid_x, grid_y = np.meshgrid(xs.astype(np.float64), ys.astype(np.float64))
    z = disparity_to_depth(disparity.data[np.ix_(ys, xs)], mapping)
    verts = np.stack([
        z * (grid_x - intr.cx) / intr.fx,
        z * (grid_y - intr.cy) / intr.fy,
        z,
    ], axis=-1).reshape(-1, 3)
    tcs = np.stack([(grid_x + 0.5) / w, (grid_y + 0.5) / h], axis=-1).reshape(-1, 2)

    rows, cols = len(ys), len(xs)
    idx = np.arange(rows * cols).reshape(rows, cols)
    tl = idx[:-1, :-1].ravel()
    tr = idx[:-1, 1:].ravel()
    br = idx[1:, 1:].ravel()
    bl = idx[1:, :-1].ravel()
    tris = np.concatenate([
        np.stack([tl, tr, br], axis=1),
        np.stack([tl, br, bl], axis=1),
    ])
    return TriangleMesh(verts, tcs, tris)


def _clip_near(verts: np.ndarray, tcs: np.ndarray, tris: np.ndarray):
    """Clip triangles against z = Z_NEAR (Sutherland-Hodgman), splitting
    crossers into fans; fully behind triangles drop."""
    inside = verts[:, 2] > Z_NEAR
    tri_inside = inside[tris]
    n_in = tri_inside.sum(axis=1)
    kept = tris[n_in == 3]
    mixed = tris[(n_in > 0) & (n_in < 3)]
    if len(mixed) == 0:
        return verts, tcs, kept
    new_pos: list[np.ndarray] = []
    new_tc: list[np.ndarray] = []
    new_tris: list[tuple[int, int, int]] = []
    base = len(verts)
    for tri in mixed:
        poly_pos: list[np.ndarray] = []
        poly_tc: list[np.ndarray] = []
        for i in range(3):
            a, b = tri[i], tri[(i + 1) % 3]
            pa, pb = verts[a], verts[b]
            if inside[a]:
                poly_pos.append(pa)
                poly_tc.append(tcs[a])
            if inside[a] != inside[b]:
                t = (Z_NEAR - pa[2]) / (pb[2] - pa[2])
                poly_pos.append(pa + t * (pb - pa))
                poly_tc.append(tcs[a] + t * (tcs[b] - tcs[a]))
        if len(poly_pos) < 3:
            continue
        start = base + len(new_pos)
        new_pos.extend(poly_pos)
        new_tc.extend(poly_tc)
        for j in range(1, len(poly_pos) - 1):
            new_tris.append((start, start + j, start + j + 1))
    all_verts = np.concatenate([verts, np.asarray(new_pos).reshape(-1, 3)])
    all_tcs = np.concatenate([tcs, np.asarray(new_tc).reshape(-1, 2)])
    all_tris = np.concatenate([kept, np.asarray(new_tris, dtype=np.int64).reshape(-1, 3)])
    return all_verts, all_tcs, all_tris


def render_layer(mesh: TriangleMesh, rgb_texture: ImageBuffer, alpha_texture,
                 pose: CameraPose, intr: CameraIntrinsics) -> RenderedLayer:
    """Render one textured layer into the view given by pose.

    alpha_texture (a VisibilityMap, a 2D array, or None) rides along as
    an extra sampled channel; without one, alpha equals coverage.
    Uncovered pixels have rgb = 0, alpha = 0, zbuffer = +inf.
    """
    if rgb_texture.channels not in (1, 3):
        raise ValueError(f"rgb texture must have 1 or 3 channels, got {rgb_texture.channels}")
    tex = rgb_texture.data
    if alpha_texture is not None:
        a = alpha_texture.data if isinstance(alpha_texture, VisibilityMap) else np.asarray(alpha_texture, dtype=np.float64)
        if a.shape != tex.shape[:2]:
            raise ValueError(f"alpha texture {a.shape} does not match rgb texture {tex.shape[:2]}")
        tex = np.concatenate([tex, a[..., None]], axis=2)
    tex = np.ascontiguousarray(tex)

    verts = pose.transform(mesh.vertices)
    verts, tcs, tris = _clip_near(verts, mesh.texcoords, mesh.triangles)
    z = verts[:, 2]
    safe_z = np.where(z > 0, z, 1.0)
    sx = intr.fx * verts[:, 0] / safe_z + intr.cx
    sy = intr.fy * verts[:, 1] / safe_z + intr.cy

    h, w = intr.height, intr.width
    color = np.zeros((h, w, tex.shape[2]))
    depth = np.full((h, w), np.inf)
    cover = np.zeros((h, w), dtype=np.uint8)
    if len(tris):
        raster_triangles(np.ascontiguousarray(sx), np.ascontiguousarray(sy),
                         np.ascontiguousarray(z), np.ascontiguousarray(tcs),
                         np.ascontiguousarray(tris), tex, color, depth, cover)

    if alpha_texture is not None:
        alpha = np.clip(color[:, :, -1], 0.0, 1.0) * cover
        rgb = color[:, :, :-1]
    else:
        alpha = cover.astype(np.float64)
        rgb = color
    return RenderedLayer(ImageBuffer(np.clip(rgb, 0.0, 1.0)), alpha, cover, depth)


def composite(fg: RenderedLayer, bg: RenderedLayer, *, stats: dict | None = None) -> ImageBuffer:
    """Foreground over background: out = A * I_fg + (1 - A) * I_bg with
    A = fg.alpha * fg.coverage.

    Pixels covered by neither layer come out black; their count is
    reported through stats["uncovered_pixels"] when a dict is passed.
    """
    if fg.alpha.shape != bg.alpha.shape:
        raise ValueError(f"layer dimensions differ: {fg.alpha.shape} vs {bg.alpha.shape}")
    a = (fg.alpha * fg.coverage)[..., None]
    out = a * fg.rgb.data + (1.0 - a) * bg.rgb.data
    if stats is not None:
        stats["uncovered_pixels"] = int(((fg.coverage == 0) & (bg.coverage == 0)).sum())
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def circular_path(radius: float, depth_offset: float, frame_count: int,
                  intr: CameraIntrinsics, target_depth: float = 5.0) -> list[CameraPose]:
    """Camera centers on a circle tangent to the source position, looking
    at a fixed point on the optical axis.

    Center k is (r cos t - r, r sin t, depth_offset (1 - cos t)) at
    t = 2 pi k / frame_count, so pose 0 with depth_offset = 0 is the
    identity.  intr is accepted for future aspect-dependent paths; the
    geometry itself is intrinsic-independent.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    if target_depth <= 0:
        raise ValueError(f"target_depth must be positive, got {target_depth}")
    target = np.array([0.0, 0.0, target_depth])
    poses = []
    for k in range(frame_count):
        theta = 2.0 * np.pi * k / frame_count
        center = np.array([
            radius * np.cos(theta) - radius,
            radius * np.sin(theta),
            depth_offset * (1.0 - np.cos(theta)),
        ])
        poses.append(CameraPose.look_at(center, target))
    return poses


def synthesize_view(bundle: "LayerBundle", pose: CameraPose, *,
                    mesh_downsample: int = 1, stats: dict | None = None) -> ImageBuffer:
    """Render both layers of a bundle into a novel view and composite."""
    fg_mesh = build_mesh(bundle.fg_disparity, bundle.intrinsics, bundle.mapping, mesh_downsample)
    fg = render_layer(fg_mesh, bundle.fg_rgb, bundle.fg_visibility, pose, bundle.intrinsics)
    bg_mesh = build_mesh(bundle.bg_disparity, bundle.intrinsics, bundle.mapping, mesh_downsample)
    bg = render_layer(bg_mesh, bundle.bg_rgb, None, pose, bundle.intrinsics)
    return composite(fg, bg, stats=stats)
