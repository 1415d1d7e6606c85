"""Scanline triangle rasterizer kernel (numba-compiled).

Operates on pre-projected screen-space vertices.  Pixel centers sit at
integer coordinates.  Coverage is inclusive for both windings (no
culling; edge pixels count for every adjacent triangle), the z-buffer
keeps the strictly nearest fragment, texture coordinates interpolate
perspective-correctly via 1/z, and texture lookups are bilinear with
clamp-to-edge.  Triangle order is fixed, so output is deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def raster_triangles(sx, sy, z, tc, tris, tex, color, depth, cover):
    """Rasterize triangles into color/depth/cover buffers in place.

    sx, sy, z: per-vertex screen x, y and camera-space depth (z > 0);
    tc: per-vertex texture coordinates in [0,1]^2; tris: (M,3) indices;
    tex: (Ht,Wt,C) texture; color: (H,W,C); depth: (H,W) init +inf;
    cover: (H,W) uint8 init 0.
    """
    height, width = depth.shape
    tex_h, tex_w, channels = tex.shape
    for t in range(tris.shape[0]):
        i0 = tris[t, 0]
        i1 = tris[t, 1]
        i2 = tris[t, 2]
        x0 = sx[i0]
        y0 = sy[i0]
        x1 = sx[i1]
        y1 = sy[i1]
        x2 = sx[i2]
        y2 = sy[i2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        lo_x = min(x0, min(x1, x2))
        hi_x = max(x0, max(x1, x2))
        lo_y = min(y0, min(y1, y2))
        hi_y = max(y0, max(y1, y2))
        min_px = int(np.ceil(lo_x))
        max_px = int(np.floor(hi_x))
        min_py = int(np.ceil(lo_y))
        max_py = int(np.floor(hi_y))
        if min_px < 0:
            min_px = 0
        if max_px > width - 1:
            max_px = width - 1
        if min_py < 0:
            min_py = 0
        if max_py > height - 1:
            max_py = height - 1
        if min_px > max_px or min_py > max_py:
            continue
        iz0 = 1.0 / z[i0]
        iz1 = 1.0 / z[i1]
        iz2 = 1.0 / z[i2]
        u0 = tc[i0, 0] * iz0
        v0 = tc[i0, 1] * iz0
        u1 = tc[i1, 0] * iz1
        v1 = tc[i1, 1] * iz1
        u2 = tc[i2, 0] * iz2
        v2 = tc[i2, 1] * iz2
        for py in range(min_py, max_py + 1):
            fy = float(py)
            for px in range(min_px, max_px + 1):
                fx = float(px)
                w0 = (x2 - x1) * (fy - y1) - (y2 - y1) * (fx - x1)
                w1 = (x0 - x2) * (fy - y2) - (y0 - y2) * (fx - x2)
                w2 = (x1 - x0) * (fy - y0) - (y1 - y0) * (fx - x0)
                pos = w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0
                neg = w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0
                if not (pos or neg):
                    continue
                l0 = w0 / area
                l1 = w1 / area
                l2 = w2 / area
                iz = l0 * iz0 + l1 * iz1 + l2 * iz2
                if iz <= 0.0:
                    continue
                zpx = 1.0 / iz
                if zpx >= depth[py, px]:
                    continue
                depth[py, px] = zpx
                cover[py, px] = 1
                u = (l0 * u0 + l1 * u1 + l2 * u2) * zpx
                v = (l0 * v0 + l1 * v1 + l2 * v2) * zpx
                # Bilinear clamp-to-edge lookup at (u,v) in [0,1]^2.
                gx = u * tex_w - 0.5
                gy = v * tex_h - 0.5
                x_f = np.floor(gx)
                y_f = np.floor(gy)
                wx = gx - x_f
                wy = gy - y_f
                xa = int(x_f)
                ya = int(y_f)
                xb = xa + 1
                yb = ya + 1
                if xa < 0:
                    xa = 0
                elif xa > tex_w - 1:
                    xa = tex_w - 1
                if xb < 0:
                    xb = 0
                elif xb > tex_w - 1:
                    xb = tex_w - 1
                if ya < 0:
                    ya = 0
                elif ya > tex_h - 1:
                    ya = tex_h - 1
                if yb < 0:
                    yb = 0
                elif yb > tex_h - 1:
                    yb = tex_h - 1
                for ch in range(channels):
                    top = (1.0 - wx) * tex[ya, xa, ch] + wx * tex[ya, xb, ch]
                    bot = (1.0 - wx) * tex[yb, xa, ch] + wx * tex[yb, xb, ch]
                    color[py, px, ch] = (1.0 - wy) * top + wy * bot
