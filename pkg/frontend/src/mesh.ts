/** Grid mesh construction from a disparity map.
 *
 * Mirrors the exporter's geometry exactly: z = 1 / max(d, dMin), pinhole
 * back-projection with y down, vertices at every downsample-th pixel
 * (always including the last row/column), cells split along the
 * top-left to bottom-right diagonal, texture coordinates at pixel
 * centers of the full-resolution image.
 */

import type { Intrinsics } from "./manifest.js";

export interface GridMesh {
  positions: Float32Array; // xyz per vertex
  texcoords: Float32Array; // uv per vertex
  indices: Uint32Array; // triangle list
  vertexCount: number;
  triangleCount: number;
}

function gridCoords(size: number, step: number): number[] {
  const coords: number[] = [];
  for (let v = 0; v < size; v += step) coords.push(v);
  if (coords[coords.length - 1] !== size - 1) coords.push(size - 1);
  return coords;
}

export function buildGridMesh(
  disparity: Float32Array,
  width: number,
  height: number,
  intr: Intrinsics,
  dMin: number,
  downsample = 1,
): GridMesh {
  if (disparity.length !== width * height) {
    throw new Error(`disparity length ${disparity.length} does not match ${width}x${height}`);
  }
  if (width !== intr.width || height !== intr.height) {
    throw new Error(`disparity ${width}x${height} does not match intrinsics ${intr.width}x${intr.height}`);
  }
  if (downsample < 1 || !Number.isInteger(downsample)) {
    throw new Error(`downsample must be an integer >= 1, got ${downsample}`);
  }
  const xs = gridCoords(width, downsample);
  const ys = gridCoords(height, downsample);
  const cols = xs.length;
  const rows = ys.length;
  const positions = new Float32Array(rows * cols * 3);
  const texcoords = new Float32Array(rows * cols * 2);
  let v = 0;
  for (const y of ys) {
    for (const x of xs) {
      const d = disparity[y * width + x];
      const z = 1.0 / Math.max(d, dMin);
      positions[v * 3] = (z * (x - intr.cx)) / intr.fx;
      positions[v * 3 + 1] = (z * (y - intr.cy)) / intr.fy;
      positions[v * 3 + 2] = z;
      texcoords[v * 2] = (x + 0.5) / width;
      texcoords[v * 2 + 1] = (y + 0.5) / height;
      v++;
    }
  }
  // first diagonal for every cell, then the second, matching the exporter
  const cells = (rows - 1) * (cols - 1);
  const indices = new Uint32Array(cells * 6);
  let cell = 0;
  for (let r = 0; r < rows - 1; r++) {
    for (let c = 0; c < cols - 1; c++) {
      const tl = r * cols + c;
      const tr = tl + 1;
      const bl = tl + cols;
      const br = bl + 1;
      indices[cell * 3] = tl;
      indices[cell * 3 + 1] = tr;
      indices[cell * 3 + 2] = br;
      indices[(cells + cell) * 3] = tl;
      indices[(cells + cell) * 3 + 1] = br;
      indices[(cells + cell) * 3 + 2] = bl;
      cell++;
    }
  }
  return {
    positions,
    texcoords,
    indices,
    vertexCount: rows * cols,
    triangleCount: indices.length / 3,
  };
}
