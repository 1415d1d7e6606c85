/** Bundle loading: manifest + assets over HTTP into renderable form. */

import { buildGridMesh, type GridMesh } from "./mesh.js";
import { parseManifest, type Manifest } from "./manifest.js";
import { parsePfm, type PfmImage } from "./pfm.js";

export interface ViewerScene {
  manifest: Manifest;
  fgMesh: GridMesh;
  bgMesh: GridMesh;
  fgRgb: ImageBitmap;
  fgAlpha: ImageBitmap;
  bgRgb: ImageBitmap;
}

/** Pure assembly step, separated from fetching for testability. */
export function buildSceneMeshes(
  manifest: Manifest,
  fgDisparity: PfmImage,
  bgDisparity: PfmImage,
  meshDownsample = 1,
): { fgMesh: GridMesh; bgMesh: GridMesh } {
  const { width, height } = manifest.intrinsics;
  for (const [label, pfm] of [
    ["fg", fgDisparity],
    ["bg", bgDisparity],
  ] as const) {
    if (pfm.width !== width || pfm.height !== height) {
      throw new Error(
        `${label} disparity ${pfm.width}x${pfm.height} does not match manifest ${width}x${height}`,
      );
    }
  }
  return {
    fgMesh: buildGridMesh(
      fgDisparity.data, width, height, manifest.intrinsics, manifest.dMin, meshDownsample),
    bgMesh: buildGridMesh(
      bgDisparity.data, width, height, manifest.intrinsics, manifest.dMin, meshDownsample),
  };
}

async function fetchBuffer(url: string): Promise<ArrayBuffer> {
  const resp = await fetch(url);
  if (!resp.ok) throw new Error(`fetch failed (${resp.status}) for ${url}`);
  return resp.arrayBuffer();
}

async function fetchBitmap(url: string): Promise<ImageBitmap> {
  const resp = await fetch(url);
  if (!resp.ok) throw new Error(`fetch failed (${resp.status}) for ${url}`);
  return createImageBitmap(await resp.blob(), { premultiplyAlpha: "none" });
}

export async function fetchAndBuild(bundleUrl: string, meshDownsample = 1): Promise<ViewerScene> {
  const base = bundleUrl.endsWith("/") ? bundleUrl : bundleUrl + "/";
  const resp = await fetch(base + "manifest.json");
  if (!resp.ok) throw new Error(`cannot load manifest.json (${resp.status}) from ${base}`);
  const manifest = parseManifest(await resp.json());
  const [fgDispBuf, bgDispBuf, fgRgb, fgAlpha, bgRgb] = await Promise.all([
    fetchBuffer(base + manifest.fg.disparity),
    fetchBuffer(base + manifest.bg.disparity),
    fetchBitmap(base + manifest.fg.rgb),
    fetchBitmap(base + manifest.fg.alpha),
    fetchBitmap(base + manifest.bg.rgb),
  ]);
  const { fgMesh, bgMesh } = buildSceneMeshes(
    manifest, parsePfm(fgDispBuf), parsePfm(bgDispBuf), meshDownsample);
  return { manifest, fgMesh, bgMesh, fgRgb, fgAlpha, bgRgb };
}
