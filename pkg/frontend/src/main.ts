/** Page wiring: load the bundle named in ?bundle=, drive the camera from
 * pointer input, and redraw continuously while reporting fps. */

import { CameraController } from "./camera.js";
import { TwoPassRenderer } from "./render.js";
import { fetchAndBuild } from "./scene.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showBanner(message: string): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = message;
  banner.style.display = "block";
}

async function run(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("view");
  const fpsLabel = el<HTMLSpanElement>("fps");
  const params = new URLSearchParams(window.location.search);
  const bundleUrl = params.get("bundle");
  if (!bundleUrl) {
    showBanner("Pass a bundle directory with ?bundle=<url> (see README).");
    return;
  }
  const downsample = Number(params.get("downsample") ?? "1");

  const gl = canvas.getContext("webgl2", { antialias: false, preserveDrawingBuffer: true });
  if (!gl) {
    showBanner("WebGL2 is not available in this browser.");
    return;
  }
  canvas.addEventListener("webglcontextlost", (ev) => {
    ev.preventDefault();
    showBanner("Graphics context lost; reload the page to continue.");
  });

  const scene = await fetchAndBuild(bundleUrl, downsample);
  canvas.width = scene.manifest.intrinsics.width;
  canvas.height = scene.manifest.intrinsics.height;

  const renderer = new TwoPassRenderer(gl);
  renderer.setScene({
    intrinsics: scene.manifest.intrinsics,
    fgMesh: scene.fgMesh,
    bgMesh: scene.bgMesh,
    fgRgb: scene.fgRgb,
    fgAlpha: scene.fgAlpha,
    bgRgb: scene.bgRgb,
  });

  const camera = new CameraController();
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    camera.beginDrag();
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (camera.isDragging) camera.drag(ev.movementX, ev.movementY);
  });
  const release = () => camera.endDrag();
  canvas.addEventListener("pointerup", release);
  canvas.addEventListener("pointercancel", release);

  el<HTMLButtonElement>("snapshot").addEventListener("click", () => {
    renderer.draw(camera.pose());
    const link = document.createElement("a");
    link.download = "viewer_frame.png";
    link.href = canvas.toDataURL("image/png");
    link.click();
  });

  let last = performance.now();
  let fpsSmooth = 0;
  const frame = (now: number) => {
    const dt = (now - last) / 1000;
    last = now;
    camera.update(dt);
    renderer.draw(camera.pose());
    if (dt > 0) {
      fpsSmooth = fpsSmooth === 0 ? 1 / dt : 0.9 * fpsSmooth + 0.1 / dt;
      fpsLabel.textContent = `${fpsSmooth.toFixed(0)} fps`;
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

run().catch((err: unknown) => {
  showBanner(err instanceof Error ? err.message : String(err));
});
