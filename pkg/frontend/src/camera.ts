/** Orbit camera with a parallax budget.
 *
 * Same conventions as the exporter: world frame = source camera frame,
 * y down, pose maps world to camera (X_cam = R X + t, t = -R C).
 * Dragging moves the camera center in the source image plane while the
 * view stays aimed at a fixed target on the optical axis -- a rotation
 * about the look-at target.  The center norm is clamped so every
 * translation component stays within the parallax limit, and releasing
 * the pointer eases the pose back to identity.
 */

export interface Pose {
  /** Row-major 3x3. */
  rotation: Float64Array;
  translation: Float64Array;
}

export type Vec3 = [number, number, number];

export function identityPose(): Pose {
  return {
    rotation: new Float64Array([1, 0, 0, 0, 1, 0, 0, 0, 1]),
    translation: new Float64Array(3),
  };
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function norm(a: Vec3): number {
  return Math.hypot(a[0], a[1], a[2]);
}

function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n < 1e-12) throw new Error("cannot normalize zero vector");
  return [a[0] / n, a[1] / n, a[2] / n];
}

export function lookAt(position: Vec3, target: Vec3, up: Vec3 = [0, 1, 0]): Pose {
  const forward = normalize(sub(target, position));
  const rightRaw = cross(up, forward);
  if (norm(rightRaw) < 1e-9) throw new Error("view direction parallel to up vector");
  const right = normalize(rightRaw);
  const down = cross(forward, right);
  const rotation = new Float64Array([...right, ...down, ...forward]);
  const translation = new Float64Array([
    -(rotation[0] * position[0] + rotation[1] * position[1] + rotation[2] * position[2]),
    -(rotation[3] * position[0] + rotation[4] * position[1] + rotation[5] * position[2]),
    -(rotation[6] * position[0] + rotation[7] * position[1] + rotation[8] * position[2]),
  ]);
  return { rotation, translation };
}

export interface CameraOptions {
  /** Depth of the look-at point on the optical axis. */
  targetDepth?: number;
  /** Parallax budget: max |translation component| in world units. */
  maxTranslation?: number;
  /** Seconds for the release ease-back to effectively settle. */
  easeDuration?: number;
  /** World units of camera motion per CSS pixel of drag. */
  dragScale?: number;
}

export class CameraController {
  readonly targetDepth: number;
  readonly maxTranslation: number;
  readonly easeDuration: number;
  readonly dragScale: number;
  private cx = 0;
  private cy = 0;
  private dragging = false;

  constructor(opts: CameraOptions = {}) {
    this.targetDepth = opts.targetDepth ?? 5.0;
    this.maxTranslation = opts.maxTranslation ?? 0.05;
    this.easeDuration = opts.easeDuration ?? 0.6;
    this.dragScale = opts.dragScale ?? this.maxTranslation / 150;
    if (this.targetDepth <= 0 || this.maxTranslation <= 0 || this.easeDuration <= 0) {
      throw new Error("camera options must be positive");
    }
  }

  beginDrag(): void {
    this.dragging = true;
  }

  drag(dx: number, dy: number): void {
    this.dragging = true;
    this.cx += dx * this.dragScale;
    this.cy += dy * this.dragScale;
    // clamping the center norm bounds every translation component, since
    // rotation preserves the norm of t = -R C
    const n = Math.hypot(this.cx, this.cy);
    if (n > this.maxTranslation) {
      const s = this.maxTranslation / n;
      this.cx *= s;
      this.cy *= s;
    }
  }

  endDrag(): void {
    this.dragging = false;
  }

  get isDragging(): boolean {
    return this.dragging;
  }

  /** Advance the ease-back; no-op while dragging. */
  update(dt: number): void {
    if (this.dragging || dt <= 0) return;
    // exponential settle: ~99.3% decayed after easeDuration
    const k = Math.exp((-5.0 * dt) / this.easeDuration);
    this.cx *= k;
    this.cy *= k;
  }

  center(): Vec3 {
    return [this.cx, this.cy, 0];
  }

  pose(): Pose {
    if (this.cx === 0 && this.cy === 0) return identityPose();
    return lookAt(this.center(), [0, 0, this.targetDepth]);
  }
}

/** Column-major 4x4 world-to-camera matrix for the GPU. */
export function viewMatrix(pose: Pose): Float32Array {
  const r = pose.rotation;
  const t = pose.translation;
  // prettier-ignore
  return new Float32Array([
    r[0], r[3], r[6], 0,
    r[1], r[4], r[7], 0,
    r[2], r[5], r[8], 0,
    t[0], t[1], t[2], 1,
  ]);
}

/** Column-major projection matching the exporter's pixel conventions:
 * sx = fx X/Z + cx with pixel centers at integer coordinates, y down. */
export function projectionFromIntrinsics(
  intr: { fx: number; fy: number; cx: number; cy: number; width: number; height: number },
  near = 1e-3,
  far = 1000,
): Float32Array {
  const { fx, fy, cx, cy, width: w, height: h } = intr;
  const a = (far + near) / (far - near);
  const b = (-2 * far * near) / (far - near);
  // ndc_x = (2 (fx X / Z + cx) + 1) / w - 1, ndc_y flipped to y-up
  // prettier-ignore
  return new Float32Array([
    2 * fx / w, 0, 0, 0,
    0, -2 * fy / h, 0, 0,
    (2 * cx + 1) / w - 1, 1 - (2 * cy + 1) / h, a, 1,
    0, 0, b, 0,
  ]);
}
