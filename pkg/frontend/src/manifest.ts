/** Bundle manifest parsing and validation. */

export const SUPPORTED_VERSION = 1;

export interface Intrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface LayerFiles {
  rgb: string;
  alpha?: string;
  disparity: string;
}

export interface Manifest {
  version: number;
  intrinsics: Intrinsics;
  dMin: number;
  fg: Required<LayerFiles>;
  bg: LayerFiles;
}

function field(obj: unknown, key: string, context: string): unknown {
  if (typeof obj !== "object" || obj === null || !(key in obj)) {
    const path = context ? `${context}.${key}` : key;
    throw new Error(`manifest missing field '${path}'`);
  }
  return (obj as Record<string, unknown>)[key];
}

function num(obj: unknown, key: string, context: string): number {
  const v = field(obj, key, context);
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`manifest field '${context}.${key}' must be a finite number`);
  }
  return v;
}

function str(obj: unknown, key: string, context: string): string {
  const v = field(obj, key, context);
  if (typeof v !== "string" || v.length === 0) {
    throw new Error(`manifest field '${context}.${key}' must be a file name`);
  }
  return v;
}

export function parseManifest(raw: unknown): Manifest {
  const version = field(raw, "version", "");
  if (version !== SUPPORTED_VERSION) {
    throw new Error(
      `unsupported manifest version ${JSON.stringify(version)}; this viewer handles ${SUPPORTED_VERSION}`,
    );
  }
  const intr = field(raw, "intrinsics", "");
  const intrinsics: Intrinsics = {
    fx: num(intr, "fx", "intrinsics"),
    fy: num(intr, "fy", "intrinsics"),
    cx: num(intr, "cx", "intrinsics"),
    cy: num(intr, "cy", "intrinsics"),
    width: num(intr, "width", "intrinsics"),
    height: num(intr, "height", "intrinsics"),
  };
  if (intrinsics.width < 1 || intrinsics.height < 1 || intrinsics.fx <= 0 || intrinsics.fy <= 0) {
    throw new Error("manifest intrinsics out of range");
  }
  const mapping = field(raw, "mapping", "");
  const dMin = num(mapping, "d_min", "mapping");
  const layers = field(raw, "layers", "");
  const fg = field(layers, "fg", "layers");
  const bg = field(layers, "bg", "layers");
  return {
    version: SUPPORTED_VERSION,
    intrinsics,
    dMin,
    fg: {
      rgb: str(fg, "rgb", "layers.fg"),
      alpha: str(fg, "alpha", "layers.fg"),
      disparity: str(fg, "disparity", "layers.fg"),
    },
    bg: {
      rgb: str(bg, "rgb", "layers.bg"),
      disparity: str(bg, "disparity", "layers.bg"),
    },
  };
}
