/** Grayscale PFM decoding (the disparity format the pipeline exports).
 *
 * Header: "Pf", width, height, scale; negative scale means little-endian
 * samples. Rows are stored bottom-up; the returned data is top-down.
 */

export interface PfmImage {
  width: number;
  height: number;
  /** Row-major, row 0 at the top. */
  data: Float32Array;
}

function readToken(bytes: Uint8Array, offset: number): { token: string; next: number } {
  let start = offset;
  while (start < bytes.length && isWhitespace(bytes[start])) start++;
  let end = start;
  while (end < bytes.length && !isWhitespace(bytes[end])) end++;
  if (start === end) {
    throw new Error("PFM header truncated");
  }
  let token = "";
  for (let i = start; i < end; i++) token += String.fromCharCode(bytes[i]);
  return { token, next: end };
}

function isWhitespace(byte: number): boolean {
  return byte === 0x20 || byte === 0x0a || byte === 0x0d || byte === 0x09;
}

export function parsePfm(buffer: ArrayBuffer): PfmImage {
  const bytes = new Uint8Array(buffer);
  const magic = readToken(bytes, 0);
  if (magic.token === "PF") {
    throw new Error("color PFM not supported; expected grayscale 'Pf'");
  }
  if (magic.token !== "Pf") {
    throw new Error(`not a PFM file (magic ${JSON.stringify(magic.token)})`);
  }
  const w = readToken(bytes, magic.next);
  const h = readToken(bytes, w.next);
  const s = readToken(bytes, h.next);
  const width = Number(w.token);
  const height = Number(h.token);
  const scale = Number(s.token);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad PFM dimensions ${w.token} x ${h.token}`);
  }
  if (!Number.isFinite(scale) || scale === 0) {
    throw new Error(`bad PFM scale ${s.token}`);
  }
  const dataStart = s.next + 1; // exactly one whitespace byte after the scale
  const expected = width * height * 4;
  if (buffer.byteLength - dataStart < expected) {
    throw new Error(
      `PFM data truncated: need ${expected} bytes, have ${buffer.byteLength - dataStart}`,
    );
  }
  const littleEndian = scale < 0;
  const view = new DataView(buffer, dataStart, expected);
  const data = new Float32Array(width * height);
  for (let row = 0; row < height; row++) {
    const srcRow = height - 1 - row; // file rows run bottom-up
    for (let col = 0; col < width; col++) {
      data[row * width + col] = view.getFloat32((srcRow * width + col) * 4, littleEndian);
    }
  }
  return { width, height, data };
}
