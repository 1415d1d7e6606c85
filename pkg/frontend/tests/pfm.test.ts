import { describe, expect, it } from "vitest";
import { parsePfm } from "../src/pfm.js";

/** Build a PFM byte buffer with rows given top-down, as a reader sees them. */
function makePfm(rowsTopDown: number[][], scale: number): ArrayBuffer {
  const height = rowsTopDown.length;
  const width = rowsTopDown[0].length;
  const header = `Pf\n${width} ${height}\n${scale}\n`;
  const headerBytes = new TextEncoder().encode(header);
  const buffer = new ArrayBuffer(headerBytes.length + width * height * 4);
  new Uint8Array(buffer).set(headerBytes);
  const view = new DataView(buffer, headerBytes.length);
  const littleEndian = scale < 0;
  // file rows run bottom-up
  for (let row = 0; row < height; row++) {
    const src = rowsTopDown[height - 1 - row];
    for (let col = 0; col < width; col++) {
      view.setFloat32((row * width + col) * 4, src[col], littleEndian);
    }
  }
  return buffer;
}

describe("parsePfm", () => {
  it("decodes a little-endian file and flips rows to top-down", () => {
    const rows = [
      [0.1, 0.2, 0.3],
      [1.5, -2.0, 4.25],
    ];
    const img = parsePfm(makePfm(rows, -1.0));
    expect(img.width).toBe(3);
    expect(img.height).toBe(2);
    const flat = rows.flat().map((v) => Math.fround(v));
    expect(Array.from(img.data)).toEqual(flat);
  });

  it("decodes big-endian samples when scale is positive", () => {
    const rows = [[7.5, 0.125]];
    const img = parsePfm(makePfm(rows, 1.0));
    expect(Array.from(img.data)).toEqual([7.5, 0.125]);
  });

  it("distinguishes rows: the first data row in the file is the bottom row", () => {
    const rows = [
      [1.0, 1.0],
      [2.0, 2.0],
      [3.0, 3.0],
    ];
    const img = parsePfm(makePfm(rows, -1.0));
    expect(img.data[0]).toBe(1.0); // top of image
    expect(img.data[4]).toBe(3.0); // bottom of image
  });

  it("rejects color PFM with a dedicated message", () => {
    const buffer = makePfm([[0.5]], -1.0);
    new Uint8Array(buffer)[1] = "F".charCodeAt(0); // Pf -> PF
    expect(() => parsePfm(buffer)).toThrow(/color PFM/);
  });

  it("rejects an unrelated magic token", () => {
    const bytes = new TextEncoder().encode("P6\n1 1\n255\n\0\0\0");
    expect(() => parsePfm(bytes.buffer as ArrayBuffer)).toThrow(/not a PFM file/);
  });

  it("rejects bad dimensions and zero scale", () => {
    const make = (header: string) => {
      const bytes = new TextEncoder().encode(header + "\0".repeat(64));
      return bytes.buffer as ArrayBuffer;
    };
    expect(() => parsePfm(make("Pf\n0 2\n-1.0\n"))).toThrow(/dimensions/);
    expect(() => parsePfm(make("Pf\n2 1.5\n-1.0\n"))).toThrow(/dimensions/);
    expect(() => parsePfm(make("Pf\n2 2\n0\n"))).toThrow(/scale/);
  });

  it("rejects truncated sample data", () => {
    const full = makePfm([[1.0, 2.0, 3.0, 4.0]], -1.0);
    const short = full.slice(0, full.byteLength - 4);
    expect(() => parsePfm(short)).toThrow(/truncated/);
  });

  it("rejects a header-only buffer", () => {
    const bytes = new TextEncoder().encode("Pf\n2 2\n");
    expect(() => parsePfm(bytes.buffer as ArrayBuffer)).toThrow(/truncated/);
  });

  it("round-trips float32 values bit-exactly", () => {
    // values chosen to exercise sign, subnormal-adjacent, and non-dyadic cases
    const rows = [[3.14159265, -0.30000001192092896, 1e-30, 65535.0]];
    const img = parsePfm(makePfm(rows, -1.0));
    const expected = new Float32Array(rows[0]);
    for (let i = 0; i < expected.length; i++) {
      expect(img.data[i]).toBe(expected[i]);
    }
  });
});
