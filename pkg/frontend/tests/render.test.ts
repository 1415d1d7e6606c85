import { describe, expect, it } from "vitest";
import { compositeLayers, FG_BLEND, FRAGMENT_SHADER, VERTEX_SHADER } from "../src/render.js";

describe("compositeLayers", () => {
  it("returns the foreground at full visibility", () => {
    expect(compositeLayers(0.8, 1.0, 0.1)).toBe(0.8);
  });

  it("returns the background at zero visibility", () => {
    expect(compositeLayers(0.8, 0.0, 0.1)).toBe(0.1);
  });

  it("blends to the midpoint at half visibility", () => {
    expect(compositeLayers(0.8, 0.5, 0.2)).toBeCloseTo(0.5, 12);
  });

  it("stays inside the convex hull of its inputs", () => {
    let state = 12345;
    const rand = () => {
      // deterministic LCG so failures reproduce
      state = (state * 1103515245 + 12345) % 2147483648;
      return state / 2147483648;
    };
    for (let i = 0; i < 200; i++) {
      const fg = rand();
      const bg = rand();
      const a = rand();
      const out = compositeLayers(fg, a, bg);
      expect(out).toBeGreaterThanOrEqual(Math.min(fg, bg) - 1e-12);
      expect(out).toBeLessThanOrEqual(Math.max(fg, bg) + 1e-12);
    }
  });

  it("matches the GL blend equation src*a + dst*(1-a)", () => {
    // the fixed-function blend with FG_BLEND factors computes exactly this
    const src = 0.65;
    const dst = 0.3;
    const a = 0.25;
    expect(compositeLayers(src, a, dst)).toBeCloseTo(src * a + dst * (1 - a), 12);
  });
});

describe("blend configuration", () => {
  it("uses standard alpha blending for the foreground pass", () => {
    expect(FG_BLEND.src).toBe("SRC_ALPHA");
    expect(FG_BLEND.dst).toBe("ONE_MINUS_SRC_ALPHA");
  });
});

describe("shader sources", () => {
  it("target WebGL2 GLSL", () => {
    expect(VERTEX_SHADER.startsWith("#version 300 es")).toBe(true);
    expect(FRAGMENT_SHADER.startsWith("#version 300 es")).toBe(true);
  });

  it("declare the attribute and uniform interface the renderer binds", () => {
    expect(VERTEX_SHADER).toContain("layout(location = 0) in vec3 aPosition");
    expect(VERTEX_SHADER).toContain("layout(location = 1) in vec2 aTexcoord");
    expect(VERTEX_SHADER).toContain("uniform mat4 uView");
    expect(VERTEX_SHADER).toContain("uniform mat4 uProjection");
    expect(FRAGMENT_SHADER).toContain("uniform sampler2D uRgb");
    expect(FRAGMENT_SHADER).toContain("uniform sampler2D uAlpha");
    expect(FRAGMENT_SHADER).toContain("uniform bool uUseAlpha");
  });

  it("writes visibility into the alpha channel for the blend stage", () => {
    // the fragment stage must not premultiply; blending applies the factors
    expect(FRAGMENT_SHADER).toContain("outColor = vec4(");
    expect(FRAGMENT_SHADER).not.toContain("rgb * a");
  });
});
