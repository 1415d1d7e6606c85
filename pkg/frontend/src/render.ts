/** WebGL2 two-pass layer renderer.
 *
 * Pass 1 draws the background mesh opaque; pass 2 clears only the depth
 * buffer and draws the foreground blended with per-fragment alpha from
 * the visibility texture: out = a * fg + (1 - a) * dst.  Depth testing
 * applies within each pass; the foreground always composites over the
 * background, matching the exporter's layer compositing.
 */

import { projectionFromIntrinsics, viewMatrix, type Pose } from "./camera.js";
import type { Intrinsics } from "./manifest.js";
import type { GridMesh } from "./mesh.js";

/** The exact blend arithmetic the fragment path implements. */
export function compositeLayers(fg: number, alpha: number, bg: number): number {
  return alpha * fg + (1 - alpha) * bg;
}

/** Blend factors for the foreground pass. */
export const FG_BLEND = { src: "SRC_ALPHA", dst: "ONE_MINUS_SRC_ALPHA" } as const;

export const VERTEX_SHADER = `#version 300 es
layout(location = 0) in vec3 aPosition;
layout(location = 1) in vec2 aTexcoord;
uniform mat4 uView;
uniform mat4 uProjection;
out vec2 vTexcoord;
void main() {
  gl_Position = uProjection * (uView * vec4(aPosition, 1.0));
  vTexcoord = aTexcoord;
}
`;

export const FRAGMENT_SHADER = `#version 300 es
precision highp float;
uniform sampler2D uRgb;
uniform sampler2D uAlpha;
uniform bool uUseAlpha;
in vec2 vTexcoord;
out vec4 outColor;
void main() {
  vec3 rgb = texture(uRgb, vTexcoord).rgb;
  float a = uUseAlpha ? texture(uAlpha, vTexcoord).r : 1.0;
  outColor = vec4(rgb, a);
}
`;

interface GpuLayer {
  vao: WebGLVertexArrayObject;
  indexCount: number;
  rgb: WebGLTexture;
  alpha: WebGLTexture | null;
}

function compile(gl: WebGL2RenderingContext, type: number, source: string): WebGLShader {
  const shader = gl.createShader(type);
  if (!shader) throw new Error("failed to allocate shader");
  gl.shaderSource(shader, source);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
  }
  return shader;
}

function makeTexture(gl: WebGL2RenderingContext, image: TexImageSource): WebGLTexture {
  const tex = gl.createTexture();
  if (!tex) throw new Error("failed to allocate texture");
  gl.bindTexture(gl.TEXTURE_2D, tex);
  gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGBA, gl.RGBA, gl.UNSIGNED_BYTE, image);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.LINEAR);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.LINEAR);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.CLAMP_TO_EDGE);
  gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
  return tex;
}

function uploadMesh(gl: WebGL2RenderingContext, mesh: GridMesh): WebGLVertexArrayObject {
  const vao = gl.createVertexArray();
  if (!vao) throw new Error("failed to allocate vertex array");
  gl.bindVertexArray(vao);
  const pos = gl.createBuffer();
  gl.bindBuffer(gl.ARRAY_BUFFER, pos);
  gl.bufferData(gl.ARRAY_BUFFER, mesh.positions, gl.STATIC_DRAW);
  gl.enableVertexAttribArray(0);
  gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
  const tc = gl.createBuffer();
  gl.bindBuffer(gl.ARRAY_BUFFER, tc);
  gl.bufferData(gl.ARRAY_BUFFER, mesh.texcoords, gl.STATIC_DRAW);
  gl.enableVertexAttribArray(1);
  gl.vertexAttribPointer(1, 2, gl.FLOAT, false, 0, 0);
  const idx = gl.createBuffer();
  gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, idx);
  gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, mesh.indices, gl.STATIC_DRAW);
  gl.bindVertexArray(null);
  return vao;
}

export interface SceneBuffers {
  intrinsics: Intrinsics;
  fgMesh: GridMesh;
  bgMesh: GridMesh;
  fgRgb: TexImageSource;
  fgAlpha: TexImageSource;
  bgRgb: TexImageSource;
}

export class TwoPassRenderer {
  private readonly gl: WebGL2RenderingContext;
  private readonly program: WebGLProgram;
  private readonly uView: WebGLUniformLocation;
  private readonly uProjection: WebGLUniformLocation;
  private readonly uUseAlpha: WebGLUniformLocation;
  private projection: Float32Array | null = null;
  private fg: GpuLayer | null = null;
  private bg: GpuLayer | null = null;

  constructor(gl: WebGL2RenderingContext) {
    this.gl = gl;
    const program = gl.createProgram();
    if (!program) throw new Error("failed to allocate program");
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERTEX_SHADER));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAGMENT_SHADER));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    this.program = program;
    const loc = (name: string) => {
      const u = gl.getUniformLocation(program, name);
      if (!u) throw new Error(`missing uniform ${name}`);
      return u;
    };
    this.uView = loc("uView");
    this.uProjection = loc("uProjection");
    this.uUseAlpha = loc("uUseAlpha");
    gl.useProgram(program);
    gl.uniform1i(loc("uRgb"), 0);
    gl.uniform1i(loc("uAlpha"), 1);
  }

  setScene(scene: SceneBuffers): void {
    const gl = this.gl;
    this.projection = projectionFromIntrinsics(scene.intrinsics);
    this.fg = {
      vao: uploadMesh(gl, scene.fgMesh),
      indexCount: scene.fgMesh.indices.length,
      rgb: makeTexture(gl, scene.fgRgb),
      alpha: makeTexture(gl, scene.fgAlpha),
    };
    this.bg = {
      vao: uploadMesh(gl, scene.bgMesh),
      indexCount: scene.bgMesh.indices.length,
      rgb: makeTexture(gl, scene.bgRgb),
      alpha: null,
    };
  }

  draw(pose: Pose): void {
    const gl = this.gl;
    if (!this.fg || !this.bg || !this.projection) return;
    gl.viewport(0, 0, gl.drawingBufferWidth, gl.drawingBufferHeight);
    gl.clearColor(0, 0, 0, 1);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    gl.enable(gl.DEPTH_TEST);
    gl.depthFunc(gl.LESS);
    gl.useProgram(this.program);
    gl.uniformMatrix4fv(this.uView, false, viewMatrix(pose));
    gl.uniformMatrix4fv(this.uProjection, false, this.projection);

    gl.disable(gl.BLEND);
    gl.uniform1i(this.uUseAlpha, 0);
    this.drawLayer(this.bg);

    // the foreground composites over the background regardless of depth,
    // so only the color buffer carries across passes
    gl.clear(gl.DEPTH_BUFFER_BIT);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
    gl.uniform1i(this.uUseAlpha, 1);
    this.drawLayer(this.fg);
  }

  private drawLayer(layer: GpuLayer): void {
    const gl = this.gl;
    gl.activeTexture(gl.TEXTURE0);
    gl.bindTexture(gl.TEXTURE_2D, layer.rgb);
    gl.activeTexture(gl.TEXTURE1);
    gl.bindTexture(gl.TEXTURE_2D, layer.alpha ?? layer.rgb);
    gl.bindVertexArray(layer.vao);
    gl.drawElements(gl.TRIANGLES, layer.indexCount, gl.UNSIGNED_INT, 0);
    gl.bindVertexArray(null);
  }
}
