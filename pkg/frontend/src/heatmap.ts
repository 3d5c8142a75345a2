// Canvas heatmap with design-point and environment-sample overlays.
// The numeric parts (color ramp, normalization, world-to-pixel transform)
// are pure functions so they can be tested without a DOM.

import type { FieldSnapshot } from "./api.js";
import { markerClasses } from "./state.js";

// compact viridis-like ramp, interpolated between anchor colors
const RAMP: [number, number, number][] = [
  [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
];

export function valueToColor(t: number): [number, number, number] {
  const clamped = Math.min(Math.max(t, 0), 1);
  const pos = clamped * (RAMP.length - 1);
  const i = Math.min(Math.floor(pos), RAMP.length - 2);
  const frac = pos - i;
  const lo = RAMP[i];
  const hi = RAMP[i + 1];
  return [
    Math.round(lo[0] + frac * (hi[0] - lo[0])),
    Math.round(lo[1] + frac * (hi[1] - lo[1])),
    Math.round(lo[2] + frac * (hi[2] - lo[2])),
  ];
}

export function normalize(values: number[]): number[] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!(hi > lo)) return values.map(() => 0.5); // constant grid
  return values.map((v) => (v - lo) / (hi - lo));
}

export function gridToRgba(values: number[], nx: number,
                           ny: number): Uint8ClampedArray {
  const out = new Uint8ClampedArray(nx * ny * 4);
  const norm = normalize(values);
  for (let i = 0; i < nx * ny; i++) {
    const [r, g, b] = valueToColor(norm[i]);
    out[4 * i] = r;
    out[4 * i + 1] = g;
    out[4 * i + 2] = b;
    out[4 * i + 3] = 255;
  }
  return out;
}

export interface Transform {
  toPx: (wx: number, wy: number) => [number, number];
}

export function makeTransform(xs: number[], ys: number[], width: number,
                              height: number): Transform {
  const x0 = xs[0];
  const x1 = xs[xs.length - 1];
  const y0 = ys[0];
  const y1 = ys[ys.length - 1];
  return {
    toPx: (wx, wy) => [
      ((wx - x0) / (x1 - x0 || 1)) * width,
      height - ((wy - y0) / (y1 - y0 || 1)) * height,
    ],
  };
}

export function drawField(canvas: HTMLCanvasElement, field: FieldSnapshot,
                          values: number[], gamma: number): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { nx, ny } = field;
  // paint the grid at native resolution, then scale up
  const off = document.createElement("canvas");
  off.width = nx;
  off.height = ny;
  const offCtx = off.getContext("2d")!;
  const img = offCtx.createImageData(nx, ny);
  img.data.set(gridToRgba(values, nx, ny));
  offCtx.putImageData(img, 0, 0);

  ctx.save();
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.imageSmoothingEnabled = false;
  // grid rows are served bottom-up (row-major in y): flip vertically
  ctx.translate(0, canvas.height);
  ctx.scale(canvas.width / nx, -(canvas.height / ny));
  ctx.drawImage(off, 0, 0);
  ctx.restore();

  const tf = makeTransform(field.x, field.y, canvas.width, canvas.height);
  ctx.fillStyle = "rgba(120, 200, 255, 0.6)";
  for (const pt of field.omega_cloud) {
    const [px, py] = tf.toPx(pt[0], pt[1]);
    ctx.beginPath();
    ctx.arc(px, py, 1.6, 0, 2 * Math.PI);
    ctx.fill();
  }

  const classes = markerClasses(field.design.responses, gamma);
  field.design.points.forEach((pt, i) => {
    const [px, py] = tf.toPx(pt[0], pt[1]);
    ctx.strokeStyle = "#ff3b30";
    ctx.lineWidth = 2;
    if (classes[i] === "exceed") {
      ctx.beginPath();
      ctx.moveTo(px - 5, py - 5);
      ctx.lineTo(px + 5, py + 5);
      ctx.moveTo(px - 5, py + 5);
      ctx.lineTo(px + 5, py - 5);
      ctx.stroke();
    } else {
      ctx.beginPath();
      ctx.arc(px, py, 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  });
}
