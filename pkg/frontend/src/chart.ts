// Estimate trace chart: value per step with a +-2 standard-error band so
// the operator can judge when the estimate has settled.

import type { EstimatePoint } from "./state.js";

export interface ChartLayout {
  px: (step: number) => number;
  py: (value: number) => number;
  yMin: number;
  yMax: number;
}

export function chartLayout(points: EstimatePoint[], width: number,
                            height: number, pad = 28): ChartLayout {
  const lastStep = Math.max(points.length ? points[points.length - 1].step : 1, 1);
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const p of points) {
    yMin = Math.min(yMin, p.value - 2 * p.stdError);
    yMax = Math.max(yMax, p.value + 2 * p.stdError);
  }
  if (!(yMax > yMin)) {
    yMin = (points[0]?.value ?? 0) - 0.05;
    yMax = (points[0]?.value ?? 0) + 0.05;
  }
  const span = yMax - yMin;
  yMin -= 0.08 * span;
  yMax += 0.08 * span;
  return {
    px: (step) => pad + (step / lastStep) * (width - 2 * pad),
    py: (v) => height - pad - ((v - yMin) / (yMax - yMin)) * (height - 2 * pad),
    yMin,
    yMax,
  };
}

export function drawTrace(canvas: HTMLCanvasElement,
                          points: EstimatePoint[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!points.length) return;
  const lay = chartLayout(points, canvas.width, canvas.height);

  ctx.fillStyle = "rgba(80, 140, 255, 0.25)";
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = lay.px(p.step);
    const y = lay.py(p.value + 2 * p.stdError);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  for (let i = points.length - 1; i >= 0; i--) {
    ctx.lineTo(lay.px(points[i].step),
               lay.py(points[i].value - 2 * points[i].stdError));
  }
  ctx.closePath();
  ctx.fill();

  ctx.strokeStyle = "#3264ff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((p, i) => {
    const x = lay.px(p.step);
    const y = lay.py(p.value);
    if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
  });
  ctx.stroke();

  ctx.fillStyle = "#3264ff";
  for (const p of points) {
    ctx.beginPath();
    ctx.arc(lay.px(p.step), lay.py(p.value), 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(lay.yMax.toPrecision(3), 4, 12);
  ctx.fillText(lay.yMin.toPrecision(3), 4, canvas.height - 6);
}
