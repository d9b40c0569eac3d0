/**
 * SVG rendering of the view models. Pure string builders: geometry and
 * styling only, so they are unit-testable without a DOM.
 */

import type { CurveModel, TrajectoryModel } from "./views.js";

export interface Box {
  width: number;
  height: number;
  pad: number;
}

const DEFAULT_BOX: Box = { width: 560, height: 320, pad: 40 };

function esc(v: number): string {
  return Number(v.toFixed(2)).toString();
}

export function trajectorySvg(
  model: TrajectoryModel,
  box: Box = DEFAULT_BOX,
): string {
  const { width, height, pad } = box;
  const cols = Math.max(model.cohorts, 8);
  const xStep = (width - 2 * pad) / cols;
  const yStep = (height - 2 * pad) / Math.max(model.levels - 1, 1);
  const yOf = (level: number) => height - pad - (level - 1) * yStep;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="trajectory">`,
  ];
  for (let u = 1; u <= model.levels; u++) {
    const y = yOf(u);
    parts.push(
      `<line x1="${pad}" y1="${esc(y)}" x2="${width - pad}" y2="${esc(y)}" class="gridline"/>`,
      `<text x="${pad - 8}" y="${esc(y + 4)}" text-anchor="end" class="axis">d${u}</text>`,
    );
  }
  for (const m of model.markers) {
    const x = pad + (m.cohort - 0.5) * xStep + (m.slot - 0.5) * 7;
    const y = yOf(m.level);
    parts.push(
      `<circle cx="${esc(x)}" cy="${esc(y)}" r="5" class="${m.filled ? "dlt" : "ok"}"/>`,
    );
  }
  if (model.recommendation !== null) {
    const y = yOf(model.recommendation);
    parts.push(
      `<line x1="${pad}" y1="${esc(y)}" x2="${width - pad}" y2="${esc(y)}" class="recommendation"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

export function curveSvg(model: CurveModel, box: Box = DEFAULT_BOX): string {
  const { width, height, pad } = box;
  const doses = model.doses;
  const xMin = Math.min(...doses);
  const xMax = Math.max(...doses);
  const xOf = (d: number) =>
    pad + ((d - xMin) / Math.max(xMax - xMin, 1e-9)) * (width - 2 * pad);
  const yOf = (p: number) => height - pad - p * (height - 2 * pad);
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="curve">`,
  ];
  const targetY = yOf(model.target);
  parts.push(
    `<line x1="${pad}" y1="${esc(targetY)}" x2="${width - pad}" y2="${esc(targetY)}" class="target" stroke-dasharray="6 4"/>`,
  );
  if (model.fitted.length > 1) {
    const pts = model.fitted
      .map((p) => `${esc(xOf(p.x))},${esc(yOf(p.y))}`)
      .join(" ");
    parts.push(`<polyline points="${pts}" fill="none" class="fitted"/>`);
  }
  for (const p of model.modelPoints) {
    parts.push(
      `<circle cx="${esc(xOf(p.dose))}" cy="${esc(yOf(p.value))}" r="3.5" class="model-point"/>`,
    );
  }
  for (const mark of model.xMarks) {
    const x = xOf(mark.dose);
    const y = yOf(mark.value);
    const r = 4 + 2 * Math.sqrt(mark.weight);
    parts.push(
      `<g class="xmark" data-n="${mark.weight}">` +
        `<line x1="${esc(x - r)}" y1="${esc(y - r)}" x2="${esc(x + r)}" y2="${esc(y + r)}"/>` +
        `<line x1="${esc(x - r)}" y1="${esc(y + r)}" x2="${esc(x + r)}" y2="${esc(y - r)}"/>` +
        `</g>`,
    );
  }
  for (const d of doses) {
    parts.push(
      `<text x="${esc(xOf(d))}" y="${height - pad + 16}" text-anchor="middle" class="axis">${esc(d)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
