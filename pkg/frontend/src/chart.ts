/** Dependency-free SVG line chart.  Pure functions from data series to SVG
 *  markup strings, so rendering is testable without a DOM. */

export interface Series {
  label: string;
  /** CSS class applied to the polyline and its legend swatch */
  css: string;
  /** (x, y) samples in data coordinates, x ascending */
  points: Array<[number, number]>;
}

export interface ChartOptions {
  width?: number;
  height?: number;
  /** unit string appended to the y tick labels */
  yUnit?: string;
  /** unit string appended to the x tick labels */
  xUnit?: string;
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0;
  const f = (v: number): number =>
    span === 0 ? (r0 + r1) / 2 : r0 + ((v - d0) / span) * (r1 - r0);
  const scale = f as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

/** Round tick positions covering [lo, hi] at a 1/2/5-decade step. */
export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (!(hi > lo)) return [lo];
  const rawStep = (hi - lo) / Math.max(1, count - 1);
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (m * mag >= rawStep) {
      step = m * mag;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

export function polylinePoints(
  points: Array<[number, number]>,
  xs: Scale,
  ys: Scale,
): string {
  return points
    .map(([x, y]) => `${round2(xs(x))},${round2(ys(y))}`)
    .join(" ");
}

function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a >= 1000) return v.toFixed(0);
  if (a >= 10 || v === Math.round(v)) return v.toFixed(0);
  return v.toFixed(1);
}

const PAD = { left: 46, right: 12, top: 14, bottom: 26 };

/** Render one chart (axes, gridlines, a polyline per series, legend) as a
 *  complete `<svg>` element string. */
export function chartSvg(series: Series[], opts: ChartOptions = {}): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 240;
  const all = series.flatMap((s) => s.points);
  if (all.length === 0) {
    return `<svg class="chart" viewBox="0 0 ${width} ${height}"` +
      ` xmlns="http://www.w3.org/2000/svg"></svg>`;
  }
  let xLo = Infinity, xHi = -Infinity, yLo = Infinity, yHi = -Infinity;
  for (const [x, y] of all) {
    if (x < xLo) xLo = x;
    if (x > xHi) xHi = x;
    if (y < yLo) yLo = y;
    if (y > yHi) yHi = y;
  }
  if (yHi === yLo) {
    yLo -= 1;
    yHi += 1;
  }
  const yPad = (yHi - yLo) * 0.08;
  const xs = linearScale([xLo, xHi], [PAD.left, width - PAD.right]);
  const ys = linearScale([yLo - yPad, yHi + yPad],
                         [height - PAD.bottom, PAD.top]);

  const parts: string[] = [];
  parts.push(
    `<svg class="chart" viewBox="0 0 ${width} ${height}"` +
    ` xmlns="http://www.w3.org/2000/svg">`);

  for (const v of niceTicks(yLo, yHi, 5)) {
    const y = round2(ys(v));
    parts.push(
      `<line class="grid" x1="${PAD.left}" y1="${y}"` +
      ` x2="${width - PAD.right}" y2="${y}"/>`);
    parts.push(
      `<text class="tick" x="${PAD.left - 6}" y="${y + 3}"` +
      ` text-anchor="end">${fmtTick(v)}${opts.yUnit ?? ""}</text>`);
  }
  for (const v of niceTicks(xLo, xHi, 6)) {
    const x = round2(xs(v));
    parts.push(
      `<text class="tick" x="${x}" y="${height - PAD.bottom + 14}"` +
      ` text-anchor="middle">${fmtTick(v)}${opts.xUnit ?? ""}</text>`);
  }
  parts.push(
    `<rect class="frame" x="${PAD.left}" y="${PAD.top}"` +
    ` width="${width - PAD.left - PAD.right}"` +
    ` height="${height - PAD.top - PAD.bottom}"/>`);

  for (const s of series) {
    if (s.points.length === 0) continue;
    parts.push(
      `<polyline class="${s.css}" fill="none"` +
      ` points="${polylinePoints(s.points, xs, ys)}"/>`);
  }

  let lx = PAD.left + 8;
  for (const s of series) {
    parts.push(
      `<line class="${s.css}" x1="${lx}" y1="${PAD.top + 6}"` +
      ` x2="${lx + 18}" y2="${PAD.top + 6}"/>`);
    parts.push(
      `<text class="legend" x="${lx + 22}" y="${PAD.top + 9}">` +
      `${s.label}</text>`);
    lx += 22 + 8 * s.label.length + 26;
  }
  parts.push("</svg>");
  return parts.join("");
}
