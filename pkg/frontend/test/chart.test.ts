import { describe, expect, it } from "vitest";

import { chartSvg, linearScale, niceTicks, polylinePoints }
  from "../src/chart.js";
import type { Series } from "../src/chart.js";
import { sessionFrames } from "./helpers.js";

describe("scales and ticks", () => {
  it("maps domain endpoints onto range endpoints", () => {
    const s = linearScale([0, 10], [100, 300]);
    expect(s(0)).toBe(100);
    expect(s(10)).toBe(300);
    expect(s(5)).toBe(200);
  });

  it("inverts for y axes (larger value, smaller pixel)", () => {
    const y = linearScale([190, 210], [240, 10]);
    expect(y(190)).toBe(240);
    expect(y(210)).toBe(10);
    expect(y(200)).toBeCloseTo(125, 9);
  });

  it("collapses a zero-span domain to mid-range", () => {
    const s = linearScale([5, 5], [0, 100]);
    expect(s(5)).toBe(50);
  });

  it("picks round ticks covering the span", () => {
    expect(niceTicks(0, 10, 5)).toEqual([0, 5, 10]);
    expect(niceTicks(0, 8, 5)).toEqual([0, 2, 4, 6, 8]);
    const t = niceTicks(195.1, 208.4, 5);
    expect(t.length).toBeGreaterThan(1);
    for (const v of t) expect(v % 5).toBe(0);
    expect(Math.min(...t)).toBeGreaterThanOrEqual(195.1);
    expect(Math.max(...t)).toBeLessThanOrEqual(208.4);
  });
});

describe("polyline geometry", () => {
  it("renders x,y pairs separated by spaces", () => {
    const xs = linearScale([0, 2], [0, 100]);
    const ys = linearScale([0, 1], [50, 0]);
    const pts: Array<[number, number]> = [[0, 0], [1, 0.5], [2, 1]];
    expect(polylinePoints(pts, xs, ys)).toBe("0,50 50,25 100,0");
  });
});

describe("the case8a fuel-intensity chart", () => {
  function sfocSeries(): Series[] {
    const frames = sessionFrames();
    return [
      { label: "optimized", css: "line-actual",
        points: frames.map((f) => [f.t, f.sfoc]) },
      { label: "fixed 1800 rpm", css: "line-shadow",
        points: frames.map((f) => [f.t, f.shadow]) },
    ];
  }

  function actualPolyline(svg: string): Array<[number, number]> {
    const m = svg.match(/<polyline class="line-actual"[^>]*points="([^"]+)"/);
    expect(m).not.toBeNull();
    return m![1].split(" ").map((pair) => {
      const [x, y] = pair.split(",").map(Number);
      return [x, y];
    });
  }

  it("renders the full descent from ~207 to ~197 g/kWh", () => {
    const series = sfocSeries();
    const first = series[0].points[0][1];
    const last = series[0].points[series[0].points.length - 1][1];
    expect(first).toBeGreaterThan(205);   // opens near 207
    expect(first).toBeLessThan(209);
    expect(Math.abs(last - 197.5)).toBeLessThan(1.0); // settles near 197

    const svg = chartSvg(series, { xUnit: " s" });
    const pts = actualPolyline(svg);
    expect(pts).toHaveLength(series[0].points.length);

    // SVG y grows downward: the settled tail must sit visibly below the
    // opening high-load plateau
    const yFirst = pts[0][1];
    const yLast = pts[pts.length - 1][1];
    expect(yLast).toBeGreaterThan(yFirst + 20);

    // x advances monotonically with time
    for (let i = 1; i < pts.length; i++) {
      expect(pts[i][0]).toBeGreaterThanOrEqual(pts[i - 1][0]);
    }
  });

  it("draws both series with axis furniture and legend", () => {
    const svg = chartSvg(sfocSeries(), { xUnit: " s" });
    expect(svg).toContain('<polyline class="line-actual"');
    expect(svg).toContain('<polyline class="line-shadow"');
    expect(svg).toContain('class="grid"');
    expect(svg).toContain(">optimized</text>");
    expect(svg).toContain(">fixed 1800 rpm</text>");
    // the y span covers both series (optimized ~195..208, shadow up to
    // ~222), so decade gridlines at 200 and 220 g/kWh both appear
    expect(svg).toContain(">200<");
    expect(svg).toContain(">220<");
  });

  it("keeps every sample inside the plotted frame", () => {
    const svg = chartSvg(sfocSeries(), { width: 640, height: 240 });
    for (const [x, y] of actualPolyline(svg)) {
      expect(x).toBeGreaterThanOrEqual(0);
      expect(x).toBeLessThanOrEqual(640);
      expect(y).toBeGreaterThanOrEqual(0);
      expect(y).toBeLessThanOrEqual(240);
    }
  });

  it("renders an empty chart without data", () => {
    const svg = chartSvg([]);
    expect(svg).toContain("<svg");
    expect(svg).not.toContain("polyline");
  });
});
