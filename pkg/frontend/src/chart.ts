/** Minimal SVG line chart: a pure geometry function plus a tiny renderer.
 *
 * No chart library: the curve is one <path>, axis labels are four <text>
 * nodes, and everything is derived from the numbers passed in.
 */

export interface ChartGeometry {
  /** SVG path data ("M x y L x y ..."), empty string when under 2 points. */
  path: string;
  /** Marker positions, one per data point. */
  points: Array<{ x: number; y: number }>;
  yMin: number;
  yMax: number;
  xMin: number;
  xMax: number;
}

function scale(v: number, lo: number, hi: number, outLo: number, outHi: number): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((v - lo) / (hi - lo)) * (outHi - outLo);
}

const round2 = (v: number): number => Math.round(v * 100) / 100;

/** Map series to pixel space; y grows downward (SVG), so yMax maps to `pad`. */
export function lineGeometry(
  xs: number[],
  ys: number[],
  width: number,
  height: number,
  pad = 24,
): ChartGeometry {
  const n = Math.min(xs.length, ys.length);
  if (n === 0) {
    return { path: "", points: [], yMin: 0, yMax: 0, xMin: 0, xMax: 0 };
  }
  const xv = xs.slice(0, n);
  const yv = ys.slice(0, n);
  const xMin = Math.min(...xv);
  const xMax = Math.max(...xv);
  const yMin = Math.min(...yv);
  const yMax = Math.max(...yv);
  const points = xv.map((x, i) => ({
    x: round2(scale(x, xMin, xMax, pad, width - pad)),
    y: round2(scale(yv[i], yMin, yMax, height - pad, pad)),
  }));
  const path =
    n < 2 ? "" : points.map((p, i) => `${i === 0 ? "M" : "L"} ${p.x} ${p.y}`).join(" ");
  return { path, points, yMin, yMax, xMin, xMax };
}

/** Rewrite `svg`'s contents to show the series (mean score per epoch). */
export function renderChart(svg: SVGElement, xs: number[], ys: number[]): void {
  const width = Number(svg.getAttribute("width") ?? 360);
  const height = Number(svg.getAttribute("height") ?? 160);
  const geo = lineGeometry(xs, ys, width, height);
  const fmt = (v: number): string => (Math.abs(v) >= 100 ? v.toFixed(0) : v.toFixed(2));
  const parts: string[] = [];
  if (geo.points.length === 0) {
    parts.push(
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" class="chart-empty">no epochs yet</text>`,
    );
  } else {
    if (geo.path !== "") {
      parts.push(`<path d="${geo.path}" fill="none" class="chart-line"/>`);
    }
    for (const p of geo.points) {
      parts.push(`<circle cx="${p.x}" cy="${p.y}" r="3" class="chart-dot"/>`);
    }
    parts.push(
      `<text x="4" y="12" class="chart-axis">${fmt(geo.yMax)}</text>`,
      `<text x="4" y="${height - 8}" class="chart-axis">${fmt(geo.yMin)}</text>`,
      `<text x="${width - 4}" y="${height - 8}" text-anchor="end" class="chart-axis">ep ${geo.xMax}</text>`,
    );
  }
  svg.innerHTML = parts.join("");
}
