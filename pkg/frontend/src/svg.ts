/** Minimal hand-assembled SVG scatter/line figures; no display deps. */

export interface Series {
  label: string;
  points: Array<{ x: number; y: number }>;
}

export interface FigureOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  caption?: string;
  width?: number;
  height?: number;
  logX?: boolean;
  yDomain?: [number, number];
}

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (lo === hi) {
    const pad = lo === 0 ? 1 : Math.abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const span = hi - lo;
  const step = 10 ** Math.floor(Math.log10(span / n));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += s) out.push(Number(v.toPrecision(10)));
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  if (Math.abs(v) >= 1000 || Math.abs(v) < 0.01) return v.toExponential(0);
  return String(Number(v.toPrecision(3)));
}

export function renderFigure(series: Series[], opts: FigureOptions): string {
  const width = opts.width ?? 560;
  const height = opts.height ?? 400;
  const margin = { left: 62, right: 20, top: 40, bottom: opts.caption ? 74 : 52 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const xs = series.flatMap((s) => s.points.map((p) => (opts.logX ? Math.log10(p.x) : p.x)));
  const ys = series.flatMap((s) => s.points.map((p) => p.y));
  if (xs.length === 0) throw new Error("nothing to plot: no data points");
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let [yLo, yHi] = opts.yDomain ?? [Math.min(...ys), Math.max(...ys)];
  if (xLo === xHi) {
    xLo -= 0.5;
    xHi += 0.5;
  }
  if (yLo === yHi) {
    yLo -= 0.1;
    yHi += 0.1;
  }
  const sx = (x: number) => {
    const v = opts.logX ? Math.log10(x) : x;
    return margin.left + ((v - xLo) / (xHi - xLo)) * plotW;
  };
  const sy = (y: number) => margin.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`);
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(`<text x="${width / 2}" y="22" text-anchor="middle" font-size="15">${esc(opts.title)}</text>`);

  // axes
  const x0 = margin.left;
  const y0 = margin.top + plotH;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0 + plotW}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${margin.top}" x2="${x0}" y2="${y0}" stroke="black"/>`);
  const xTicks = opts.logX
    ? Array.from(new Set(series.flatMap((s) => s.points.map((p) => p.x))))
    : niceTicks(xLo, xHi);
  for (const t of xTicks) {
    const px = sx(t);
    if (px < x0 - 1 || px > x0 + plotW + 1) continue;
    parts.push(`<line x1="${px}" y1="${y0}" x2="${px}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(`<text x="${px}" y="${y0 + 18}" text-anchor="middle" font-size="11">${fmt(t)}</text>`);
  }
  for (const t of niceTicks(yLo, yHi)) {
    const py = sy(t);
    if (py < margin.top - 1 || py > y0 + 1) continue;
    parts.push(`<line x1="${x0 - 5}" y1="${py}" x2="${x0}" y2="${py}" stroke="black"/>`);
    parts.push(`<text x="${x0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">${fmt(t)}</text>`);
    parts.push(`<line x1="${x0}" y1="${py}" x2="${x0 + plotW}" y2="${py}" stroke="#dddddd"/>`);
  }
  parts.push(`<text x="${x0 + plotW / 2}" y="${y0 + 36}" text-anchor="middle" font-size="13">${esc(opts.xLabel)}</text>`);
  parts.push(`<text x="18" y="${margin.top + plotH / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${margin.top + plotH / 2})">${esc(opts.yLabel)}</text>`);

  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    const pts = [...s.points].sort((a, b) => a.x - b.x);
    if (pts.length > 1) {
      const path = pts.map((p) => `${sx(p.x).toFixed(1)},${sy(p.y).toFixed(1)}`).join(" ");
      parts.push(`<polyline points="${path}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    }
    for (const p of pts) {
      parts.push(`<circle cx="${sx(p.x).toFixed(1)}" cy="${sy(p.y).toFixed(1)}" r="4" fill="${color}"/>`);
    }
    // legend entry
    const ly = margin.top + 6 + i * 16;
    parts.push(`<rect x="${x0 + plotW - 150}" y="${ly - 9}" width="10" height="10" fill="${color}"/>`);
    parts.push(`<text x="${x0 + plotW - 135}" y="${ly}" font-size="11">${esc(s.label)}</text>`);
  });

  if (opts.caption) {
    parts.push(`<text x="${width / 2}" y="${height - 8}" text-anchor="middle" font-size="10" fill="#555555">${esc(opts.caption)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n");
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
