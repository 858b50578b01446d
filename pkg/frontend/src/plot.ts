/** Turn evaluation/sweep report files from the generation pipeline into
 * trade-off figures: sparsity-vs-validity scatter and the lambda curves. */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";
import { renderFigure, Series } from "./svg.js";

export interface ReportPoint {
  validity: number;
  sparsity: number | null;
  m?: number;
  lam?: number;
}

function need(doc: any, key: string, source: string): any {
  if (doc[key] === undefined || doc[key] === null) {
    throw new Error(`${source}: missing required column/field '${key}'`);
  }
  return doc[key];
}

/** Accepts a sweep summary ({rows: [...]}), a single evaluation report
 * (JSON with aggregates, or CSV with #aggregate footer rows). */
export function readPoints(path: string): ReportPoint[] {
  if (path.endsWith(".csv")) {
    const lines = readFileSync(path, "utf-8").split("\n").filter((l) => l.length > 0);
    const agg: Record<string, number> = {};
    for (const line of lines) {
      if (line.startsWith("#aggregate:")) {
        const cells = line.split(",");
        const key = cells[0].slice("#aggregate:".length);
        agg[key] = Number(cells[1]);
      }
    }
    if (!("validity" in agg)) throw new Error(`${path}: missing required column/field 'validity'`);
    if (!("sparsity_mean" in agg)) throw new Error(`${path}: missing required column/field 'sparsity_mean'`);
    return [{ validity: agg.validity, sparsity: Number.isFinite(agg.sparsity_mean) ? agg.sparsity_mean : null }];
  }
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  if (Array.isArray(doc.rows)) {
    return doc.rows.map((row: any) => ({
      validity: Number(need(row, "validity", path)),
      sparsity: row.sparsity === null ? null : Number(need(row, "sparsity", path)),
      m: row.m !== undefined ? Number(row.m) : undefined,
      lam: row.lam !== undefined ? Number(row.lam) : undefined,
    }));
  }
  const agg = need(doc, "aggregates", path);
  return [{
    validity: Number(need(agg, "validity", path)),
    sparsity: agg.sparsity_mean === null ? null : Number(need(agg, "sparsity_mean", path)),
  }];
}

export function plotTradeoff(paths: string[], labels: string[] | null, outPath: string): void {
  const series: Series[] = paths.map((p, i) => {
    const points = readPoints(p)
      .filter((pt) => pt.sparsity !== null)
      .map((pt) => ({ x: pt.sparsity as number, y: pt.validity }));
    if (points.length === 0) throw new Error(`${p}: no rows with defined sparsity to plot`);
    return { label: labels?.[i] ?? basename(p), points };
  });
  const svg = renderFigure(series, {
    title: "Sparsity vs. validity of generated counterfactuals",
    xLabel: "mean sparsity (features changed)",
    yLabel: "validity",
    yDomain: [0, 1.05],
    caption: `sources: ${paths.map((p) => basename(p)).join(", ")}`,
  });
  writeFileSync(outPath, svg);
}

export function plotLambda(paths: string[], labels: string[] | null, outPath: string): void {
  const sparsitySeries: Series[] = [];
  const validitySeries: Series[] = [];
  paths.forEach((p, i) => {
    const pts = readPoints(p);
    if (!pts.every((pt) => pt.lam !== undefined)) {
      throw new Error(`${p}: missing required column/field 'lam' (need a lambda sweep summary)`);
    }
    const label = labels?.[i] ?? basename(p);
    sparsitySeries.push({
      label,
      points: pts.filter((pt) => pt.sparsity !== null).map((pt) => ({ x: pt.lam!, y: pt.sparsity as number })),
    });
    validitySeries.push({
      label,
      points: pts.map((pt) => ({ x: pt.lam!, y: pt.validity })),
    });
  });
  const left = renderFigure(sparsitySeries, {
    title: "Distance weight vs. sparsity",
    xLabel: "lambda (log scale)",
    yLabel: "mean sparsity",
    logX: true,
    width: 460,
  });
  const right = renderFigure(validitySeries, {
    title: "Distance weight vs. validity",
    xLabel: "lambda (log scale)",
    yLabel: "validity",
    yDomain: [0, 1.05],
    logX: true,
    width: 460,
  });
  const combined = `<svg xmlns="http://www.w3.org/2000/svg" width="940" height="400" viewBox="0 0 940 400">`
    + `<g>${strip(left)}</g><g transform="translate(470 0)">${strip(right)}</g></svg>`;
  writeFileSync(outPath, combined);
}

function strip(svg: string): string {
  return svg.replace(/^<svg[^>]*>/, "").replace(/<\/svg>$/, "");
}
