import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { plotLambda, plotTradeoff, readPoints } from "../src/plot.js";

function sweepSummary(dir: string, rows: object[]): string {
  const path = join(dir, "sweep_summary.json");
  writeFileSync(path, JSON.stringify({ config: {}, rows }));
  return path;
}

function evalJson(dir: string, validity: number, sparsity: number | null): string {
  const path = join(dir, "eval.json");
  writeFileSync(path, JSON.stringify({
    config: {}, train_time_s: 1.0,
    aggregates: { validity, proximity_mean: 0.2, sparsity_mean: sparsity, gen_time_total_s: 0.5 },
    results: [],
  }));
  return path;
}

describe("report reading", () => {
  it("reads sweep summaries", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const path = sweepSummary(dir, [
      { m: 1, validity: 0.5, sparsity: 1.0 },
      { m: 3, validity: 0.9, sparsity: 2.1 },
    ]);
    const pts = readPoints(path);
    expect(pts).toHaveLength(2);
    expect(pts[1].validity).toBe(0.9);
  });

  it("reads single evaluation reports", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const pts = readPoints(evalJson(dir, 0.8, 1.5));
    expect(pts).toEqual([{ validity: 0.8, sparsity: 1.5 }]);
  });

  it("reads csv aggregate footers", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const path = join(dir, "r.csv");
    writeFileSync(path, [
      "instance_id,valid,proximity,sparsity,gen_time_s",
      "0,1,0.3,1,0.01",
      "#aggregate:validity,0.75,,,",
      "#aggregate:proximity_mean,0.3,,,",
      "#aggregate:sparsity_mean,1.0,,,",
      "#aggregate:gen_time_total_s,0.01,,,",
    ].join("\n"));
    expect(readPoints(path)).toEqual([{ validity: 0.75, sparsity: 1.0 }]);
  });

  it("names the missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const path = join(dir, "bad.json");
    writeFileSync(path, JSON.stringify({ rows: [{ m: 1, sparsity: 2 }] }));
    expect(() => readPoints(path)).toThrow(/validity/);
  });
});

describe("figure rendering", () => {
  it("renders a single-marker figure from one evaluation report", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const out = join(dir, "fig.svg");
    plotTradeoff([evalJson(dir, 0.8, 1.5)], null, out);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("validity");
    expect(svg).toContain("sparsity");
    expect(svg).toContain("<circle");
  });

  it("overlays two series with a legend", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const a = sweepSummary(dir, [
      { m: 1, validity: 0.4, sparsity: 1.0 },
      { m: 5, validity: 0.9, sparsity: 2.5 },
    ]);
    const b = evalJson(dir, 0.7, 2.0);
    const out = join(dir, "overlay.svg");
    plotTradeoff([a, b], ["rl-agent", "baseline"], out);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain("rl-agent");
    expect(svg).toContain("baseline");
    expect(svg).toContain("polyline");
  });

  it("renders two-panel lambda curves", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const path = sweepSummary(dir, [
      { lam: 0.01, validity: 1.0, sparsity: 2.0 },
      { lam: 0.1, validity: 0.9, sparsity: 1.5 },
      { lam: 1.0, validity: 0.8, sparsity: 1.2 },
    ]);
    const out = join(dir, "lambda.svg");
    plotLambda([path], null, out);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toContain("lambda");
    expect(svg.match(/<svg/g)!.length).toBe(1);
    expect(svg).toContain("sparsity");
    expect(svg).toContain("validity");
  });

  it("rejects lambda plots without a lam field", () => {
    const dir = mkdtempSync(join(tmpdir(), "plot-"));
    const path = evalJson(dir, 0.9, 1.0);
    expect(() => plotLambda([path], null, join(dir, "x.svg"))).toThrow(/lam/);
  });
});
