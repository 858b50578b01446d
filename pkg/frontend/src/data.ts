/** CSV + schema loading and the normalization contract shared with the
 * training pipeline: inputs served over the wire are min-max normalized,
 * so models here train and predict in that same [0, 1] space. */

import { readFileSync } from "node:fs";

export interface FeatureSpec {
  name: string;
  kind: "numeric" | "binary";
  actionable: boolean;
  direction: "any" | "increase" | "decrease";
  raw_min: number;
  raw_max: number;
}

export interface Schema {
  features: FeatureSpec[];
  target: { name: string; task: "classification" | "regression"; n_classes?: number };
}

export interface Stats {
  mins: number[];
  maxs: number[];
}

export interface Dataset {
  X: number[][];
  y: number[];
  schema: Schema;
}

export function loadSchema(path: string): Schema {
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  if (!doc.features || !doc.target) throw new Error(`${path}: not a schema document`);
  return doc as Schema;
}

export function loadCsv(path: string, schema: Schema): Dataset {
  const text = readFileSync(path, "utf-8");
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  const header = lines[0].split(",").map((h) => h.trim());
  const cols = new Map<string, number>();
  for (const f of schema.features) {
    const idx = header.indexOf(f.name);
    if (idx < 0) throw new Error(`${path}: missing column ${f.name}`);
    cols.set(f.name, idx);
  }
  const targetIdx = header.indexOf(schema.target.name);
  if (targetIdx < 0) throw new Error(`${path}: missing target column ${schema.target.name}`);

  const X: number[][] = [];
  const y: number[] = [];
  for (let r = 1; r < lines.length; r++) {
    const cells = lines[r].split(",");
    const row = schema.features.map((f) => {
      const v = Number(cells[cols.get(f.name)!]);
      if (!Number.isFinite(v)) throw new Error(`${path}: bad cell at data row ${r}, column ${f.name}`);
      return v;
    });
    const label = Number(cells[targetIdx]);
    if (!Number.isFinite(label)) throw new Error(`${path}: bad label at data row ${r}`);
    X.push(row);
    y.push(label);
  }
  return { X, y, schema };
}

export function loadStats(path: string): Stats {
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  if (!doc.mins || !doc.maxs) throw new Error(`${path}: not a normalization stats file`);
  return { mins: doc.mins, maxs: doc.maxs };
}

export function fitStats(X: number[][]): Stats {
  const n = X[0].length;
  const mins = Array(n).fill(Infinity);
  const maxs = Array(n).fill(-Infinity);
  for (const row of X) {
    for (let j = 0; j < n; j++) {
      if (row[j] < mins[j]) mins[j] = row[j];
      if (row[j] > maxs[j]) maxs[j] = row[j];
    }
  }
  return { mins, maxs };
}

export function normalizeRow(row: number[], stats: Stats): number[] {
  return row.map((v, j) => {
    const span = stats.maxs[j] - stats.mins[j];
    if (span === 0) return 0;
    const z = (v - stats.mins[j]) / span;
    return Math.min(1, Math.max(0, z));
  });
}

export function normalize(X: number[][], stats: Stats): number[][] {
  return X.map((r) => normalizeRow(r, stats));
}

/** Deterministic xorshift-based generator for reproducible splits and
 * bootstrap draws. */
export function makeRng(seed: number): () => number {
  let s = (seed >>> 0) || 0x9e3779b9;
  return () => {
    s ^= s << 13;
    s >>>= 0;
    s ^= s >> 17;
    s ^= s << 5;
    s >>>= 0;
    return s / 0x100000000;
  };
}

export function trainTestSplit(
  X: number[][], y: number[], trainFraction: number, seed: number,
): { trainX: number[][]; trainY: number[]; testX: number[][]; testY: number[] } {
  const order = X.map((_, i) => i);
  const rng = makeRng(seed);
  for (let i = order.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [order[i], order[j]] = [order[j], order[i]];
  }
  const nTrain = Math.floor(trainFraction * X.length);
  const take = (idx: number[]) => ({
    X: idx.map((i) => X[i]),
    y: idx.map((i) => y[i]),
  });
  const tr = take(order.slice(0, nTrain));
  const te = take(order.slice(nTrain));
  return { trainX: tr.X, trainY: tr.y, testX: te.X, testY: te.y };
}

export function accuracy(pred: number[], truth: number[]): number {
  let ok = 0;
  for (let i = 0; i < truth.length; i++) ok += pred[i] === truth[i] ? 1 : 0;
  return ok / truth.length;
}
