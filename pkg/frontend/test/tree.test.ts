import { describe, expect, it } from "vitest";
import { makeRng } from "../src/data.js";
import {
  fitAdaBoost, fitGradientBoosting, fitRandomForest, predictBatch, predictModel,
} from "../src/ensembles.js";
import { fitClassificationTree, fitRegressionTree, predictTree } from "../src/tree.js";

function blobs(n: number, seed: number): { X: number[][]; y: number[] } {
  const rng = makeRng(seed);
  const X: number[][] = [];
  const y: number[] = [];
  for (let i = 0; i < n; i++) {
    const cls = i % 2;
    X.push([0.25 + 0.5 * cls + 0.15 * (rng() - 0.5), rng()]);
    y.push(cls);
  }
  return { X, y };
}

function xorData(): { X: number[][]; y: number[] } {
  const X: number[][] = [];
  const y: number[] = [];
  const rng = makeRng(9);
  for (let i = 0; i < 200; i++) {
    const a = rng() > 0.5 ? 1 : 0;
    const b = rng() > 0.5 ? 1 : 0;
    X.push([a * 0.8 + 0.1 + 0.05 * rng(), b * 0.8 + 0.1 + 0.05 * rng()]);
    y.push(a ^ b);
  }
  return { X, y };
}

describe("classification tree", () => {
  it("separates two blobs perfectly", () => {
    const { X, y } = blobs(100, 1);
    const tree = fitClassificationTree(X, y, 2, { maxDepth: 4, minLeaf: 1, featureSubset: 0 });
    const pred = X.map((x) => predictTree(tree, x));
    expect(pred).toEqual(y);
  });

  it("stump cannot represent xor; a deeper tree can", () => {
    // greedy gini gains are near zero at the xor root, so extra depth is
    // needed before the structure falls out
    const { X, y } = xorData();
    const stump = fitClassificationTree(X, y, 2, { maxDepth: 1, minLeaf: 1, featureSubset: 0 });
    const deep = fitClassificationTree(X, y, 2, { maxDepth: 6, minLeaf: 1, featureSubset: 0 });
    const accOf = (t: typeof stump) =>
      X.map((x) => predictTree(t, x)).filter((p, i) => p === y[i]).length / y.length;
    expect(accOf(stump)).toBeLessThan(0.8);
    expect(accOf(deep)).toBeGreaterThan(0.9);
  });

  it("respects sample weights", () => {
    // all mass on class-1 points: the root leaf must predict 1
    const X = [[0.1], [0.2], [0.8], [0.9]];
    const y = [0, 0, 1, 1];
    const w = [0, 0, 0.5, 0.5];
    const tree = fitClassificationTree(X, y, 2, { maxDepth: 0, minLeaf: 1, featureSubset: 0 }, w);
    expect(predictTree(tree, [0.1])).toBe(1);
  });
});

describe("regression tree", () => {
  it("fits a step function", () => {
    const X = Array.from({ length: 50 }, (_, i) => [i / 50]);
    const y = X.map(([v]) => (v < 0.5 ? 1.0 : 3.0));
    const tree = fitRegressionTree(X, y, { maxDepth: 2, minLeaf: 1, featureSubset: 0 });
    expect(predictTree(tree, [0.2])).toBeCloseTo(1.0, 6);
    expect(predictTree(tree, [0.8])).toBeCloseTo(3.0, 6);
  });
});

describe("ensembles", () => {
  it("random forest fits blobs and is deterministic per seed", () => {
    const { X, y } = blobs(120, 2);
    const a = fitRandomForest(X, y, 2, 20, 6, 7);
    const b = fitRandomForest(X, y, 2, 20, 6, 7);
    expect(predictBatch(a, X)).toEqual(predictBatch(b, X));
    const acc = predictBatch(a, X).filter((p, i) => p === y[i]).length / y.length;
    expect(acc).toBeGreaterThan(0.95);
  });

  it("adaboost of stumps solves xor-like structure with depth-2 trees", () => {
    const { X, y } = xorData();
    const model = fitAdaBoost(X, y, 2, 50, 2, 0);
    const acc = predictBatch(model, X).filter((p, i) => p === y[i]).length / y.length;
    expect(acc).toBeGreaterThan(0.9);
  });

  it("gradient boosting improves with rounds", () => {
    const { X, y } = xorData();
    const weak = fitGradientBoosting(X, y, 2, 3, 2, 0.3, 0);
    const strong = fitGradientBoosting(X, y, 2, 80, 2, 0.3, 0);
    const accOf = (m: typeof weak) =>
      predictBatch(m, X).filter((p, i) => p === y[i]).length / y.length;
    expect(accOf(strong)).toBeGreaterThan(accOf(weak));
    expect(accOf(strong)).toBeGreaterThan(0.9);
  });

  it("prediction is a valid class index", () => {
    const { X, y } = blobs(60, 3);
    for (const model of [fitRandomForest(X, y, 2, 10, 4, 0), fitAdaBoost(X, y, 2, 10, 1, 0)]) {
      for (const x of X) {
        const p = predictModel(model, x);
        expect([0, 1]).toContain(p);
      }
    }
  });
});
