/** The three reference ensembles: bagged random forest, SAMME boosting,
 * and gradient boosting with logistic loss. All operate on normalized
 * features and binary or K-ary integer labels. */

import { makeRng } from "./data.js";
import {
  fitClassificationTree,
  fitRegressionTree,
  predictTree,
  TreeNode,
} from "./tree.js";

export type ModelKind = "rf" | "adaboost" | "gboost";

export interface EnsembleModel {
  kind: ModelKind;
  task: "classification";
  nFeatures: number;
  nClasses: number;
  trees: TreeNode[];
  /** per-tree vote weights (adaboost) or learning-rate-scaled leaves (gboost) */
  alphas?: number[];
  baseScore?: number;
  meta: Record<string, unknown>;
}

export function fitRandomForest(
  X: number[][], y: number[], nClasses: number,
  nTrees = 100, maxDepth = 12, seed = 0,
): EnsembleModel {
  const rng = makeRng(seed + 1);
  const trees: TreeNode[] = [];
  const subset = Math.max(1, Math.round(Math.sqrt(X[0].length)));
  for (let t = 0; t < nTrees; t++) {
    const idx = Array.from({ length: X.length }, () => Math.floor(rng() * X.length));
    const bx = idx.map((i) => X[i]);
    const by = idx.map((i) => y[i]);
    trees.push(fitClassificationTree(bx, by, nClasses, {
      maxDepth, minLeaf: 1, featureSubset: subset, rng,
    }));
  }
  return {
    kind: "rf", task: "classification", nFeatures: X[0].length, nClasses, trees,
    meta: { nTrees, maxDepth, featureSubset: subset, seed },
  };
}

export function fitAdaBoost(
  X: number[][], y: number[], nClasses: number,
  nTrees = 100, maxDepth = 1, seed = 0,
): EnsembleModel {
  // SAMME with shallow trees; weights renormalized every round
  const n = X.length;
  let w = new Array(n).fill(1 / n);
  const trees: TreeNode[] = [];
  const alphas: number[] = [];
  for (let t = 0; t < nTrees; t++) {
    const tree = fitClassificationTree(X, y, nClasses, {
      maxDepth, minLeaf: 1, featureSubset: 0,
    }, w);
    const pred = X.map((x) => predictTree(tree, x));
    let err = 0;
    for (let i = 0; i < n; i++) if (pred[i] !== y[i]) err += w[i];
    err = Math.max(err, 1e-10);
    if (err >= 1 - 1 / nClasses) break;   // no better than chance: stop
    const alpha = Math.log((1 - err) / err) + Math.log(nClasses - 1);
    trees.push(tree);
    alphas.push(alpha);
    let total = 0;
    for (let i = 0; i < n; i++) {
      w[i] *= Math.exp(alpha * (pred[i] !== y[i] ? 1 : 0));
      total += w[i];
    }
    w = w.map((v) => v / total);
    if (err <= 1e-9) break;               // perfect fit: further rounds are no-ops
  }
  return {
    kind: "adaboost", task: "classification", nFeatures: X[0].length, nClasses,
    trees, alphas, meta: { nTrees, maxDepth, seed, rounds: trees.length },
  };
}

export function fitGradientBoosting(
  X: number[][], y: number[], nClasses: number,
  nTrees = 100, maxDepth = 3, learningRate = 0.1, seed = 0,
): EnsembleModel {
  if (nClasses !== 2) throw new Error("gradient boosting here supports binary targets");
  // logistic loss on {0,1}: fit trees to the residual y - sigmoid(score)
  const n = X.length;
  const pos = y.reduce((a, b) => a + b, 0);
  const prior = Math.min(Math.max(pos / n, 1e-6), 1 - 1e-6);
  const baseScore = Math.log(prior / (1 - prior));
  const scores = new Array(n).fill(baseScore);
  const trees: TreeNode[] = [];
  for (let t = 0; t < nTrees; t++) {
    const resid = scores.map((s, i) => y[i] - 1 / (1 + Math.exp(-s)));
    const tree = fitRegressionTree(X, resid, { maxDepth, minLeaf: 3, featureSubset: 0 });
    trees.push(tree);
    for (let i = 0; i < n; i++) scores[i] += learningRate * predictTree(tree, X[i]);
  }
  return {
    kind: "gboost", task: "classification", nFeatures: X[0].length, nClasses,
    trees, baseScore, alphas: trees.map(() => learningRate),
    meta: { nTrees, maxDepth, learningRate, seed },
  };
}

export function predictModel(model: EnsembleModel, x: number[]): number {
  if (model.kind === "rf") {
    const votes = new Array(model.nClasses).fill(0);
    for (const tree of model.trees) votes[predictTree(tree, x)] += 1;
    let best = 0;
    for (let c = 1; c < model.nClasses; c++) if (votes[c] > votes[best]) best = c;
    return best;
  }
  if (model.kind === "adaboost") {
    const votes = new Array(model.nClasses).fill(0);
    model.trees.forEach((tree, t) => {
      votes[predictTree(tree, x)] += model.alphas![t];
    });
    let best = 0;
    for (let c = 1; c < model.nClasses; c++) if (votes[c] > votes[best]) best = c;
    return best;
  }
  let score = model.baseScore!;
  model.trees.forEach((tree, t) => {
    score += model.alphas![t] * predictTree(tree, x);
  });
  return score > 0 ? 1 : 0;
}

export function predictBatch(model: EnsembleModel, X: number[][]): number[] {
  return X.map((x) => predictModel(model, x));
}
