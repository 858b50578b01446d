/** CART trees used as the base learners for every ensemble here.
 * Classification trees split on gini impurity with optional per-sample
 * weights; regression trees minimize weighted squared error. */

export interface TreeNode {
  feature?: number;
  threshold?: number;
  left?: TreeNode;
  right?: TreeNode;
  value?: number;          // leaf prediction: class index or mean response
}

export interface TreeOptions {
  maxDepth: number;
  minLeaf: number;
  /** number of candidate features per split; 0 means all */
  featureSubset: number;
  rng?: () => number;
}

interface Task {
  kind: "gini" | "mse";
  nClasses: number;
}

function leafValue(y: number[], w: number[], idx: number[], task: Task): number {
  if (task.kind === "gini") {
    const mass = new Array(task.nClasses).fill(0);
    for (const i of idx) mass[y[i]] += w[i];
    let best = 0;
    for (let c = 1; c < task.nClasses; c++) if (mass[c] > mass[best]) best = c;
    return best;
  }
  let sum = 0;
  let total = 0;
  for (const i of idx) {
    sum += w[i] * y[i];
    total += w[i];
  }
  return total > 0 ? sum / total : 0;
}

function impurity(y: number[], w: number[], idx: number[], task: Task): number {
  if (idx.length === 0) return 0;
  if (task.kind === "gini") {
    const mass = new Array(task.nClasses).fill(0);
    let total = 0;
    for (const i of idx) {
      mass[y[i]] += w[i];
      total += w[i];
    }
    if (total === 0) return 0;
    let g = 1;
    for (const m of mass) g -= (m / total) ** 2;
    return g * total;
  }
  let sum = 0;
  let sq = 0;
  let total = 0;
  for (const i of idx) {
    sum += w[i] * y[i];
    sq += w[i] * y[i] * y[i];
    total += w[i];
  }
  return total > 0 ? sq - (sum * sum) / total : 0;
}

function bestSplit(
  X: number[][], y: number[], w: number[], idx: number[],
  features: number[], minLeaf: number, task: Task,
): { feature: number; threshold: number; gain: number } | null {
  const parent = impurity(y, w, idx, task);
  let best: { feature: number; threshold: number; gain: number } | null = null;
  for (const f of features) {
    const sorted = [...idx].sort((a, b) => X[a][f] - X[b][f]);
    // weighted prefix statistics over the sorted order
    if (task.kind === "gini") {
      const leftMass = new Array(task.nClasses).fill(0);
      const rightMass = new Array(task.nClasses).fill(0);
      let leftTotal = 0;
      let rightTotal = 0;
      for (const i of sorted) {
        rightMass[y[i]] += w[i];
        rightTotal += w[i];
      }
      for (let pos = 0; pos < sorted.length - 1; pos++) {
        const i = sorted[pos];
        leftMass[y[i]] += w[i];
        leftTotal += w[i];
        rightMass[y[i]] -= w[i];
        rightTotal -= w[i];
        if (X[sorted[pos + 1]][f] === X[i][f]) continue;
        if (pos + 1 < minLeaf || sorted.length - pos - 1 < minLeaf) continue;
        let gl = 1;
        let gr = 1;
        for (let c = 0; c < task.nClasses; c++) {
          if (leftTotal > 0) gl -= (leftMass[c] / leftTotal) ** 2;
          if (rightTotal > 0) gr -= (rightMass[c] / rightTotal) ** 2;
        }
        const child = (leftTotal > 0 ? gl * leftTotal : 0) + (rightTotal > 0 ? gr * rightTotal : 0);
        const gain = parent - child;
        if (gain > 1e-12 && (!best || gain > best.gain)) {
          best = { feature: f, threshold: (X[i][f] + X[sorted[pos + 1]][f]) / 2, gain };
        }
      }
    } else {
      let lSum = 0;
      let lSq = 0;
      let lTot = 0;
      let rSum = 0;
      let rSq = 0;
      let rTot = 0;
      for (const i of sorted) {
        rSum += w[i] * y[i];
        rSq += w[i] * y[i] * y[i];
        rTot += w[i];
      }
      for (let pos = 0; pos < sorted.length - 1; pos++) {
        const i = sorted[pos];
        lSum += w[i] * y[i];
        lSq += w[i] * y[i] * y[i];
        lTot += w[i];
        rSum -= w[i] * y[i];
        rSq -= w[i] * y[i] * y[i];
        rTot -= w[i];
        if (X[sorted[pos + 1]][f] === X[i][f]) continue;
        if (pos + 1 < minLeaf || sorted.length - pos - 1 < minLeaf) continue;
        const child = (lTot > 0 ? lSq - (lSum * lSum) / lTot : 0)
          + (rTot > 0 ? rSq - (rSum * rSum) / rTot : 0);
        const gain = parent - child;
        if (gain > 1e-12 && (!best || gain > best.gain)) {
          best = { feature: f, threshold: (X[i][f] + X[sorted[pos + 1]][f]) / 2, gain };
        }
      }
    }
  }
  return best;
}

function growNode(
  X: number[][], y: number[], w: number[], idx: number[],
  depth: number, opts: TreeOptions, task: Task,
): TreeNode {
  const value = leafValue(y, w, idx, task);
  if (depth >= opts.maxDepth || idx.length < 2 * opts.minLeaf) return { value };
  const nFeatures = X[0].length;
  let features = Array.from({ length: nFeatures }, (_, j) => j);
  if (opts.featureSubset > 0 && opts.featureSubset < nFeatures && opts.rng) {
    for (let i = features.length - 1; i > 0; i--) {
      const j = Math.floor(opts.rng() * (i + 1));
      [features[i], features[j]] = [features[j], features[i]];
    }
    features = features.slice(0, opts.featureSubset);
  }
  const split = bestSplit(X, y, w, idx, features, opts.minLeaf, task);
  if (!split) return { value };
  const leftIdx = idx.filter((i) => X[i][split.feature] <= split.threshold);
  const rightIdx = idx.filter((i) => X[i][split.feature] > split.threshold);
  if (leftIdx.length === 0 || rightIdx.length === 0) return { value };
  return {
    feature: split.feature,
    threshold: split.threshold,
    value,
    left: growNode(X, y, w, leftIdx, depth + 1, opts, task),
    right: growNode(X, y, w, rightIdx, depth + 1, opts, task),
  };
}

export function fitClassificationTree(
  X: number[][], y: number[], nClasses: number, opts: TreeOptions, weights?: number[],
): TreeNode {
  const w = weights ?? new Array(X.length).fill(1 / X.length);
  const idx = X.map((_, i) => i);
  return growNode(X, y, w, idx, 0, opts, { kind: "gini", nClasses });
}

export function fitRegressionTree(
  X: number[][], y: number[], opts: TreeOptions, weights?: number[],
): TreeNode {
  const w = weights ?? new Array(X.length).fill(1);
  const idx = X.map((_, i) => i);
  return growNode(X, y, w, idx, 0, opts, { kind: "mse", nClasses: 0 });
}

export function predictTree(node: TreeNode, x: number[]): number {
  let cur = node;
  while (cur.feature !== undefined) {
    cur = x[cur.feature] <= cur.threshold! ? cur.left! : cur.right!;
  }
  return cur.value!;
}
