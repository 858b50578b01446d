/** Versioned JSON persistence for ensemble models. */

import { readFileSync, writeFileSync } from "node:fs";
import { EnsembleModel } from "./ensembles.js";

const FORMAT = "cfrl-bridge-model";
const VERSION = 1;

export function saveModel(model: EnsembleModel, path: string): void {
  const doc = { format: FORMAT, version: VERSION, ...model };
  writeFileSync(path, JSON.stringify(doc));
}

export function loadModel(path: string): EnsembleModel {
  let doc: any;
  try {
    doc = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new Error(`${path}: cannot read model file: ${(err as Error).message}`);
  }
  if (doc.format !== FORMAT) throw new Error(`${path}: not a ${FORMAT} file`);
  if (doc.version !== VERSION) throw new Error(`${path}: unsupported model version ${doc.version}`);
  const { format, version, ...model } = doc;
  return model as EnsembleModel;
}
