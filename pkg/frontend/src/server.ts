/** Line-delimited JSON protocol front for a saved ensemble model.
 *
 *   -> {"type":"info"}
 *   <- {"type":"info","task":"classification","n_features":8,"n_classes":2}
 *   -> {"type":"predict","x":[...]}           <- {"type":"prediction","y":1}
 *   -> {"type":"predict_batch","X":[[...]]}   <- {"type":"prediction_batch","y":[...]}
 *   any failure                               <- {"type":"error","message":"..."}
 *
 * Stateless between requests; malformed lines never kill the loop.
 */

import { createInterface } from "node:readline";
import { createServer } from "node:net";
import { EnsembleModel, predictBatch, predictModel } from "./ensembles.js";

type Reply = Record<string, unknown>;

export function answer(model: EnsembleModel, line: string): Reply {
  let msg: any;
  try {
    msg = JSON.parse(line);
  } catch {
    return { type: "error", message: "invalid JSON" };
  }
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    return { type: "error", message: "request must be a JSON object" };
  }
  try {
    switch (msg.type) {
      case "info": {
        const info: Reply = {
          type: "info",
          task: model.task,
          n_features: model.nFeatures,
        };
        if (model.task === "classification") info.n_classes = model.nClasses;
        info.metadata = model.meta;
        return info;
      }
      case "predict": {
        const x = checkRow(msg.x, model.nFeatures);
        return { type: "prediction", y: predictModel(model, x) };
      }
      case "predict_batch": {
        if (!Array.isArray(msg.X)) throw new Error("predict_batch needs X");
        const rows = msg.X.map((r: unknown) => checkRow(r, model.nFeatures));
        return { type: "prediction_batch", y: predictBatch(model, rows) };
      }
      default:
        return { type: "error", message: `unknown request type ${JSON.stringify(msg.type)}` };
    }
  } catch (err) {
    return { type: "error", message: (err as Error).message };
  }
}

function checkRow(value: unknown, nFeatures: number): number[] {
  if (!Array.isArray(value) || value.length !== nFeatures) {
    throw new Error(`expected a vector of ${nFeatures} features`);
  }
  const row = value.map(Number);
  if (row.some((v) => !Number.isFinite(v))) throw new Error("non-finite feature value");
  return row;
}

export function serveStdio(model: EnsembleModel): Promise<void> {
  return new Promise((resolve) => {
    const rl = createInterface({ input: process.stdin, terminal: false });
    rl.on("line", (line) => {
      if (line.trim().length === 0) return;
      process.stdout.write(JSON.stringify(answer(model, line)) + "\n");
    });
    rl.on("close", resolve);
  });
}

export function serveTcp(model: EnsembleModel, port: number, onListening?: (port: number) => void) {
  const server = createServer((socket) => {
    const rl = createInterface({ input: socket, terminal: false });
    rl.on("line", (line) => {
      if (line.trim().length === 0) return;
      socket.write(JSON.stringify(answer(model, line)) + "\n");
    });
    socket.on("error", () => socket.destroy());
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address();
    if (addr && typeof addr === "object" && onListening) onListening(addr.port);
  });
  return server;
}
