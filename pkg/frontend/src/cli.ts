#!/usr/bin/env node
/** cfrl-bridge: train reference tree ensembles, serve them over the wire
 * protocol, and render trade-off figures from evaluation reports. */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import {
  accuracy, fitStats, loadCsv, loadSchema, loadStats, normalize, trainTestSplit,
} from "./data.js";
import {
  fitAdaBoost, fitGradientBoosting, fitRandomForest, ModelKind, predictBatch,
} from "./ensembles.js";
import { loadModel, saveModel } from "./models.js";
import { plotLambda, plotTradeoff } from "./plot.js";
import { serveStdio, serveTcp } from "./server.js";

function trainCommand(argv: any): void {
  const schema = loadSchema(argv.schema);
  if (schema.target.task !== "classification") {
    throw new Error("reference ensembles cover classification targets");
  }
  const ds = loadCsv(argv.csv, schema);
  const stats = argv.stats ? loadStats(argv.stats) : fitStats(ds.X);
  const Xn = normalize(ds.X, stats);
  const { trainX, trainY, testX, testY } = trainTestSplit(Xn, ds.y, argv.split, argv.seed);
  const k = schema.target.n_classes ?? 2;
  const kind = argv.kind as ModelKind;
  const model =
    kind === "rf" ? fitRandomForest(trainX, trainY, k, argv.trees, argv.depth ?? 12, argv.seed)
    : kind === "adaboost" ? fitAdaBoost(trainX, trainY, k, argv.trees, argv.depth ?? 2, argv.seed)
    : fitGradientBoosting(trainX, trainY, k, argv.trees, argv.depth ?? 3, argv.rate, argv.seed);
  model.meta.stats = stats;
  model.meta.schema_target = schema.target.name;
  const accTrain = accuracy(predictBatch(model, trainX), trainY);
  const accTest = accuracy(predictBatch(model, testX), testY);
  saveModel(model, argv.out);
  process.stdout.write(JSON.stringify({
    model: argv.out, kind, trees: model.trees.length,
    train_accuracy: accTrain, test_accuracy: accTest,
  }) + "\n");
}

function serveCommand(argv: any): void {
  const model = loadModel(argv.model);
  if (argv.tcp !== undefined) {
    serveTcp(model, argv.tcp, (port) => {
      process.stdout.write(JSON.stringify({ listening: port }) + "\n");
    });
  } else {
    void serveStdio(model);
  }
}

function plotCommand(argv: any): void {
  const labels = argv.labels ? String(argv.labels).split(",") : null;
  const reports = argv.reports as string[];
  if (argv.kind === "lambda") {
    plotLambda(reports, labels, argv.out);
  } else {
    plotTradeoff(reports, labels, argv.out);
  }
  process.stdout.write(JSON.stringify({ figure: argv.out, series: reports.length }) + "\n");
}

yargs(hideBin(process.argv))
  .scriptName("cfrl-bridge")
  .command(
    "train",
    "fit a reference ensemble on a dataset CSV",
    (y) => y
      .option("kind", { choices: ["rf", "adaboost", "gboost"] as const, demandOption: true })
      .option("csv", { type: "string", demandOption: true })
      .option("schema", { type: "string", demandOption: true })
      .option("out", { type: "string", demandOption: true })
      .option("stats", { type: "string", describe: "normalization stats JSON from the training pipeline" })
      .option("split", { type: "number", default: 0.7 })
      .option("seed", { type: "number", default: 0 })
      .option("trees", { type: "number", default: 100 })
      .option("depth", { type: "number" })
      .option("rate", { type: "number", default: 0.1, describe: "gboost learning rate" }),
    trainCommand,
  )
  .command(
    "serve",
    "answer protocol requests for a saved model",
    (y) => y
      .option("model", { type: "string", demandOption: true })
      .option("tcp", { type: "number", describe: "listen on this TCP port instead of stdio" }),
    serveCommand,
  )
  .command(
    "plot",
    "render trade-off figures from report files",
    (y) => y
      .option("kind", { choices: ["tradeoff", "lambda"] as const, default: "tradeoff" as const })
      .option("out", { type: "string", demandOption: true })
      .option("labels", { type: "string", describe: "comma-separated series labels" })
      .positional("reports", { array: true })
      .demandCommand(0),
    (argv) => plotCommand({ ...argv, reports: argv._.slice(1) }),
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    process.stderr.write(`error: ${msg ?? (err as Error).message}\n`);
    process.exit(2);
  })
  .parse();
