/**
 * Offline fine-tuning over exported training triples.
 *
 * Objective is margin regression: for each (query, pos, neg, margin) the
 * model's dot(query, pos) - dot(query, neg) is pushed toward the teacher
 * margin with a squared loss. Updates flow into the token vectors of the
 * three texts via Adam with linear warmup. Triple files are validated in
 * full before the first update; a schema violation aborts the run.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { HashEmbedder, dot, tokenize } from "./hash_model";
import { loadStoredEmbedder, saveStoredEmbedder } from "./registry";

export interface Triple {
  query: string;
  pos: string;
  neg: string;
  margin: number;
}

export interface TrainConfig {
  steps: number;
  batchSize: number;
  epochs: number;
  lr: number;
  warmupSteps: number;
  checkpointEvery: number;
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  steps: 140_000,
  batchSize: 4,
  epochs: 1,
  lr: 2e-5,
  warmupSteps: 1000,
  checkpointEvery: 10_000,
};

export function loadTriples(file: string): Triple[] {
  const triples: Triple[] = [];
  const lines = fs.readFileSync(file, "utf-8").split("\n");
  for (let i = 0; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    let obj: any;
    try {
      obj = JSON.parse(lines[i]);
    } catch {
      throw new Error(`${file}:${i + 1}: invalid JSON`);
    }
    const ok =
      typeof obj === "object" &&
      obj !== null &&
      typeof obj.query === "string" &&
      typeof obj.pos === "string" &&
      typeof obj.neg === "string" &&
      typeof obj.margin === "number" &&
      Number.isFinite(obj.margin);
    if (!ok) {
      throw new Error(`${file}:${i + 1}: expected {query, pos, neg, margin:number}`);
    }
    if (obj.pos === obj.neg) {
      throw new Error(`${file}:${i + 1}: pos equals neg`);
    }
    triples.push({ query: obj.query, pos: obj.pos, neg: obj.neg, margin: obj.margin });
  }
  if (triples.length === 0) throw new Error(`${file}: no triples`);
  return triples;
}

/** Mean squared margin error of the model on a triple slice. */
export function marginMse(model: HashEmbedder, triples: Triple[]): number {
  let total = 0.0;
  for (const t of triples) {
    const q = model.embed(t.query);
    const predicted = dot(q, model.embed(t.pos)) - dot(q, model.embed(t.neg));
    const err = predicted - t.margin;
    total += err * err;
  }
  return total / triples.length;
}

interface AdamSlot {
  m: Float64Array;
  v: Float64Array;
}

export interface TrainResult {
  stepsRun: number;
  finalLoss: number;
}

export function train(
  model: HashEmbedder,
  triples: Triple[],
  config: TrainConfig,
  outDir?: string,
  log: (msg: string) => void = () => {},
): TrainResult {
  const beta1 = 0.9;
  const beta2 = 0.999;
  const eps = 1e-8;
  const state = new Map<string, AdamSlot>();

  const slot = (token: string): AdamSlot => {
    let s = state.get(token);
    if (!s) {
      s = { m: new Float64Array(model.dim), v: new Float64Array(model.dim) };
      state.set(token, s);
    }
    return s;
  };

  let step = 0;
  let cursor = 0;
  let epoch = 0;
  let runningLoss = 0.0;

  while (step < config.steps && epoch < config.epochs) {
    const grads = new Map<string, Float64Array>();
    const touch = (token: string): Float64Array => {
      let g = grads.get(token);
      if (!g) {
        g = new Float64Array(model.dim);
        grads.set(token, g);
      }
      return g;
    };

    let batchLoss = 0.0;
    let batchCount = 0;
    while (batchCount < config.batchSize && epoch < config.epochs) {
      const triple = triples[cursor];
      cursor++;
      if (cursor === triples.length) {
        cursor = 0;
        epoch++;
      }
      const qTokens = tokenize(triple.query);
      const pTokens = tokenize(triple.pos);
      const nTokens = tokenize(triple.neg);
      if (qTokens.length === 0 || pTokens.length === 0 || nTokens.length === 0) {
        continue; // nothing to update against
      }
      const q = model.embed(triple.query);
      const p = model.embed(triple.pos);
      const n = model.embed(triple.neg);
      const err = dot(q, p) - dot(q, n) - triple.margin;
      batchLoss += err * err;
      batchCount++;

      // d(err^2)/d q = 2 err (p - n); /d p = 2 err q; /d n = -2 err q,
      // spread over each text's tokens (mean pooling).
      const qScale = (2 * err) / qTokens.length;
      for (const token of qTokens) {
        const g = touch(token);
        for (let d = 0; d < model.dim; d++) g[d] += qScale * (p[d] - n[d]);
      }
      const pScale = (2 * err) / pTokens.length;
      for (const token of pTokens) {
        const g = touch(token);
        for (let d = 0; d < model.dim; d++) g[d] += pScale * q[d];
      }
      const nScale = (-2 * err) / nTokens.length;
      for (const token of nTokens) {
        const g = touch(token);
        for (let d = 0; d < model.dim; d++) g[d] += nScale * q[d];
      }
    }
    if (batchCount === 0) break;
    step++;

    const warm = config.warmupSteps > 0 ? Math.min(1, step / config.warmupSteps) : 1;
    const lr = config.lr * warm;
    const biasCorrection1 = 1 - Math.pow(beta1, step);
    const biasCorrection2 = 1 - Math.pow(beta2, step);
    for (const [token, g] of grads) {
      const vec = model.ensureToken(token);
      const s = slot(token);
      for (let d = 0; d < model.dim; d++) {
        const grad = g[d] / batchCount;
        s.m[d] = beta1 * s.m[d] + (1 - beta1) * grad;
        s.v[d] = beta2 * s.v[d] + (1 - beta2) * grad * grad;
        const mHat = s.m[d] / biasCorrection1;
        const vHat = s.v[d] / biasCorrection2;
        vec[d] -= (lr * mHat) / (Math.sqrt(vHat) + eps);
      }
    }

    runningLoss = batchLoss / batchCount;
    if (step % 500 === 0) log(`step ${step} loss ${runningLoss.toExponential(3)}`);
    if (outDir && config.checkpointEvery > 0 && step % config.checkpointEvery === 0) {
      saveStoredEmbedder(path.join(outDir, "checkpoint"), model);
    }
  }
  return { stepsRun: step, finalLoss: runningLoss };
}

export function resolveBaseEmbedder(baseId: string): HashEmbedder {
  const builtin = /^hash-embedder-(\d+)$/.exec(baseId);
  if (builtin) return new HashEmbedder(baseId, parseInt(builtin[1], 10));
  if (fs.existsSync(path.join(baseId, "model.json"))) return loadStoredEmbedder(baseId);
  throw new Error(
    `finetune base must be a hash-embedder-<dim> id or a trained model directory, got ${baseId}`,
  );
}

export function finetune(
  triplesPath: string,
  baseId: string,
  outDir: string,
  config: TrainConfig,
  log: (msg: string) => void = () => {},
): TrainResult {
  const triples = loadTriples(triplesPath);
  const model = resolveBaseEmbedder(baseId);
  const result = train(model, triples, config, outDir, log);
  saveStoredEmbedder(outDir, model);
  fs.writeFileSync(
    path.join(outDir, "config.json"),
    JSON.stringify(
      {
        base: baseId,
        triples: triplesPath,
        n_triples: triples.length,
        steps: config.steps,
        steps_run: result.stepsRun,
        batch_size: config.batchSize,
        epochs: config.epochs,
        lr: config.lr,
        warmup_steps: config.warmupSteps,
        optimizer: "adam",
        final_loss: result.finalLoss,
      },
      null,
      2,
    ),
  );
  return result;
}
