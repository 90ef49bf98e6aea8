#!/usr/bin/env node
/**
 * modelsvc: serve embedding/scoring models over the NDJSON wire protocol,
 * or fine-tune an embedder on exported training triples.
 *
 *   modelsvc serve --model <id> --role <embedder|scorer> --transport <stdio|tcp:port>
 *   modelsvc finetune --triples <path> --base <id> --out <dir>
 *                     [--steps N] [--batch N] [--epochs N]
 *                     [--lr F] [--warmup N] [--checkpoint-every N]
 */

import { DEFAULT_TRAIN_CONFIG, finetune } from "./finetune";
import { Role, loadModel } from "./registry";
import { serveStdio, serveTcp } from "./wire";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    if (!argv[i].startsWith("--")) {
      throw new Error(`unexpected argument ${argv[i]}`);
    }
    const key = argv[i].slice(2);
    const value = argv[i + 1];
    if (value === undefined || value.startsWith("--")) {
      throw new Error(`flag --${key} needs a value`);
    }
    flags.set(key, value);
    i++;
  }
  return flags;
}

function requireFlag(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) throw new Error(`missing required flag --${name}`);
  return value;
}

function intFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const value = parseInt(raw, 10);
  if (!Number.isFinite(value)) throw new Error(`--${name} must be an integer`);
  return value;
}

function floatFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const value = parseFloat(raw);
  if (!Number.isFinite(value)) throw new Error(`--${name} must be a number`);
  return value;
}

async function runServe(flags: Map<string, string>): Promise<void> {
  const modelId = requireFlag(flags, "model");
  const role = requireFlag(flags, "role") as Role;
  if (role !== "embedder" && role !== "scorer") {
    throw new Error(`--role must be embedder or scorer, got ${role}`);
  }
  const transport = flags.get("transport") ?? "stdio";
  const model = await loadModel(modelId, role);
  if (transport === "stdio") {
    await serveStdio(model, role);
    return;
  }
  const tcp = /^tcp:(\d+)$/.exec(transport);
  if (!tcp) throw new Error(`--transport must be stdio or tcp:<port>, got ${transport}`);
  await serveTcp(model, role, parseInt(tcp[1], 10));
  await new Promise(() => {}); // serve until killed
}

function runFinetune(flags: Map<string, string>): void {
  const config = {
    steps: intFlag(flags, "steps", DEFAULT_TRAIN_CONFIG.steps),
    batchSize: intFlag(flags, "batch", DEFAULT_TRAIN_CONFIG.batchSize),
    epochs: intFlag(flags, "epochs", DEFAULT_TRAIN_CONFIG.epochs),
    lr: floatFlag(flags, "lr", DEFAULT_TRAIN_CONFIG.lr),
    warmupSteps: intFlag(flags, "warmup", DEFAULT_TRAIN_CONFIG.warmupSteps),
    checkpointEvery: intFlag(flags, "checkpoint-every", DEFAULT_TRAIN_CONFIG.checkpointEvery),
  };
  const result = finetune(
    requireFlag(flags, "triples"),
    requireFlag(flags, "base"),
    requireFlag(flags, "out"),
    config,
    (msg) => console.error(msg),
  );
  console.error(`finetune done: ${result.stepsRun} steps, final loss ${result.finalLoss}`);
}

async function main(): Promise<void> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "serve") {
      await runServe(parseFlags(rest));
    } else if (command === "finetune") {
      runFinetune(parseFlags(rest));
    } else {
      throw new Error("usage: modelsvc <serve|finetune> [flags]");
    }
  } catch (err) {
    console.error(`modelsvc: error: ${err instanceof Error ? err.message : String(err)}`);
    process.exit(1);
  }
}

main();
