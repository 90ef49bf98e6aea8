import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { finetune, loadTriples, marginMse, train } from "../src/finetune";
import { HashEmbedder, tokenize } from "../src/hash_model";
import { loadStoredEmbedder } from "../src/registry";

const CLI = path.join(__dirname, "..", "src", "cli.js");

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "modelsvc-test-"));
}

function writeTriples(file: string, triples: object[]): void {
  fs.writeFileSync(file, triples.map((t) => JSON.stringify(t)).join("\n") + "\n");
}

const WORDS = [
  "pop", "sad", "jazz", "club", "piano", "vocal", "night", "guitar", "drums",
  "synth", "mellow", "dark", "happy", "ambient", "rock", "folk",
];

/** xorshift32; deterministic synthetic data without any dependency. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0x100000000;
  };
}

function sample(rng: () => number, count: number): string {
  const picked: string[] = [];
  while (picked.length < count) {
    const word = WORDS[Math.floor(rng() * WORDS.length)];
    if (!picked.includes(word)) picked.push(word);
  }
  return picked.join(" ");
}

/** Teacher stand-in: Jaccard token overlap, a learnable lexical signal. */
function teacherScore(query: string, doc: string): number {
  const q = new Set(tokenize(query));
  const d = new Set(tokenize(doc));
  const intersection = [...q].filter((t) => d.has(t)).length;
  const union = new Set([...q, ...d]).size;
  return union === 0 ? 0 : intersection / union;
}

function syntheticTriples(n: number, seed: number) {
  const rng = makeRng(seed);
  const triples = [];
  while (triples.length < n) {
    const query = sample(rng, 3);
    const pos = sample(rng, 2);
    const neg = sample(rng, 2);
    if (pos === neg) continue;
    triples.push({ query, pos, neg, margin: teacherScore(query, pos) - teacherScore(query, neg) });
  }
  return triples;
}

test("loadTriples validates the schema before training", () => {
  const dir = tmpDir();
  const good = path.join(dir, "good.jsonl");
  writeTriples(good, [{ query: "q", pos: "a", neg: "b", margin: 0.5 }]);
  assert.equal(loadTriples(good).length, 1);

  const badMargin = path.join(dir, "bad_margin.jsonl");
  writeTriples(badMargin, [{ query: "q", pos: "a", neg: "b", margin: "high" }]);
  assert.throws(() => loadTriples(badMargin), /expected \{query, pos, neg, margin/);

  const samePosNeg = path.join(dir, "same.jsonl");
  writeTriples(samePosNeg, [{ query: "q", pos: "a", neg: "a", margin: 0 }]);
  assert.throws(() => loadTriples(samePosNeg), /pos equals neg/);

  const notJson = path.join(dir, "nj.jsonl");
  fs.writeFileSync(notJson, "{oops\n");
  assert.throws(() => loadTriples(notJson), /invalid JSON/);
});

test("zero-margin triples give a finite, well-defined starting loss", () => {
  const model = new HashEmbedder("hash-embedder-16", 16);
  const triples = [
    { query: "sad pop", pos: "mellow piano", neg: "club night", margin: 0 },
    { query: "jazz", pos: "night club", neg: "happy folk", margin: 0 },
  ];
  const mse = marginMse(model, triples);
  assert.ok(Number.isFinite(mse));
  // with margin 0 the loss is exactly the model's own squared margin
  const own =
    triples
      .map((t) => model.scorePair(t.query, t.pos) - model.scorePair(t.query, t.neg))
      .reduce((acc, m) => acc + m * m, 0) / triples.length;
  assert.ok(Math.abs(mse - own) < 1e-15);
});

test("smoke: 10-triple file trains, saves, and the output model serves", () => {
  const dir = tmpDir();
  const triplesPath = path.join(dir, "toy.jsonl");
  writeTriples(triplesPath, syntheticTriples(10, 7));
  const outDir = path.join(dir, "model");

  const result = finetune(triplesPath, "hash-embedder-16", outDir, {
    steps: 5,
    batchSize: 4,
    epochs: 1,
    lr: 0.01,
    warmupSteps: 0,
    checkpointEvery: 2,
  });
  assert.ok(result.stepsRun >= 1);
  assert.ok(fs.existsSync(path.join(outDir, "model.json")));
  const config = JSON.parse(fs.readFileSync(path.join(outDir, "config.json"), "utf-8"));
  assert.equal(config.base, "hash-embedder-16");
  assert.equal(config.optimizer, "adam");
  assert.ok(fs.existsSync(path.join(outDir, "checkpoint", "model.json")));

  const trained = loadStoredEmbedder(outDir);
  assert.equal(trained.dim, 16);

  // the saved directory is directly servable over the wire protocol
  const probe = spawnSync(
    "node",
    [CLI, "serve", "--model", outDir, "--role", "embedder", "--transport", "stdio"],
    { input: '{"op":"info"}\n{"op":"embed","texts":["sad pop"]}\n', encoding: "utf-8" },
  );
  const lines = probe.stdout.trim().split("\n");
  assert.equal(JSON.parse(lines[0]).dim, 16);
  const served: number[] = JSON.parse(lines[1]).vectors[0];
  assert.deepEqual(served, Array.from(trained.embed("sad pop")));
});

test("training reduces held-out margin error versus the untrained base", () => {
  const all = syntheticTriples(1000, 123);
  const trainSlice = all.slice(0, 800);
  const heldOut = all.slice(800);

  const base = new HashEmbedder("hash-embedder-32", 32);
  const before = marginMse(base, heldOut);

  const model = new HashEmbedder("hash-embedder-32", 32);
  train(model, trainSlice, {
    steps: 2000,
    batchSize: 8,
    epochs: 20,
    lr: 0.01,
    warmupSteps: 100,
    checkpointEvery: 0,
  });
  const after = marginMse(model, heldOut);

  assert.ok(
    after < before,
    `held-out MarginMSE did not improve: before=${before} after=${after}`,
  );
});

test("cli finetune honors flags and records them", () => {
  const dir = tmpDir();
  const triplesPath = path.join(dir, "toy.jsonl");
  writeTriples(triplesPath, syntheticTriples(12, 3));
  const outDir = path.join(dir, "out");
  const run = spawnSync("node", [
    CLI, "finetune",
    "--triples", triplesPath,
    "--base", "hash-embedder-8",
    "--out", outDir,
    "--steps", "4",
    "--batch", "2",
    "--epochs", "3",
    "--lr", "0.005",
    "--warmup", "2",
  ], { encoding: "utf-8" });
  assert.equal(run.status, 0, run.stderr);
  const config = JSON.parse(fs.readFileSync(path.join(outDir, "config.json"), "utf-8"));
  assert.equal(config.steps, 4);
  assert.equal(config.batch_size, 2);
  assert.equal(config.epochs, 3);
  assert.equal(config.lr, 0.005);
  assert.equal(config.warmup_steps, 2);
  assert.equal(config.steps_run, 4);
});

test("cli exits nonzero on load failure", () => {
  const run = spawnSync("node", [
    CLI, "serve", "--model", "hash-embedder-not-a-dim", "--role", "embedder",
  ], { encoding: "utf-8", timeout: 30_000 });
  assert.notEqual(run.status, 0);
  assert.match(run.stderr, /error/);
});
