/**
 * Model id resolution.
 *
 * Built-in ids:
 *   hash-embedder-<dim>   deterministic trainable embedder (offline)
 *   hash-scorer-<dim>     pair scorer over the same representation
 * A directory containing model.json is a fine-tuned embedder.
 * Any other id is treated as a Hugging Face checkpoint and served through
 * transformers.js when that optional dependency is installed; loading it
 * without the dependency (or offline) fails with a clear error.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { HashEmbedder } from "./hash_model";

export type Role = "embedder" | "scorer";

export interface ServedModel {
  name: string;
  dim: number;
  normalizes: boolean;
  embed(texts: string[]): Promise<number[][]>;
  score(pairs: [string, string][]): Promise<number[]>;
}

export interface StoredModel {
  format: string;
  name: string;
  dim: number;
  tokens: Record<string, number[]>;
}

const STORED_FORMAT = "hash-embedder@1";

function wrapHashModel(model: HashEmbedder): ServedModel {
  return {
    name: model.name,
    dim: model.dim,
    normalizes: false,
    embed: async (texts) => texts.map((t) => Array.from(model.embed(t))),
    score: async (pairs) => pairs.map(([q, d]) => model.scorePair(q, d)),
  };
}

export function loadStoredEmbedder(dir: string): HashEmbedder {
  const file = path.join(dir, "model.json");
  const raw = JSON.parse(fs.readFileSync(file, "utf-8")) as StoredModel;
  if (raw.format !== STORED_FORMAT) {
    throw new Error(`unsupported model format ${raw.format} in ${file}`);
  }
  const table = new Map<string, Float64Array>();
  for (const [token, values] of Object.entries(raw.tokens)) {
    if (values.length !== raw.dim) {
      throw new Error(`token ${token} has ${values.length} values, expected ${raw.dim}`);
    }
    table.set(token, Float64Array.from(values));
  }
  return new HashEmbedder(raw.name, raw.dim, table);
}

export function saveStoredEmbedder(dir: string, model: HashEmbedder): void {
  fs.mkdirSync(dir, { recursive: true });
  const tokens: Record<string, number[]> = {};
  for (const [token, vec] of model.table) tokens[token] = Array.from(vec);
  const payload: StoredModel = {
    format: STORED_FORMAT,
    name: model.name,
    dim: model.dim,
    tokens,
  };
  fs.writeFileSync(path.join(dir, "model.json"), JSON.stringify(payload));
}

async function loadTransformers(modelId: string, role: Role): Promise<ServedModel> {
  let transformers: any;
  try {
    transformers = await import("@huggingface/transformers" as string);
  } catch {
    try {
      transformers = await import("@xenova/transformers" as string);
    } catch {
      throw new Error(
        `model ${modelId!} is not a built-in id and transformers.js is not installed ` +
          `(npm install @huggingface/transformers to serve Hugging Face checkpoints)`,
      );
    }
  }
  if (role === "embedder") {
    const extractor = await transformers.pipeline("feature-extraction", modelId);
    const probe = await extractor("dim probe", { pooling: "mean", normalize: false });
    const dim = probe.data.length;
    return {
      name: modelId,
      dim,
      normalizes: false,
      embed: async (texts) => {
        const out: number[][] = [];
        for (const text of texts) {
          const tensor = await extractor(text, { pooling: "mean", normalize: false });
          out.push(Array.from(tensor.data as Float32Array, Number));
        }
        return out;
      },
      score: async () => {
        throw new Error("score unsupported on embedder model");
      },
    };
  }
  const classifier = await transformers.pipeline("text-classification", modelId);
  return {
    name: modelId,
    dim: 1,
    normalizes: false,
    embed: async () => {
      throw new Error("embed unsupported on scorer model");
    },
    score: async (pairs) => {
      const out: number[] = [];
      for (const [query, doc] of pairs) {
        const result = await classifier({ text: query, text_pair: doc }, { top_k: 1 });
        out.push(Number(Array.isArray(result) ? result[0].score : result.score));
      }
      return out;
    },
  };
}

export async function loadModel(modelId: string, role: Role): Promise<ServedModel> {
  const builtin = /^hash-(embedder|scorer)-(\d+)$/.exec(modelId);
  if (builtin) {
    return wrapHashModel(new HashEmbedder(modelId, parseInt(builtin[2], 10)));
  }
  if (fs.existsSync(path.join(modelId, "model.json"))) {
    return wrapHashModel(loadStoredEmbedder(modelId));
  }
  return loadTransformers(modelId, role);
}
