/**
 * Deterministic, trainable token-averaging embedder.
 *
 * Every token starts from a vector derived purely from a 64-bit hash of its
 * bytes, so an untrained model embeds the same text to the same floats on
 * any machine. Fine-tuning replaces individual token vectors; unseen tokens
 * keep their hash-derived values, which is what lets a trained model still
 * embed arbitrary text.
 */

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(/[\p{L}\p{N}]+/gu) ?? [];
}

function fnv1a64(text: string): bigint {
  const bytes = Buffer.from(text, "utf-8");
  let hash = FNV_OFFSET;
  for (const byte of bytes) {
    hash ^= BigInt(byte);
    hash = (hash * FNV_PRIME) & MASK64;
  }
  return hash;
}

/** splitmix64: exact integer stream, identical everywhere. */
function nextU64(state: bigint): [bigint, bigint] {
  state = (state + 0x9e3779b97f4a7c15n) & MASK64;
  let z = state;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  z = z ^ (z >> 31n);
  return [z, state];
}

export function hashInitVector(token: string, dim: number): Float64Array {
  let state = fnv1a64(token);
  const vec = new Float64Array(dim);
  const scale = 1.0 / Math.sqrt(dim);
  for (let d = 0; d < dim; d++) {
    let value: bigint;
    [value, state] = nextU64(state);
    // top 53 bits -> [0, 1), shifted to [-0.5, 0.5)
    vec[d] = (Number(value >> 11n) / 2 ** 53 - 0.5) * scale;
  }
  return vec;
}

export function dot(a: Float64Array, b: Float64Array): number {
  let acc = 0.0;
  for (let i = 0; i < a.length; i++) acc += a[i] * b[i];
  return acc;
}

export class HashEmbedder {
  readonly name: string;
  readonly dim: number;
  /** Learned token vectors; tokens absent here fall back to hash init. */
  readonly table: Map<string, Float64Array>;

  constructor(name: string, dim: number, table?: Map<string, Float64Array>) {
    if (!Number.isInteger(dim) || dim <= 0) {
      throw new Error(`embedder dim must be a positive integer, got ${dim}`);
    }
    this.name = name;
    this.dim = dim;
    this.table = table ?? new Map();
  }

  tokenVector(token: string): Float64Array {
    return this.table.get(token) ?? hashInitVector(token, this.dim);
  }

  /** Materialize a token in the table so training can update it in place. */
  ensureToken(token: string): Float64Array {
    let vec = this.table.get(token);
    if (!vec) {
      vec = hashInitVector(token, this.dim);
      this.table.set(token, vec);
    }
    return vec;
  }

  /** Mean of token vectors; texts with no tokens embed to the zero vector. */
  embed(text: string): Float64Array {
    const tokens = tokenize(text);
    const out = new Float64Array(this.dim);
    if (tokens.length === 0) return out;
    for (const token of tokens) {
      const vec = this.tokenVector(token);
      for (let d = 0; d < this.dim; d++) out[d] += vec[d];
    }
    for (let d = 0; d < this.dim; d++) out[d] /= tokens.length;
    return out;
  }

  scorePair(query: string, doc: string): number {
    return dot(this.embed(query), this.embed(doc));
  }
}
