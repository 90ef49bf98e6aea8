/**
 * NDJSON responder: one JSON object per line, responses in request order.
 *
 *   -> {"op":"info"}                        <- {"name":..,"dim":..,"normalizes":..}
 *   -> {"op":"embed","texts":[..]}          <- {"vectors":[[..],..]}
 *   -> {"op":"score","pairs":[[q,d],..]}    <- {"scores":[..]}
 *   anything else                           <- {"error":"..."}
 *
 * The role gates which ops answer: embed on a scorer (and score on an
 * embedder) produce an error line, never a crash. A malformed line also
 * answers with an error line and the connection stays up.
 */

import * as net from "node:net";
import * as readline from "node:readline";

import { Role, ServedModel } from "./registry";

export async function handleRequest(
  line: string,
  model: ServedModel,
  role: Role,
): Promise<string> {
  let request: any;
  try {
    request = JSON.parse(line);
  } catch {
    return JSON.stringify({ error: "invalid JSON request line" });
  }
  if (typeof request !== "object" || request === null || typeof request.op !== "string") {
    return JSON.stringify({ error: "request must be an object with an op field" });
  }
  try {
    switch (request.op) {
      case "info":
        return JSON.stringify({
          name: model.name,
          dim: model.dim,
          normalizes: model.normalizes,
        });
      case "embed": {
        if (role !== "embedder") {
          return JSON.stringify({ error: "embed unsupported on scorer model" });
        }
        const texts = request.texts;
        if (!Array.isArray(texts) || !texts.every((t: unknown) => typeof t === "string")) {
          return JSON.stringify({ error: "embed needs texts: string[]" });
        }
        return JSON.stringify({ vectors: await model.embed(texts) });
      }
      case "score": {
        if (role !== "scorer") {
          return JSON.stringify({ error: "score unsupported on embedder model" });
        }
        const pairs = request.pairs;
        const wellFormed =
          Array.isArray(pairs) &&
          pairs.every(
            (p: unknown) =>
              Array.isArray(p) &&
              p.length === 2 &&
              typeof p[0] === "string" &&
              typeof p[1] === "string",
          );
        if (!wellFormed) {
          return JSON.stringify({ error: "score needs pairs: [string, string][]" });
        }
        return JSON.stringify({ scores: await model.score(pairs) });
      }
      default:
        return JSON.stringify({ error: `unsupported op ${String(request.op)}` });
    }
  } catch (err) {
    return JSON.stringify({ error: err instanceof Error ? err.message : String(err) });
  }
}

/** Serve over stdin/stdout until EOF; requests answered strictly in order. */
export async function serveStdio(model: ServedModel, role: Role): Promise<void> {
  const rl = readline.createInterface({ input: process.stdin, crlfDelay: Infinity });
  for await (const line of rl) {
    if (!line.trim()) continue;
    process.stdout.write((await handleRequest(line, model, role)) + "\n");
  }
}

/** Serve over TCP; each connection is an independent in-order channel. */
export function serveTcp(model: ServedModel, role: Role, port: number): Promise<net.Server> {
  return new Promise((resolve) => {
    const server = net.createServer((socket) => {
      const rl = readline.createInterface({ input: socket, crlfDelay: Infinity });
      let chain: Promise<void> = Promise.resolve();
      rl.on("line", (line) => {
        if (!line.trim()) return;
        chain = chain.then(async () => {
          socket.write((await handleRequest(line, model, role)) + "\n");
        });
      });
      socket.on("error", () => rl.close());
    });
    server.listen(port, "127.0.0.1", () => {
      const address = server.address() as net.AddressInfo;
      process.stdout.write(`listening on 127.0.0.1:${address.port}\n`);
      resolve(server);
    });
  });
}
