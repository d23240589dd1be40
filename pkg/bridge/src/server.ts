/**
 * HTTP bridge for the annotator wire protocol.
 *
 * Endpoints (JSON in, JSON out):
 *   POST /v1/describe  {image_ref, instruction?, seed?} -> {caption}
 *   POST /v1/detect    {image_ref, text, seed?}         -> {detections: [...]}
 *   POST /v1/gripper   {image_ref, seed?}               -> {point: [u, v], conf} | {point: null}
 *   POST /v1/plan      {instruction, caption, moves, steps?, seed?}
 *                                                       -> {task, plan, per_step}
 *   GET  /v1/health                                     -> {status: "ok"}
 *
 * Mock mode serves deterministic values (pure functions of request + seed)
 * and holds no state. Adapters mode forwards each endpoint to a configured
 * upstream URL unchanged; it exists for plugging in real models and is not
 * exercised in CI.
 */

import * as http from "node:http";
import * as fs from "node:fs";
import * as path from "node:path";

import {
  DESCRIBE_PROMPT,
  mockDescribe,
  mockDetect,
  mockGripper,
  mockPlan,
} from "./mock.js";

export interface BridgeConfig {
  port: number;
  seed: number;
  mode: "mock" | "adapters";
  promptsDir?: string;
  adapters?: Partial<Record<"describe" | "detect" | "gripper" | "plan", string>>;
}

class RequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
  ) {
    super(detail);
  }
}

function expectString(body: Record<string, unknown>, field: string): string {
  const value = body[field];
  if (typeof value !== "string") {
    throw new RequestError(400, "bad_request", `field '${field}' must be a string`);
  }
  return value;
}

function optionalString(body: Record<string, unknown>, field: string): string | undefined {
  const value = body[field];
  if (value === undefined || value === null) return undefined;
  if (typeof value !== "string") {
    throw new RequestError(400, "bad_request", `field '${field}' must be a string`);
  }
  return value;
}

function seedOf(body: Record<string, unknown>, fallback: number): number {
  const value = body.seed;
  if (value === undefined || value === null) return fallback;
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new RequestError(400, "bad_request", "field 'seed' must be an integer");
  }
  return value;
}

export function validatePromptAssets(config: BridgeConfig): void {
  if (!config.promptsDir) return;
  const scenePath = path.join(config.promptsDir, "scene_description.txt");
  const text = fs.readFileSync(scenePath, "utf-8").trim();
  if (text !== DESCRIBE_PROMPT) {
    throw new Error(
      `prompt asset ${scenePath} does not match the wire protocol's describe prompt`,
    );
  }
}

async function forward(upstream: string, body: unknown): Promise<unknown> {
  const resp = await fetch(upstream, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) {
    throw new RequestError(502, "adapter_error", `upstream ${upstream} -> ${resp.status}`);
  }
  return resp.json();
}

async function handle(
  config: BridgeConfig,
  endpoint: string,
  body: Record<string, unknown>,
): Promise<unknown> {
  if (config.mode === "adapters") {
    const key = endpoint.replace("/v1/", "") as keyof NonNullable<BridgeConfig["adapters"]>;
    const upstream = config.adapters?.[key];
    if (!upstream) {
      throw new RequestError(501, "adapter_missing", `no adapter configured for ${endpoint}`);
    }
    return forward(upstream, body);
  }

  const seed = seedOf(body, config.seed);
  switch (endpoint) {
    case "/v1/describe":
      return mockDescribe(expectString(body, "image_ref"), optionalString(body, "instruction"), seed);
    case "/v1/detect": {
      const text = expectString(body, "text");
      if (text.length === 0) {
        throw new RequestError(400, "bad_request", "field 'text' must be non-empty");
      }
      return mockDetect(expectString(body, "image_ref"), text, seed);
    }
    case "/v1/gripper":
      return mockGripper(expectString(body, "image_ref"), seed);
    case "/v1/plan": {
      const instruction = expectString(body, "instruction");
      const caption = expectString(body, "caption");
      const moves = body.moves;
      if (!Array.isArray(moves) || moves.some((m) => typeof m !== "string")) {
        throw new RequestError(400, "bad_request", "field 'moves' must be a list of strings");
      }
      if (moves.length === 0) {
        throw new RequestError(422, "length_mismatch", "moves must cover at least one step");
      }
      if (body.steps !== undefined && body.steps !== null && body.steps !== moves.length) {
        throw new RequestError(
          422,
          "length_mismatch",
          `moves has ${moves.length} entries for steps=${body.steps}`,
        );
      }
      return mockPlan(instruction, caption, moves as string[], seed);
    }
    default:
      throw new RequestError(404, "not_found", `unknown endpoint ${endpoint}`);
  }
}

export function createServer(config: BridgeConfig): http.Server {
  validatePromptAssets(config);
  return http.createServer((req, res) => {
    const sendJson = (status: number, payload: unknown) => {
      const raw = Buffer.from(JSON.stringify(payload), "utf-8");
      res.writeHead(status, {
        "content-type": "application/json",
        "content-length": raw.length,
      });
      res.end(raw);
    };

    if (req.method === "GET" && req.url === "/v1/health") {
      sendJson(200, { status: "ok" });
      return;
    }
    if (req.method !== "POST") {
      sendJson(404, { error: "not_found", detail: `${req.method} ${req.url}` });
      return;
    }

    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      let body: Record<string, unknown>;
      try {
        const text = Buffer.concat(chunks).toString("utf-8");
        const parsed: unknown = text.length ? JSON.parse(text) : {};
        if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
          throw new Error("body must be a JSON object");
        }
        body = parsed as Record<string, unknown>;
      } catch (err) {
        sendJson(400, { error: "bad_request", detail: String(err) });
        return;
      }
      handle(config, req.url ?? "", body)
        .then((payload) => sendJson(200, payload))
        .catch((err) => {
          if (err instanceof RequestError) {
            sendJson(err.status, { error: err.code, detail: err.detail });
          } else {
            sendJson(500, { error: "internal", detail: String(err) });
          }
        });
    });
  });
}

export function parseArgs(argv: string[]): BridgeConfig {
  const config: BridgeConfig = { port: 8080, seed: 0, mode: "mock" };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      const value = argv[++i];
      if (value === undefined) throw new Error(`missing value for ${arg}`);
      return value;
    };
    if (arg === "--port") config.port = parseInt(next(), 10);
    else if (arg === "--seed") config.seed = parseInt(next(), 10);
    else if (arg === "--mode") {
      const mode = next();
      if (mode !== "mock" && mode !== "adapters") throw new Error(`bad mode ${mode}`);
      config.mode = mode;
    } else if (arg === "--prompts-dir") config.promptsDir = next();
    else if (arg.startsWith("--adapter-")) {
      const key = arg.slice("--adapter-".length) as "describe" | "detect" | "gripper" | "plan";
      config.adapters = { ...config.adapters, [key]: next() };
    } else throw new Error(`unknown argument ${arg}`);
  }
  if (Number.isNaN(config.port) || Number.isNaN(config.seed)) {
    throw new Error("--port and --seed must be integers");
  }
  if (config.mode === "adapters") {
    const required = ["describe", "detect", "gripper", "plan"] as const;
    for (const key of required) {
      if (!config.adapters?.[key]) {
        throw new Error(`adapters mode requires --adapter-${key}`);
      }
    }
  }
  return config;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;

if (invokedDirectly) {
  let config: BridgeConfig;
  try {
    config = parseArgs(process.argv.slice(2));
    const server = createServer(config);
    server.listen(config.port, () => {
      console.log(`annotator bridge listening on :${config.port} (${config.mode} mode)`);
    });
  } catch (err) {
    console.error(String(err));
    process.exit(1);
  }
}
