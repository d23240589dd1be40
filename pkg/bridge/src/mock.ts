/**
 * Deterministic mock annotator responses.
 *
 * Every response is a pure function of (endpoint, canonical request body,
 * seed). The value derivation is specified exactly — FNV-1a 64-bit digest
 * over canonical JSON, a splitmix64 stream, integer pixels, k/100
 * confidences — so this implementation returns the same values,
 * field for field, as the pipeline's in-process mocks.
 */

const M64 = (1n << 64n) - 1n;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;

export const MOCK_IMAGE_SIZE = 256;
export const GRIPPER_MARKER = "?gp=";

export const OBJECT_VOCAB = [
  "mushroom", "pot", "spoon", "towel", "carrot", "plate", "cup", "bowl",
  "screwdriver", "hammer", "tape", "detergent", "watermelon", "duck",
  "sponge", "banana", "corn", "fork", "knife", "pan", "mug", "block",
  "cloth", "bottle",
] as const;
export const COLOR_VOCAB = ["red", "blue", "green", "yellow", "purple", "orange", "pink", "white"] as const;
export const SURFACE_VOCAB = ["table", "counter", "stove", "tray", "shelf", "mat"] as const;
export const RELATION_VOCAB = ["to the left of", "to the right of", "behind", "in front of", "next to"] as const;

export const DESCRIBE_PROMPT =
  "Briefly describe the things in this scene and their spatial relations to each other.";
export const TASK_PREFIX_TEMPLATE = "The robot task is: {instruction}.";

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const b of data) {
    h ^= BigInt(b);
    h = (h * FNV_PRIME) & M64;
  }
  return h;
}

type Json = string | number | boolean | null | Json[] | { [key: string]: Json };

export function canonicalJson(value: Json): string {
  if (value === null) return "null";
  if (typeof value === "string") return JSON.stringify(value);
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isInteger(value)) {
      throw new Error("canonical bodies may only contain integers");
    }
    return String(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  const keys = Object.keys(value).sort();
  return "{" + keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(value[k])).join(",") + "}";
}

export function requestDigest(endpoint: string, body: Json, seed: number): bigint {
  const message = `${endpoint}\n${canonicalJson(body)}\n${seed}`;
  return fnv1a64(new TextEncoder().encode(message));
}

export class MockStream {
  private state: bigint;

  constructor(state: bigint) {
    this.state = state & M64;
  }

  nextU64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & M64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & M64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & M64;
    return (z ^ (z >> 31n)) & M64;
  }

  pick(n: number): number {
    return Number(this.nextU64() % BigInt(n));
  }
}

export function textTokens(text: string): string[] {
  return text.toLowerCase().match(/[a-z0-9]+/g) ?? [];
}

export function findVocabNouns(text: string): string[] {
  const seen: string[] = [];
  const vocab = new Set<string>(OBJECT_VOCAB);
  for (const token of textTokens(text)) {
    if (vocab.has(token) && !seen.includes(token)) seen.push(token);
  }
  return seen;
}

export function buildDescribePrompt(instruction: string | null | undefined): string {
  if (instruction && instruction.includes(" ")) {
    return TASK_PREFIX_TEMPLATE.replace("{instruction}", instruction) + " " + DESCRIBE_PROMPT;
  }
  return DESCRIBE_PROMPT;
}

function drawDistinctNoun(rng: MockStream, taken: string[]): string {
  let idx = rng.pick(OBJECT_VOCAB.length);
  while (taken.includes(OBJECT_VOCAB[idx])) {
    idx = (idx + 1) % OBJECT_VOCAB.length;
  }
  return OBJECT_VOCAB[idx];
}

export interface DescribeResponse {
  caption: string;
}

export function mockDescribe(
  imageRef: string,
  instruction: string | null | undefined,
  seed: number,
): DescribeResponse {
  const prompt = buildDescribePrompt(instruction);
  const rng = new MockStream(requestDigest("/v1/describe", { image_ref: imageRef, prompt }, seed));
  const nouns = findVocabNouns(prompt).slice(0, 2);
  while (nouns.length < 3) nouns.push(drawDistinctNoun(rng, nouns));
  const colors = [0, 1, 2].map(() => COLOR_VOCAB[rng.pick(COLOR_VOCAB.length)]);
  const surface = SURFACE_VOCAB[rng.pick(SURFACE_VOCAB.length)];
  const relation = RELATION_VOCAB[rng.pick(RELATION_VOCAB.length)];
  const caption =
    `There is a ${colors[0]} ${nouns[0]} and a ${colors[1]} ${nouns[1]} on the ${surface}. ` +
    `A ${colors[2]} ${nouns[2]} sits nearby. ` +
    `The ${nouns[0]} is ${relation} the ${nouns[1]}. ` +
    `A robot arm hovers above the ${surface}.`;
  return { caption };
}

export interface WireDetection {
  label: string;
  box: [number, number, number, number];
  box_conf: number;
  text_conf: number;
}

export interface DetectResponse {
  detections: WireDetection[];
}

export function mockDetect(imageRef: string, text: string, seed: number): DetectResponse {
  const rng = new MockStream(requestDigest("/v1/detect", { image_ref: imageRef, text }, seed));
  const detections: WireDetection[] = [];
  for (const noun of findVocabNouns(text)) {
    const w = 24 + rng.pick(72);
    const h = 24 + rng.pick(72);
    const x1 = rng.pick(MOCK_IMAGE_SIZE - w + 1);
    const y1 = rng.pick(MOCK_IMAGE_SIZE - h + 1);
    const boxConf = (25 + rng.pick(75)) / 100;
    const textConf = (10 + rng.pick(90)) / 100;
    let label = noun;
    if (rng.pick(4) === 0) {
      label = COLOR_VOCAB[rng.pick(COLOR_VOCAB.length)] + " " + noun;
    }
    detections.push({
      label,
      box: [x1, y1, x1 + w, y1 + h],
      box_conf: boxConf,
      text_conf: textConf,
    });
  }
  return { detections };
}

const GP_INT_RE = /^-?\d+$/;
const GP_CONF_RE = /^-?\d+(\.\d+)?$/;

export function parseGripperRef(imageRef: string): [number, number, number] | null {
  const pos = imageRef.indexOf(GRIPPER_MARKER);
  if (pos < 0) return null;
  const parts = imageRef.slice(pos + GRIPPER_MARKER.length).split(",");
  if (parts.length !== 3) return null;
  if (!GP_INT_RE.test(parts[0]) || !GP_INT_RE.test(parts[1]) || !GP_CONF_RE.test(parts[2])) {
    return null;
  }
  return [parseInt(parts[0], 10), parseInt(parts[1], 10), parseFloat(parts[2])];
}

export interface GripperResponse {
  point: [number, number] | null;
  conf?: number;
}

export function mockGripper(imageRef: string, _seed: number): GripperResponse {
  const found = parseGripperRef(imageRef);
  if (found === null) return { point: null };
  const [u, v, conf] = found;
  return { point: [u, v], conf };
}

export function moveGripSignal(move: string): number {
  if (move.includes("close gripper")) return -1;
  if (move.includes("open gripper")) return 1;
  return 0;
}

const TASK_TEMPLATES = [
  "The task is to {goal}.",
  "The robot must {goal}.",
  "The goal is to {goal}.",
];

const SUBTASK_REASONS = [
  "Step {t} of {n}: the arm is still busy with the sub-task to {sub}, because the {obj} has not reached the required position yet. The current spatial layout of the scene keeps this stage active, and no later plan stage can safely begin before the present one completes its goal condition, so the executor commits this step to the same stage once more.",
  "At step {t} the plan stage {k} applies, so the controller continues to {sub} before moving on to the remaining stages. Both the observed gripper state and the relative position of the {obj} confirm that this stage is unfinished and still demands attention from the policy before anything else in the plan may start.",
  "Progress check at step {t}: the sub-task to {sub} remains active and the {obj} must be watched closely during the motion. Nothing in the scene indicates that the preconditions of the next stage hold yet, so the executor keeps refining the same stage of the plan rather than skipping ahead.",
];

const MOVE_REASONS = [
  "The primitive {move} keeps the end effector on the shortest path that still serves the active sub-task near the {obj}. Executing it now also preserves a comfortable clearance margin around the other objects that remain visible in the workspace.",
  "Choosing {move} here holds the gripper aligned with the {obj} while the arm follows the planned route toward its goal. Among the available primitives, the measured pose error along the remaining waypoints is largest in exactly this direction.",
  "The controller selects {move} because the proprioceptive delta toward the target demands exactly this direction at this moment. Any other primitive would grow the distance that the later steps of the executed plan must recover.",
];

function fill(template: string, slots: Record<string, string>): string {
  return template.replace(/\{(\w+)\}/g, (_, key) => slots[key]);
}

function segmentMoves(moves: string[]): number[] {
  const segments: number[] = [];
  let current = 0;
  let prev = moveGripSignal(moves[0]);
  for (const move of moves) {
    const signal = moveGripSignal(move);
    if (signal !== prev) {
      current += 1;
      prev = signal;
    }
    segments.push(current);
  }
  return segments;
}

export interface PerStepEntry {
  subtask: number;
  subtask_reason: string;
  move_reason: string;
}

export interface PlanResponse {
  task: string;
  plan: string[];
  per_step: PerStepEntry[];
}

export function mockPlan(
  instruction: string,
  caption: string,
  moves: string[],
  seed: number,
): PlanResponse {
  if (moves.length === 0) throw new Error("moves must be non-empty");
  const body = { caption, instruction, moves };
  const rng = new MockStream(requestDigest("/v1/plan", body, seed));

  let nouns = findVocabNouns(instruction);
  if (nouns.length === 0) nouns = findVocabNouns(caption);
  const obj = nouns.length > 0 ? nouns[0] : "object";
  const target = nouns.length > 1 ? nouns[1] : "goal area";

  const goal =
    instruction && instruction.includes(" ")
      ? instruction.toLowerCase().replace(/\.+$/, "")
      : `handle the ${obj}`;
  const task = fill(TASK_TEMPLATES[rng.pick(3)], { goal });

  const segments = segmentMoves(moves);
  const nSegments = segments[segments.length - 1] + 1;
  const plan: string[] = [];
  let held = false;
  let released = false;
  for (let k = 0; k < nSegments; k++) {
    const first = segments.indexOf(k);
    const signal = moveGripSignal(moves[first]);
    if (signal === -1) {
      plan.push(`grasp the ${obj} with the gripper`);
      held = true;
    } else if (signal === 1) {
      plan.push(`release the ${obj} over the ${target}`);
      held = false;
      released = true;
    } else if (held) {
      plan.push(`carry the ${obj} toward the ${target}`);
    } else if (released) {
      plan.push(`pull the arm away from the ${target}`);
    } else {
      plan.push(`move the gripper toward the ${obj}`);
    }
  }

  const n = moves.length;
  const perStep: PerStepEntry[] = [];
  for (let t = 0; t < n; t++) {
    const k = segments[t];
    const sub = plan[k];
    perStep.push({
      subtask: k,
      subtask_reason: fill(SUBTASK_REASONS[t % 3], {
        t: String(t + 1),
        n: String(n),
        k: String(k + 1),
        sub,
        obj,
      }),
      move_reason: fill(MOVE_REASONS[t % 3], { move: moves[t], obj }),
    });
  }
  return { task, plan, per_step: perStep };
}
