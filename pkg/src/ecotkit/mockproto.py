"""Deterministic mock responses for the annotator wire protocol.

Every mock response is a pure function of (endpoint, canonical request
body, seed). Determinism is specified tightly enough to reproduce the
byte-identical values in any language, which is what the HTTP bridge
does:

* canonical JSON: keys sorted, separators "," and ":", no added
  whitespace, UTF-8, no ASCII escaping of non-ASCII characters;
* digest: FNV-1a 64-bit over ``endpoint + "\\n" + canonical_body +
  "\\n" + str(seed)``;
* value stream: splitmix64 seeded with the digest, drawn in the field
  order documented on each builder;
* numerics: pixel coordinates are integers, confidences are k/100.

The builders return wire-shaped dictionaries; the in-process annotator
and the HTTP bridge both serve exactly these values.
"""

from __future__ import annotations

import json
import re

_M64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

MOCK_IMAGE_SIZE = 256
GRIPPER_MARKER = "?gp="

OBJECT_VOCAB = (
    "mushroom", "pot", "spoon", "towel", "carrot", "plate", "cup", "bowl",
    "screwdriver", "hammer", "tape", "detergent", "watermelon", "duck",
    "sponge", "banana", "corn", "fork", "knife", "pan", "mug", "block",
    "cloth", "bottle",
)
COLOR_VOCAB = ("red", "blue", "green", "yellow", "purple", "orange", "pink", "white")
SURFACE_VOCAB = ("table", "counter", "stove", "tray", "shelf", "mat")
RELATION_VOCAB = ("to the left of", "to the right of", "behind", "in front of", "next to")

DESCRIBE_PROMPT = "Briefly describe the things in this scene and their spatial relations to each other."
TASK_PREFIX_TEMPLATE = "The robot task is: {instruction}."

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _M64
    return h


def canonical_json(value) -> str:
    return json.dumps(value, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


def request_digest(endpoint: str, body: dict, seed: int) -> int:
    message = f"{endpoint}\n{canonical_json(body)}\n{seed}"
    return fnv1a64(message.encode("utf-8"))


class MockStream:
    """splitmix64 value stream; pick(n) maps draws onto [0, n)."""

    def __init__(self, state: int):
        self._state = state & _M64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _M64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return (z ^ (z >> 31)) & _M64

    def pick(self, n: int) -> int:
        return self.next_u64() % n


def text_tokens(text: str) -> list[str]:
    """Lowercase alphanumeric tokens, used for vocabulary scans."""
    return _TOKEN_RE.findall(text.lower())


def find_vocab_nouns(text: str) -> list[str]:
    """Vocabulary nouns present in a text, by first occurrence, deduplicated."""
    seen = []
    vocab = set(OBJECT_VOCAB)
    for token in text_tokens(text):
        if token in vocab and token not in seen:
            seen.append(token)
    return seen


def build_describe_prompt(instruction: str | None) -> str:
    """Scene-description prompt; noisy instructions (no space) are dropped."""
    if instruction and " " in instruction:
        return TASK_PREFIX_TEMPLATE.format(instruction=instruction) + " " + DESCRIBE_PROMPT
    return DESCRIBE_PROMPT


def _draw_distinct_noun(rng: MockStream, taken: list[str]) -> str:
    idx = rng.pick(len(OBJECT_VOCAB))
    while OBJECT_VOCAB[idx] in taken:
        idx = (idx + 1) % len(OBJECT_VOCAB)
    return OBJECT_VOCAB[idx]


def mock_describe(image_ref: str, instruction: str | None, seed: int) -> dict:
    """Caption naming three scene objects.

    Draw order: missing nouns (up to 3 total after the prompt scan), then
    one color per object, surface, relation.
    """
    prompt = build_describe_prompt(instruction)
    rng = MockStream(request_digest("/v1/describe", {"image_ref": image_ref, "prompt": prompt}, seed))
    nouns = find_vocab_nouns(prompt)[:2]
    while len(nouns) < 3:
        nouns.append(_draw_distinct_noun(rng, nouns))
    colors = [COLOR_VOCAB[rng.pick(len(COLOR_VOCAB))] for _ in range(3)]
    surface = SURFACE_VOCAB[rng.pick(len(SURFACE_VOCAB))]
    relation = RELATION_VOCAB[rng.pick(len(RELATION_VOCAB))]
    caption = (
        f"There is a {colors[0]} {nouns[0]} and a {colors[1]} {nouns[1]} on the {surface}. "
        f"A {colors[2]} {nouns[2]} sits nearby. "
        f"The {nouns[0]} is {relation} the {nouns[1]}. "
        f"A robot arm hovers above the {surface}."
    )
    return {"caption": caption}


def mock_detect(image_ref: str, text: str, seed: int) -> dict:
    """One detection per vocabulary noun found in the text.

    Draw order per noun: width, height, x1, y1, box confidence, text
    confidence, color flag, color index (only when the flag is 0).
    Confidences land in [0.25, 0.99] and [0.10, 0.99] so that some raw
    detections fall below the pipeline's filtering thresholds.
    """
    rng = MockStream(request_digest("/v1/detect", {"image_ref": image_ref, "text": text}, seed))
    detections = []
    for noun in find_vocab_nouns(text):
        w = 24 + rng.pick(72)
        h = 24 + rng.pick(72)
        x1 = rng.pick(MOCK_IMAGE_SIZE - w + 1)
        y1 = rng.pick(MOCK_IMAGE_SIZE - h + 1)
        box_conf = (25 + rng.pick(75)) / 100
        text_conf = (10 + rng.pick(90)) / 100
        label = noun
        if rng.pick(4) == 0:
            label = COLOR_VOCAB[rng.pick(len(COLOR_VOCAB))] + " " + noun
        detections.append(
            {
                "label": label,
                "box": [x1, y1, x1 + w, y1 + h],
                "box_conf": box_conf,
                "text_conf": text_conf,
            }
        )
    return {"detections": detections}


_GP_INT_RE = re.compile(r"-?\d+")
_GP_CONF_RE = re.compile(r"-?\d+(\.\d+)?")


def parse_gripper_ref(image_ref: str):
    """Read an embedded ground-truth gripper pixel from an image reference.

    References may end in ``?gp=u,v,conf``; anything else means no
    detection. This keeps the mock a pure function of the request while
    letting fixtures choose which frames carry detections. The number
    grammar is deliberately narrow (plain integers, plain decimals) so
    every implementation of the protocol parses it identically.
    """
    pos = image_ref.find(GRIPPER_MARKER)
    if pos < 0:
        return None
    parts = image_ref[pos + len(GRIPPER_MARKER):].split(",")
    if len(parts) != 3:
        return None
    if not (_GP_INT_RE.fullmatch(parts[0]) and _GP_INT_RE.fullmatch(parts[1])
            and _GP_CONF_RE.fullmatch(parts[2])):
        return None
    return (int(parts[0]), int(parts[1]), float(parts[2]))


def mock_gripper(image_ref: str, seed: int) -> dict:
    found = parse_gripper_ref(image_ref)
    if found is None:
        return {"point": None}
    u, v, conf = found
    return {"point": [u, v], "conf": conf}


def move_grip_signal(move: str) -> int:
    if "close gripper" in move:
        return -1
    if "open gripper" in move:
        return 1
    return 0


_TASK_TEMPLATES = (
    "The task is to {goal}.",
    "The robot must {goal}.",
    "The goal is to {goal}.",
)

_SUBTASK_REASONS = (
    "Step {t} of {n}: the arm is still busy with the sub-task to {sub}, because the {obj} has not reached the required position yet. The current spatial layout of the scene keeps this stage active, and no later plan stage can safely begin before the present one completes its goal condition, so the executor commits this step to the same stage once more.",
    "At step {t} the plan stage {k} applies, so the controller continues to {sub} before moving on to the remaining stages. Both the observed gripper state and the relative position of the {obj} confirm that this stage is unfinished and still demands attention from the policy before anything else in the plan may start.",
    "Progress check at step {t}: the sub-task to {sub} remains active and the {obj} must be watched closely during the motion. Nothing in the scene indicates that the preconditions of the next stage hold yet, so the executor keeps refining the same stage of the plan rather than skipping ahead.",
)

_MOVE_REASONS = (
    "The primitive {move} keeps the end effector on the shortest path that still serves the active sub-task near the {obj}. Executing it now also preserves a comfortable clearance margin around the other objects that remain visible in the workspace.",
    "Choosing {move} here holds the gripper aligned with the {obj} while the arm follows the planned route toward its goal. Among the available primitives, the measured pose error along the remaining waypoints is largest in exactly this direction.",
    "The controller selects {move} because the proprioceptive delta toward the target demands exactly this direction at this moment. Any other primitive would grow the distance that the later steps of the executed plan must recover.",
)


def _segment_moves(moves: list[str]) -> list[int]:
    """Segment index per step; boundaries sit on gripper-signal changes."""
    segments = []
    current = 0
    prev = move_grip_signal(moves[0])
    for move in moves:
        signal = move_grip_signal(move)
        if signal != prev:
            current += 1
            prev = signal
        segments.append(current)
    return segments


def mock_plan(instruction: str, caption: str, moves: list[str], seed: int) -> dict:
    """Rule-based plan: sub-task segments split on gripper transitions.

    Draw order: one pick for the task template. Everything else is a pure
    function of the inputs so that plans stay stable when only the seed's
    stream position would differ.
    """
    if not moves:
        raise ValueError("moves must be non-empty")
    body = {"caption": caption, "instruction": instruction, "moves": list(moves)}
    rng = MockStream(request_digest("/v1/plan", body, seed))

    nouns = find_vocab_nouns(instruction) or find_vocab_nouns(caption)
    obj = nouns[0] if nouns else "object"
    target = nouns[1] if len(nouns) > 1 else "goal area"

    if instruction and " " in instruction:
        goal = instruction.lower().rstrip(".")
    else:
        goal = f"handle the {obj}"
    task = _TASK_TEMPLATES[rng.pick(3)].format(goal=goal)

    segments = _segment_moves(moves)
    n_segments = segments[-1] + 1
    plan = []
    held = False
    released = False
    for k in range(n_segments):
        first = segments.index(k)
        signal = move_grip_signal(moves[first])
        if signal == -1:
            plan.append(f"grasp the {obj} with the gripper")
            held = True
        elif signal == 1:
            plan.append(f"release the {obj} over the {target}")
            held = False
            released = True
        elif held:
            plan.append(f"carry the {obj} toward the {target}")
        elif released:
            plan.append(f"pull the arm away from the {target}")
        else:
            plan.append(f"move the gripper toward the {obj}")

    n = len(moves)
    per_step = []
    for t, move in enumerate(moves):
        k = segments[t]
        sub = plan[k]
        subtask_reason = _SUBTASK_REASONS[t % 3].format(t=t + 1, n=n, k=k + 1, sub=sub, obj=obj)
        move_reason = _MOVE_REASONS[t % 3].format(move=move, obj=obj)
        per_step.append(
            {"subtask": k, "subtask_reason": subtask_reason, "move_reason": move_reason}
        )
    return {"task": task, "plan": plan, "per_step": per_step}
