"""Reasoning chains: assembly, bit-exact serialization, and token accounting.

A chain is one timestep's textual reasoning, rendered as eight tagged
sections in a fixed order. The standard layout is

    TASK: ... PLAN: ... SUBTASK REASONING: ... SUBTASK: ...
    MOVE REASONING: ... MOVE: ... GRIPPER POSITION: ... VISIBLE OBJECTS: ...

The frozen-bbox layout moves VISIBLE OBJECTS directly after PLAN so an
N-step inference scheme can keep boxes fixed together with the plan.
Bodies are joined with single spaces; plans are numbered "1. ... 2. ...";
gripper pixels render as "[[u, v], ...]"; objects as
"label [x1, y1, x2, y2], ...". serialize and parse are exact inverses on
canonical strings.
"""

from __future__ import annotations

import math
import re
import string
from dataclasses import dataclass, field
from enum import Enum

from .data import BoundingBox, Trajectory
from .errors import LengthMismatch, ParseError, UnparsableLabel
from .movement import MovementLabel, parse_label

ACTION_TOKENS = 7

TAG_TASK = "TASK:"
TAG_PLAN = "PLAN:"
TAG_SUBTASK_REASON = "SUBTASK REASONING:"
TAG_SUBTASK = "SUBTASK:"
TAG_MOVE_REASON = "MOVE REASONING:"
TAG_MOVE = "MOVE:"
TAG_GRIPPER = "GRIPPER POSITION:"
TAG_OBJECTS = "VISIBLE OBJECTS:"

ALL_TAGS = (
    TAG_TASK, TAG_PLAN, TAG_SUBTASK_REASON, TAG_SUBTASK,
    TAG_MOVE_REASON, TAG_MOVE, TAG_GRIPPER, TAG_OBJECTS,
)


class Layout(str, Enum):
    STANDARD = "standard"
    FROZEN_BBOX = "frozen_bbox"


_SECTION_ORDER = {
    Layout.STANDARD: (
        "task", "plan", "subtask_reason", "subtask",
        "move_reason", "move", "gripper", "objects",
    ),
    Layout.FROZEN_BBOX: (
        "task", "plan", "objects", "subtask_reason", "subtask",
        "move_reason", "move", "gripper",
    ),
}

_SECTION_TAGS = {
    "task": TAG_TASK,
    "plan": TAG_PLAN,
    "subtask_reason": TAG_SUBTASK_REASON,
    "subtask": TAG_SUBTASK,
    "move_reason": TAG_MOVE_REASON,
    "move": TAG_MOVE,
    "gripper": TAG_GRIPPER,
    "objects": TAG_OBJECTS,
}

# sections a scheduler may hold fixed across steps, per layout
FROZEN_SECTIONS = {
    Layout.STANDARD: ("task", "plan"),
    Layout.FROZEN_BBOX: ("task", "plan", "objects"),
}

_GRIPPER_BODY_RE = re.compile(r"\[\[-?\d+, -?\d+\](?:, \[-?\d+, -?\d+\])*\]")
_OBJECT_ITEM_RE = re.compile(r"([^\[\]]+?) \[(-?\d+), (-?\d+), (-?\d+), (-?\d+)\]")


@dataclass
class ReasoningChain:
    """Structured reasoning for one timestep."""

    task: str
    plan: list[str]
    subtask: str
    subtask_reason: str
    move: str
    move_reason: str
    gripper: list[tuple[int, int]]
    objects: list[tuple[str, tuple[int, int, int, int]]] = field(default_factory=list)
    layout: Layout = Layout.STANDARD

    def validate(self) -> None:
        try:
            parse_label(self.move)
        except UnparsableLabel as exc:
            raise ValueError(f"MOVE body is not a canonical movement label: {exc}") from exc
        if len(self.gripper) not in (1, 5):
            raise ValueError(
                f"gripper needs 1 point (current) or 5 (current + 4 future), got {len(self.gripper)}"
            )
        if not self.plan:
            raise ValueError("plan must have at least one sub-task")
        for text in (self.task, self.subtask, self.subtask_reason, self.move_reason):
            _check_body_text(text, allow_empty=False)
        for i, item in enumerate(self.plan):
            _check_body_text(item, allow_empty=False)
            # the trailing space covers an item ending in " k." that would
            # merge with the joining space into a forged separator
            if f" {i + 2}. " in f"{item} ":
                raise ValueError(f"plan item {i + 1} contains the next item marker")
        for label, box in self.objects:
            _check_body_text(label, allow_empty=False)
            if "[" in label or "]" in label:
                raise ValueError(f"object label {label!r} may not contain brackets")
            if not all(isinstance(v, int) for v in box) or len(box) != 4:
                raise ValueError("object boxes must be 4 integers")
        for pt in self.gripper:
            if len(pt) != 2 or not all(isinstance(v, int) for v in pt):
                raise ValueError("gripper points must be integer pairs")


def _check_body_text(text: str, allow_empty: bool) -> None:
    if not text:
        if allow_empty:
            return
        raise ValueError("section body must be non-empty")
    if text != text.strip() or "  " in text:
        raise ValueError(f"body text has non-canonical whitespace: {text!r}")
    for tag in ALL_TAGS:
        if tag in text:
            raise ValueError(f"body text may not contain the section tag {tag!r}")


def _render_plan(plan: list[str]) -> str:
    return " ".join(f"{i + 1}. {item}" for i, item in enumerate(plan))


def _parse_plan(body: str) -> list[str]:
    if not body.startswith("1. "):
        raise ValueError("plan body must start with '1. '")
    items = []
    cursor = 3
    k = 2
    while True:
        marker = f" {k}. "
        nxt = body.find(marker, cursor)
        if nxt < 0:
            items.append(body[cursor:])
            break
        items.append(body[cursor:nxt])
        cursor = nxt + len(marker)
        k += 1
    if any(not item for item in items):
        raise ValueError("plan items must be non-empty")
    return items


def _render_gripper(points: list[tuple[int, int]]) -> str:
    return "[" + ", ".join(f"[{u}, {v}]" for u, v in points) + "]"


def _parse_gripper(body: str) -> list[tuple[int, int]]:
    if not _GRIPPER_BODY_RE.fullmatch(body):
        raise ValueError(f"bad gripper body {body!r}")
    return [
        (int(u), int(v))
        for u, v in re.findall(r"\[(-?\d+), (-?\d+)\]", body[1:-1])
    ]


def _render_objects(objects) -> str:
    return ", ".join(
        f"{label} [{b[0]}, {b[1]}, {b[2]}, {b[3]}]" for label, b in objects
    )


def _parse_objects(body: str):
    if body == "":
        return []
    objects = []
    cursor = 0
    while cursor < len(body):
        m = _OBJECT_ITEM_RE.match(body, cursor)
        if not m:
            raise ValueError(f"bad objects body near {body[cursor:cursor + 30]!r}")
        label = m.group(1)
        box = tuple(int(m.group(i)) for i in range(2, 6))
        objects.append((label, box))
        cursor = m.end()
        if cursor < len(body):
            if not body.startswith(", ", cursor):
                raise ValueError(f"bad objects separator near {body[cursor:cursor + 10]!r}")
            cursor += 2
    return objects


def _section_body(chain: ReasoningChain, key: str) -> str:
    if key == "task":
        return chain.task
    if key == "plan":
        return _render_plan(chain.plan)
    if key == "subtask_reason":
        return chain.subtask_reason
    if key == "subtask":
        return chain.subtask
    if key == "move_reason":
        return chain.move_reason
    if key == "move":
        return chain.move
    if key == "gripper":
        return _render_gripper(chain.gripper)
    if key == "objects":
        return _render_objects(chain.objects)
    raise KeyError(key)


def section_texts(chain: ReasoningChain) -> list[tuple[str, str]]:
    """(section key, rendered 'TAG: body' text) in this chain's layout order."""
    out = []
    for key in _SECTION_ORDER[chain.layout]:
        tag = _SECTION_TAGS[key]
        body = _section_body(chain, key)
        out.append((key, f"{tag} {body}" if body else tag))
    return out


def serialize(chain: ReasoningChain) -> str:
    """Canonical single-line rendering of a chain."""
    chain.validate()
    return " ".join(text for _, text in section_texts(chain))


def parse(text: str) -> ReasoningChain:
    """Parse a canonical chain string; exact inverse of serialize.

    The layout is recovered from where VISIBLE OBJECTS appears. Raises
    ParseError with the failing position and the expected token.
    """
    layout = Layout.STANDARD
    if not text.startswith(TAG_TASK):
        raise ParseError(0, TAG_TASK)
    probe = text.find(TAG_OBJECTS)
    probe_sr = text.find(TAG_SUBTASK_REASON)
    if probe >= 0 and (probe_sr < 0 or probe < probe_sr):
        layout = Layout.FROZEN_BBOX

    keys = _SECTION_ORDER[layout]
    tags = [_SECTION_TAGS[k] for k in keys]
    bodies: dict[str, str] = {}
    cursor = 0
    for i, (key, tag) in enumerate(zip(keys, tags)):
        if not text.startswith(tag, cursor):
            raise ParseError(cursor, tag)
        cursor += len(tag)
        if i + 1 < len(tags):
            nxt = text.find(" " + tags[i + 1], cursor)
            if nxt < 0:
                raise ParseError(cursor, tags[i + 1])
            raw = text[cursor:nxt]
            cursor = nxt + 1
        else:
            raw = text[cursor:]
            cursor = len(text)
        if raw == "":
            body = ""
        elif raw.startswith(" ") and not raw.startswith("  ") and not raw.endswith(" "):
            body = raw[1:]
        else:
            raise ParseError(cursor, f"single-space separated body for {tag}")
        bodies[key] = body

    try:
        chain = ReasoningChain(
            task=bodies["task"],
            plan=_parse_plan(bodies["plan"]),
            subtask=bodies["subtask"],
            subtask_reason=bodies["subtask_reason"],
            move=bodies["move"],
            move_reason=bodies["move_reason"],
            gripper=_parse_gripper(bodies["gripper"]),
            objects=_parse_objects(bodies["objects"]),
            layout=layout,
        )
        chain.validate()
    except ValueError as exc:
        raise ParseError(0, f"valid chain ({exc})") from exc
    return chain


def assemble(
    traj: Trajectory,
    caption: str,
    boxes: list[list[BoundingBox]],
    labels: list[MovementLabel],
    gripper_px: list[tuple[float, float]],
    plan_ann,
    layout: Layout = Layout.STANDARD,
    future_gripper: bool = False,
) -> list[ReasoningChain]:
    """Build one chain per trajectory step from the pipeline's stage outputs.

    With future_gripper the gripper section carries the current plus the
    next four projected positions, clamped at the trajectory end. The
    caption is accepted for interface completeness; chains do not embed it.
    """
    del caption
    n = len(traj.steps)
    for name, seq in (("boxes", boxes), ("labels", labels), ("gripper_px", gripper_px)):
        if len(seq) != n:
            raise LengthMismatch(f"{name} has {len(seq)} entries for {n} steps")
    if len(plan_ann.per_step) != n:
        raise LengthMismatch(f"plan has {len(plan_ann.per_step)} per-step entries for {n} steps")
    plan_ann.validate(n)

    px_int = []
    for px in gripper_px:
        if px is None:
            raise LengthMismatch("gripper_px entries must be filled before assembly")
        px_int.append((int(round(px[0])), int(round(px[1]))))

    chains = []
    for t in range(n):
        if future_gripper:
            points = [px_int[min(t + k, n - 1)] for k in range(5)]
        else:
            points = [px_int[t]]
        sub_idx, sub_reason, move_reason = plan_ann.per_step[t]
        chain = ReasoningChain(
            task=plan_ann.task,
            plan=list(plan_ann.plan),
            subtask=plan_ann.plan[sub_idx],
            subtask_reason=sub_reason,
            move=labels[t].text,
            move_reason=move_reason,
            gripper=points,
            objects=[
                (b.label, (int(round(b.x1)), int(round(b.y1)), int(round(b.x2)), int(round(b.y2))))
                for b in boxes[t]
            ],
            layout=layout,
        )
        chain.validate()
        chains.append(chain)
    return chains


@dataclass
class TokenBudget:
    generated: int
    encoded: int = 0

    def __post_init__(self):
        if self.generated < 0 or self.encoded < 0:
            raise ValueError("token counts must be non-negative")


_PUNCT = set(string.punctuation)


def default_token_estimator(text: str) -> int:
    """Subword-tokenizer proxy: ceil(1.33 x words) + digit/punctuation chars."""
    words = len(text.split())
    extras = sum(1 for ch in text if ch.isdigit() or ch in _PUNCT)
    return math.ceil(1.33 * words) + extras


def section_token_counts(chain: ReasoningChain, estimator=None) -> dict[str, int]:
    est = estimator or default_token_estimator
    return {key: est(text) for key, text in section_texts(chain)}


def count_tokens(chain: ReasoningChain | None = None, estimator=None) -> TokenBudget:
    """Generated-token budget for one control step.

    Without a chain this is the action-only budget (7 tokens). With a
    chain it is the per-section estimate plus the 7 action tokens.
    """
    if chain is None:
        return TokenBudget(generated=ACTION_TOKENS)
    counts = section_token_counts(chain, estimator)
    return TokenBudget(generated=sum(counts.values()) + ACTION_TOKENS)


def frozen_token_split(chain: ReasoningChain, estimator=None) -> tuple[int, int]:
    """(high, low) token split: sections a scheduler freezes vs. regenerates."""
    counts = section_token_counts(chain, estimator)
    frozen = FROZEN_SECTIONS[chain.layout]
    high = sum(counts[k] for k in frozen)
    low = sum(v for k, v in counts.items() if k not in frozen)
    return high, low


def regenerated_tokens(chain: ReasoningChain, estimator=None) -> int:
    """Tokens generated per step when the frozen sections are held fixed."""
    _, low = frozen_token_split(chain, estimator)
    return low + ACTION_TOKENS
