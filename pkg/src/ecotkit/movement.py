"""Templated movement primitives derived from proprioceptive deltas.

Each timestep is labeled by comparing the current robot state with the
state a few steps ahead. Every axis whose signed difference exceeds a
threshold contributes one block to a label of the form

    move [forward/backward] [left/right] [up/down], tilt [up/down],
    rotate [clockwise/counterclockwise], [close/open] gripper

Blocks below threshold are omitted; if nothing moves the label is "stop".
Six ternary components give 3**6 = 729 distinct labels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .data import RobotState, Trajectory
from .errors import NonFiniteState, UnparsableLabel

DEFAULT_THRESHOLD = 0.03
DEFAULT_HORIZON = 4

_X_WORDS = {-1: "backward", 1: "forward"}
_Y_WORDS = {-1: "right", 1: "left"}
_Z_WORDS = {-1: "down", 1: "up"}
_TILT_WORDS = {-1: "tilt down", 1: "tilt up"}
_ROTATE_WORDS = {-1: "rotate clockwise", 1: "rotate counterclockwise"}
_GRIP_WORDS = {-1: "close gripper", 1: "open gripper"}

COMPONENT_NAMES = ("dx", "dy", "dz", "tilt", "rotate", "grip")


@dataclass(frozen=True)
class AxisMap:
    """Signs mapping state-frame deltas onto label directions.

    The default assumes a fixed third-person camera: +x is forward, +y is
    left, +z is up, +pitch tilts up, +yaw rotates counterclockwise, and a
    shrinking gripper value means closing. Cameras with mirrored axes can
    flip individual signs per camera_id.
    """

    x: int = 1
    y: int = 1
    z: int = 1
    pitch: int = 1
    yaw: int = 1
    grip: int = 1

    def signs(self) -> tuple[int, int, int, int, int, int]:
        return (self.x, self.y, self.z, self.pitch, self.yaw, self.grip)


DEFAULT_AXIS_MAP = AxisMap()


@dataclass(frozen=True)
class MovementLabel:
    """Ternary components of one movement primitive plus its canonical text."""

    dx: int
    dy: int
    dz: int
    tilt: int
    rotate: int
    grip: int

    def __post_init__(self):
        for name in COMPONENT_NAMES:
            if getattr(self, name) not in (-1, 0, 1):
                raise ValueError(f"component {name} must be in {{-1, 0, 1}}")

    @property
    def text(self) -> str:
        return render_label(self)

    def components(self) -> tuple[int, int, int, int, int, int]:
        return (self.dx, self.dy, self.dz, self.tilt, self.rotate, self.grip)


STOP = MovementLabel(0, 0, 0, 0, 0, 0)


def render_label(label: MovementLabel) -> str:
    """Render components to the canonical label string."""
    blocks = []
    translation = [
        words[c]
        for words, c in ((_X_WORDS, label.dx), (_Y_WORDS, label.dy), (_Z_WORDS, label.dz))
        if c != 0
    ]
    if translation:
        blocks.append("move " + " ".join(translation))
    if label.tilt != 0:
        blocks.append(_TILT_WORDS[label.tilt])
    if label.rotate != 0:
        blocks.append(_ROTATE_WORDS[label.rotate])
    if label.grip != 0:
        blocks.append(_GRIP_WORDS[label.grip])
    if not blocks:
        return "stop"
    return ", ".join(blocks)


def parse_label(text: str) -> MovementLabel:
    """Parse a canonical label string back to its components.

    Rejects anything that render_label would not produce (wrong word
    order, duplicate blocks, stray whitespace).
    """
    if text == "stop":
        return STOP
    if not text or text != text.strip():
        raise UnparsableLabel(f"not a canonical label: {text!r}")

    dx = dy = dz = tilt = rotate = grip = 0
    blocks = text.split(", ")
    pos = 0

    if blocks and blocks[0].startswith("move "):
        words = blocks[0][len("move "):].split(" ")
        if not words:
            raise UnparsableLabel(f"empty move block in {text!r}")
        order = [(_X_WORDS, "dx"), (_Y_WORDS, "dy"), (_Z_WORDS, "dz")]
        values = {}
        cursor = 0
        for word in words:
            matched = False
            while cursor < len(order):
                table, name = order[cursor]
                cursor += 1
                hit = [sign for sign, w in table.items() if w == word]
                if hit:
                    values[name] = hit[0]
                    matched = True
                    break
            if not matched:
                raise UnparsableLabel(f"bad move word {word!r} in {text!r}")
        dx = values.get("dx", 0)
        dy = values.get("dy", 0)
        dz = values.get("dz", 0)
        pos = 1

    for table, attr in ((_TILT_WORDS, "tilt"), (_ROTATE_WORDS, "rotate"), (_GRIP_WORDS, "grip")):
        if pos < len(blocks):
            hit = [sign for sign, w in table.items() if w == blocks[pos]]
            if hit:
                if attr == "tilt":
                    tilt = hit[0]
                elif attr == "rotate":
                    rotate = hit[0]
                else:
                    grip = hit[0]
                pos += 1

    if pos != len(blocks):
        raise UnparsableLabel(f"unrecognized block {blocks[pos]!r} in {text!r}")
    label = MovementLabel(dx, dy, dz, tilt, rotate, grip)
    if label == STOP:
        # only the literal "stop" may render the all-none label
        raise UnparsableLabel(f"not a canonical label: {text!r}")
    return label


def vocabulary() -> list[str]:
    """All 729 canonical label strings, in component enumeration order."""
    return [
        render_label(MovementLabel(*combo))
        for combo in itertools.product((-1, 0, 1), repeat=6)
    ]


def _thresholds(threshold) -> tuple[float, ...]:
    if isinstance(threshold, (int, float)):
        return (float(threshold),) * 6
    values = tuple(float(t) for t in threshold)
    if len(values) != 6:
        raise ValueError("per-axis threshold needs 6 values (x, y, z, pitch, yaw, gripper)")
    return values


def classify_move(
    current: RobotState,
    lookahead: RobotState,
    threshold=DEFAULT_THRESHOLD,
    axis_map: AxisMap = DEFAULT_AXIS_MAP,
) -> MovementLabel:
    """Classify the movement between two states into one primitive.

    A component is positive/negative iff the signed per-axis difference
    (lookahead - current), after the axis-map sign, exceeds +threshold /
    falls below -threshold; otherwise it is none.
    """
    deltas = (
        lookahead.x - current.x,
        lookahead.y - current.y,
        lookahead.z - current.z,
        lookahead.pitch - current.pitch,
        lookahead.yaw - current.yaw,
        lookahead.gripper - current.gripper,
    )
    for d in deltas:
        if not math.isfinite(d):
            raise NonFiniteState("state delta is not finite")
    thr = _thresholds(threshold)
    comps = []
    for d, sign, t in zip(deltas, axis_map.signs(), thr):
        d = d * sign
        comps.append(1 if d > t else -1 if d < -t else 0)
    return MovementLabel(*comps)


def label_trajectory(
    traj: Trajectory,
    horizon: int = DEFAULT_HORIZON,
    threshold=DEFAULT_THRESHOLD,
    axis_map: AxisMap = DEFAULT_AXIS_MAP,
) -> list[MovementLabel]:
    """Label every step by comparing it with the state `horizon` steps ahead.

    The lookahead clamps to the final state, so trailing steps of a
    demonstration that ends at rest classify as "stop".
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    states = [s.state for s in traj.steps]
    n = len(states)
    return [
        classify_move(states[t], states[min(t + horizon, n - 1)], threshold, axis_map)
        for t in range(n)
    ]


def label_histogram(labels) -> dict[str, dict[str, float]]:
    """Frequency histogram {label: {count, fraction}} over label texts."""
    counts: dict[str, int] = {}
    total = 0
    for lab in labels:
        text = lab.text if isinstance(lab, MovementLabel) else str(lab)
        counts[text] = counts.get(text, 0) + 1
        total += 1
    return {
        text: {"count": counts[text], "fraction": counts[text] / total if total else 0.0}
        for text in sorted(counts, key=lambda t: (-counts[t], t))
    }
