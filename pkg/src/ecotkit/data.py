"""Domain types for robot trajectories and bit-exact dataset file IO.

Datasets are JSON-lines, one trajectory per line:

    {"id": ..., "instruction": ..., "camera_id": ...,
     "steps": [{"i": 0, "state": [x, y, z, roll, pitch, yaw, gripper],
                "action": [7 floats], "image_ref": ..., "gripper_px": [u, v] | null}]}

Writing is canonical: fixed key order, compact separators, shortest
round-trip float formatting. Writing the same dataset twice yields
identical bytes, and read(write(x)) == x.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from .errors import IoFailure, SchemaViolation

STATE_FIELDS = ("x", "y", "z", "roll", "pitch", "yaw", "gripper")
ACTION_DIM = 7


@dataclass
class RobotState:
    """Proprioceptive end-effector state at one timestep.

    Position in meters, orientation in radians, gripper opening in [0, 1]
    (0 closed, 1 open).
    """

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float
    gripper: float

    def validate(self) -> None:
        for name in STATE_FIELDS:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"state field '{name}' must be finite, got {v!r}")
        if not 0.0 <= self.gripper <= 1.0:
            raise ValueError(f"gripper must be in [0, 1], got {self.gripper!r}")

    def as_list(self) -> list[float]:
        return [float(getattr(self, name)) for name in STATE_FIELDS]

    @classmethod
    def from_list(cls, values) -> "RobotState":
        if len(values) != len(STATE_FIELDS):
            raise ValueError(f"state needs {len(STATE_FIELDS)} values, got {len(values)}")
        return cls(*[float(v) for v in values])

    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass
class Step:
    """One transition of a trajectory: state, action, and an image reference.

    ``gripper_px`` starts out None and is filled by the calibration stage.
    """

    index: int
    state: RobotState
    action: list[float]
    image_ref: str
    gripper_px: tuple[float, float] | None = None

    def validate(self) -> None:
        if not isinstance(self.index, int) or self.index < 0:
            raise ValueError(f"step index must be a non-negative int, got {self.index!r}")
        self.state.validate()
        if len(self.action) != ACTION_DIM:
            raise ValueError(f"action must have {ACTION_DIM} values, got {len(self.action)}")
        for v in self.action:
            if not math.isfinite(v):
                raise ValueError("action values must be finite")
        if self.gripper_px is not None:
            u, v = self.gripper_px
            if not (math.isfinite(u) and math.isfinite(v)):
                raise ValueError("gripper_px must be finite")


@dataclass
class Trajectory:
    """An ordered demonstration with a shared camera and one instruction."""

    id: str
    instruction: str
    camera_id: str
    steps: list[Step] = field(default_factory=list)

    def validate(self) -> None:
        if not self.id:
            raise ValueError("trajectory id must be non-empty")
        if not self.steps:
            raise ValueError("trajectory must have at least one step")
        prev = -1
        for step in self.steps:
            step.validate()
            if step.index <= prev:
                raise ValueError(
                    f"step indices must be strictly increasing, got {step.index} after {prev}"
                )
            prev = step.index

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class BoundingBox:
    """An open-vocabulary detection: label, pixel box, and two confidences."""

    label: str
    x1: float
    y1: float
    x2: float
    y2: float
    box_conf: float
    text_conf: float

    def validate(self) -> None:
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError("box coordinates must be finite")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"box must satisfy x1<x2, y1<y2, got {self}")
        for name, v in (("box_conf", self.box_conf), ("text_conf", self.text_conf)):
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v!r}")


def _step_to_obj(step: Step) -> dict:
    return {
        "i": step.index,
        "state": step.state.as_list(),
        "action": [float(a) for a in step.action],
        "image_ref": step.image_ref,
        "gripper_px": None if step.gripper_px is None else [float(step.gripper_px[0]), float(step.gripper_px[1])],
    }


def _traj_to_obj(traj: Trajectory) -> dict:
    return {
        "id": traj.id,
        "instruction": traj.instruction,
        "camera_id": traj.camera_id,
        "steps": [_step_to_obj(s) for s in traj.steps],
    }


def trajectory_to_json(traj: Trajectory) -> str:
    """Canonical single-line JSON rendering of one trajectory."""
    return json.dumps(_traj_to_obj(traj), ensure_ascii=False, separators=(",", ":"))


def _require(obj: dict, key: str, line: int):
    if key not in obj:
        raise SchemaViolation(line, key, "missing")
    return obj[key]


def _parse_number_list(values, n: int, line: int, fieldname: str) -> list[float]:
    if not isinstance(values, list) or len(values) != n:
        raise SchemaViolation(line, fieldname, f"expected a list of {n} numbers")
    out = []
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise SchemaViolation(line, fieldname, "non-numeric entry")
        out.append(float(v))
    return out


def trajectory_from_json(text: str, line: int = 0) -> Trajectory:
    """Parse and validate one trajectory line, reporting the offending field."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(line, "<line>", f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation(line, "<line>", "expected an object")
    traj_id = _require(obj, "id", line)
    instruction = _require(obj, "instruction", line)
    camera_id = _require(obj, "camera_id", line)
    raw_steps = _require(obj, "steps", line)
    if not isinstance(traj_id, str):
        raise SchemaViolation(line, "id", "expected a string")
    if not isinstance(instruction, str):
        raise SchemaViolation(line, "instruction", "expected a string")
    if not isinstance(camera_id, str):
        raise SchemaViolation(line, "camera_id", "expected a string")
    if not isinstance(raw_steps, list):
        raise SchemaViolation(line, "steps", "expected a list")

    steps = []
    for k, raw in enumerate(raw_steps):
        if not isinstance(raw, dict):
            raise SchemaViolation(line, f"steps[{k}]", "expected an object")
        idx = _require(raw, "i", line)
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise SchemaViolation(line, f"steps[{k}].i", "expected an integer")
        state_vals = _parse_number_list(_require(raw, "state", line), 7, line, f"steps[{k}].state")
        action = _parse_number_list(_require(raw, "action", line), 7, line, f"steps[{k}].action")
        image_ref = _require(raw, "image_ref", line)
        if not isinstance(image_ref, str):
            raise SchemaViolation(line, f"steps[{k}].image_ref", "expected a string")
        raw_px = _require(raw, "gripper_px", line)
        gripper_px = None
        if raw_px is not None:
            px = _parse_number_list(raw_px, 2, line, f"steps[{k}].gripper_px")
            gripper_px = (px[0], px[1])
        step = Step(
            index=idx,
            state=RobotState.from_list(state_vals),
            action=action,
            image_ref=image_ref,
            gripper_px=gripper_px,
        )
        try:
            step.validate()
        except ValueError as exc:
            raise SchemaViolation(line, f"steps[{k}]", str(exc)) from exc
        steps.append(step)

    traj = Trajectory(id=traj_id, instruction=instruction, camera_id=camera_id, steps=steps)
    try:
        traj.validate()
    except ValueError as exc:
        raise SchemaViolation(line, "steps", str(exc)) from exc
    return traj


def read_dataset(path) -> list[Trajectory]:
    """Read a JSON-lines trajectory dataset, preserving order.

    Raises SchemaViolation with the 1-based line number on the first bad
    record, IoFailure when the file cannot be read.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read dataset {path}: {exc}") from exc
    trajs = []
    for n, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        trajs.append(trajectory_from_json(text, line=n))
    return trajs


def write_dataset(trajs: list[Trajectory], path) -> None:
    """Write trajectories as canonical JSON-lines (deterministic bytes)."""
    for traj in trajs:
        traj.validate()
    payload = "".join(trajectory_to_json(t) + "\n" for t in trajs)
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write dataset {path}: {exc}") from exc
