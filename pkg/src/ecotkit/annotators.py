"""Annotator backends: scene describer, object detector, gripper detector, planner.

Two implementations share one interface: an in-process deterministic mock
(the default for tests and desk-scale runs) and an HTTP client speaking
the bridge wire protocol. Both return identical values for identical
(request, seed) pairs; the confidence filtering from the data-generation
recipe lives here too.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from . import mockproto
from .data import BoundingBox
from .errors import BackendRefusal, BackendUnavailable, MalformedPlan

BOX_CONF_MIN = 0.3
TEXT_CONF_MIN = 0.2


@dataclass
class SceneDescription:
    caption: str


@dataclass
class PlanAnnotation:
    """High-level plan plus one (sub-task index, reasons) entry per step."""

    task: str
    plan: list[str]
    per_step: list[tuple[int, str, str]]

    def validate(self, n_steps: int | None = None) -> None:
        if not self.plan:
            raise ValueError("plan must have at least one sub-task")
        if n_steps is not None and len(self.per_step) != n_steps:
            raise ValueError(
                f"per_step has {len(self.per_step)} entries for {n_steps} steps"
            )
        for k, (idx, _, _) in enumerate(self.per_step):
            if not 0 <= idx < len(self.plan):
                raise ValueError(f"per_step[{k}] index {idx} outside plan of {len(self.plan)}")


def filter_detections(
    dets: list[BoundingBox],
    box_min: float = BOX_CONF_MIN,
    text_min: float = TEXT_CONF_MIN,
) -> list[BoundingBox]:
    """Keep detections whose confidences strictly exceed both thresholds."""
    return [d for d in dets if d.box_conf > box_min and d.text_conf > text_min]


def _boxes_from_wire(payload: dict) -> list[BoundingBox]:
    boxes = []
    for det in payload.get("detections", []):
        x1, y1, x2, y2 = det["box"]
        box = BoundingBox(
            label=det["label"],
            x1=float(x1),
            y1=float(y1),
            x2=float(x2),
            y2=float(y2),
            box_conf=float(det["box_conf"]),
            text_conf=float(det["text_conf"]),
        )
        box.validate()
        boxes.append(box)
    return boxes


def _plan_from_wire(payload: dict, n_steps: int | None) -> PlanAnnotation:
    try:
        per_step = [
            (int(entry["subtask"]), str(entry["subtask_reason"]), str(entry["move_reason"]))
            for entry in payload["per_step"]
        ]
        ann = PlanAnnotation(
            task=str(payload["task"]),
            plan=[str(s) for s in payload["plan"]],
            per_step=per_step,
        )
        ann.validate(n_steps)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPlan(f"planner response failed validation: {exc}") from exc
    return ann


class MockAnnotator:
    """Deterministic in-process backend; a pure function of (request, seed)."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def describe(self, image_ref: str, instruction: str | None = None) -> SceneDescription:
        payload = mockproto.mock_describe(image_ref, instruction, self.seed)
        return SceneDescription(caption=payload["caption"])

    def detect(self, image_ref: str, text: str) -> list[BoundingBox]:
        if not text:
            raise ValueError("detection text must be non-empty")
        return _boxes_from_wire(mockproto.mock_detect(image_ref, text, self.seed))

    def detect_gripper(self, image_ref: str) -> tuple[float, float, float] | None:
        payload = mockproto.mock_gripper(image_ref, self.seed)
        if payload["point"] is None:
            return None
        u, v = payload["point"]
        return (float(u), float(v), float(payload["conf"]))

    def plan(self, instruction: str, caption: str, moves: list[str]) -> PlanAnnotation:
        payload = mockproto.mock_plan(instruction, caption, moves, self.seed)
        return _plan_from_wire(payload, len(moves))


class BridgeAnnotator:
    """HTTP client for the annotator bridge wire protocol.

    Transient transport failures retry with exponential backoff before
    surfacing BackendUnavailable; definitive 4xx answers surface as
    BackendRefusal without retrying. A semaphore caps in-flight requests.
    """

    def __init__(
        self,
        url: str,
        seed: int = 0,
        retries: int = 3,
        backoff: float = 0.25,
        timeout: float = 30.0,
        max_in_flight: int = 8,
        session: requests.Session | None = None,
    ):
        self.url = url.rstrip("/")
        self.seed = seed
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._gate = threading.Semaphore(max_in_flight)
        self._session = session or requests.Session()

    def _post(self, endpoint: str, body: dict) -> dict:
        body = dict(body)
        body["seed"] = self.seed
        last_exc = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    resp = self._session.post(
                        f"{self.url}{endpoint}", json=body, timeout=self.timeout
                    )
            except requests.RequestException as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = BackendUnavailable(f"{endpoint} -> {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendRefusal(f"{endpoint} -> {resp.status_code}: {resp.text}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendRefusal(f"{endpoint} returned non-JSON body") from exc
        raise BackendUnavailable(
            f"{endpoint} unreachable after {self.retries} attempts: {last_exc}"
        )

    def describe(self, image_ref: str, instruction: str | None = None) -> SceneDescription:
        body = {"image_ref": image_ref}
        if instruction is not None:
            body["instruction"] = instruction
        payload = self._post("/v1/describe", body)
        caption = payload.get("caption")
        if not caption:
            raise BackendRefusal("describe returned an empty caption")
        return SceneDescription(caption=caption)

    def detect(self, image_ref: str, text: str) -> list[BoundingBox]:
        if not text:
            raise ValueError("detection text must be non-empty")
        return _boxes_from_wire(self._post("/v1/detect", {"image_ref": image_ref, "text": text}))

    def detect_gripper(self, image_ref: str) -> tuple[float, float, float] | None:
        payload = self._post("/v1/gripper", {"image_ref": image_ref})
        if payload.get("point") is None:
            return None
        u, v = payload["point"]
        return (float(u), float(v), float(payload["conf"]))

    def plan(self, instruction: str, caption: str, moves: list[str]) -> PlanAnnotation:
        body = {"instruction": instruction, "caption": caption, "moves": list(moves)}
        try:
            return _plan_from_wire(self._post("/v1/plan", body), len(moves))
        except MalformedPlan:
            # one extra round-trip before surfacing; mocks never get here
            return _plan_from_wire(self._post("/v1/plan", body), len(moves))


def make_annotator(mode: str, seed: int = 0, bridge_url: str | None = None, **kwargs):
    if mode == "mock":
        return MockAnnotator(seed=seed)
    if mode == "bridge":
        if not bridge_url:
            raise ValueError("bridge mode needs a bridge URL")
        return BridgeAnnotator(bridge_url, seed=seed, **kwargs)
    raise ValueError(f"unknown backend mode {mode!r}")
