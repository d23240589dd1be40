import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ecotkit import mockproto
from ecotkit.annotators import (
    BridgeAnnotator,
    MockAnnotator,
    PlanAnnotation,
    filter_detections,
)
from ecotkit.data import BoundingBox
from ecotkit.errors import BackendRefusal, BackendUnavailable, MalformedPlan


def box(box_conf, text_conf, label="cup"):
    return BoundingBox(label=label, x1=10, y1=10, x2=40, y2=50,
                       box_conf=box_conf, text_conf=text_conf)


# --- confidence filtering ----------------------------------------------------

def test_filter_keeps_strictly_above_both_thresholds():
    kept = filter_detections([box(0.31, 0.21)])
    assert len(kept) == 1


def test_filter_drops_boundary_box_confidence():
    assert filter_detections([box(0.30, 0.90)]) == []
    assert filter_detections([box(0.30, 0.21)]) == []


def test_filter_drops_boundary_text_confidence():
    assert filter_detections([box(0.90, 0.20)]) == []


def test_filter_empty_input():
    assert filter_detections([]) == []


def test_filter_is_an_idempotent_subsequence():
    rng = random.Random(31)
    dets = [box(rng.random(), rng.random(), label=f"l{k}") for k in range(60)]
    kept = filter_detections(dets)
    it = iter(dets)
    assert all(any(d is k for d in it) for k in kept), "order must be preserved"
    assert filter_detections(kept) == kept


# --- deterministic mocks ------------------------------------------------------

def test_describe_is_deterministic_and_seed_sensitive():
    a = MockAnnotator(seed=7).describe("img://x/0", "pick the cup up")
    b = MockAnnotator(seed=7).describe("img://x/0", "pick the cup up")
    c = MockAnnotator(seed=8).describe("img://x/0", "pick the cup up")
    assert a == b
    assert a.caption
    assert a != c


def test_noisy_instruction_is_dropped_from_the_prompt():
    assert mockproto.build_describe_prompt("stack") == mockproto.DESCRIBE_PROMPT
    assert mockproto.build_describe_prompt(None) == mockproto.DESCRIBE_PROMPT
    withtask = mockproto.build_describe_prompt("stack the cups")
    assert withtask.startswith("The robot task is: stack the cups.")
    assert withtask.endswith(mockproto.DESCRIBE_PROMPT)
    # and therefore a no-space instruction cannot influence the caption
    assert MockAnnotator(7).describe("img://x/0", "stack") == MockAnnotator(7).describe("img://x/0", None)


def test_detect_empty_scene_text_gives_no_boxes():
    assert MockAnnotator(7).detect("img://x/0", "a plain empty scene") == []


def test_detect_finds_vocabulary_nouns_in_first_occurrence_order():
    boxes = MockAnnotator(7).detect("img://x/0", "the towel under a mushroom near the towel")
    names = [b.label.split()[-1] for b in boxes]
    assert names == ["towel", "mushroom"]
    for b in boxes:
        b.validate()
        assert 0 <= b.x1 < b.x2 <= mockproto.MOCK_IMAGE_SIZE
        assert 0 <= b.y1 < b.y2 <= mockproto.MOCK_IMAGE_SIZE


def test_gripper_fixture_passthrough():
    assert MockAnnotator(7).detect_gripper("img://x/0?gp=128,96,0.9") == (128.0, 96.0, 0.9)
    assert MockAnnotator(7).detect_gripper("img://x/0") is None
    assert MockAnnotator(7).detect_gripper("img://x/0?gp=oops") is None


def test_plan_single_stop_move():
    ann = MockAnnotator(7).plan("put the cup in the bowl", "a cup on a table", ["stop"])
    assert len(ann.plan) == 1
    assert ann.per_step == [(0, ann.per_step[0][1], ann.per_step[0][2])]


def test_plan_segments_follow_gripper_transitions():
    moves = [
        "move forward", "move forward", "move down, close gripper", "close gripper",
        "move up", "move left", "move left, open gripper", "open gripper", "stop",
    ]
    ann = MockAnnotator(7).plan("put the spoon on the towel", "a spoon and towel", moves)
    ann.validate(len(moves))
    indices = [idx for idx, _, _ in ann.per_step]
    assert indices == sorted(indices), "sub-task indices must be non-decreasing"
    assert indices[0] == 0 and indices[-1] == len(ann.plan) - 1
    assert "grasp the spoon" in ann.plan[1]
    assert any("release the spoon" in p for p in ann.plan)


def test_plan_validation_rejects_bad_indices():
    ann = PlanAnnotation(task="t", plan=["only"], per_step=[(1, "r", "m")])
    with pytest.raises(ValueError):
        ann.validate(1)


# --- golden fixtures -----------------------------------------------------------

def test_mocks_reproduce_the_golden_fixtures(golden_fixture):
    with open(golden_fixture, "r", encoding="utf-8") as fh:
        golden = json.load(fh)
    for case in golden["describe"]:
        req = case["request"]
        got = mockproto.mock_describe(req["image_ref"], req.get("instruction"), req["seed"])
        assert got == case["response"]
    for case in golden["detect"]:
        req = case["request"]
        got = mockproto.mock_detect(req["image_ref"], req["text"], req["seed"])
        assert got == case["response"]
    for case in golden["gripper"]:
        req = case["request"]
        got = mockproto.mock_gripper(req["image_ref"], req["seed"])
        assert got == case["response"]
    for case in golden["plan"]:
        req = case["request"]
        got = mockproto.mock_plan(req["instruction"], req["caption"], req["moves"], req["seed"])
        assert got == case["response"]


# --- wire protocol client -------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    """Serves the same deterministic mock values over HTTP."""

    overrides = {}

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        seed = body.get("seed", 0)
        if self.path in self.overrides:
            status, payload = self.overrides[self.path]
        elif self.path == "/v1/describe":
            payload = mockproto.mock_describe(body["image_ref"], body.get("instruction"), seed)
            status = 200
        elif self.path == "/v1/detect":
            payload = mockproto.mock_detect(body["image_ref"], body["text"], seed)
            status = 200
        elif self.path == "/v1/gripper":
            payload = mockproto.mock_gripper(body["image_ref"], seed)
            status = 200
        elif self.path == "/v1/plan":
            payload = mockproto.mock_plan(body["instruction"], body["caption"], body["moves"], seed)
            status = 200
        else:
            payload, status = {"error": "not_found", "detail": self.path}, 404
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.overrides = {}
    try:
        yield f"http://127.0.0.1:{server.server_port}"
    finally:
        server.shutdown()
        thread.join(timeout=2)


def test_bridge_round_trip_equals_in_process_mock(stub_server):
    bridge = BridgeAnnotator(stub_server, seed=7)
    mock = MockAnnotator(seed=7)
    ref, instr = "img://traj-00/000?gp=201,144,0.85", "put the mushroom in the pot"
    assert bridge.describe(ref, instr) == mock.describe(ref, instr)
    caption = mock.describe(ref, instr).caption
    assert bridge.detect(ref, caption) == mock.detect(ref, caption)
    assert bridge.detect_gripper(ref) == mock.detect_gripper(ref)
    moves = ["move forward", "close gripper", "move up", "open gripper"]
    assert bridge.plan(instr, caption, moves) == mock.plan(instr, caption, moves)


def test_bridge_unreachable_raises_backend_unavailable():
    bridge = BridgeAnnotator("http://127.0.0.1:9", seed=7, retries=2, backoff=0.01, timeout=0.5)
    with pytest.raises(BackendUnavailable):
        bridge.describe("img://x/0", "pick it up")


def test_bridge_4xx_raises_backend_refusal(stub_server):
    _StubHandler.overrides["/v1/describe"] = (422, {"error": "length_mismatch", "detail": ""})
    bridge = BridgeAnnotator(stub_server, seed=7, retries=2, backoff=0.01)
    with pytest.raises(BackendRefusal):
        bridge.describe("img://x/0", "pick it up")


def test_bridge_malformed_plan_surfaces_after_retry(stub_server):
    _StubHandler.overrides["/v1/plan"] = (200, {"task": "t", "plan": ["a"]})  # per_step missing
    bridge = BridgeAnnotator(stub_server, seed=7, retries=2, backoff=0.01)
    with pytest.raises(MalformedPlan):
        bridge.plan("put the cup in the bowl", "cap", ["stop"])


def test_bridge_5xx_retries_then_backend_unavailable(stub_server):
    _StubHandler.overrides["/v1/gripper"] = (500, {"error": "boom", "detail": ""})
    bridge = BridgeAnnotator(stub_server, seed=7, retries=2, backoff=0.01)
    with pytest.raises(BackendUnavailable):
        bridge.detect_gripper("img://x/0")
