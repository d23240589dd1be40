"""Cross-component conformance: the HTTP bridge against the in-process mocks.

These tests need the bridge built (`npm run build` in bridge/) and a node
runtime; they skip otherwise, so the primary suite never depends on them.
"""

import json
import os
import shutil
import socket
import subprocess
import time

import pytest
import requests

from ecotkit.pipeline import PipelineConfig, run

from conftest import REPO_ROOT

BRIDGE_JS = os.path.join(REPO_ROOT, "bridge", "dist", "server.js")

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not os.path.exists(BRIDGE_JS),
    reason="bridge not built (run `npm install && npm run build` in bridge/)",
)


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def bridge_url():
    port = _free_port()
    proc = subprocess.Popen(
        ["node", BRIDGE_JS, "--port", str(port), "--seed", "0",
         "--prompts-dir", os.path.join(REPO_ROOT, "bridge", "prompts")],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.PIPE,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 15
        while True:
            try:
                if requests.get(f"{url}/v1/health", timeout=1).json() == {"status": "ok"}:
                    break
            except requests.RequestException:
                pass
            if proc.poll() is not None:
                raise RuntimeError(f"bridge exited: {proc.stderr.read().decode()}")
            if time.monotonic() > deadline:
                raise RuntimeError("bridge did not come up")
            time.sleep(0.05)
        yield url
    finally:
        proc.kill()
        proc.wait(timeout=10)


def test_golden_fixture_suite_passes_over_http(bridge_url, golden_fixture):
    with open(golden_fixture, "r", encoding="utf-8") as fh:
        golden = json.load(fh)
    endpoint_of = {"describe": "/v1/describe", "detect": "/v1/detect",
                   "gripper": "/v1/gripper", "plan": "/v1/plan"}
    checked = 0
    for kind, cases in golden.items():
        for case in cases:
            resp = requests.post(f"{bridge_url}{endpoint_of[kind]}", json=case["request"], timeout=10)
            assert resp.status_code == 200, resp.text
            assert resp.json() == case["response"], f"{kind} diverged for {case['request']}"
            checked += 1
    assert checked == sum(len(v) for v in golden.values())
    print(f"[PASS] bridge conformance: {checked} golden cases identical over HTTP")


def test_pipeline_output_identical_via_bridge(bridge_url, dataset_fixture, tmp_path):
    mock_out = tmp_path / "mock.jsonl"
    bridge_out = tmp_path / "bridge.jsonl"
    run(PipelineConfig(dataset=dataset_fixture, output=str(mock_out), backend="mock", seed=7))
    report = run(
        PipelineConfig(
            dataset=dataset_fixture, output=str(bridge_out), backend="bridge",
            bridge_url=bridge_url, seed=7, parallelism=4,
        )
    )
    assert report.annotated == 9
    assert mock_out.read_bytes() == bridge_out.read_bytes()
    print("[PASS] bridge conformance: pipeline output byte-identical over the bridge")


def test_bridge_health_and_error_shape(bridge_url):
    health = requests.get(f"{bridge_url}/v1/health", timeout=5).json()
    assert health == {"status": "ok"}
    resp = requests.post(
        f"{bridge_url}/v1/plan",
        json={"instruction": "a b", "caption": "c", "moves": ["stop"], "steps": 2, "seed": 0},
        timeout=5,
    )
    assert resp.status_code == 422
    body = resp.json()
    assert body["error"] == "length_mismatch"
    assert "detail" in body
