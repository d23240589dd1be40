"""End-to-end dataset annotation: read, describe, detect, label, calibrate,
plan, assemble, write.

Trajectories are independent units of work. Each one is annotated by a
worker and checkpointed as an atomic part file; the final output is the
concatenation of all parts in canonical order (trajectory id, then step),
so interrupted runs resume without duplicating or reordering records and
a resumed run is byte-identical to an uninterrupted one. With mock
backends and a fixed seed the whole pipeline is a pure function of
(dataset bytes, config).
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields as dataclass_fields

from . import annotators, chains
from .data import Trajectory, read_dataset
from .errors import (
    BackendRefusal,
    BackendUnavailable,
    ConfigError,
    IoFailure,
    MalformedPlan,
    ParseError,
)
from .movement import DEFAULT_AXIS_MAP, label_trajectory
from .projection import RansacConfig, annotate_gripper_track

BRIDGE_URL_ENV = "ECOTKIT_BRIDGE_URL"


@dataclass
class PipelineConfig:
    dataset: str = ""
    output: str = ""
    backend: str = "mock"  # mock | bridge
    seed: int = 0
    bridge_url: str | None = None
    layout: str = "standard"  # standard | frozen_bbox
    future_gripper: bool = False
    move_threshold: float = 0.03
    horizon: int = 4
    box_conf_min: float = 0.3
    text_conf_min: float = 0.2
    ransac_inlier_px: float = 5.0
    ransac_iterations: int = 1000
    ransac_min_inliers: int = 8
    ransac_seed: int = 0
    parallelism: int = 1
    checkpoint_dir: str | None = None
    resume: bool = False
    # per-camera direction conventions; programmatic only (no flat-file key)
    axis_maps: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("dataset path is required")
        if not self.output:
            raise ConfigError("output path is required")
        if self.backend not in ("mock", "bridge"):
            raise ConfigError(f"backend must be mock or bridge, got {self.backend!r}")
        if self.backend == "bridge" and not self.bridge_url:
            raise ConfigError("bridge backend needs bridge_url (flag, config, or env)")
        if self.layout not in ("standard", "frozen_bbox"):
            raise ConfigError(f"layout must be standard or frozen_bbox, got {self.layout!r}")
        if self.move_threshold <= 0:
            raise ConfigError("move_threshold must be positive")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        for name in ("box_conf_min", "text_conf_min"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.ransac_inlier_px <= 0 or self.ransac_iterations < 1 or self.ransac_min_inliers < 6:
            raise ConfigError("ransac parameters out of range")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    def ransac(self) -> RansacConfig:
        return RansacConfig(
            inlier_px=self.ransac_inlier_px,
            iterations=self.ransac_iterations,
            min_inliers=self.ransac_min_inliers,
            seed=self.ransac_seed,
        )

    def parts_dir(self) -> str:
        return self.checkpoint_dir or f"{self.output}.parts"


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def load_config_file(path: str) -> dict:
    """Parse the flat ``key = value`` config format ('#' starts a comment)."""
    values: dict = {}
    known = {f.name: f.type for f in dataclass_fields(PipelineConfig)}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = _coerce(key, value, n, path)
    return values


def _coerce(key: str, value: str, n: int, path: str):
    default = getattr(PipelineConfig(), key)
    if isinstance(default, bool):
        if value.lower() not in _BOOL_VALUES:
            raise ConfigError(f"{path}:{n}: {key} expects true/false")
        return _BOOL_VALUES[value.lower()]
    if isinstance(default, int):
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{n}: {key} expects an integer") from exc
    if isinstance(default, float):
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{n}: {key} expects a number") from exc
    return value


def build_config(file_path: str | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults < config file < environment (bridge url) < explicit overrides."""
    cfg = PipelineConfig()
    if file_path:
        for key, value in load_config_file(file_path).items():
            setattr(cfg, key, value)
    env_url = os.environ.get(BRIDGE_URL_ENV)
    if env_url:
        cfg.bridge_url = env_url
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


@dataclass
class TrajectoryResult:
    trajectory_id: str
    status: str  # annotated | unannotated | uncalibrated
    detail: str = ""
    record_lines: list[str] = field(default_factory=list)
    move_labels: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    annotated: int = 0
    unannotated: int = 0
    uncalibrated: int = 0
    records: int = 0
    failed: list[dict] = field(default_factory=list)
    label_histogram: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    @property
    def exit_code(self) -> int:
        return 2 if (self.unannotated or self.uncalibrated) else 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "annotated": self.annotated,
                "unannotated": self.unannotated,
                "uncalibrated": self.uncalibrated,
                "records": self.records,
                "failed": self.failed,
                "label_histogram": self.label_histogram,
                "elapsed_seconds": self.elapsed_seconds,
            },
            ensure_ascii=False,
            indent=2,
        )


def record_line(trajectory_id: str, step: int, chain_text: str, action: list[float]) -> str:
    return json.dumps(
        {
            "trajectory_id": trajectory_id,
            "step": step,
            "chain": chain_text,
            "action": [float(a) for a in action],
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def annotate_trajectory(traj: Trajectory, backend, cfg: PipelineConfig) -> TrajectoryResult:
    """Run all annotation stages for one trajectory."""
    layout = chains.Layout(cfg.layout)
    try:
        caption = backend.describe(traj.steps[0].image_ref, traj.instruction).caption

        axis_map = cfg.axis_maps.get(traj.camera_id, DEFAULT_AXIS_MAP)
        labels = label_trajectory(
            traj, horizon=cfg.horizon, threshold=cfg.move_threshold, axis_map=axis_map
        )

        detections = {}
        for step in traj.steps:
            found = backend.detect_gripper(step.image_ref)
            if found is not None:
                detections[step.index] = found
        diag = annotate_gripper_track(traj, detections, cfg.ransac())
        if diag.status != "calibrated":
            return TrajectoryResult(
                traj.id,
                "uncalibrated",
                detail=f"{len(detections)} detections, no consensus",
                move_labels=[lab.text for lab in labels],
            )

        text = f"{caption} {traj.instruction}".strip()
        boxes = [
            annotators.filter_detections(
                backend.detect(step.image_ref, text), cfg.box_conf_min, cfg.text_conf_min
            )
            for step in traj.steps
        ]

        plan_ann = backend.plan(traj.instruction, caption, [lab.text for lab in labels])

        chain_list = chains.assemble(
            traj,
            caption,
            boxes,
            labels,
            [s.gripper_px for s in traj.steps],
            plan_ann,
            layout=layout,
            future_gripper=cfg.future_gripper,
        )
    except (BackendUnavailable, BackendRefusal, MalformedPlan) as exc:
        return TrajectoryResult(traj.id, "unannotated", detail=str(exc))

    lines = [
        record_line(traj.id, step.index, chains.serialize(chain), step.action)
        for step, chain in zip(traj.steps, chain_list)
    ]
    return TrajectoryResult(
        traj.id, "annotated", record_lines=lines, move_labels=[lab.text for lab in labels]
    )


_PART_SAFE = re.compile(r"[^A-Za-z0-9._-]")


def _part_path(parts_dir: str, traj_id: str) -> str:
    safe = _PART_SAFE.sub("_", traj_id)
    digest = ""
    if safe != traj_id:  # disambiguate sanitized ids, stably across processes
        digest = "." + hashlib.md5(traj_id.encode("utf-8")).hexdigest()[:10]
    return os.path.join(parts_dir, f"{safe}{digest}.part.json")


def _write_part(path: str, result: TrajectoryResult) -> None:
    payload = json.dumps(
        {
            "trajectory_id": result.trajectory_id,
            "status": result.status,
            "detail": result.detail,
            "records": result.record_lines,
            "move_labels": result.move_labels,
        },
        ensure_ascii=False,
    )
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _read_part(path: str) -> TrajectoryResult | None:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return TrajectoryResult(
            trajectory_id=obj["trajectory_id"],
            status=obj["status"],
            detail=obj.get("detail", ""),
            record_lines=list(obj.get("records", [])),
            move_labels=list(obj.get("move_labels", [])),
        )
    except (OSError, ValueError, KeyError):
        return None  # damaged or partial part: recompute


def run(cfg: PipelineConfig) -> RunReport:
    """Annotate a dataset end to end and write the chain records."""
    cfg.validate()
    started = time.monotonic()
    trajs = read_dataset(cfg.dataset)
    trajs.sort(key=lambda t: t.id)
    seen = set()
    for traj in trajs:
        if traj.id in seen:
            raise ConfigError(f"duplicate trajectory id {traj.id!r} in dataset")
        seen.add(traj.id)

    backend = annotators.make_annotator(cfg.backend, seed=cfg.seed, bridge_url=cfg.bridge_url)

    parts_dir = cfg.parts_dir()
    os.makedirs(parts_dir, exist_ok=True)
    if not cfg.resume:
        for name in os.listdir(parts_dir):
            if name.endswith(".part.json"):
                os.unlink(os.path.join(parts_dir, name))

    results: dict[str, TrajectoryResult] = {}
    pending = []
    for traj in trajs:
        cached = _read_part(_part_path(parts_dir, traj.id)) if cfg.resume else None
        if cached is not None and cached.trajectory_id == traj.id:
            results[traj.id] = cached
        else:
            pending.append(traj)

    def work(traj: Trajectory) -> TrajectoryResult:
        result = annotate_trajectory(traj, backend, cfg)
        _write_part(_part_path(parts_dir, traj.id), result)
        return result

    if pending:
        if cfg.parallelism == 1:
            for traj in pending:
                results[traj.id] = work(traj)
        else:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                for result in pool.map(work, pending):
                    results[result.trajectory_id] = result

    report = RunReport()
    labels: list[str] = []
    out_lines: list[str] = []
    for traj in trajs:  # canonical order: sorted by trajectory id, then step
        result = results[traj.id]
        if result.status == "annotated":
            report.annotated += 1
            out_lines.extend(result.record_lines)
        else:
            if result.status == "uncalibrated":
                report.uncalibrated += 1
            else:
                report.unannotated += 1
            report.failed.append(
                {"trajectory_id": traj.id, "status": result.status, "detail": result.detail}
            )
        labels.extend(result.move_labels)

    from .movement import label_histogram

    report.label_histogram = label_histogram(labels)
    report.records = len(out_lines)

    tmp = f"{cfg.output}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write("".join(line + "\n" for line in out_lines))
        os.replace(tmp, cfg.output)
    except OSError as exc:
        raise IoFailure(f"cannot write output {cfg.output}: {exc}") from exc

    report.elapsed_seconds = time.monotonic() - started
    return report


def read_records(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read output {path}: {exc}") from exc
    records = []
    for n, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            records.append(json.loads(text))
        except ValueError as exc:
            raise ParseError(n, f"valid record JSON ({exc})") from exc
    return records


def _percentile(values: list[int], q: float) -> float:
    if not values:
        return float("nan")
    ordered = sorted(values)
    pos = q * (len(ordered) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (ordered[hi] - ordered[lo]) * (pos - lo)


def stats(path: str, estimator=None) -> dict:
    """Histogram of MOVE labels and token budgets over an output file."""
    records = read_records(path)
    from .movement import label_histogram

    labels = []
    budgets: dict[str, list[int]] = {}
    for rec in records:
        chain = chains.parse(rec["chain"])
        labels.append(chain.move)
        budgets.setdefault(chain.layout.value, []).append(
            chains.count_tokens(chain, estimator).generated
        )
    token_stats = {}
    for layout, values in sorted(budgets.items()):
        token_stats[layout] = {
            "count": len(values),
            "mean": sum(values) / len(values),
            "p50": _percentile(values, 0.50),
            "p90": _percentile(values, 0.90),
        }
    return {
        "records": len(records),
        "label_histogram": label_histogram(labels),
        "tokens": token_stats,
    }


def validate_output(path: str) -> dict:
    """Re-parse every chain in an output file; report violations."""
    records = read_records(path)
    violations = []
    for n, rec in enumerate(records, start=1):
        try:
            chain = chains.parse(rec["chain"])
            if chains.serialize(chain) != rec["chain"]:
                violations.append({"record": n, "error": "round-trip mismatch"})
        except (ParseError, KeyError) as exc:
            violations.append({"record": n, "error": str(exc)})
    return {"records": len(records), "violations": violations}
