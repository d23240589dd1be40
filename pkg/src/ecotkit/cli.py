"""Command-line entry points.

Subcommands: generate, validate, stats, calibrate, simulate, intervene.
Exit codes: 0 success, 2 partial results (some trajectories not
annotated) or a rejected intervention edit, 1 fatal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import chains, intervention, pipeline, scheduler
from .data import read_dataset
from .errors import EcotError, InvalidEdit, ParseError
from .projection import RansacConfig, fit_projection, Correspondence


def _add_generate(sub):
    p = sub.add_parser("generate", help="annotate a dataset with reasoning chains")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--dataset")
    p.add_argument("--output")
    p.add_argument("--backend", choices=["mock", "bridge"])
    p.add_argument("--seed", type=int)
    p.add_argument("--bridge-url", dest="bridge_url")
    p.add_argument("--layout", choices=["standard", "frozen_bbox"])
    p.add_argument("--future-gripper", dest="future_gripper", action="store_const", const=True)
    p.add_argument("--move-threshold", dest="move_threshold", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--box-conf-min", dest="box_conf_min", type=float)
    p.add_argument("--text-conf-min", dest="text_conf_min", type=float)
    p.add_argument("--ransac-inlier-px", dest="ransac_inlier_px", type=float)
    p.add_argument("--ransac-iterations", dest="ransac_iterations", type=int)
    p.add_argument("--ransac-min-inliers", dest="ransac_min_inliers", type=int)
    p.add_argument("--ransac-seed", dest="ransac_seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--resume", action="store_const", const=True)
    p.add_argument("--report", help="also write the run report JSON here")


def _cmd_generate(args) -> int:
    override_keys = (
        "dataset", "output", "backend", "seed", "bridge_url", "layout", "future_gripper",
        "move_threshold", "horizon", "box_conf_min", "text_conf_min", "ransac_inlier_px",
        "ransac_iterations", "ransac_min_inliers", "ransac_seed", "parallelism",
        "checkpoint_dir", "resume",
    )
    overrides = {k: getattr(args, k) for k in override_keys}
    cfg = pipeline.build_config(args.config, overrides)
    report = pipeline.run(cfg)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    print(
        f"annotated={report.annotated} unannotated={report.unannotated} "
        f"uncalibrated={report.uncalibrated} records={report.records} "
        f"elapsed={report.elapsed_seconds:.2f}s"
    )
    for failure in report.failed:
        print(f"  failed {failure['trajectory_id']}: {failure['status']} ({failure['detail']})")
    return report.exit_code


def _cmd_validate(args) -> int:
    result = pipeline.validate_output(args.output)
    print(json.dumps(result, ensure_ascii=False, indent=2))
    return 1 if result["violations"] else 0


def _cmd_stats(args) -> int:
    print(json.dumps(pipeline.stats(args.output), ensure_ascii=False, indent=2))
    return 0


def _cmd_calibrate_cameras(args) -> int:
    trajs = read_dataset(args.dataset)
    with open(args.detections, "r", encoding="utf-8") as fh:
        detmap = json.load(fh)
    cfg = RansacConfig(
        inlier_px=args.inlier_px, iterations=args.iterations,
        min_inliers=args.min_inliers, seed=args.seed,
    )
    out = {}
    for traj in trajs:
        dets = detmap.get(traj.id, {})
        corrs = []
        for step in traj.steps:
            entry = dets.get(str(step.index))
            if entry is None:
                continue
            u, v, conf = entry
            corrs.append(Correspondence(step.state.position(), (u, v), conf))
        try:
            P, mask, diag = fit_projection(corrs, cfg)
            out[traj.id] = {
                "status": "calibrated",
                "matrix": [[float(x) for x in row] for row in P],
                "inliers": [bool(b) for b in mask],
                "n_inliers": diag.n_inliers,
                "mean_inlier_error": diag.mean_inlier_error,
            }
        except EcotError as exc:
            out[traj.id] = {"status": "uncalibrated", "detail": str(exc)}
    text = json.dumps(out, ensure_ascii=False, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _parse_strategy(args) -> scheduler.Strategy:
    if args.strategy == "naive":
        return scheduler.NAIVE
    if args.strategy == "async":
        return scheduler.ASYNC
    return scheduler.sync_freeze(args.n)


def _cmd_simulate(args) -> int:
    if args.profile:
        with open(args.profile, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        profile = scheduler.ChainProfile(
            high_tokens=obj["high_tokens"], low_tokens=obj["low_tokens"],
            action_tokens=obj.get("action_tokens", scheduler.ACTION_TOKENS),
        )
        cost = scheduler.CostModel(
            gen_cost=obj["gen_cost"], enc_cost=obj.get("enc_cost", 0.0),
            overhead=obj.get("overhead", 0.0),
        )
    else:
        result = scheduler.calibrate()
        profile, cost = result.profile, result.cost
    freezes = []
    for spec in args.freeze or []:
        start, _, horizon = spec.partition(":")
        freezes.append((int(start), int(horizon or intervention.FREEZE_HORIZON)))
    trace = scheduler.simulate(_parse_strategy(args), profile, cost, args.steps, freezes=freezes)
    summary = trace.summary()
    naive = scheduler.simulate(scheduler.NAIVE, profile, cost, args.steps, freezes=freezes)
    summary["speedup_vs_naive"] = trace.steps_per_second / naive.steps_per_second
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "summary": summary,
                    "steps": [vars(s) for s in trace.steps],
                    "refreshes": [vars(r) for r in trace.refreshes],
                },
                fh, ensure_ascii=False, indent=2,
            )
    print(json.dumps(summary, ensure_ascii=False, indent=2))
    return 0


def _cmd_intervene(args) -> int:
    if args.chain_file:
        with open(args.chain_file, "r", encoding="utf-8") as fh:
            text = fh.read().strip()
    else:
        text = sys.stdin.read().strip()
    try:
        chain = chains.parse(text)
        corrected, horizon = intervention.correct(chain, args.feedback)
    except InvalidEdit as exc:
        print(f"invalid edit: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"bad chain: {exc}", file=sys.stderr)
        return 1
    out = chains.serialize(corrected)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)
    print(f"freeze_horizon={horizon}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ecotkit")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_generate(sub)

    p = sub.add_parser("validate", help="re-parse every chain in an output file")
    p.add_argument("output")

    p = sub.add_parser("stats", help="label histogram and token budgets of an output file")
    p.add_argument("output")

    p = sub.add_parser("calibrate", help="fit per-trajectory projection matrices")
    p.add_argument("--dataset", required=True)
    p.add_argument("--detections", required=True, help="JSON {traj_id: {step: [u, v, conf]}}")
    p.add_argument("--out")
    p.add_argument("--inlier-px", type=float, default=5.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--min-inliers", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="simulate a serving strategy")
    p.add_argument("--strategy", choices=["naive", "sync", "async"], default="naive")
    p.add_argument("--n", type=int, default=5, help="sync freeze interval")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--profile", help="JSON with high/low tokens and costs; default: calibrated")
    p.add_argument("--freeze", action="append", help="intervention window start:horizon")
    p.add_argument("--trace", help="write the full trace JSON here")

    p = sub.add_parser("intervene", help="apply language feedback to a chain")
    p.add_argument("--chain-file", help="file with the serialized chain (default: stdin)")
    p.add_argument("--feedback", required=True)
    p.add_argument("--out")

    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "validate": _cmd_validate,
        "stats": _cmd_stats,
        "calibrate": _cmd_calibrate_cameras,
        "simulate": _cmd_simulate,
        "intervene": _cmd_intervene,
    }
    try:
        return handlers[args.command](args)
    except EcotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
