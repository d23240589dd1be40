#!/usr/bin/env python3
"""Regenerate the committed synthetic dataset fixture.

Ten pick-and-place trajectories with per-trajectory synthetic cameras.
Ground edge cases baked in:

* traj-04 carries two outlier gripper detections (off by tens of pixels);
* traj-05/traj-06 only have detections on every other frame;
* traj-07 has a noisy one-word instruction;
* traj-09 has just four detections, so calibration must flag it.

Gripper detections are embedded in image refs as ``?gp=u,v,conf`` so the
mock gripper detector stays a pure function of the request. Run from the
repo root:  python tools/make_fixtures.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ecotkit.data import RobotState, Step, Trajectory, write_dataset  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "dataset_10traj.jsonl")

INSTRUCTIONS = [
    "put the mushroom in the pot",
    "put the spoon on the towel",
    "put the carrot on the plate",
    "put the cup in the bowl",
    "move the banana to the pan",
    "put the duck on the towel",
    "place the sponge in the bowl",
    "stack",  # noisy: no space-separated words
    "put the fork on the plate",
    "move the block to the tray",
]

CONF_GRID = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9]


def make_camera(rng):
    f = rng.uniform(180.0, 240.0)
    K = np.array([[f, 0.0, 128.0], [0.0, f, 128.0], [0.0, 0.0, 1.0]])
    ang = rng.uniform(-0.2, 0.2, 3)
    cx, cy, cz = np.cos(ang)
    sx, sy, sz = np.sin(ang)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    R = Rz @ Ry @ Rx
    t = np.array([rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(0.75, 0.95)])
    return K @ np.c_[R, t]


def project(P, p):
    h = P @ np.array([p[0], p[1], p[2], 1.0])
    return h[0] / h[2], h[1] / h[2]


def motion_profile(rng):
    """Waypoint walk: approach, descend, close, lift+carry, descend, open."""
    home = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.16])
    obj = np.array([rng.uniform(0.10, 0.22), rng.uniform(-0.22, -0.10), 0.03])
    tgt = np.array([rng.uniform(-0.22, -0.10), rng.uniform(0.10, 0.22), 0.04])
    lift = 0.17

    poses = []   # (xyz, gripper)
    def seg(a, b, n, grip):
        for i in range(n):
            u = (i + 1) / n
            poses.append((a + (b - a) * u, grip))

    above_obj = obj.copy(); above_obj[2] = lift
    above_tgt = tgt.copy(); above_tgt[2] = lift
    poses.append((home, 1.0))
    seg(home, above_obj, int(rng.integers(3, 6)), 1.0)
    seg(above_obj, obj, 2, 1.0)
    poses.append((obj, 0.5))            # closing
    poses.append((obj, 0.0))
    seg(obj, above_obj, 2, 0.0)
    seg(above_obj, above_tgt, int(rng.integers(3, 6)), 0.0)
    seg(above_tgt, tgt, 2, 0.0)
    poses.append((tgt, 0.5))            # opening
    poses.append((tgt, 1.0))
    for _ in range(int(rng.integers(1, 3))):
        poses.append((poses[-1][0] + np.array([0.0, 0.0, 0.02]), 1.0))
    return poses


def build_trajectory(k, rng):
    traj_id = f"traj-{k:02d}"
    P = make_camera(rng)
    poses = motion_profile(rng)
    n = len(poses)

    yaw0 = rng.uniform(-0.1, 0.1)
    yaw_ramp = 0.012 if k % 4 == 1 else 0.0  # some wrists rotate while carrying
    steps = []
    for t, (xyz, grip) in enumerate(poses):
        jitter = rng.uniform(-0.0015, 0.0015, 3)
        pos = xyz + jitter
        yaw = yaw0 + yaw_ramp * max(0, t - 8) + rng.uniform(-0.004, 0.004)
        state = RobotState(
            x=round(float(pos[0]), 6),
            y=round(float(pos[1]), 6),
            z=round(float(pos[2]), 6),
            roll=round(float(rng.uniform(-0.004, 0.004)), 6),
            pitch=round(float(rng.uniform(-0.004, 0.004)), 6),
            yaw=round(float(yaw), 6),
            gripper=float(grip),
        )
        steps.append((t, state))

    # detection coverage per trajectory
    if k == 9:
        covered = {0, 4, 8, 12}
    elif k in (5, 6):
        covered = set(range(0, n, 2))
    else:
        covered = set(range(n))
    outliers = {3: (45.0, -20.0), 9: (-30.0, 60.0)} if k == 4 else {}

    out_steps = []
    for t, state in steps:
        ref = f"img://{traj_id}/{t:03d}"
        if t in covered:
            u, v = project(P, (state.x, state.y, state.z))
            if t in outliers:
                du, dv = outliers[t]
                u, v = u + du, v + dv
            conf = CONF_GRID[int(rng.integers(len(CONF_GRID)))]
            ref = f"{ref}?gp={int(round(u))},{int(round(v))},{conf:.2f}"
        nxt = steps[t + 1][1] if t + 1 < n else state
        action = [
            round(nxt.x - state.x, 6),
            round(nxt.y - state.y, 6),
            round(nxt.z - state.z, 6),
            round(nxt.roll - state.roll, 6),
            round(nxt.pitch - state.pitch, 6),
            round(nxt.yaw - state.yaw, 6),
            float(nxt.gripper),
        ]
        out_steps.append(Step(index=t, state=state, action=action, image_ref=ref))

    return Trajectory(
        id=traj_id,
        instruction=INSTRUCTIONS[k],
        camera_id=f"cam-{k % 3}",
        steps=out_steps,
    )


def main():
    rng = np.random.default_rng(2024)
    trajs = [build_trajectory(k, rng) for k in range(10)]
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    write_dataset(trajs, OUT)
    print(f"wrote {len(trajs)} trajectories -> {os.path.normpath(OUT)}")
    for traj in trajs:
        dets = sum(1 for s in traj.steps if "?gp=" in s.image_ref)
        print(f"  {traj.id}: {len(traj.steps)} steps, {dets} detections, {traj.instruction!r}")


if __name__ == "__main__":
    main()
