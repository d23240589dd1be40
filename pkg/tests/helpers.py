"""Shared builders and reference data for the test suite."""

from __future__ import annotations

import math
import random

import numpy as np

from ecotkit.chains import Layout, ReasoningChain
from ecotkit.data import RobotState, Step, Trajectory
from ecotkit.movement import vocabulary

# The 54 primitive labels that cover almost all real transitions, with the
# most frequent first. Used for vocabulary-containment checks.
COMMON_54 = (
    "stop",
    "close gripper",
    "open gripper",
    "move down",
    "move left",
    "move right",
    "move up",
    "move forward",
    "move backward",
    "move up, open gripper",
    "move forward right",
    "move up, close gripper",
    "move backward left",
    "move forward left",
    "move left down",
    "move down, close gripper",
    "move right down",
    "move left up",
    "move right up",
    "move right, rotate clockwise",
    "move left, rotate counterclockwise",
    "move backward right",
    "rotate counterclockwise",
    "move down, open gripper",
    "rotate clockwise",
    "move forward down",
    "move up, rotate clockwise",
    "move up, rotate counterclockwise",
    "move backward up",
    "move left, rotate clockwise",
    "move backward down",
    "move right, open gripper",
    "move forward up",
    "move left, open gripper",
    "move right, rotate counterclockwise",
    "move backward, open gripper",
    "move down, rotate clockwise",
    "move down, rotate counterclockwise",
    "move forward, rotate counterclockwise",
    "move forward, rotate clockwise",
    "move forward, open gripper",
    "move right, close gripper",
    "move backward, rotate clockwise",
    "move backward, rotate counterclockwise",
    "move left, close gripper",
    "move backward right, rotate clockwise",
    "move backward left, rotate counterclockwise",
    "move right up, open gripper",
    "move right up, close gripper",
    "move backward, close gripper",
    "rotate clockwise, close gripper",
    "rotate counterclockwise, close gripper",
    "move left up, open gripper",
    "move forward right, rotate clockwise",
)


def make_state(x=0.0, y=0.0, z=0.0, roll=0.0, pitch=0.0, yaw=0.0, gripper=0.5) -> RobotState:
    return RobotState(x=x, y=y, z=z, roll=roll, pitch=pitch, yaw=yaw, gripper=gripper)


def make_traj(states, traj_id="t0", instruction="put the cup in the bowl", camera="cam-0",
              image_refs=None) -> Trajectory:
    steps = []
    for i, st in enumerate(states):
        ref = image_refs[i] if image_refs else f"img://{traj_id}/{i:03d}"
        steps.append(Step(index=i, state=st, action=[0.0] * 6 + [st.gripper], image_ref=ref))
    return Trajectory(id=traj_id, instruction=instruction, camera_id=camera, steps=steps)


# --- synthetic projective scenes -------------------------------------------

def make_camera(rng, f_range=(1700.0, 1900.0), center=1024.0, cam_z=(0.55, 0.70)):
    """A high-resolution camera looking at the workspace from above."""
    f = rng.uniform(*f_range)
    K = np.array([[f, 0.0, center], [0.0, f, center], [0.0, 0.0, 1.0]])
    ang = rng.uniform(-0.35, 0.35, 3)
    cx, cy, cz = np.cos(ang)
    sx, sy, sz = np.sin(ang)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    t = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(*cam_z)])
    return K @ np.c_[Rz @ Ry @ Rx, t]


def project_oracle(P, p):
    """Independent homogeneous-multiply projection, written long-hand."""
    x, y, z = p
    hx = P[0][0] * x + P[0][1] * y + P[0][2] * z + P[0][3]
    hy = P[1][0] * x + P[1][1] * y + P[1][2] * z + P[1][3]
    hw = P[2][0] * x + P[2][1] * y + P[2][2] * z + P[2][3]
    return hx / hw, hy / hw


def scene_points(rng, P, n=50, center=1024.0, box=0.40):
    """Octant-stratified in-frame 3D points with strong depth variation."""
    lo = np.array([-box, -box, -box])
    hi = np.array([box, box, box])
    mid = (lo + hi) / 2
    pts = []
    oct_i = 0
    while len(pts) < n:
        bits = [(oct_i >> k) & 1 for k in range(3)]
        loq = np.where(bits, mid, lo)
        hiq = np.where(bits, hi, mid)
        p = rng.uniform(loq, hiq)
        h = P @ np.append(p, 1.0)
        if h[2] < 0.15:
            continue
        u, v = h[0] / h[2], h[1] / h[2]
        if 0 <= u <= 2 * center and 0 <= v <= 2 * center:
            pts.append(p)
            oct_i = (oct_i + 1) % 8
    return np.array(pts)


def noisy_correspondence_set(rng, n=50, sigma=0.5, outlier_frac=0.3, center=1024.0):
    """(P_true, points3, pixels, true_inlier_mask) for robust-fit tests."""
    P = make_camera(rng, center=center)
    pts3 = scene_points(rng, P, n=n, center=center)
    true2 = np.array([project_oracle(P, p) for p in pts3])
    pixels = true2 + rng.normal(0.0, sigma, true2.shape)
    n_out = int(round(outlier_frac * n))
    idx = rng.choice(n, n_out, replace=False)
    inlier_mask = np.ones(n, dtype=bool)
    inlier_mask[idx] = False
    for i in idx:
        while True:
            cand = rng.uniform(0.0, 2 * center, 2)
            if np.linalg.norm(cand - true2[i]) > 20.0:
                break
        pixels[i] = cand
    return P, pts3, pixels, inlier_mask


# --- random canonical chains ------------------------------------------------

_WORDS = (
    "the", "robot", "arm", "slowly", "reaches", "over", "bright", "target",
    "object", "grasp", "lift", "carry", "toward", "goal", "zone", "while",
    "watching", "clearance", "margin", "table", "edge", "pose", "steady",
)

_ALL_LABELS = tuple(lab for lab in vocabulary())


def _phrase(rng: random.Random, n_words: int) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(n_words))


def random_chain(rng: random.Random, layout: Layout) -> ReasoningChain:
    plan = [_phrase(rng, rng.randint(3, 8)) for _ in range(rng.randint(1, 6))]
    n_pts = rng.choice((1, 5))
    gripper = [(rng.randint(-50, 2000), rng.randint(-50, 2000)) for _ in range(n_pts)]
    objects = []
    for _ in range(rng.randint(0, 4)):
        label = _phrase(rng, rng.randint(1, 3))
        x1, y1 = rng.randint(0, 200), rng.randint(0, 200)
        objects.append((label, (x1, y1, x1 + rng.randint(1, 55), y1 + rng.randint(1, 55))))
    return ReasoningChain(
        task=_phrase(rng, rng.randint(4, 12)),
        plan=plan,
        subtask=rng.choice(plan),
        subtask_reason=_phrase(rng, rng.randint(8, 30)),
        move=rng.choice(_ALL_LABELS),
        move_reason=_phrase(rng, rng.randint(8, 30)),
        gripper=gripper,
        objects=objects,
        layout=layout,
    )


def leftward_dataset(tmp_path, n_left=18):
    """A dataset dominated by leftward motion, with full detections.

    A short varied approach phase precedes the leftward sweep so the 3D
    track is not collinear (a straight line cannot constrain a camera).
    """
    rng = np.random.default_rng(5)
    P = make_camera(rng, f_range=(190.0, 210.0), center=128.0, cam_z=(0.75, 0.9))
    states = []
    for t in range(7):  # spiral-ish approach: varied x, y, z
        ang = 0.9 * t
        states.append(
            make_state(
                x=0.12 * math.cos(ang),
                y=-0.22 + 0.018 * t,
                z=0.14 - 0.012 * t + 0.04 * math.sin(ang),
                gripper=1.0,
            )
        )
    x0, y0, z0 = states[-1].x, states[-1].y, states[-1].z
    for t in range(n_left):
        states.append(make_state(x=x0, y=y0 + 0.025 * (t + 1), z=z0, gripper=1.0))
    refs = []
    for t, st in enumerate(states):
        u, v = project_oracle(P, (st.x, st.y, st.z))
        refs.append(f"img://left/{t:03d}?gp={int(round(u))},{int(round(v))},0.80")
    traj = make_traj(states, traj_id="left-00", instruction="push the cup to the left",
                     image_refs=refs)
    path = tmp_path / "leftward.jsonl"
    from ecotkit.data import write_dataset

    write_dataset([traj], str(path))
    return str(path)
