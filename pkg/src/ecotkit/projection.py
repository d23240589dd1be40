"""Per-trajectory camera calibration from sparse gripper detections.

A 3x4 projection matrix (defined up to scale) is fitted with RANSAC over
2D-3D correspondences, using a Hartley-normalized direct linear transform
for both the minimal samples and the final inlier refit, plus a short
Gauss-Newton polish of the geometric reprojection error. Every step's 3D
end-effector position is then projected to pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Trajectory
from .errors import DegenerateDepth, MinimalSampleUnavailable, NoConsensus

MIN_SAMPLE = 6  # 11 DOF, 2 equations per correspondence
_DEPTH_EPS = 1e-9
_CONDITION_LIMIT = 1e8


@dataclass
class Correspondence:
    """A 3D end-effector position paired with a detected 2D pixel."""

    point3: tuple[float, float, float]
    point2: tuple[float, float]
    weight: float = 1.0

    def validate(self) -> None:
        for v in (*self.point3, *self.point2, self.weight):
            if not math.isfinite(v):
                raise ValueError("correspondence values must be finite")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"weight must be in [0, 1], got {self.weight!r}")


@dataclass
class RansacConfig:
    inlier_px: float = 5.0
    iterations: int = 1000
    confidence: float = 0.99
    min_inliers: int = 8
    seed: int = 0


@dataclass
class FitDiagnostics:
    """What the robust fit found, for reports and downstream filtering."""

    status: str  # "calibrated" | "uncalibrated"
    n_correspondences: int
    n_inliers: int = 0
    mean_inlier_error: float = float("nan")
    # quality of the winning minimal-sample hypothesis, both measured over
    # ITS consensus set, so refit-never-worse is directly observable
    hypothesis_mean_error: float = float("nan")
    refit_mean_on_consensus: float = float("nan")
    iterations_run: int = 0
    matrix: np.ndarray | None = None
    inlier_mask: np.ndarray | None = None


def canonicalize(P: np.ndarray) -> np.ndarray:
    """Scale a projection matrix to Frobenius norm 1 with a fixed sign.

    The sign is chosen so the last entry that is not (numerically) zero is
    positive, which makes the canonical form unique.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (3, 4):
        raise ValueError(f"projection matrix must be 3x4, got {P.shape}")
    norm = np.linalg.norm(P)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("projection matrix must be nonzero and finite")
    P = P / norm
    flat = P.ravel()
    nonzero = np.nonzero(np.abs(flat) > 1e-12)[0]
    if len(nonzero) and flat[nonzero[-1]] < 0:
        P = -P
    return P


def project(P: np.ndarray, point3) -> tuple[float, float]:
    """Project one 3D point to pixels through a 3x4 matrix."""
    h = np.asarray(P, dtype=float) @ np.array([point3[0], point3[1], point3[2], 1.0])
    if abs(h[2]) < _DEPTH_EPS:
        raise DegenerateDepth(f"homogeneous depth {h[2]!r} below {_DEPTH_EPS}")
    return (h[0] / h[2], h[1] / h[2])


def _project_batch(P: np.ndarray, pts3: np.ndarray) -> np.ndarray:
    """Vectorized projection; rows with ~zero depth come back as +inf."""
    h = np.c_[pts3, np.ones(len(pts3))] @ P.T
    out = np.full((len(pts3), 2), np.inf)
    ok = np.abs(h[:, 2]) >= _DEPTH_EPS
    out[ok] = h[ok, :2] / h[ok, 2:3]
    return out


def _normalizer_2d(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    scale = np.linalg.norm(pts - c, axis=1).mean()
    if scale < 1e-12:
        raise np.linalg.LinAlgError("degenerate 2D point set")
    s = math.sqrt(2.0) / scale
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _normalizer_3d(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    scale = np.linalg.norm(pts - c, axis=1).mean()
    if scale < 1e-12:
        raise np.linalg.LinAlgError("degenerate 3D point set")
    s = math.sqrt(3.0) / scale
    U = np.eye(4)
    U[:3, :3] *= s
    U[:3, 3] = -s * c
    return U


def fit_dlt(pts3: np.ndarray, pts2: np.ndarray, weights=None) -> np.ndarray:
    """Least-squares projection fit (direct linear transform).

    Coordinates are Hartley-normalized on both sides, which makes the fit
    invariant under uniform translation and scaling of the inputs.
    Raises numpy.linalg.LinAlgError on degenerate/ill-conditioned sets.
    """
    pts3 = np.asarray(pts3, dtype=float)
    pts2 = np.asarray(pts2, dtype=float)
    n = len(pts3)
    if n < MIN_SAMPLE:
        raise MinimalSampleUnavailable(f"need {MIN_SAMPLE} correspondences, got {n}")
    T = _normalizer_2d(pts2)
    U = _normalizer_3d(pts3)
    p2 = np.c_[pts2, np.ones(n)] @ T.T
    p3 = np.c_[pts3, np.ones(n)] @ U.T
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = p3
    A[0::2, 8:12] = -p2[:, [0]] * p3
    A[1::2, 4:8] = p3
    A[1::2, 8:12] = -p2[:, [1]] * p3
    if weights is not None:
        w = np.sqrt(np.asarray(weights, dtype=float))
        A[0::2] *= w[:, None]
        A[1::2] *= w[:, None]
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-2] < 1e-12 or sv[0] / max(sv[-2], 1e-300) > _CONDITION_LIMIT:
        raise np.linalg.LinAlgError("rank-deficient design matrix")
    _, _, Vt = np.linalg.svd(A)
    Pn = Vt[-1].reshape(3, 4)
    return canonicalize(np.linalg.inv(T) @ Pn @ U)


def refine_geometric(P: np.ndarray, pts3: np.ndarray, pts2: np.ndarray, iterations: int = 8) -> np.ndarray:
    """Gauss-Newton polish of the mean-squared reprojection error."""
    p = canonicalize(P).ravel().copy()
    n = len(pts3)
    Xh = np.c_[pts3, np.ones(n)]
    for _ in range(iterations):
        Pm = p.reshape(3, 4)
        h = Xh @ Pm.T
        depth = h[:, 2]
        if np.any(np.abs(depth) < _DEPTH_EPS):
            break
        u = h[:, 0] / depth
        v = h[:, 1] / depth
        r = np.empty(2 * n)
        r[0::2] = u - pts2[:, 0]
        r[1::2] = v - pts2[:, 1]
        J = np.zeros((2 * n, 12))
        J[0::2, 0:4] = Xh / depth[:, None]
        J[0::2, 8:12] = -(h[:, [0]] / depth[:, None] ** 2) * Xh
        J[1::2, 4:8] = Xh / depth[:, None]
        J[1::2, 8:12] = -(h[:, [1]] / depth[:, None] ** 2) * Xh
        try:
            dp, *_ = np.linalg.lstsq(J, -r, rcond=None)
        except np.linalg.LinAlgError:
            break
        p = p + dp
        norm = np.linalg.norm(p)
        if norm < 1e-12 or not np.isfinite(norm):
            return canonicalize(P)
        p /= norm
        if np.linalg.norm(dp) < 1e-14:
            break
    return canonicalize(p.reshape(3, 4))


def _errors(P: np.ndarray, pts3: np.ndarray, pts2: np.ndarray) -> np.ndarray:
    proj = _project_batch(P, pts3)
    return np.linalg.norm(proj - pts2, axis=1)


def fit_projection(corrs: list[Correspondence], cfg: RansacConfig | None = None):
    """RANSAC projection fit.

    Returns (canonical matrix, boolean inlier mask, FitDiagnostics). The
    consensus model is refit by weighted DLT plus a geometric polish on
    its inliers, and the mask re-derived from the refit model until it
    stabilizes; the refit is kept only if it does not raise the mean
    inlier reprojection error. Fully deterministic for a fixed seed.
    """
    cfg = cfg or RansacConfig()
    for c in corrs:
        c.validate()
    n = len(corrs)
    if n < MIN_SAMPLE:
        raise MinimalSampleUnavailable(f"need at least {MIN_SAMPLE} correspondences, got {n}")
    pts3 = np.array([c.point3 for c in corrs], dtype=float)
    pts2 = np.array([c.point2 for c in corrs], dtype=float)
    weights = np.array([c.weight for c in corrs], dtype=float)

    rng = np.random.default_rng(cfg.seed)
    best_count = -1
    best_mean = float("inf")
    best_mask = None
    best_P = None
    needed = cfg.iterations
    it = 0
    while it < min(cfg.iterations, needed):
        sample = rng.choice(n, MIN_SAMPLE, replace=False)
        it += 1
        try:
            P = fit_dlt(pts3[sample], pts2[sample])
        except np.linalg.LinAlgError:
            continue  # degenerate minimal sample: discard and redraw
        err = _errors(P, pts3, pts2)
        mask = err <= cfg.inlier_px
        count = int(mask.sum())
        if count == 0:
            continue
        mean = float(err[mask].mean())
        if count > best_count or (count == best_count and mean < best_mean):
            best_count, best_mean, best_mask, best_P = count, mean, mask, P
            w = count / n
            if w >= 1.0:
                needed = it
            elif w > 0:
                denom = math.log1p(-min(w**MIN_SAMPLE, 1 - 1e-12))
                needed = math.ceil(math.log(1.0 - cfg.confidence) / denom)

    if best_P is None or best_count < cfg.min_inliers:
        raise NoConsensus(
            f"best consensus {max(best_count, 0)} inliers of {n}, need {cfg.min_inliers}"
        )

    # refit on the consensus set, re-deriving the mask until it stabilizes
    P_final, mask_final, mean_final = best_P, best_mask, best_mean
    mask = best_mask
    for _ in range(10):
        try:
            P_refit = fit_dlt(pts3[mask], pts2[mask], weights[mask])
            P_refit = refine_geometric(P_refit, pts3[mask], pts2[mask])
        except (np.linalg.LinAlgError, MinimalSampleUnavailable):
            break
        err = _errors(P_refit, pts3, pts2)
        new_mask = err <= cfg.inlier_px
        if not new_mask.any():
            break
        # a refit must not be worse than the hypothesis on its own consensus set
        if float(err[best_mask].mean()) <= best_mean + 1e-12:
            P_final, mask_final = P_refit, new_mask
            mean_final = float(err[new_mask].mean())
        if (new_mask == mask).all():
            break
        mask = new_mask

    diagnostics = FitDiagnostics(
        status="calibrated",
        n_correspondences=n,
        n_inliers=int(mask_final.sum()),
        mean_inlier_error=mean_final,
        hypothesis_mean_error=best_mean,
        refit_mean_on_consensus=float(_errors(P_final, pts3, pts2)[best_mask].mean()),
        iterations_run=it,
        matrix=P_final,
        inlier_mask=mask_final,
    )
    return P_final, mask_final, diagnostics


def annotate_gripper_track(
    traj: Trajectory,
    detections: dict[int, tuple[float, float, float]],
    cfg: RansacConfig | None = None,
) -> FitDiagnostics:
    """Fill gripper_px for every step of a trajectory from sparse detections.

    `detections` maps step index -> (u, v, confidence). On too few
    detections or no RANSAC consensus the trajectory is left untouched and
    marked "uncalibrated" instead of aborting a dataset run.
    """
    corrs = []
    for step in traj.steps:
        det = detections.get(step.index)
        if det is None:
            continue
        u, v, conf = det
        corrs.append(Correspondence(step.state.position(), (u, v), conf))
    try:
        P, mask, diagnostics = fit_projection(corrs, cfg)
    except (MinimalSampleUnavailable, NoConsensus):
        return FitDiagnostics(status="uncalibrated", n_correspondences=len(corrs))
    for step in traj.steps:
        step.gripper_px = project(P, step.state.position())
    return diagnostics
