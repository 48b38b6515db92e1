"""Absolute pose error after similarity alignment.

Estimated trajectories live in an arbitrary frame (and, for monocular
pipelines, an arbitrary scale), so the estimate is first aligned to ground
truth by the least-squares similarity transform (rotation + translation +
scale), then scored as the RMSE of the translational residuals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrajectoryError:
    ape_rmse: float
    errors: np.ndarray  # per-pose translational residual norms


def umeyama_alignment(src: np.ndarray, dst: np.ndarray, with_scale: bool = True):
    """Least-squares similarity transform mapping src points onto dst.

    Returns (scale, rotation, translation) minimizing
    sum ||dst_i - (s R src_i + t)||^2.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2:
        raise ValueError("point sets must share shape (n, d)")
    n, d = src.shape
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    cov = xd.T @ xs / n
    u, svals, vt = np.linalg.svd(cov)
    s_mat = np.eye(d)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s_mat[-1, -1] = -1.0
    rot = u @ s_mat @ vt
    if with_scale:
        var_s = (xs**2).sum() / n
        scale = float(np.trace(np.diag(svals) @ s_mat) / var_s) if var_s > 0 else 1.0
    else:
        scale = 1.0
    trans = mu_d - scale * rot @ mu_s
    return scale, rot, trans


def compute_ape(gt_poses: np.ndarray, est_poses: np.ndarray) -> TrajectoryError:
    """RMSE of translational residuals after aligning est to gt.

    Inputs are time-aligned (n, 3) position arrays with n >= 3.
    """
    gt = np.asarray(gt_poses, dtype=np.float64)
    est = np.asarray(est_poses, dtype=np.float64)
    if gt.ndim != 2 or gt.shape[1] != 3 or est.ndim != 2 or est.shape[1] != 3:
        raise ValueError("pose lists must have shape (n, 3)")
    if len(gt) != len(est):
        raise ValueError(f"pose count mismatch: {len(gt)} vs {len(est)}")
    if len(gt) < 3:
        raise ValueError("need at least 3 poses for alignment")
    scale, rot, trans = umeyama_alignment(est, gt)
    aligned = (scale * (rot @ est.T)).T + trans
    errors = np.linalg.norm(gt - aligned, axis=1)
    return TrajectoryError(ape_rmse=float(np.sqrt(np.mean(errors**2))), errors=errors)
