"""Reconstruction metrics. Distances are in meters; the CSV export converts to mm."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .body_model import BodyModel, BodyParams, forward
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class SimilarityTransform:
    s: float
    R: np.ndarray
    t: np.ndarray

    def apply(self, points):
        return self.s * np.asarray(points, dtype=float) @ self.R.T + self.t


def _pair(a, b, what, min_rows=3):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3 or a.shape != b.shape:
        raise DimensionError(f"{what}: expected matching (M, 3) arrays, got {a.shape} and {b.shape}")
    if a.shape[0] < min_rows:
        raise DimensionError(f"{what}: need at least {min_rows} points")
    return a, b


def procrustes_align(source, target):
    """Similarity transform minimizing ``sum ||s R src_i + t - tgt_i||^2`` with ``det R = +1``."""
    src, tgt = _pair(source, target, "procrustes")
    mu_s, mu_t = src.mean(axis=0), tgt.mean(axis=0)
    X, Y = src - mu_s, tgt - mu_t
    var = float(np.sum(X**2))
    if var <= 1e-24 * max(1.0, float(np.sum(src**2))):
        raise DomainError("source points are coincident")
    U, S, Vt = np.linalg.svd(Y.T @ X)
    D = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        D[2] = -1.0
    R = U @ np.diag(D) @ Vt
    s = float(np.sum(S * D)) / var
    t = mu_t - s * R @ mu_s
    return SimilarityTransform(s, R, t)


def _aligned_error(pred, gt, what):
    pred, gt = _pair(pred, gt, what)
    T = procrustes_align(pred, gt)
    return float(np.mean(np.linalg.norm(T.apply(pred) - gt, axis=1)))


def mpjpe_pa(pred_joints, gt_joints):
    """Mean joint error after similarity alignment of ``pred`` onto ``gt``."""
    return _aligned_error(pred_joints, gt_joints, "joints")


def pve_pa(pred_vertices, gt_vertices):
    return _aligned_error(pred_vertices, gt_vertices, "vertices")


def pve_t_sc(model: BodyModel, pred_betas, gt_betas):
    """Neutral-pose vertex error after centering and a least-squares uniform scale."""
    pred_betas = np.asarray(pred_betas, dtype=float).reshape(-1)
    gt_betas = np.asarray(gt_betas, dtype=float).reshape(-1)
    if pred_betas.shape != (model.num_betas,) or gt_betas.shape != (model.num_betas,):
        raise DimensionError(f"shape axis: expected {model.num_betas} coefficients")
    zero = np.zeros((model.num_joints, 3))
    vp = forward(model, BodyParams(zero, pred_betas))[0].vertices
    vg = forward(model, BodyParams(zero, gt_betas))[0].vertices
    return scale_corrected_error(vp, vg)


def scale_corrected_error(pred_vertices, gt_vertices):
    vp, vg = _pair(pred_vertices, gt_vertices, "vertices", min_rows=1)
    vp = vp - vp.mean(axis=0)
    vg = vg - vg.mean(axis=0)
    denom = float(np.sum(vp**2))
    scale = float(np.sum(vp * vg)) / denom if denom > 0 else 1.0
    return float(np.mean(np.linalg.norm(scale * vp - vg, axis=1)))


def miou(a, b, threshold=0.5):
    """Intersection over union of the masks ``a >= threshold`` and ``b >= threshold``.

    Two empty masks score 1.0; exactly one empty mask scores 0.0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"silhouettes differ in size: {a.shape} vs {b.shape}")
    ma, mb = a >= threshold, b >= threshold
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(ma & mb)) / union


METRIC_UNITS = {"mpjpe_pa": "mm", "pve_pa": "mm", "pve_t_sc": "mm", "miou": "1"}


def metrics_to_csv(rows, path=None):
    """Write ``(sample_id, metric, value)`` rows as CSV.

    Length metrics arrive in meters and are written in millimeters with
    ``repr``-exact formatting. Returns the CSV text.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "metric", "value", "unit"])
    for sample_id, metric, value in rows:
        unit = METRIC_UNITS.get(metric, "1")
        v = float(value) * 1000.0 if unit == "mm" else float(value)
        w.writerow([sample_id, metric, repr(v), unit])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text


def read_metrics_csv(path):
    with open(path, newline="") as f:
        return [(r["sample_id"], r["metric"], float(r["value"]), r["unit"])
                for r in csv.DictReader(f)]
