"""Loss terms and their homoscedastic-uncertainty combination.

Reductions: the silhouette term is a per-pixel mean and the 2D keypoint term a
mean over all ``K`` keypoints (invisible ones contribute zero). The vertex,
3D joint, pose and shape terms are plain sums of squares.

Every term accepts ``grad=True`` and then returns ``(value, d value / d pred)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .geometry import axis_angle_to_matrix

TERMS = ("S", "v", "j3d", "theta", "beta", "j2d")


def _same_shape(a, b, what):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shapes {a.shape} and {b.shape} differ")
    return a, b


def silhouette_loss(pred, target, grad=False):
    """``||pred - target||^2 / (H W)``."""
    pred, target = _same_shape(pred, target, "silhouette")
    diff = pred - target
    value = float(np.mean(diff**2))
    if grad:
        return value, 2.0 * diff / diff.size
    return value


def _sum_sq(pred, gt, what, grad):
    pred, gt = _same_shape(pred, gt, what)
    diff = pred - gt
    value = float(np.sum(diff**2))
    if grad:
        return value, 2.0 * diff
    return value


def vertex_loss(pred, gt, grad=False):
    return _sum_sq(pred, gt, "vertices", grad)


def joint3d_loss(pred, gt, grad=False):
    return _sum_sq(pred, gt, "joints3d", grad)


def shape_loss(pred, gt, grad=False):
    return _sum_sq(pred, gt, "shape", grad)


def _as_rotmats(pose):
    pose = np.asarray(pose, dtype=float)
    if pose.ndim == 3 and pose.shape[-2:] == (3, 3):
        return pose
    return axis_angle_to_matrix(pose.reshape(-1, 3))


def pose_loss(pred, gt, grad=False, representation="matrix"):
    """Squared pose distance summed over joints.

    With ``representation="matrix"`` (default) both poses are compared as
    rotation matrices (squared Frobenius norm), accepting either ``(J, 3)``
    axis-angle or ``(J, 3, 3)`` matrices; the gradient is taken with respect
    to the prediction in the form it was given when that form is matrices.
    ``representation="axis-angle"`` compares raw ``(J, 3)`` vectors.
    """
    if representation == "axis-angle":
        return _sum_sq(np.asarray(pred).reshape(-1, 3), np.asarray(gt).reshape(-1, 3),
                       "pose", grad)
    if representation != "matrix":
        raise ValueError(f"unknown pose representation {representation!r}")
    pred_m, gt_m = _as_rotmats(pred), _as_rotmats(gt)
    if grad and np.asarray(pred).ndim != 3:
        raise ValueError("pose gradient is defined for rotation-matrix predictions")
    return _sum_sq(pred_m, gt_m, "pose", grad)


def joint2d_loss(pred, gt, visibility, grad=False):
    """``(1/K) sum_i w_i ||pred_i - gt_i||^2`` with ``w`` the 0/1 visibility."""
    pred, gt = _same_shape(pred, gt, "keypoints2d")
    w = np.asarray(visibility, dtype=float).reshape(-1)
    if w.shape[0] != pred.shape[0]:
        raise DimensionError("visibility length does not match keypoint count")
    K = pred.shape[0]
    diff = pred - gt
    # mask before squaring so non-finite junk at invisible keypoints cannot leak in
    masked = np.where(w[:, None] > 0, diff, 0.0)
    value = float(np.sum(w[:, None] * masked**2) / K)
    if grad:
        return value, 2.0 * w[:, None] * masked / K
    return value


@dataclass(frozen=True)
class LossWeights:
    """Per-term uncertainties ``sigma_k``; a term is weighted by ``1 / sigma_k**2``."""

    v: float = 1.0
    j3d: float = 1.0
    theta: float = 0.1
    beta: float = 0.1
    j2d: float = 0.1
    S: float = 0.1
    mode: str = "fixed"

    def __post_init__(self):
        for k in TERMS:
            if not getattr(self, k) > 0:
                raise DomainError(f"sigma for term {k!r} must be positive")
        if self.mode not in ("fixed", "learnable"):
            raise ValueError(f"unknown weighting mode {self.mode!r}")

    def sigmas(self):
        return {k: float(getattr(self, k)) for k in TERMS}

    def log_variances(self):
        return {k: 2.0 * math.log(getattr(self, k)) for k in TERMS}


@dataclass
class LossReport:
    raw: dict
    contributions: dict
    log_term: float
    total: float
    # d total / d raw_k
    term_weights: dict = field(default_factory=dict)
    # d total / d log_variance_k (learnable mode only)
    log_variance_grads: dict = field(default_factory=dict)

    def to_dict(self):
        out = {f"L_{k}": float(v) for k, v in self.raw.items()}
        out.update({f"w_{k}": float(v) for k, v in self.contributions.items()})
        out["log_term"] = float(self.log_term)
        out["total"] = float(self.total)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def combined_loss(terms, weights: LossWeights = LossWeights(), log_variances=None):
    """Combine raw terms as ``sum_k L_k / sigma_k^2 + log(prod_k sigma_k)``.

    ``terms`` maps term names (see :data:`TERMS`) to raw values; missing
    terms count as zero. The log term always spans all six uncertainties.
    In ``learnable`` mode ``log_variances`` (``s_k = log sigma_k^2``)
    override the fixed sigmas and their gradients are reported.
    """
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise KeyError(f"unknown loss terms {sorted(unknown)}")
    raw = {k: float(terms.get(k, 0.0)) for k in TERMS}
    lv_grads = {}
    if weights.mode == "fixed":
        sig = weights.sigmas()
        inv = {k: 1.0 / sig[k] ** 2 for k in TERMS}
        log_term = math.log(math.prod(sig.values()))
    else:
        s = weights.log_variances()
        if log_variances is not None:
            s.update({k: float(v) for k, v in log_variances.items()})
        inv = {k: math.exp(-s[k]) for k in TERMS}
        log_term = 0.5 * math.fsum(s.values())
    contributions = {k: raw[k] * inv[k] for k in TERMS}
    total = math.fsum(contributions.values()) + log_term
    if weights.mode == "learnable":
        lv_grads = {k: 0.5 - contributions[k] for k in TERMS}
    return LossReport(raw, contributions, log_term, total, inv, lv_grads)
