"""Rotation representations and camera models.

Conventions
-----------
* Rotation matrices act on column vectors: ``x' = R @ x``.
* The 6D representation stores the first two columns of ``R``,
  ``(R[:, 0], R[:, 1])`` concatenated.
* Pixel coordinates are ``(col, row)`` with the origin at the center of the
  top-left pixel, rows growing downward.
* Weak-perspective output lives in normalized units in which the image spans
  ``[-1, 1]`` on both axes with ``y`` pointing up (see :func:`weak_to_pixels`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ProjectionError

_SO3_TOL = 1e-6


def skew(v):
    """Cross-product matrix ``[v]_x`` for a 3-vector (or ``...x3`` batch)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def axis_angle_to_matrix(aa):
    """Rodrigues' formula. Accepts a 3-vector or an ``(..., 3)`` batch."""
    aa = np.asarray(aa, dtype=float)
    theta = np.linalg.norm(aa, axis=-1)[..., None, None]
    K = skew(aa)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    # Taylor branches keep the small-angle case exact to double precision.
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a * K + b * (K @ K)


def is_rotation(R, tol=_SO3_TOL):
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        return False
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    return bool(ortho <= tol and np.all(np.abs(np.linalg.det(R) - 1.0) <= tol))


def _check_rotation(R):
    if not is_rotation(R):
        raise DomainError("input is not a rotation matrix (R^T R != I or det != 1)")


def _canonical_sign(axis):
    # Tie-break at exactly pi: first nonzero component positive.
    for c in axis:
        if abs(c) > 1e-12:
            return axis if c > 0 else -axis
    return axis


def matrix_to_axis_angle(R):
    """Logarithm map on the principal branch ``|aa| <= pi``.

    Raises :class:`DomainError` when ``R`` is not in SO(3) within 1e-6.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim > 2:
        return np.stack([matrix_to_axis_angle(r) for r in R.reshape(-1, 3, 3)]).reshape(
            R.shape[:-2] + (3,)
        )
    _check_rotation(R)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-6:
        # sin(theta) ~ theta; w = sin(theta) * axis
        return w * (1.0 + theta**2 / 6.0)
    if theta < np.pi - 1e-3:
        return w * (theta / np.sin(theta))
    # Near pi the skew part vanishes; read the axis off the symmetric part.
    B = 0.5 * (R + R.T) - cos_t * np.eye(3)
    col = int(np.argmax(np.diag(B)))
    axis = B[:, col] / np.sqrt(max(B[col, col] * (1.0 - cos_t), 1e-300))
    axis /= np.linalg.norm(axis)
    s = float(axis @ w)
    if abs(s) > 1e-12:
        axis = axis if s > 0 else -axis
        # arccos is ill-conditioned near pi; w carries sin(theta)
        theta = np.arctan2(abs(s), cos_t)
    else:
        axis = _canonical_sign(axis)
    return axis * theta


def rot6d_encode(R):
    """First two columns of ``R`` (``(..., 3, 3)`` -> ``(..., 6)``)."""
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise DomainError("rot6d_encode expects rotation matrices")
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def _normalize(v, what):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-12):
        raise DomainError(f"degenerate 6D rotation: {what} has zero length")
    return v / n, n


def rot6d_decode(r):
    """Gram-Schmidt decode of ``(..., 6)`` into ``(..., 3, 3)`` rotations."""
    r = np.asarray(r, dtype=float)
    a1, a2 = r[..., :3], r[..., 3:]
    b1, _ = _normalize(a1, "first column")
    u2 = a2 - np.sum(b1 * a2, axis=-1, keepdims=True) * b1
    b2, _ = _normalize(u2, "second column residual")
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def rot6d_decode_vjp(r, dR):
    """Vector-Jacobian product of :func:`rot6d_decode`.

    Given the upstream gradient ``dR`` (same shape as the decoded matrices),
    returns ``d(<dR, decode(r)>)/dr``.
    """
    r = np.asarray(r, dtype=float)
    dR = np.asarray(dR, dtype=float)
    a1, a2 = r[..., :3], r[..., 3:]
    b1, n1 = _normalize(a1, "first column")
    dot12 = np.sum(b1 * a2, axis=-1, keepdims=True)
    u2 = a2 - dot12 * b1
    b2, n2 = _normalize(u2, "second column residual")

    g1, g2, g3 = dR[..., :, 0], dR[..., :, 1], dR[..., :, 2]
    db1 = g1 + np.cross(b2, g3)
    db2 = g2 + np.cross(g3, b1)

    du2 = (db2 - b2 * np.sum(b2 * db2, axis=-1, keepdims=True)) / n2
    du2_b1 = np.sum(du2 * b1, axis=-1, keepdims=True)
    da2 = du2 - du2_b1 * b1
    db1 = db1 - dot12 * du2 - du2_b1 * a2
    da1 = (db1 - b1 * np.sum(b1 * db1, axis=-1, keepdims=True)) / n1
    return np.concatenate([da1, da2], axis=-1)


def rotation_about_axis(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return axis_angle_to_matrix(axis / np.linalg.norm(axis) * angle)


@dataclass(frozen=True)
class PerspectiveCamera:
    """Pinhole camera ``p = K (R x + t)``.

    ``K`` in pixels, ``t`` in meters.
    """

    K: np.ndarray
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "K", np.asarray(self.K, dtype=float).reshape(3, 3))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3))
        if not is_rotation(self.R, 1e-9):
            raise DomainError("camera R must be in SO(3)")

    def to_dict(self):
        return {"K": self.K.tolist(), "R": self.R.tolist(), "t": self.t.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["K"]), np.array(d["R"]), np.array(d["t"]))


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    """Scaled orthographic camera ``xy -> s * xy + t`` in normalized units."""

    s: float = 1.0
    t: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(2))
        if not self.s > 0:
            raise DomainError("weak-perspective scale must be positive")

    def to_dict(self):
        return {"s": self.s, "t": self.t.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["s"], np.array(d["t"]))


def camera_space(cam: PerspectiveCamera, points3d):
    return np.asarray(points3d, dtype=float) @ cam.R.T + cam.t


def project_perspective(cam: PerspectiveCamera, points3d):
    """Project ``M x 3`` world points to ``M x 2`` pixel coordinates."""
    p = camera_space(cam, points3d) @ cam.K.T
    bad = np.flatnonzero(~(p[:, 2] > 0))
    if bad.size:
        i = int(bad[0])
        raise ProjectionError(f"point {i} has non-positive depth {p[i, 2]:.6g}", index=i)
    return p[:, :2] / p[:, 2:3]


def project_perspective_vjp(cam: PerspectiveCamera, points3d, d2d):
    """Pull back a gradient on projected pixels to the 3D points."""
    p = camera_space(cam, points3d) @ cam.K.T
    z = p[:, 2:3]
    uv = p[:, :2] / z
    # d(uv)/dp = [I/z, -uv/z]
    dp = np.concatenate([d2d / z, -np.sum(d2d * uv, axis=1, keepdims=True) / z], axis=1)
    return dp @ cam.K @ cam.R


def project_weak(cam: WeakPerspectiveCamera, points3d):
    """``s * (x, y) + t``; depth is ignored."""
    pts = np.asarray(points3d, dtype=float)
    return cam.s * pts[:, :2] + cam.t


def weak_to_pixels(xy, size):
    """Normalized weak-perspective units to pixel ``(col, row)``.

    ``x = -1`` is the left image edge and ``x = 1`` the right; ``y = 1`` is
    the top edge and ``y = -1`` the bottom. ``size`` is ``(H, W)``.
    """
    H, W = size
    xy = np.asarray(xy, dtype=float)
    col = (xy[..., 0] + 1.0) * (W / 2.0) - 0.5
    row = (1.0 - xy[..., 1]) * (H / 2.0) - 0.5
    return np.stack([col, row], axis=-1)


def pixels_to_weak(px, size):
    H, W = size
    px = np.asarray(px, dtype=float)
    x = (px[..., 0] + 0.5) * (2.0 / W) - 1.0
    y = 1.0 - (px[..., 1] + 0.5) * (2.0 / H)
    return np.stack([x, y], axis=-1)


def weak_from_perspective(cam: PerspectiveCamera, points3d, size):
    """Least-squares weak camera reproducing a perspective projection.

    Fits ``s`` and ``t`` so that ``s * xy + t`` best matches, in normalized
    units, where ``cam`` sends ``points3d`` on an image of ``size``.
    """
    pts = np.asarray(points3d, dtype=float)
    q = pixels_to_weak(project_perspective(cam, pts), size)
    p = pts[:, :2]
    pc, qc = p - p.mean(axis=0), q - q.mean(axis=0)
    s = float(np.sum(pc * qc) / max(np.sum(pc * pc), 1e-300))
    return WeakPerspectiveCamera(s, q.mean(axis=0) - s * p.mean(axis=0))


def weak_to_pixels_jacobian(size):
    """Diagonal of the (constant) Jacobian of :func:`weak_to_pixels`."""
    H, W = size
    return np.array([W / 2.0, -H / 2.0])
