"""Parametric skinned body: blendshapes, linear blend skinning, regressors.

The body is treated as data. A :class:`BodyModel` can come from an SMPL-style
``.npz`` file, from the package's own zip container (see ``FORMATS.md``), or
from :func:`make_test_body`, a procedural low-poly figure that lets everything
run without licensed assets.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, SchemaError, ValidationError
from .geometry import axis_angle_to_matrix

NATIVE_FORMAT = "occbody-model"
NATIVE_VERSION = 1

COCO_KEYPOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BodyModel:
    """Immutable body model arrays.

    Shapes: ``template_vertices (N, 3)``, ``faces (F, 3)``,
    ``shape_dirs (N, 3, B)``, ``pose_dirs (N, 3, P)`` or ``None`` with
    ``P = 9 (J - 1)``, ``skin_weights (N, J)``, ``joint_regressor (J, N)``,
    ``keypoint_regressor (K, N)``, ``parents (J,)`` with ``-1`` at the root.
    """

    template_vertices: np.ndarray
    faces: np.ndarray
    shape_dirs: np.ndarray
    skin_weights: np.ndarray
    joint_regressor: np.ndarray
    keypoint_regressor: np.ndarray
    parents: np.ndarray
    pose_dirs: np.ndarray | None = None
    joint_names: tuple = ()
    keypoint_names: tuple = ()

    def __post_init__(self):
        for name in ("template_vertices", "shape_dirs", "skin_weights",
                     "joint_regressor", "keypoint_regressor"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "faces", _frozen(self.faces, np.int64))
        object.__setattr__(self, "parents", _frozen(self.parents, np.int64))
        if self.pose_dirs is not None:
            object.__setattr__(self, "pose_dirs", _frozen(self.pose_dirs))
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "keypoint_names", tuple(self.keypoint_names))

    @property
    def num_vertices(self):
        return self.template_vertices.shape[0]

    @property
    def num_joints(self):
        return self.parents.shape[0]

    @property
    def num_betas(self):
        return self.shape_dirs.shape[2]

    @property
    def num_keypoints(self):
        return self.keypoint_regressor.shape[0]

    @property
    def has_pose_dirs(self):
        return self.pose_dirs is not None

    def part_labels(self):
        """Per-vertex part id: the joint with the largest skinning weight."""
        return np.argmax(self.skin_weights, axis=1)


@dataclass
class BodyParams:
    """Axis-angle pose ``(J, 3)`` (row 0 is the global orientation) and shape ``(B,)``."""

    pose: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float).reshape(-1, 3)
        self.shape = np.asarray(self.shape, dtype=float).reshape(-1)

    @classmethod
    def zeros(cls, model: BodyModel):
        return cls(np.zeros((model.num_joints, 3)), np.zeros(model.num_betas))

    def copy(self):
        return BodyParams(self.pose.copy(), self.shape.copy())

    def to_dict(self):
        return {"pose": self.pose.tolist(), "shape": self.shape.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["pose"], dtype=float), np.array(d["shape"], dtype=float))


@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise DimensionError("face index out of range for vertex count")


# ----------------------------------------------------------------------------
# validation


def validate_model(model: BodyModel, tol=1e-6):
    """Raise :class:`ValidationError` if any invariant fails."""
    N = model.template_vertices.shape[0]
    J = model.parents.shape[0]
    if model.template_vertices.shape != (N, 3):
        raise SchemaError("template_vertices must be (N, 3)")
    if model.faces.ndim != 2 or model.faces.shape[1] != 3:
        raise SchemaError("faces must be (F, 3)")
    if model.faces.size and (model.faces.min() < 0 or model.faces.max() >= N):
        raise ValidationError("faces reference vertices outside [0, N)")
    if model.shape_dirs.ndim != 3 or model.shape_dirs.shape[:2] != (N, 3):
        raise SchemaError("shape_dirs must be (N, 3, B)")
    if model.skin_weights.shape != (N, J):
        raise SchemaError(f"skin_weights must be (N, J) = ({N}, {J})")
    if model.joint_regressor.shape != (J, N):
        raise SchemaError(f"joint_regressor must be (J, N) = ({J}, {N})")
    if model.keypoint_regressor.ndim != 2 or model.keypoint_regressor.shape[1] != N:
        raise SchemaError("keypoint_regressor must be (K, N)")
    if model.pose_dirs is not None and model.pose_dirs.shape != (N, 3, 9 * (J - 1)):
        raise SchemaError(f"pose_dirs must be (N, 3, {9 * (J - 1)})")

    w = model.skin_weights
    if w.min() < -tol:
        raise ValidationError("skin_weights has negative entries")
    bad = np.flatnonzero(np.abs(w.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ValidationError(
            f"skin_weights row {bad[0]} sums to {w[bad[0]].sum():.6g}, expected 1")
    bad = np.flatnonzero(np.abs(model.joint_regressor.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ValidationError(f"joint_regressor row {bad[0]} does not sum to 1")
    _check_tree(model.parents)


def _check_tree(parents):
    roots = np.flatnonzero(parents < 0)
    if roots.size != 1:
        raise ValidationError(f"kinematic tree must have exactly one root, found {roots.size}")
    J = len(parents)
    for j in range(J):
        seen, k = 0, j
        while parents[k] >= 0:
            if parents[k] >= J:
                raise ValidationError(f"joint {k} has parent {parents[k]} out of range")
            k = parents[k]
            seen += 1
            if seen > J:
                raise ValidationError("kinematic tree contains a cycle")


def _topological_order(parents):
    depth = np.zeros(len(parents), dtype=int)
    for j in range(len(parents)):
        k = j
        while parents[k] >= 0:
            k = parents[k]
            depth[j] += 1
    return np.argsort(depth, kind="stable")


# ----------------------------------------------------------------------------
# forward model


def _check_params(model, rotmats, betas):
    J, B = model.num_joints, model.num_betas
    if rotmats.shape != (J, 3, 3):
        raise DimensionError(f"pose axis: expected {J} joints, got {rotmats.shape[0]}")
    if betas.shape != (B,):
        raise DimensionError(f"shape axis: expected {B} coefficients, got {betas.shape[0]}")


def lbs(model: BodyModel, rotmats, betas):
    """Skin the model given per-joint rotation matrices.

    Returns ``(vertices, joints, vjp)``; ``vjp(d_vertices, d_joints)`` gives
    ``(d_rotmats, d_betas)``. ``d_joints`` may be ``None``.
    """
    rotmats = np.asarray(rotmats, dtype=float)
    betas = np.asarray(betas, dtype=float).reshape(-1)
    _check_params(model, rotmats, betas)
    parents = model.parents
    order = _topological_order(parents)
    J = model.num_joints

    v_shaped = model.template_vertices + model.shape_dirs @ betas
    j_rest = model.joint_regressor @ v_shaped
    if model.pose_dirs is not None:
        feat = (rotmats[1:] - np.eye(3)).reshape(-1)
        v_posed = v_shaped + model.pose_dirs @ feat
    else:
        v_posed = v_shaped

    G_R = np.empty((J, 3, 3))
    G_t = np.empty((J, 3))
    # A_t = G_t - G_R j_rest, accumulated so that it is exactly zero at rest
    A_t = np.empty((J, 3))
    eye = np.eye(3)
    for j in order:
        p = parents[j]
        if p < 0:
            G_R[j] = rotmats[j]
            G_t[j] = j_rest[j]
            A_t[j] = (eye - rotmats[j]) @ j_rest[j]
        else:
            G_R[j] = G_R[p] @ rotmats[j]
            G_t[j] = G_R[p] @ (j_rest[j] - j_rest[p]) + G_t[p]
            A_t[j] = (G_R[p] - G_R[j]) @ j_rest[j] + A_t[p]

    W = model.skin_weights
    D = np.einsum("nj,jab->nab", W, G_R - eye)
    M = D + eye
    verts = v_posed + np.einsum("nab,nb->na", D, v_posed) + W @ A_t

    def vjp(d_verts, d_joints=None):
        d_verts = np.asarray(d_verts, dtype=float)
        dM = d_verts[:, :, None] * v_posed[:, None, :]
        dv_posed = np.einsum("nba,nb->na", M, d_verts)
        dA_R = np.einsum("nj,nab->jab", W, dM)
        dA_t = W.T @ d_verts
        dG_R = dA_R - dA_t[:, :, None] * j_rest[:, None, :]
        dG_t = dA_t.copy()
        if d_joints is not None:
            dG_t += d_joints
        dj_rest = -np.einsum("jba,jb->ja", G_R, dA_t)
        d_rot = np.zeros_like(rotmats)
        for j in order[::-1]:
            p = parents[j]
            if p < 0:
                d_rot[j] += dG_R[j]
                dj_rest[j] += dG_t[j]
                continue
            rel = j_rest[j] - j_rest[p]
            d_rot[j] += G_R[p].T @ dG_R[j]
            dG_R[p] += dG_R[j] @ rotmats[j].T + np.outer(dG_t[j], rel)
            drel = G_R[p].T @ dG_t[j]
            dG_t[p] += dG_t[j]
            dj_rest[j] += drel
            dj_rest[p] -= drel
        if model.pose_dirs is not None:
            dfeat = np.einsum("nap,na->p", model.pose_dirs, dv_posed)
            d_rot[1:] += dfeat.reshape(J - 1, 3, 3)
        dv_shaped = dv_posed + model.joint_regressor.T @ dj_rest
        d_betas = np.einsum("nab,na->b", model.shape_dirs, dv_shaped)
        return d_rot, d_betas

    return verts, G_t.copy(), vjp


def forward(model: BodyModel, params: BodyParams):
    """Evaluate the body function. Returns ``(Mesh, joints3d (J, 3))``."""
    pose = np.asarray(params.pose, dtype=float)
    if pose.shape != (model.num_joints, 3):
        raise DimensionError(
            f"pose axis: expected ({model.num_joints}, 3), got {pose.shape}")
    verts, joints, _ = lbs(model, axis_angle_to_matrix(pose), params.shape)
    return Mesh(verts, model.faces), joints


def regress_keypoints3d(model: BodyModel, mesh):
    """``keypoint_regressor @ vertices`` -> ``(K, 3)``."""
    v = mesh.vertices if isinstance(mesh, Mesh) else np.asarray(mesh, dtype=float)
    if v.shape[0] != model.num_vertices:
        raise DimensionError(
            f"vertex axis: expected {model.num_vertices}, got {v.shape[0]}")
    return model.keypoint_regressor @ v


# ----------------------------------------------------------------------------
# procedural test body

# name, parent, rest position of the joint, segment end point,
# (rx, rz) radii at each of the four rings
_SEGMENTS = (
    ("pelvis", -1, (0.0, 0.95, 0.0), (0.0, 1.10, 0.0),
     ((0.15, 0.10), (0.16, 0.11), (0.16, 0.11), (0.15, 0.10))),
    ("spine", 0, (0.0, 1.10, 0.0), (0.0, 1.28, 0.0),
     ((0.14, 0.09), (0.14, 0.10), (0.15, 0.10), (0.16, 0.10))),
    ("chest", 1, (0.0, 1.28, 0.0), (0.0, 1.48, 0.0),
     ((0.16, 0.10), (0.17, 0.11), (0.18, 0.10), (0.16, 0.08))),
    ("neck", 2, (0.0, 1.48, 0.0), (0.0, 1.76, 0.0),
     ((0.05, 0.05), (0.085, 0.10), (0.09, 0.10), (0.06, 0.06))),
    ("left_shoulder", 2, (0.19, 1.44, 0.0), (0.45, 1.44, 0.0),
     ((0.055, 0.055), (0.052, 0.05), (0.047, 0.045), (0.043, 0.042))),
    ("left_elbow", 4, (0.45, 1.44, 0.0), (0.70, 1.44, 0.0),
     ((0.043, 0.042), (0.042, 0.040), (0.036, 0.034), (0.032, 0.030))),
    ("left_wrist", 5, (0.70, 1.44, 0.0), (0.82, 1.44, 0.0),
     ((0.030, 0.018), (0.040, 0.016), (0.038, 0.015), (0.025, 0.012))),
    ("right_shoulder", 2, (-0.19, 1.44, 0.0), (-0.45, 1.44, 0.0),
     ((0.055, 0.055), (0.052, 0.05), (0.047, 0.045), (0.043, 0.042))),
    ("right_elbow", 7, (-0.45, 1.44, 0.0), (-0.70, 1.44, 0.0),
     ((0.043, 0.042), (0.042, 0.040), (0.036, 0.034), (0.032, 0.030))),
    ("right_wrist", 8, (-0.70, 1.44, 0.0), (-0.82, 1.44, 0.0),
     ((0.030, 0.018), (0.040, 0.016), (0.038, 0.015), (0.025, 0.012))),
    ("left_hip", 0, (0.09, 0.90, 0.0), (0.10, 0.50, 0.0),
     ((0.085, 0.085), (0.075, 0.075), (0.065, 0.065), (0.055, 0.055))),
    ("left_knee", 10, (0.10, 0.50, 0.0), (0.10, 0.08, 0.0),
     ((0.055, 0.055), (0.052, 0.055), (0.045, 0.045), (0.038, 0.038))),
    ("left_ankle", 11, (0.10, 0.08, 0.0), (0.11, 0.03, 0.17),
     ((0.038, 0.040), (0.045, 0.030), (0.045, 0.025), (0.035, 0.018))),
    ("right_hip", 0, (-0.09, 0.90, 0.0), (-0.10, 0.50, 0.0),
     ((0.085, 0.085), (0.075, 0.075), (0.065, 0.065), (0.055, 0.055))),
    ("right_knee", 13, (-0.10, 0.50, 0.0), (-0.10, 0.08, 0.0),
     ((0.055, 0.055), (0.052, 0.055), (0.045, 0.045), (0.038, 0.038))),
    ("right_ankle", 14, (-0.10, 0.08, 0.0), (-0.11, 0.03, 0.17),
     ((0.038, 0.040), (0.045, 0.030), (0.045, 0.025), (0.035, 0.018))),
)

_RING_SIDES = 8
_RINGS = 4
_ARMS = {4, 5, 6, 7, 8, 9}
_LEGS = {10, 11, 12, 13, 14, 15}
_TORSO = {0, 1, 2}
_HEAD = 3


def _ring_frame(axis):
    """Orthonormal ``(u, w)`` around ``axis``; ``w`` points to the body front when possible."""
    front = np.array([0.0, 0.0, 1.0])
    if abs(axis @ front) > 0.9:
        front = np.array([0.0, -1.0, 0.0])
    w = front - (front @ axis) * axis
    w /= np.linalg.norm(w)
    u = np.cross(axis, w)
    return u, w


def make_test_body():
    """Build the deterministic 512-vertex, 16-joint test figure.

    Each joint owns a tube of four eight-sided rings running from the joint to
    its segment end, capped at both ends. The first ring of a segment is
    centered on its joint, which makes the joint regressor an exact ring
    average. Ten shape directions cover stature, girth, limb lengths and
    widths; the keypoint regressor produces the 17 COCO keypoints.
    """
    J = len(_SEGMENTS)
    S, R = _RING_SIDES, _RINGS
    nv = J * R * S
    verts = np.zeros((nv, 3))
    centers = np.zeros((nv, 3))
    seg_of = np.zeros(nv, dtype=int)
    ring_of = np.zeros(nv, dtype=int)
    weights = np.zeros((nv, J))
    faces = []
    parents = np.array([s[1] for s in _SEGMENTS])
    phis = 2.0 * np.pi * np.arange(S) / S

    for j, (_, parent, start, end, radii) in enumerate(_SEGMENTS):
        a, b = np.array(start), np.array(end)
        axis = (b - a) / np.linalg.norm(b - a)
        u, w = _ring_frame(axis)
        base = j * R * S
        for r in range(R):
            c = a + (b - a) * (r / (R - 1))
            rx, rz = radii[r]
            for k in range(S):
                i = base + r * S + k
                verts[i] = c + rx * np.cos(phis[k]) * u + rz * np.sin(phis[k]) * w
                centers[i] = c
                seg_of[i] = j
                ring_of[i] = r
                if r == 0 and parent >= 0:
                    weights[i, j] = 0.5
                    weights[i, parent] = 0.5
                else:
                    weights[i, j] = 1.0
        for r in range(R - 1):
            for k in range(S):
                i0 = base + r * S + k
                i1 = base + r * S + (k + 1) % S
                i2 = i0 + S
                i3 = i1 + S
                faces.append((i0, i1, i3))
                faces.append((i0, i3, i2))
        for r, flip in ((0, True), (R - 1, False)):
            ring = base + r * S
            for k in range(1, S - 1):
                tri = (ring, ring + k + 1, ring + k) if flip else (ring, ring + k, ring + k + 1)
                faces.append(tri)

    def ring_ids(j, r):
        return np.arange(S) + j * R * S + r * S

    jreg = np.zeros((J, nv))
    for j in range(J):
        jreg[j, ring_ids(j, 0)] = 1.0 / S

    # COCO-17 keypoints. Head ring sides: k=0 left, k=2 front, k=4 right.
    kreg = np.zeros((len(COCO_KEYPOINTS), nv))
    head_lo, head_hi = ring_ids(_HEAD, 1), ring_ids(_HEAD, 2)
    kreg[0, head_lo[2]] = 1.0                                  # nose
    kreg[1, head_hi[1]] = 1.0                                  # left eye
    kreg[2, head_hi[3]] = 1.0                                  # right eye
    kreg[3, head_hi[0]] = 1.0                                  # left ear
    kreg[4, head_hi[4]] = 1.0                                  # right ear
    for row, seg in zip(range(5, 17), (4, 7, 5, 8, 6, 9, 10, 13, 11, 14, 12, 15)):
        kreg[row, ring_ids(seg, 0)] = 1.0 / S

    shape_dirs = _test_body_shape_dirs(verts, centers, seg_of, ring_of)
    return BodyModel(
        template_vertices=verts,
        faces=np.array(faces, dtype=np.int64),
        shape_dirs=shape_dirs,
        skin_weights=weights,
        joint_regressor=jreg,
        keypoint_regressor=kreg,
        parents=parents,
        pose_dirs=None,
        joint_names=tuple(s[0] for s in _SEGMENTS),
        keypoint_names=COCO_KEYPOINTS,
    )


def _test_body_shape_dirs(verts, centers, seg_of, ring_of):
    nv = len(verts)
    dirs = np.zeros((nv, 3, 10))
    radial = verts - centers
    is_arm = np.isin(seg_of, list(_ARMS))
    is_leg = np.isin(seg_of, list(_LEGS))
    is_torso = np.isin(seg_of, list(_TORSO))
    is_head = seg_of == _HEAD
    side = np.sign(verts[:, 0])
    upper = ~is_leg

    dirs[:, 1, 0] = 0.06 * verts[:, 1]                                  # stature
    dirs[:, :, 1] = 0.12 * radial                                       # overall girth
    leg_drop = np.where(is_leg, np.minimum(verts[:, 1] - 0.90, 0.0), 0.0)
    dirs[:, 1, 2] = 0.10 * leg_drop                                     # leg length
    dirs[:, 0, 3] = np.where(is_arm, 0.10 * (verts[:, 0] - 0.19 * side), 0.0)  # arm length
    dirs[:, 0, 4] = np.where(is_arm, 0.025 * side, 0.0)                 # shoulder width
    dirs[:, 0, 4] += np.where(seg_of == 2, 0.08 * radial[:, 0], 0.0)
    front = np.maximum(radial[:, 2], 0.0)
    dirs[:, 2, 5] = np.where(np.isin(seg_of, [0, 1]), 0.35 * front, 0.0)  # belly
    dirs[:, 0, 6] = np.where(is_leg, 0.02 * side, 0.0)                  # hip width
    dirs[:, 0, 6] += np.where(seg_of == 0, 0.12 * radial[:, 0], 0.0)
    head_c = np.array([0.0, 1.48, 0.0])
    dirs[:, :, 7] = np.where(is_head[:, None], 0.10 * (verts - head_c), 0.0)  # head size
    torso_rise = np.where(upper, np.maximum(verts[:, 1] - 0.95, 0.0), 0.0)
    dirs[:, 1, 8] = 0.06 * torso_rise                                   # torso length
    limb = is_arm | is_leg
    dirs[:, :, 9] = np.where(limb[:, None], 0.15 * radial, 0.0)         # limb thickness
    return dirs


# ----------------------------------------------------------------------------
# file IO

_NATIVE_FIELDS = {
    # name: (dtype, required)
    "template_vertices": ("<f4", True),
    "faces": ("<i4", True),
    "shape_dirs": ("<f4", True),
    "pose_dirs": ("<f4", False),
    "skin_weights": ("<f4", True),
    "joint_regressor": ("<f4", True),
    "keypoint_regressor": ("<f4", True),
    "parents": ("<i4", True),
}


def save_model(model: BodyModel, path):
    """Write ``model`` in the native zip container."""
    fields = {}
    blobs = {}
    for name, (dtype, _) in _NATIVE_FIELDS.items():
        arr = getattr(model, name)
        if arr is None:
            continue
        data = np.ascontiguousarray(arr, dtype=dtype)
        fields[name] = {"file": f"{name}.bin", "dtype": dtype, "shape": list(data.shape)}
        blobs[f"{name}.bin"] = data.tobytes(order="C")
    manifest = {
        "format": NATIVE_FORMAT,
        "version": NATIVE_VERSION,
        "endianness": "little",
        "dims": {
            "N": model.num_vertices, "J": model.num_joints, "B": model.num_betas,
            "K": model.num_keypoints,
            "P": 0 if model.pose_dirs is None else model.pose_dirs.shape[2],
        },
        "fields": fields,
        "joint_names": list(model.joint_names),
        "keypoint_names": list(model.keypoint_names),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        for fname in sorted(blobs):
            zf.writestr(fname, blobs[fname])
    return path


def _load_native(path):
    try:
        zf = zipfile.ZipFile(path)
    except zipfile.BadZipFile as exc:
        raise SchemaError(f"{path}: not a model container ({exc})") from None
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise SchemaError(f"{path}: missing manifest.json") from None
        if manifest.get("format") != NATIVE_FORMAT:
            raise SchemaError(f"{path}: unknown format {manifest.get('format')!r}")
        if manifest.get("endianness") != "little":
            raise SchemaError(f"{path}: endianness must be 'little'")
        dims = manifest.get("dims", {})
        for key in ("N", "J", "B", "K"):
            if key not in dims:
                raise SchemaError(f"{path}: manifest dims missing {key!r}")
        fields = manifest.get("fields", {})
        arrays = {}
        for name, (dtype, required) in _NATIVE_FIELDS.items():
            if name not in fields:
                if required:
                    raise SchemaError(f"{path}: missing field {name!r}")
                continue
            entry = fields[name]
            try:
                raw = zf.read(entry["file"])
            except KeyError:
                raise SchemaError(f"{path}: field {name!r} data file missing") from None
            shape = tuple(entry["shape"])
            arr = np.frombuffer(raw, dtype=entry.get("dtype", dtype))
            if arr.size != int(np.prod(shape)):
                raise SchemaError(
                    f"{path}: field {name!r} has {arr.size} values, shape {shape} needs "
                    f"{int(np.prod(shape))}")
            arrays[name] = arr.reshape(shape)
    N, J, B, K = (dims[k] for k in ("N", "J", "B", "K"))
    expected = {
        "template_vertices": (N, 3), "shape_dirs": (N, 3, B), "skin_weights": (N, J),
        "joint_regressor": (J, N), "keypoint_regressor": (K, N), "parents": (J,),
    }
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise SchemaError(
                f"{path}: field {name!r} has shape {arrays[name].shape}, expected {shape}")
    return BodyModel(
        template_vertices=arrays["template_vertices"],
        faces=arrays["faces"],
        shape_dirs=arrays["shape_dirs"],
        pose_dirs=arrays.get("pose_dirs"),
        skin_weights=arrays["skin_weights"],
        joint_regressor=arrays["joint_regressor"],
        keypoint_regressor=arrays["keypoint_regressor"],
        parents=arrays["parents"],
        joint_names=manifest.get("joint_names", ()),
        keypoint_names=manifest.get("keypoint_names", ()),
    )


def _load_smpl_npz(path):
    try:
        data = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise SchemaError(f"{path}: cannot read npz ({exc})") from None
    with data:
        for key in ("v_template", "f", "shapedirs", "weights", "J_regressor", "kintree_table"):
            if key not in data.files:
                raise SchemaError(f"{path}: missing field {key!r}")
        v = np.asarray(data["v_template"], dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise SchemaError(f"{path}: field 'v_template' must be (N, 3), got {v.shape}")
        N = v.shape[0]
        shapedirs = np.asarray(data["shapedirs"], dtype=float)
        if shapedirs.ndim != 3 or shapedirs.shape[:2] != (N, 3):
            raise SchemaError(f"{path}: field 'shapedirs' must be (N, 3, B), got {shapedirs.shape}")
        kintree = np.asarray(data["kintree_table"])
        if kintree.ndim != 2 or kintree.shape[0] != 2:
            raise SchemaError(f"{path}: field 'kintree_table' must be (2, J)")
        parents = kintree[0].astype(np.int64)
        # SMPL marks the root with a large sentinel (2**32 - 1)
        parents[(parents < 0) | (parents >= kintree.shape[1])] = -1
        jreg = np.asarray(data["J_regressor"], dtype=float)
        kreg = (np.asarray(data["keypoint_regressor"], dtype=float)
                if "keypoint_regressor" in data.files else jreg)
        posedirs = np.asarray(data["posedirs"], dtype=float) if "posedirs" in data.files else None
        return BodyModel(
            template_vertices=v,
            faces=np.asarray(data["f"], dtype=np.int64),
            shape_dirs=shapedirs,
            pose_dirs=posedirs,
            skin_weights=np.asarray(data["weights"], dtype=float),
            joint_regressor=jreg,
            keypoint_regressor=kreg,
            parents=parents,
        )


def load_model(path, format="native"):
    """Load a body model.

    ``format`` is ``"native"`` (zip container) or ``"smpl-npz"`` (SMPL-style
    keys: ``v_template``, ``f``, ``shapedirs``, ``posedirs``, ``weights``,
    ``J_regressor``, ``kintree_table``, optional ``keypoint_regressor``).
    Without a keypoint regressor the joint regressor is reused.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "native":
        model = _load_native(path)
    elif format in ("smpl-npz", "smpl"):
        model = _load_smpl_npz(path)
    else:
        raise ValueError(f"unknown model format {format!r}")
    # float32 storage rounds weights; reject only real violations.
    validate_model(model, tol=1e-4)
    return model
