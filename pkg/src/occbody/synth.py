"""Synthetic keypoints-and-silhouette samples with inter-person occlusion.

A sample is built from two parameter records drawn from a pool. Each body
gets a fresh shape and a yaw perturbation of its global orientation, both
bodies are rendered through a shared perspective camera, and the second
silhouette occludes the first::

    S = S1 - S1 * S2

Person 1's keypoints are projected, marked invisible where they fall off the
image, under an occluder box, or where person 2 (or body-part removal) hides
them, and can be encoded as Gaussian heatmaps stacked under the silhouette.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .body_model import BodyModel, BodyParams, forward, regress_keypoints3d
from .errors import ConfigError, DimensionError
from .geometry import PerspectiveCamera, axis_angle_to_matrix, matrix_to_axis_angle, project_perspective
from .renderer import RasterSettings, project_to_pixels, rasterize, render_part_silhouettes

# Camera looking at the body front: world y up maps to image rows growing down.
CAMERA_ROTATION = np.diag([1.0, -1.0, -1.0])
VERTICAL_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class SynthConfig:
    """Generation settings. Lengths in meters, image quantities in pixels."""

    image_size: tuple = (256, 256)
    focal_length: float = 5000.0
    raster_sigma: float = 0.7
    crop_scale: float = 1.2
    # viewpoint augmentation
    view_augmentation: bool = True
    view_aug_scale: float = np.pi
    view_aug_mean: float = 0.0
    view_aug_std: float = 1.0
    view_aug_mode: str = "yaw"
    # shape resampling
    resample_shape: bool = True
    shape_mean: float = 0.0
    shape_std: float = 1.25
    # cameras
    translation_xy_range: tuple = ((-0.3, 0.3), (-0.3, 0.3))
    depth_range: tuple = (40.0, 50.0)
    camera_shift_range: tuple = ((-0.5, 0.5), (0.0, 0.0), (-0.3, 0.3))
    # occlusion
    occlusion_probability: float = 1.0
    overlap_range: tuple | None = None
    overlap_max_tries: int = 60
    box_probability: float = 0.0
    box_count: int = 1
    box_size_range: tuple = (0.1, 0.35)
    part_drop_probability: float = 0.0
    visibility_threshold: float = 0.5
    # keypoints
    heatmap_sigma: float = 4.0
    confidence_threshold: float = 0.4
    confidence_range: tuple = (1.0, 1.0)
    keypoint_noise: float = 0.0

    def __post_init__(self):
        for name in ("occlusion_probability", "box_probability", "part_drop_probability",
                     "visibility_threshold", "confidence_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        ranges = [*self.translation_xy_range, self.depth_range, *self.camera_shift_range,
                  self.box_size_range, self.confidence_range]
        if self.overlap_range is not None:
            ranges.append(self.overlap_range)
        for lo, hi in ranges:
            if lo > hi:
                raise ConfigError(f"range ({lo}, {hi}) is reversed")
        if self.depth_range[0] <= 0:
            raise ConfigError("depth_range must be positive")
        if self.view_aug_mode not in ("yaw", "full"):
            raise ConfigError(f"unknown view_aug_mode {self.view_aug_mode!r}")
        if not self.heatmap_sigma > 0:
            raise ConfigError("heatmap_sigma must be positive")
        if not 0.0 <= self.confidence_range[0] <= self.confidence_range[1] <= 1.0:
            raise ConfigError("confidence_range must lie in [0, 1]")

    @property
    def raster_settings(self):
        return RasterSettings(self.image_size, self.raster_sigma)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        return {k: _jsonable(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown SynthConfig fields {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            kw[k] = _tupleize(v) if isinstance(v, list) else v
        return cls(**kw)


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _tupleize(v):
    return tuple(_tupleize(x) if isinstance(x, list) else x for x in v)


@dataclass
class Keypoints2D:
    """``xy (K, 2)`` pixel positions, ``visibility (K,)`` in {0, 1}, ``confidence (K,)``."""

    xy: np.ndarray
    visibility: np.ndarray
    confidence: np.ndarray | None = None

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.visibility = np.asarray(self.visibility, dtype=np.int64).reshape(-1)
        if self.confidence is None:
            self.confidence = np.ones(len(self.xy))
        self.confidence = np.asarray(self.confidence, dtype=float).reshape(-1)
        if not (len(self.visibility) == len(self.confidence) == len(self.xy)):
            raise DimensionError("keypoint arrays disagree in length")
        if not np.isin(self.visibility, (0, 1)).all():
            raise ValueError("visibility must be 0 or 1")
        if (self.confidence < 0).any() or (self.confidence > 1).any():
            raise ValueError("confidence must lie in [0, 1]")

    def __len__(self):
        return len(self.xy)

    def to_dict(self):
        return {"xy": self.xy.tolist(), "visibility": self.visibility.tolist(),
                "confidence": self.confidence.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["xy"], dtype=float), np.array(d["visibility"]),
                   np.array(d["confidence"], dtype=float))


@dataclass
class SyntheticSample:
    silhouette: np.ndarray
    keypoints: Keypoints2D
    gt_params: BodyParams
    gt_camera: PerspectiveCamera
    gt_vertices: np.ndarray
    gt_joints3d: np.ndarray
    seed: int
    # 1 - (1 - S2) * (1 - boxes); zero when nothing occludes person 1
    occluder: np.ndarray | None = None
    boxes: list = field(default_factory=list)
    dropped_parts: list = field(default_factory=list)
    occluded: bool = False

    def heatmaps(self, sigma):
        return encode_heatmaps(self.keypoints, self.silhouette.shape, sigma)

    def input_tensor(self, sigma):
        """``(K + 1, H, W)``: silhouette followed by the keypoint heatmaps."""
        return stack_input(self.silhouette, self.heatmaps(sigma))


# ----------------------------------------------------------------------------
# augmentation


def augment_viewpoint(params: BodyParams, cfg: SynthConfig, rng):
    """Perturb the global orientation by ``scale * N(mean, std^2)`` radians.

    In ``yaw`` mode the draw rotates the body about the world vertical axis
    (composed on the left of the current orientation). In ``full`` mode three
    draws are added to the axis-angle vector directly.
    """
    out = params.copy()
    if cfg.view_aug_mode == "yaw":
        angle = cfg.view_aug_scale * float(rng.normal(cfg.view_aug_mean, cfg.view_aug_std))
        R = axis_angle_to_matrix(VERTICAL_AXIS * angle) @ axis_angle_to_matrix(params.pose[0])
        out.pose[0] = matrix_to_axis_angle(R)
    else:
        draws = np.asarray(rng.normal(cfg.view_aug_mean, cfg.view_aug_std, size=3), dtype=float)
        out.pose[0] = params.pose[0] + cfg.view_aug_scale * draws
    return out


def resample_shape(cfg: SynthConfig, rng, num_betas):
    """Independent ``N(shape_mean, shape_std^2)`` draws; std may be per component."""
    std = np.broadcast_to(np.asarray(cfg.shape_std, dtype=float), (num_betas,))
    mean = np.broadcast_to(np.asarray(cfg.shape_mean, dtype=float), (num_betas,))
    return np.asarray(rng.normal(mean, std, size=num_betas), dtype=float)


# ----------------------------------------------------------------------------
# silhouettes


def composite_silhouettes(s1, s2):
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if s1.shape != s2.shape:
        raise DimensionError(f"silhouettes differ in size: {s1.shape} vs {s2.shape}")
    return s1 - s1 * s2


def box_mask(shape, rect):
    """Boolean mask of pixels whose index lies in ``[x, x + w) x [y, y + h)``."""
    H, W = shape
    x, y, w, h = rect
    mask = np.zeros((H, W), dtype=bool)
    if w <= 0 or h <= 0:
        return mask
    c0 = max(0, int(np.ceil(x)))
    c1 = min(W, int(np.ceil(x + w)))
    r0 = max(0, int(np.ceil(y)))
    r1 = min(H, int(np.ceil(y + h)))
    if c0 < c1 and r0 < r1:
        mask[r0:r1, c0:c1] = True
    return mask


def add_box_occluder(s, rect):
    """Zero the pixels inside ``rect = (x, y, w, h)`` (clipped to the image)."""
    out = np.array(s, dtype=float)
    out[box_mask(out.shape, rect)] = 0.0
    return out


def drop_body_parts(parts, drop_mask):
    """Aggregate the kept part images as ``1 - prod(1 - p_i)``."""
    parts = [np.asarray(p, dtype=float) for p in parts]
    if not parts:
        raise ValueError("no part images given")
    if len(drop_mask) != len(parts):
        raise DimensionError("drop mask length does not match number of parts")
    if any(p.shape != parts[0].shape for p in parts):
        raise DimensionError("part images differ in size")
    keep = np.ones_like(parts[0])
    for p, drop in zip(parts, drop_mask):
        if not drop:
            keep *= 1.0 - p
    return 1.0 - keep


def _nearest_pixel(xy):
    return np.floor(np.asarray(xy, dtype=float) + 0.5).astype(np.int64)


def compute_visibility(kps_xy, composited, occluders, person_silhouette, threshold=0.5,
                       confidence=None):
    """Visibility flags for projected keypoints.

    A keypoint is invisible when its nearest pixel is off the image, inside an
    occluder rectangle, or where person 1 is present (``>= threshold``) but
    the composited silhouette is not.
    """
    composited = np.asarray(composited, dtype=float)
    person_silhouette = np.asarray(person_silhouette, dtype=float)
    if composited.shape != person_silhouette.shape:
        raise DimensionError("silhouettes differ in size")
    H, W = composited.shape
    kps_xy = np.asarray(kps_xy, dtype=float).reshape(-1, 2)
    px = _nearest_pixel(kps_xy)
    vis = np.ones(len(kps_xy), dtype=np.int64)
    for i, (c, r) in enumerate(px):
        if not (0 <= r < H and 0 <= c < W) or not np.all(np.isfinite(kps_xy[i])):
            vis[i] = 0
            continue
        if any(box_mask((H, W), rect)[r, c] for rect in occluders):
            vis[i] = 0
            continue
        if person_silhouette[r, c] >= threshold and composited[r, c] < threshold:
            vis[i] = 0
    return Keypoints2D(kps_xy, vis, confidence)


def encode_heatmaps(kps: Keypoints2D, size, sigma):
    """Gaussian heatmaps ``(K, H, W)`` centered on visible keypoints."""
    if not sigma > 0:
        raise ValueError("heatmap sigma must be positive")
    H, W = size
    rows = np.arange(H, dtype=float)[:, None]
    cols = np.arange(W, dtype=float)[None, :]
    out = np.zeros((len(kps), H, W))
    for i, ((x, y), vis) in enumerate(zip(kps.xy, kps.visibility)):
        if vis:
            gx = np.exp(-((cols - x) ** 2) / (2.0 * sigma**2))
            gy = np.exp(-((rows - y) ** 2) / (2.0 * sigma**2))
            out[i] = gy * gx
    return out


def stack_input(silhouette, heatmaps):
    silhouette = np.asarray(silhouette, dtype=float)
    if heatmaps.shape[1:] != silhouette.shape:
        raise DimensionError("heatmaps and silhouette differ in size")
    return np.concatenate([silhouette[None], heatmaps], axis=0)


def filter_by_confidence(kps: Keypoints2D, threshold):
    """Mark keypoints with ``confidence < threshold`` invisible."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    vis = np.where(kps.confidence < threshold, 0, kps.visibility)
    return Keypoints2D(kps.xy.copy(), vis, kps.confidence.copy())


# ----------------------------------------------------------------------------
# cameras


def crop_intrinsics(K, bbox, image_size, scale=1.2):
    """Intrinsics of a square crop around ``bbox = (xmin, ymin, xmax, ymax)``.

    The crop side is ``scale * max(width, height)`` centered on the box, and
    is resampled to ``image_size``.
    """
    H, W = image_size
    xmin, ymin, xmax, ymax = bbox
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    side = scale * max(xmax - xmin, ymax - ymin)
    if not side > 0:
        raise ValueError("degenerate bounding box")
    sx, sy = W / side, H / side
    # pixel centers sit at integer coordinates in both frames, so the crop's
    # left edge maps to -0.5
    A = np.array([
        [sx, 0.0, -(cx - side / 2.0) * sx - 0.5],
        [0.0, sy, -(cy - side / 2.0) * sy - 0.5],
        [0.0, 0.0, 1.0],
    ])
    return A @ np.asarray(K, dtype=float)


def _uniform(rng, lo_hi):
    lo, hi = lo_hi
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


# ----------------------------------------------------------------------------
# full pipeline


def generate_sample(model: BodyModel, pool, cfg: SynthConfig, seed):
    """Build one :class:`SyntheticSample`; a pure function of its inputs."""
    if len(pool) == 0:
        raise ValueError("parameter pool is empty")
    seed = int(seed)
    rng = np.random.default_rng(seed)
    settings = cfg.raster_settings
    H, W = cfg.image_size

    i1, i2 = (int(i) for i in rng.integers(0, len(pool), size=2))
    people = [pool[i1].copy(), pool[i2].copy()]
    for k, p in enumerate(people):
        if cfg.resample_shape:
            p.shape = resample_shape(cfg, rng, model.num_betas)
        if cfg.view_augmentation:
            people[k] = augment_viewpoint(p, cfg, rng)
    p1, p2 = people

    t1 = np.array([_uniform(rng, cfg.translation_xy_range[0]),
                   _uniform(rng, cfg.translation_xy_range[1]),
                   _uniform(rng, cfg.depth_range)])
    mesh1, _ = forward(model, p1)
    kp3d = regress_keypoints3d(model, mesh1)

    K0 = np.diag([cfg.focal_length, cfg.focal_length, 1.0])
    full = project_perspective(PerspectiveCamera(K0, CAMERA_ROTATION, t1), mesh1.vertices)
    bbox = (*full.min(axis=0), *full.max(axis=0))
    K = crop_intrinsics(K0, bbox, cfg.image_size, cfg.crop_scale)
    cam1 = PerspectiveCamera(K, CAMERA_ROTATION, t1)

    pts1 = project_to_pixels(mesh1.vertices, cam1, settings)
    s1 = rasterize(pts1, model.faces, settings)

    person = s1
    dropped = []
    if cfg.part_drop_probability > 0:
        labels = model.part_labels()
        part_ids = list(range(model.num_joints))
        drop = rng.random(len(part_ids)) < cfg.part_drop_probability
        parts = render_part_silhouettes(mesh1, labels, cam1, settings, part_ids)
        person = drop_body_parts(parts, drop)
        dropped = [int(p) for p, d in zip(part_ids, drop) if d]

    occluded = bool(rng.random() < cfg.occlusion_probability)
    s2 = np.zeros((H, W))
    if occluded:
        mesh2, _ = forward(model, p2)
        s2 = _place_second_person(mesh2, model.faces, K, t1, s1, cfg, rng)

    boxes = []
    if cfg.box_probability > 0 and rng.random() < cfg.box_probability:
        for _ in range(cfg.box_count):
            bw = _uniform(rng, cfg.box_size_range) * W
            bh = _uniform(rng, cfg.box_size_range) * H
            bx = _uniform(rng, (-0.5 * bw, W - 0.5 * bw))
            by = _uniform(rng, (-0.5 * bh, H - 0.5 * bh))
            boxes.append((bx, by, bw, bh))

    silhouette = composite_silhouettes(person, s2)
    box_img = np.zeros((H, W))
    for rect in boxes:
        silhouette = add_box_occluder(silhouette, rect)
        box_img[box_mask((H, W), rect)] = 1.0
    occluder = 1.0 - (1.0 - s2) * (1.0 - box_img)

    kp2d = project_perspective(cam1, kp3d)
    conf = None
    lo, hi = cfg.confidence_range
    if lo < hi:
        conf = rng.uniform(lo, hi, size=len(kp2d))
    if cfg.keypoint_noise > 0:
        c = np.ones(len(kp2d)) if conf is None else conf
        kp2d = kp2d + rng.normal(0.0, 1.0, size=kp2d.shape) * (cfg.keypoint_noise * (1.0 - c))[:, None]
    kps = compute_visibility(kp2d, silhouette, boxes, s1, cfg.visibility_threshold, conf)

    return SyntheticSample(
        silhouette=silhouette,
        keypoints=kps,
        gt_params=p1,
        gt_camera=cam1,
        gt_vertices=mesh1.vertices,
        gt_joints3d=kp3d,
        seed=seed,
        occluder=occluder if (occluded or boxes) else None,
        boxes=[tuple(float(v) for v in b) for b in boxes],
        dropped_parts=dropped,
        occluded=occluded,
    )


def occluded_fraction(s1, composited):
    a1 = float(np.sum(s1))
    return 0.0 if a1 == 0 else 1.0 - float(np.sum(composited)) / a1


def _place_second_person(mesh2, faces, K, t1, s1, cfg, rng):
    settings = cfg.raster_settings
    tries = cfg.overlap_max_tries if cfg.overlap_range is not None else 1
    best, best_gap = None, np.inf
    for _ in range(tries):
        shift = np.array([_uniform(rng, r) for r in cfg.camera_shift_range])
        cam2 = PerspectiveCamera(K, CAMERA_ROTATION, t1 + shift)
        s2 = rasterize(project_to_pixels(mesh2.vertices, cam2, settings), faces, settings)
        if cfg.overlap_range is None:
            return s2
        lo, hi = cfg.overlap_range
        frac = occluded_fraction(s1, composite_silhouettes(s1, s2))
        gap = max(lo - frac, frac - hi, 0.0)
        if gap < best_gap:
            best, best_gap = s2, gap
        if gap == 0.0:
            break
    return best
