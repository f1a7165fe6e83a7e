"""Direct optimization of body and camera parameters against 2D evidence.

The unknowns are a 6D rotation per joint, the shape coefficients and a
weak-perspective camera ``(s, t)``. Every iterate decodes the 6D vectors by
Gram-Schmidt, skins the body, projects keypoints and vertices with the weak
camera and evaluates the combined loss; gradients flow back by hand through
the rasterizer, the skinning and the 6D decode.

Keypoint residuals are measured in normalized image units (``[-1, 1]`` across
the image), so the 2D term does not depend on the render resolution.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .body_model import BodyModel, BodyParams, lbs
from .errors import ConfigError, DivergenceError, DomainError
from .geometry import (
    PerspectiveCamera,
    WeakPerspectiveCamera,
    axis_angle_to_matrix,
    matrix_to_axis_angle,
    pixels_to_weak,
    rot6d_decode,
    rot6d_decode_vjp,
    rot6d_encode,
    weak_from_perspective,
    weak_to_pixels,
    weak_to_pixels_jacobian,
)
from .losses import (
    TERMS,
    LossWeights,
    combined_loss,
    joint2d_loss,
    joint3d_loss,
    pose_loss,
    shape_loss,
    silhouette_loss,
    vertex_loss,
)
from .renderer import RasterSettings, rasterize, rasterize_vjp
from .synth import Keypoints2D, SyntheticSample, filter_by_confidence

GT_TERMS = ("v", "j3d", "theta", "beta")
MIN_SCALE = 1e-3


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 400
    lr: float = 1e-2
    camera_lr: float = 1e-2
    optimizer: str = "adam"
    init: str = "mean"
    init_params: BodyParams | None = None
    init_camera: WeakPerspectiveCamera | None = None
    terms: tuple = ("S", "j2d")
    tol: float = 1e-7
    # a data loss at or below this counts as an exact fit
    atol: float = 1e-20
    seed: int = 0
    weights: LossWeights = LossWeights()
    raster_sigma: float = 0.7
    use_occluder: bool = True
    confidence_threshold: float = 0.0
    # yaw restarts of the initial orientation, scored on the keypoint term
    orient_hypotheses: int = 4
    hypothesis_iters: int = 60
    # cosine decay of the Adam step size down to lr * lr_final_ratio
    lr_final_ratio: float = 1.0
    # Adam denominator floor; larger values damp steps along flat directions
    adam_eps: float = 1e-8
    # optional camera-and-orientation warm-up before the joint fit
    two_stage: bool = False
    stage1_iters: int = 100

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if not (self.lr > 0 and self.camera_lr > 0):
            raise ConfigError("learning rates must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not self.atol >= 0:
            raise ConfigError("atol must be non-negative")
        if self.optimizer not in ("adam", "backtracking"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("mean", "ground-truth", "custom"):
            raise ConfigError(f"unknown init strategy {self.init!r}")
        if self.init == "custom" and self.init_params is None:
            raise ConfigError("init='custom' needs init_params")
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        unknown = set(terms) - set(TERMS)
        if unknown:
            raise ConfigError(f"unknown loss terms {sorted(unknown)}")
        if not terms:
            raise ConfigError("at least one loss term must be enabled")
        if self.orient_hypotheses < 1:
            raise ConfigError("orient_hypotheses must be at least 1")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ConfigError("confidence_threshold must lie in [0, 1]")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["terms"] = list(self.terms)
        d["weights"] = {**self.weights.sigmas(), "mode": self.weights.mode}
        d["init_params"] = None if self.init_params is None else self.init_params.to_dict()
        d["init_camera"] = None if self.init_camera is None else self.init_camera.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown FitConfig fields {sorted(unknown)}")
        if isinstance(d.get("weights"), dict):
            d["weights"] = LossWeights(**d["weights"])
        if d.get("init_params") is not None:
            d["init_params"] = BodyParams.from_dict(d["init_params"])
        if d.get("init_camera") is not None:
            d["init_camera"] = WeakPerspectiveCamera.from_dict(d["init_camera"])
        if "terms" in d:
            d["terms"] = tuple(d["terms"])
        return cls(**d)


@dataclass
class FitTarget:
    """Evidence for one fit. Ground-truth fields are optional."""

    silhouette: np.ndarray
    keypoints: Keypoints2D
    occluder: np.ndarray | None = None
    gt_params: BodyParams | None = None
    gt_vertices: np.ndarray | None = None
    gt_joints3d: np.ndarray | None = None
    gt_camera: PerspectiveCamera | None = None

    @classmethod
    def from_sample(cls, sample: SyntheticSample):
        return cls(sample.silhouette, sample.keypoints, sample.occluder, sample.gt_params,
                   sample.gt_vertices, sample.gt_joints3d, sample.gt_camera)

    @property
    def image_size(self):
        return self.silhouette.shape


@dataclass
class FitResult:
    params: BodyParams
    camera: WeakPerspectiveCamera
    trajectory: list
    iterations: int
    converged: bool
    rot6d: np.ndarray = None
    log_variances: dict = field(default_factory=dict)

    @property
    def final_loss(self):
        return self.trajectory[-1].total if self.trajectory else math.nan

    def to_dict(self, full_trajectory=False):
        out = {
            "params": self.params.to_dict(),
            "camera": self.camera.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "initial_loss": self.trajectory[0].total if self.trajectory else None,
            "final_loss": self.trajectory[-1].to_dict() if self.trajectory else None,
        }
        if self.log_variances:
            out["log_variances"] = dict(self.log_variances)
        if full_trajectory:
            out["trajectory"] = [r.to_dict() for r in self.trajectory]
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(**kw), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(BodyParams.from_dict(d["params"]), WeakPerspectiveCamera.from_dict(d["camera"]),
                   [], int(d["iterations"]), bool(d["converged"]))


# ----------------------------------------------------------------------------
# state and objective


@dataclass
class _State:
    r6: np.ndarray
    betas: np.ndarray
    s: float
    t: np.ndarray
    logvar: dict = field(default_factory=dict)

    def copy(self):
        return _State(self.r6.copy(), self.betas.copy(), float(self.s), self.t.copy(),
                      dict(self.logvar))

    def to_vector(self):
        return np.concatenate([self.r6.ravel(), self.betas, [self.s], self.t])

    @classmethod
    def from_vector(cls, x, J, B, logvar=None):
        r6 = x[: 6 * J].reshape(J, 6)
        betas = x[6 * J: 6 * J + B]
        return cls(r6.copy(), betas.copy(), float(x[6 * J + B]), x[6 * J + B + 1:].copy(),
                   dict(logvar or {}))

    def params(self):
        R = rot6d_decode(self.r6)
        return BodyParams(matrix_to_axis_angle(R), self.betas.copy())

    def camera(self):
        return WeakPerspectiveCamera(max(self.s, MIN_SCALE), self.t.copy())


class _Problem:
    """Everything fixed during a fit: model, evidence, term set and weights."""

    def __init__(self, model: BodyModel, target: FitTarget, cfg: FitConfig, terms=None):
        self.model = model
        self.target = target
        self.cfg = cfg
        self.terms = tuple(terms if terms is not None else cfg.terms)
        self.size = target.image_size
        self.settings = RasterSettings(self.size, cfg.raster_sigma)
        kps = target.keypoints
        if cfg.confidence_threshold > 0:
            kps = filter_by_confidence(kps, cfg.confidence_threshold)
        self.kp_target = pixels_to_weak(kps.xy, self.size)
        self.kp_vis = kps.visibility.astype(float)
        self.visible_mask = np.where(self.kp_vis > 0, 1.0, 0.0)
        self.mask = None
        if cfg.use_occluder and target.occluder is not None:
            self.mask = 1.0 - np.asarray(target.occluder, dtype=float)
        if target.gt_params is not None:
            self.gt_rot = axis_angle_to_matrix(target.gt_params.pose)
            self.gt_betas = target.gt_params.shape

    def has_evidence(self):
        for k in self.terms:
            if k == "j2d" and not self.kp_vis.any():
                continue
            return True
        return False

    def evaluate(self, st: _State, want_grad=True):
        """Return ``(LossReport, gradient _State or None)``."""
        model, terms = self.model, self.terms
        R = rot6d_decode(st.r6)
        verts, _, vjp = lbs(model, R, st.betas)
        kp3d = model.keypoint_regressor @ verts
        raw = {}
        d_verts = np.zeros_like(verts)
        d_R = np.zeros_like(R)
        d_betas = np.zeros_like(st.betas)
        d_s = 0.0
        d_t = np.zeros(2)
        grads = {}

        if "j2d" in terms:
            pred = st.s * kp3d[:, :2] + st.t
            raw["j2d"], g = joint2d_loss(pred, self.kp_target, self.kp_vis, grad=True)
            grads["j2d"] = ("kp2d", g)
        if "S" in terms:
            jac = weak_to_pixels_jacobian(self.size)
            pts = weak_to_pixels(st.s * verts[:, :2] + st.t, self.size)
            image = rasterize(pts, model.faces, self.settings)
            pred_img = image if self.mask is None else image * self.mask
            raw["S"], g = silhouette_loss(pred_img, self.target.silhouette, grad=True)
            grads["S"] = ("image", (image, pts, jac, g))
        if "v" in terms:
            raw["v"], g = vertex_loss(verts, self.target.gt_vertices, grad=True)
            grads["v"] = ("verts", g)
        if "j3d" in terms:
            raw["j3d"], g = joint3d_loss(kp3d, self.target.gt_joints3d, grad=True)
            grads["j3d"] = ("kp3d", g)
        if "theta" in terms:
            raw["theta"], g = pose_loss(R, self.gt_rot, grad=True)
            grads["theta"] = ("rot", g)
        if "beta" in terms:
            raw["beta"], g = shape_loss(st.betas, self.gt_betas, grad=True)
            grads["beta"] = ("betas", g)

        report = combined_loss(raw, self.cfg.weights, st.logvar or None)
        if not want_grad:
            return report, None

        d_kp3d = np.zeros_like(kp3d)
        for k, (kind, g) in grads.items():
            w = report.term_weights[k]
            if kind == "kp2d":
                g = w * g
                d_kp3d[:, :2] += st.s * g
                d_s += float(np.sum(g * kp3d[:, :2]))
                d_t += g.sum(axis=0)
            elif kind == "image":
                image, pts, jac, g_img = g
                up = w * g_img
                if self.mask is not None:
                    up = up * self.mask
                d_pts = rasterize_vjp(pts, model.faces, self.settings, image, up)
                d_xy = d_pts * jac
                d_verts[:, :2] += st.s * d_xy
                d_s += float(np.sum(d_xy * verts[:, :2]))
                d_t += d_xy.sum(axis=0)
            elif kind == "verts":
                d_verts += w * g
            elif kind == "kp3d":
                d_kp3d += w * g
            elif kind == "rot":
                d_R += w * g
            else:
                d_betas += w * g
        d_verts += model.keypoint_regressor.T @ d_kp3d
        dR_lbs, db_lbs = vjp(d_verts)
        d_R += dR_lbs
        d_betas += db_lbs
        d_r6 = rot6d_decode_vjp(st.r6, d_R)
        d_logvar = {k: report.log_variance_grads[k] for k in st.logvar}
        return report, _State(d_r6, d_betas, d_s, d_t, d_logvar)


# ----------------------------------------------------------------------------
# initialization


def _closed_form_camera(problem: _Problem, st: _State):
    """Least-squares ``(s, t)`` aligning the posed keypoints with the visible targets."""
    vis = problem.kp_vis > 0
    if vis.sum() < 2:
        return _silhouette_camera(problem, st)
    R = rot6d_decode(st.r6)
    verts, _, _ = lbs(problem.model, R, st.betas)
    X = (problem.model.keypoint_regressor @ verts)[vis, :2]
    Y = problem.kp_target[vis]
    Xc, Yc = X - X.mean(axis=0), Y - Y.mean(axis=0)
    denom = float(np.sum(Xc**2))
    if denom <= 0:
        return st
    s = float(np.sum(Xc * Yc)) / denom
    if not s > MIN_SCALE:
        return st
    out = st.copy()
    out.s = s
    out.t = Y.mean(axis=0) - s * X.mean(axis=0)
    return out


def _silhouette_camera(problem: _Problem, st: _State):
    """Fallback camera matching the bounding box of the target mask."""
    if "S" not in problem.terms:
        return st
    rows, cols = np.nonzero(np.asarray(problem.target.silhouette) >= 0.5)
    if rows.size == 0:
        return st
    lo = pixels_to_weak(np.array([cols.min(), rows.max()], dtype=float), problem.size)
    hi = pixels_to_weak(np.array([cols.max(), rows.min()], dtype=float), problem.size)
    verts, _, _ = lbs(problem.model, rot6d_decode(st.r6), st.betas)
    vlo, vhi = verts[:, :2].min(axis=0), verts[:, :2].max(axis=0)
    s = float(np.max((hi - lo) / np.maximum(vhi - vlo, 1e-9)))
    if not s > MIN_SCALE:
        return st
    out = st.copy()
    out.s = s
    out.t = 0.5 * (lo + hi) - s * 0.5 * (vlo + vhi)
    return out


def _initial_state(model: BodyModel, target: FitTarget, cfg: FitConfig):
    if cfg.init == "ground-truth":
        if target.gt_params is None:
            raise ConfigError("init='ground-truth' needs a target with gt_params")
        params = target.gt_params
    elif cfg.init == "custom":
        params = cfg.init_params
    else:
        params = BodyParams.zeros(model)
    cam = cfg.init_camera or WeakPerspectiveCamera(0.9, np.zeros(2))
    if cfg.init == "ground-truth" and cfg.init_camera is None:
        cam = None
        if target.gt_camera is not None and target.gt_vertices is not None:
            cam = weak_from_perspective(target.gt_camera, target.gt_vertices, target.image_size)
    r6 = rot6d_encode(axis_angle_to_matrix(params.pose))
    st = _State(r6, np.array(params.shape, dtype=float), 0.9, np.zeros(2))
    if cam is not None:
        st.s, st.t = cam.s, cam.t.copy()
    if cfg.weights.mode == "learnable":
        lv = cfg.weights.log_variances()
        st.logvar = {k: lv[k] for k in cfg.terms}
    return st, cam is None


# ----------------------------------------------------------------------------
# optimizers


class _Adam:
    def __init__(self, lrs, beta1=0.9, beta2=0.999, eps=1e-8, horizon=None, final_ratio=1.0):
        self.lrs = lrs
        self.horizon = horizon
        self.final_ratio = final_ratio
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = None
        self.v = None
        self.k = 0

    def step(self, x, g):
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.k += 1
        self.m = self.b1 * self.m + (1 - self.b1) * g
        self.v = self.b2 * self.v + (1 - self.b2) * g * g
        mh = self.m / (1 - self.b1**self.k)
        vh = self.v / (1 - self.b2**self.k)
        scale = 1.0
        if self.horizon and self.final_ratio != 1.0:
            frac = min(1.0, (self.k - 1) / max(1, self.horizon - 1))
            r = self.final_ratio
            scale = r + (1.0 - r) * 0.5 * (1.0 + math.cos(math.pi * frac))
        return x - scale * self.lrs * mh / (np.sqrt(vh) + self.eps)


def _pack(st: _State, keys):
    lv = [st.logvar[k] for k in keys]
    return np.concatenate([st.to_vector(), lv])


def _unpack(x, J, B, keys):
    n = 6 * J + B + 3
    st = _State.from_vector(x[:n], J, B)
    st.logvar = {k: float(v) for k, v in zip(keys, x[n:])}
    st.s = max(st.s, MIN_SCALE)
    return st


def _data_loss(report):
    return math.fsum(report.contributions.values())


def _run(problem: _Problem, st: _State, cfg: FitConfig, iters, free=None, record=None):
    """Optimize from ``st``; returns ``(state, reports, converged)``.

    ``free`` optionally masks the packed parameter vector; masked-out entries
    stay fixed.
    """
    model = problem.model
    J, B = model.num_joints, model.num_betas
    keys = tuple(st.logvar)
    x = _pack(st, keys)
    lrs = np.full(x.shape, cfg.lr)
    lrs[6 * J + B: 6 * J + B + 3] = cfg.camera_lr
    if free is not None:
        lrs = lrs * free
    adam = _Adam(lrs, eps=cfg.adam_eps, horizon=iters, final_ratio=cfg.lr_final_ratio)
    reports = [] if record is None else record
    prev = None
    converged = False
    last_good = st.copy()
    alpha = cfg.lr

    def evaluate(xv, want_grad=True):
        s = _unpack(xv, J, B, keys)
        rep, g = problem.evaluate(s, want_grad)
        return s, rep, g

    cur, rep, g = evaluate(x)
    for it in range(iters):
        if not math.isfinite(rep.total):
            raise DivergenceError(f"non-finite loss at iteration {it}", state=last_good.params())
        reports.append(rep)
        last_good = cur
        data = _data_loss(rep)
        settled = prev is not None and abs(prev - data) <= cfg.tol * max(abs(prev), 1e-300)
        if data <= cfg.atol or settled:
            converged = True
            break
        prev = data
        if it == iters - 1:
            break
        gx = _pack(g, keys)
        if free is not None:
            gx = gx * free
        if cfg.optimizer == "adam":
            x = adam.step(x, gx)
            cur, rep, g = evaluate(x)
            continue
        # gradient descent with Armijo backtracking
        gg = float(gx @ (gx * (lrs / cfg.lr)))
        step = min(alpha * 2.0, 1e3 * cfg.lr)
        accepted = False
        for _ in range(40):
            trial = x - step * (lrs / cfg.lr) * gx
            try:
                tcur, trep, tg = evaluate(trial)
            except DomainError:
                step *= 0.5
                continue
            if math.isfinite(trep.total) and trep.total <= rep.total - 1e-4 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        alpha = step
        x, cur, rep, g = trial, tcur, trep, tg
    return cur, reports, converged


def _yaw_hypotheses(problem: _Problem, st: _State, cfg: FitConfig, fit_camera):
    n = cfg.orient_hypotheses
    if n == 1 or "j2d" not in problem.terms or not problem.kp_vis.any():
        return _closed_form_camera(problem, st) if fit_camera else st
    kp_problem = _Problem(problem.model, problem.target, cfg.replace(optimizer="adam"),
                          terms=("j2d",))
    best, best_loss = None, math.inf
    R0 = rot6d_decode(st.r6[0])
    for k in range(n):
        yaw = 2.0 * math.pi * k / n
        trial = st.copy()
        trial.r6[0] = rot6d_encode(axis_angle_to_matrix(np.array([0.0, yaw, 0.0])) @ R0)
        if fit_camera:
            trial = _closed_form_camera(kp_problem, trial)
        trial.logvar = {}
        out, reps, _ = _run(kp_problem, trial, cfg.replace(optimizer="adam"), cfg.hypothesis_iters)
        loss = reps[-1].raw["j2d"]
        if loss < best_loss - 1e-15:
            best, best_loss = out, loss
    best.logvar = dict(st.logvar)
    return best


def fit(model: BodyModel, target, cfg: FitConfig = FitConfig()):
    """Fit body and camera parameters to ``target`` (a sample or :class:`FitTarget`)."""
    if isinstance(target, SyntheticSample):
        target = FitTarget.from_sample(target)
    needs_gt = [k for k in cfg.terms if k in GT_TERMS]
    missing = {"v": target.gt_vertices, "j3d": target.gt_joints3d,
               "theta": target.gt_params, "beta": target.gt_params}
    for k in needs_gt:
        if missing[k] is None:
            raise ConfigError(f"term {k!r} needs ground truth the target does not carry")
    problem = _Problem(model, target, cfg)
    st, fit_camera = _initial_state(model, target, cfg)
    if fit_camera:
        st = _closed_form_camera(problem, st)

    if not problem.has_evidence():
        report, _ = problem.evaluate(st, want_grad=False)
        return FitResult(st.params(), st.camera(), [report], 0, False, st.r6.copy(),
                         dict(st.logvar))

    if cfg.init == "mean":
        st = _yaw_hypotheses(problem, st, cfg, fit_camera=True)

    reports = []
    remaining = cfg.max_iters
    if cfg.two_stage and remaining > 1:
        J, B = model.num_joints, model.num_betas
        free = np.zeros(6 * J + B + 3 + len(st.logvar))
        free[:6] = 1.0
        free[6 * J + B: 6 * J + B + 3] = 1.0
        n1 = min(cfg.stage1_iters, remaining - 1)
        st, _, _ = _run(problem, st, cfg, n1, free=free, record=reports)
        remaining -= len(reports)
    st, reports, converged = _run(problem, st, cfg, remaining, record=reports)
    return FitResult(st.params(), st.camera(), reports, len(reports), converged, st.r6.copy(),
                     dict(st.logvar))


# ----------------------------------------------------------------------------
# gradient check


@dataclass
class GradientCheckReport:
    max_rel_error: float
    worst_index: int
    analytic: np.ndarray
    numeric: np.ndarray
    names: list

    @property
    def worst_name(self):
        return self.names[self.worst_index] if self.worst_index >= 0 else None


def _parameter_names(J, B):
    names = [f"r6[{j},{c}]" for j in range(J) for c in range(6)]
    names += [f"beta[{b}]" for b in range(B)]
    return names + ["s", "t[0]", "t[1]"]


def gradient_check(model: BodyModel, params: BodyParams, camera: WeakPerspectiveCamera, target,
                   terms=("S", "j2d"), weights=LossWeights(), raster_sigma=0.7, rel_step=1e-5,
                   floor=None):
    """Compare the analytic gradient of the combined loss with central differences.

    Every scalar of ``(6D pose, shape, s, t)`` is perturbed by
    ``rel_step * max(1, |x|)``. Entries where both gradients are below
    ``floor`` (default ``1e-6`` times the largest analytic entry, at least
    ``1e-10``) are excluded from the relative error.
    """
    if isinstance(target, SyntheticSample):
        target = FitTarget.from_sample(target)
    cfg = FitConfig(terms=tuple(terms), weights=weights, raster_sigma=raster_sigma)
    problem = _Problem(model, target, cfg)
    J, B = model.num_joints, model.num_betas
    st = _State(rot6d_encode(axis_angle_to_matrix(params.pose)), np.array(params.shape, float),
                camera.s, camera.t.copy())
    report, g = problem.evaluate(st)
    if not math.isfinite(report.total):
        raise ValueError("loss is not finite at the check point")
    analytic = g.to_vector()
    x0 = st.to_vector()
    numeric = np.zeros_like(x0)
    for i in range(len(x0)):
        h = rel_step * max(1.0, abs(x0[i]))
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        fp = problem.evaluate(_State.from_vector(xp, J, B), False)[0].total
        fm = problem.evaluate(_State.from_vector(xm, J, B), False)[0].total
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError(f"loss is not finite near parameter {i}")
        numeric[i] = (fp - fm) / (2.0 * h)
    if not np.all(np.isfinite(analytic)):
        raise ValueError("analytic gradient is not finite")
    if floor is None:
        floor = max(1e-10, 1e-6 * float(np.max(np.abs(analytic))))
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.where(scale > floor, np.abs(analytic - numeric) / np.maximum(scale, 1e-300), 0.0)
    worst = int(np.argmax(rel)) if rel.size and rel.max() > 0 else -1
    return GradientCheckReport(float(rel.max(initial=0.0)), worst, analytic, numeric,
                               _parameter_names(J, B))
