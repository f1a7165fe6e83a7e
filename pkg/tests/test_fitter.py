import math

import numpy as np
import pytest

from occbody.body_model import BodyParams, forward, regress_keypoints3d
from occbody.errors import ConfigError, DivergenceError
from occbody.fitter import FitConfig, FitResult, FitTarget, fit, gradient_check
from occbody.geometry import WeakPerspectiveCamera, is_rotation, project_weak, rot6d_decode, weak_to_pixels
from occbody.renderer import RasterSettings, rasterize
from occbody.synth import Keypoints2D, SynthConfig, generate_sample

SIZE = (64, 64)


def weak_target(model, params, cam, size=SIZE, visibility=None):
    """Evidence rendered with the fitter's own camera model, so the truth is an exact minimum."""
    mesh, _ = forward(model, params)
    kp3d = regress_keypoints3d(model, mesh)
    pts = weak_to_pixels(project_weak(cam, mesh.vertices), size)
    sil = rasterize(pts, model.faces, RasterSettings(size))
    vis = np.ones(len(kp3d), dtype=int) if visibility is None else visibility
    kps = Keypoints2D(weak_to_pixels(project_weak(cam, kp3d), size), vis)
    return FitTarget(sil, kps, None, params, mesh.vertices, kp3d)


@pytest.fixture
def posed(model, rng):
    return BodyParams(rng.uniform(-0.3, 0.3, size=(model.num_joints, 3)),
                      rng.normal(scale=0.5, size=model.num_betas))


CAM = WeakPerspectiveCamera(0.9, np.array([0.02, -0.05]))


def test_ground_truth_init_is_already_optimal(model, posed):
    target = weak_target(model, posed, CAM)
    cfg = FitConfig(init="ground-truth", init_camera=CAM, terms=("S", "j2d", "v", "j3d", "theta", "beta"))
    res = fit(model, target, cfg)
    first = res.trajectory[0]
    assert all(v <= 1e-20 for v in first.raw.values())
    assert res.converged and res.iterations == 1


def test_no_evidence_returns_init(model, posed):
    target = weak_target(model, posed, CAM, visibility=np.zeros(17, dtype=int))
    res = fit(model, target, FitConfig(terms=("j2d",)))
    assert res.iterations == 0 and not res.converged
    assert not res.params.pose.any() and not res.params.shape.any()
    assert res.camera.s == 0.9 and not res.camera.t.any()


def test_invisible_keypoints_give_zero_gradient(model, posed):
    target = weak_target(model, posed, CAM, visibility=np.zeros(17, dtype=int))
    rep = gradient_check(model, posed, CAM, target, terms=("j2d",))
    assert np.abs(rep.analytic).max() < 1e-10
    assert np.abs(rep.numeric).max() < 1e-10


def test_quadratic_terms_gradient(model, posed, rng):
    target = weak_target(model, posed, CAM)
    point = BodyParams(rng.uniform(-0.4, 0.4, size=(model.num_joints, 3)), rng.normal(size=10))
    cam = WeakPerspectiveCamera(0.8, np.array([0.1, 0.0]))
    rep = gradient_check(model, point, cam, target, terms=("j2d", "beta"))
    assert rep.max_rel_error < 1e-6


def test_full_stack_gradient(model, posed, rng):
    target = weak_target(model, posed, CAM)
    point = BodyParams(posed.pose + rng.uniform(-0.2, 0.2, size=posed.pose.shape), np.zeros(10))
    cam = WeakPerspectiveCamera(0.85, np.array([0.03, -0.02]))
    rep = gradient_check(model, point, cam, target,
                         terms=("S", "j2d", "v", "j3d", "theta", "beta"))
    assert rep.max_rel_error < 1e-2, rep.worst_name


def test_backtracking_never_increases_loss(model, posed):
    target = weak_target(model, posed, CAM)
    res = fit(model, target, FitConfig(optimizer="backtracking", max_iters=40))
    totals = [r.total for r in res.trajectory]
    assert len(totals) <= 40
    assert all(b <= a for a, b in zip(totals, totals[1:]))


def test_iterates_are_rotations(model, posed):
    target = weak_target(model, posed, CAM)
    res = fit(model, target, FitConfig(max_iters=30))
    R = rot6d_decode(res.rot6d)
    for Rj in R:
        assert np.abs(Rj.T @ Rj - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(Rj) - 1.0) < 1e-9
    assert is_rotation(R[0], 1e-9)


def test_fit_is_deterministic(model, posed):
    target = weak_target(model, posed, CAM)
    cfg = FitConfig(max_iters=25)
    a, b = fit(model, target, cfg), fit(model, target, cfg)
    assert a.params.pose.tobytes() == b.params.pose.tobytes()
    assert a.to_json(full_trajectory=True) == b.to_json(full_trajectory=True)


def test_fit_reduces_loss_from_mean_pose(model, posed):
    target = weak_target(model, posed, CAM)
    res = fit(model, target, FitConfig(max_iters=150))
    assert res.trajectory[-1].total < res.trajectory[0].total
    assert len(res.trajectory) == res.iterations <= 150


def test_gt_terms_need_ground_truth(model, posed):
    target = weak_target(model, posed, CAM)
    target.gt_params = None
    with pytest.raises(ConfigError):
        fit(model, target, FitConfig(terms=("j2d", "theta")))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_evidence_diverges_with_state(model, posed):
    target = weak_target(model, posed, CAM)
    target.keypoints.xy[3] = np.inf
    with pytest.raises(DivergenceError) as info:
        fit(model, target, FitConfig(terms=("j2d",), orient_hypotheses=1))
    assert isinstance(info.value.state, BodyParams)
    assert np.all(np.isfinite(info.value.state.pose))


def test_learnable_weights_move(model, posed):
    from occbody.losses import LossWeights

    target = weak_target(model, posed, CAM)
    res = fit(model, target, FitConfig(max_iters=20, weights=LossWeights(mode="learnable")))
    assert set(res.log_variances) == {"S", "j2d"}
    assert res.log_variances["S"] != pytest.approx(2 * math.log(0.1))


def test_fits_synthetic_sample_directly(model, pool):
    sample = generate_sample(model, pool, SynthConfig(image_size=(64, 64), occlusion_probability=0.0), 3)
    res = fit(model, sample, FitConfig(max_iters=20))
    assert res.iterations <= 20


def test_result_json_round_trip(model, posed):
    target = weak_target(model, posed, CAM)
    res = fit(model, target, FitConfig(max_iters=5))
    back = FitResult.from_dict(res.to_dict())
    assert np.array_equal(back.params.pose, res.params.pose)
    assert back.camera.s == res.camera.s and back.iterations == res.iterations


def test_config_round_trip_and_validation():
    cfg = FitConfig(terms=("j2d",), lr=0.05, init_camera=CAM)
    back = FitConfig.from_dict(cfg.to_dict())
    assert back.terms == cfg.terms and back.lr == cfg.lr and back.init_camera.s == CAM.s
    for bad in (dict(max_iters=0), dict(lr=0.0), dict(tol=0.0), dict(terms=("x",)), dict(terms=())):
        with pytest.raises(ConfigError):
            FitConfig(**bad)
