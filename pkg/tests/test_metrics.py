import numpy as np
import pytest

from conftest import random_rotation
from occbody.body_model import BodyParams, forward
from occbody.errors import DimensionError, DomainError
from occbody.geometry import rotation_about_axis
from occbody.metrics import (
    metrics_to_csv,
    miou,
    mpjpe_pa,
    procrustes_align,
    pve_pa,
    pve_t_sc,
    read_metrics_csv,
    scale_corrected_error,
)


def test_identity_alignment(rng):
    x = rng.normal(size=(20, 3))
    T = procrustes_align(x, x)
    assert abs(T.s - 1.0) < 1e-9
    np.testing.assert_allclose(T.R, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(T.t, 0.0, atol=1e-9)


def test_recovers_known_similarity(rng):
    x = rng.normal(size=(30, 3))
    R = rotation_about_axis(np.array([0.0, 0.0, 1.0]), np.deg2rad(30))
    y = 2.0 * x @ R.T + [1.0, 2.0, 3.0]
    T = procrustes_align(x, y)
    assert abs(T.s - 2.0) < 1e-7
    np.testing.assert_allclose(T.R, R, atol=1e-7)
    np.testing.assert_allclose(T.t, [1.0, 2.0, 3.0], atol=1e-7)


def test_mirror_image_is_not_matched_by_reflection():
    chiral = np.array([[0, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 3], [1, 1, 0.5]], dtype=float)
    mirrored = chiral * [-1.0, 1.0, 1.0]
    T = procrustes_align(chiral, mirrored)
    assert abs(np.linalg.det(T.R) - 1.0) < 1e-12
    assert np.sum((T.apply(chiral) - mirrored) ** 2) > 1e-3


def test_alignment_beats_identity(rng):
    for _ in range(20):
        x, y = rng.normal(size=(2, 15, 3))
        T = procrustes_align(x, y)
        assert np.sum((T.apply(x) - y) ** 2) <= np.sum((x - y) ** 2) + 1e-12


def test_coincident_source_rejected():
    with pytest.raises(DomainError):
        procrustes_align(np.ones((5, 3)), np.random.default_rng(0).normal(size=(5, 3)))


def test_too_few_points():
    with pytest.raises(DimensionError):
        mpjpe_pa(np.zeros((2, 3)), np.zeros((2, 3)))


def test_mpjpe_examples(rng):
    gt = rng.normal(size=(17, 3))
    assert mpjpe_pa(gt, gt) < 1e-12
    pred = 0.7 * gt @ random_rotation(rng).T + rng.normal(size=3)
    assert mpjpe_pa(pred, gt) < 1e-7


def test_single_joint_offset_mean():
    gt = np.random.default_rng(1).normal(scale=0.3, size=(17, 3))
    pred = gt.copy()
    pred[0] += [0.017, 0.0, 0.0]
    plain = np.mean(np.linalg.norm(pred - gt, axis=1))
    assert abs(plain - 0.001) < 1e-12
    # the least-squares alignment spreads the single residual over every joint,
    # so the aligned mean distance is larger than the unaligned one here
    T = procrustes_align(pred, gt)
    assert abs(mpjpe_pa(pred, gt) - np.mean(np.linalg.norm(T.apply(pred) - gt, axis=1))) < 1e-15
    assert np.sum((T.apply(pred) - gt) ** 2) <= np.sum((pred - gt) ** 2)


def test_pve_examples(rng):
    gt = rng.normal(size=(100, 3))
    assert pve_pa(gt, gt) < 1e-12
    assert pve_pa(gt + 0.005, gt) < 1e-7
    assert pve_pa(1.3 * gt @ random_rotation(rng).T - 2.0, gt) < 1e-7


def test_rigid_motion_of_both_inputs(rng):
    a, b = rng.normal(size=(2, 17, 3))
    Q, t = random_rotation(rng), rng.normal(size=3)
    assert abs(mpjpe_pa(a @ Q.T + t, b @ Q.T + t) - mpjpe_pa(a, b)) < 1e-7


def test_pve_t_sc_examples(model, rng):
    b = rng.normal(size=10)
    assert pve_t_sc(model, b, b) < 1e-12
    v = forward(model, BodyParams(np.zeros((16, 3)), b))[0].vertices
    assert scale_corrected_error(1.1 * v, v) < 1e-9


def test_pve_t_sc_matches_direct_formula(model, rng):
    gt = rng.normal(size=10)
    pred = gt.copy()
    pred[0] += 1.0
    zero = np.zeros((16, 3))
    vp = forward(model, BodyParams(zero, pred))[0].vertices
    vg = forward(model, BodyParams(zero, gt))[0].vertices
    vp = vp - vp.mean(axis=0)
    vg = vg - vg.mean(axis=0)
    best_s = np.sum(vp * vg) / np.sum(vp * vp)
    brute = np.mean([np.linalg.norm(best_s * p - g) for p, g in zip(vp, vg)])
    assert abs(pve_t_sc(model, pred, gt) - brute) < 1e-12
    assert brute > 0


def test_pve_t_sc_dimension_check(model):
    with pytest.raises(DimensionError):
        pve_t_sc(model, np.zeros(9), np.zeros(10))


def test_miou_closed_forms():
    a = np.zeros((10, 10))
    a[2:6, 2:8] = 1.0
    assert miou(a, a) == 1.0
    b = np.zeros((10, 10))
    b[7:9, 0:4] = 1.0
    assert miou(a, b) == 0.0
    a2 = np.zeros((10, 12))
    a2[2:6, 2:8] = 1.0
    c2 = np.zeros((10, 12))
    c2[2:6, 5:11] = 1.0
    assert miou(a2, c2) == 1.0 / 3.0
    assert miou(c2, a2) == miou(a2, c2)


def test_miou_empty_conventions():
    z = np.zeros((4, 4))
    o = np.ones((4, 4))
    assert miou(z, z) == 1.0
    assert miou(z, o) == 0.0


def test_miou_size_mismatch():
    with pytest.raises(DimensionError):
        miou(np.zeros((3, 3)), np.zeros((3, 4)))


def test_csv_round_trip(tmp_path):
    rows = [("s0", "mpjpe_pa", 0.0123), ("s0", "miou", 0.75), ("s1", "pve_pa", 0.1 + 0.2)]
    text = metrics_to_csv(rows, tmp_path / "m.csv")
    assert text.splitlines()[0] == "sample_id,metric,value,unit"
    back = read_metrics_csv(tmp_path / "m.csv")
    assert back[0] == ("s0", "mpjpe_pa", 0.0123 * 1000.0, "mm")
    assert back[1] == ("s0", "miou", 0.75, "1")
    assert back[2][2] == (0.1 + 0.2) * 1000.0
    assert (tmp_path / "m.csv").read_text() == text
