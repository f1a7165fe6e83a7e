import numpy as np
import pytest

from oracles import edge_distance, hard_rasterize, soft_rasterize
from occbody.body_model import Mesh
from occbody.errors import RenderError
from occbody.geometry import PerspectiveCamera, WeakPerspectiveCamera
from occbody.renderer import (
    RasterSettings,
    face_part_labels,
    load_silhouette_png,
    rasterize,
    rasterize_vjp,
    render_part_silhouettes,
    render_silhouette,
    render_silhouette_with_grad,
    save_silhouette_png,
)

# hypotenuse x + y = 61.5 keeps every pixel center at least 0.35 px off an edge
BIG_TRIANGLE = np.array([[10.5, 10.5], [51.0, 10.5], [10.5, 51.0]])


def _tri(points):
    return np.asarray(points, dtype=float), np.array([[0, 1, 2]])


def _camera(size=32, f=40.0):
    K = np.array([[f, 0, size / 2], [0, f, size / 2], [0, 0, 1.0]])
    return PerspectiveCamera(K, np.eye(3), np.array([0.0, 0.0, 3.0]))


def test_empty_faces_render_black():
    s = RasterSettings((8, 9))
    img = render_silhouette(Mesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=int)),
                            WeakPerspectiveCamera(), s)
    assert img.shape == (8, 9) and not img.any()


def test_sharp_triangle_matches_point_in_triangle():
    pts, faces = _tri(BIG_TRIANGLE)
    settings = RasterSettings((64, 64), sigma=0.01)
    img = rasterize(pts, faces, settings)
    hard = hard_rasterize(pts, faces, (64, 64))
    dist = edge_distance(pts, faces, (64, 64))
    assert np.all(img[hard] > 0.99)
    assert np.all(img[~hard & (dist > 3 * 0.01)] < 0.01)
    np.testing.assert_array_equal(img > 0.5, hard)


def test_duplicate_triangle_is_idempotent_when_sharp():
    pts, faces = _tri(BIG_TRIANGLE)
    settings = RasterSettings((64, 64), sigma=0.01)
    one = rasterize(pts, faces, settings)
    two = rasterize(pts, np.array([[0, 1, 2], [0, 1, 2]]), settings)
    assert np.abs(one - two).max() < 1e-6


def test_matches_brute_force_soft_model(rng):
    size = (24, 20)
    pts = rng.uniform([-3, -3], [23, 27], size=(9, 2))
    faces = np.array([[0, 1, 2], [3, 4, 5], [6, 7, 8], [0, 4, 8]])
    for sigma in (0.7, 2.0):
        settings = RasterSettings(size, sigma=sigma)
        np.testing.assert_allclose(rasterize(pts, faces, settings),
                                   soft_rasterize(pts, faces, size, sigma), atol=1e-12)


def test_values_in_unit_interval(rng):
    pts = rng.uniform(0, 32, size=(30, 2))
    faces = rng.integers(0, 30, size=(40, 3))
    img = rasterize(pts, faces, RasterSettings((32, 32), sigma=1.5))
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_sharper_is_more_decisive():
    pts, faces = _tri(BIG_TRIANGLE)
    hard = hard_rasterize(pts, faces, (64, 64))
    prev = None
    for sigma in (3.0, 1.5, 0.7, 0.3, 0.1):
        img = rasterize(pts, faces, RasterSettings((64, 64), sigma=sigma))
        if prev is not None:
            assert np.all(img[hard] >= prev[hard] - 1e-15)
            assert np.all(img[~hard] <= prev[~hard] + 1e-15)
        prev = img


def test_hard_limit_away_from_edges(rng):
    size = (48, 48)
    pts = rng.uniform(0, 48, size=(12, 2))
    faces = np.arange(12).reshape(4, 3)
    img = rasterize(pts, faces, RasterSettings(size, sigma=0.05))
    hard = hard_rasterize(pts, faces, size)
    far = edge_distance(pts, faces, size) > 1.0
    np.testing.assert_array_equal((img >= 0.5)[far], hard[far])


def test_zero_upstream_gives_zero_gradient():
    verts = np.array([[-0.5, -0.5, 0.0], [0.5, -0.4, 0.1], [0.0, 0.6, -0.1]])
    s = RasterSettings((32, 32))
    _, g = render_silhouette_with_grad(Mesh(verts, [[0, 1, 2]]), _camera(), s, np.zeros((32, 32)))
    assert not g.any()


def test_forward_of_grad_path_is_render():
    verts = np.array([[-0.5, -0.5, 0.0], [0.5, -0.4, 0.1], [0.0, 0.6, -0.1]])
    s = RasterSettings((32, 32))
    mesh = Mesh(verts, [[0, 1, 2]])
    img, _ = render_silhouette_with_grad(mesh, _camera(), s, np.ones((32, 32)))
    assert np.array_equal(img, render_silhouette(mesh, _camera(), s))


def _fd_check(mesh, cam, settings, upstream, h):
    _, g = render_silhouette_with_grad(mesh, cam, settings, upstream)
    worst = 0.0
    for i in range(len(mesh.vertices)):
        for a in range(3):
            vp, vm = mesh.vertices.copy(), mesh.vertices.copy()
            vp[i, a] += h
            vm[i, a] -= h
            fp = np.sum(upstream * render_silhouette(Mesh(vp, mesh.faces), cam, settings))
            fm = np.sum(upstream * render_silhouette(Mesh(vm, mesh.faces), cam, settings))
            fd = (fp - fm) / (2 * h)
            if max(abs(fd), abs(g[i, a])) > 1e-6:
                worst = max(worst, abs(fd - g[i, a]) / max(abs(fd), abs(g[i, a])))
    return worst


def test_single_triangle_gradient_matches_finite_differences(rng):
    verts = np.array([[-0.5, -0.5, 0.0], [0.5, -0.4, 0.1], [0.0, 0.6, -0.1]])
    settings = RasterSettings((32, 32), sigma=0.7)
    upstream = rng.normal(size=(32, 32))
    assert _fd_check(Mesh(verts, [[0, 1, 2]]), _camera(), settings, upstream, h=1e-4) < 1e-2


def test_weak_camera_gradient_matches_finite_differences(rng):
    verts = rng.uniform(-0.6, 0.6, size=(6, 3))
    mesh = Mesh(verts, [[0, 1, 2], [3, 4, 5], [0, 2, 4]])
    cam = WeakPerspectiveCamera(0.9, np.array([0.05, -0.1]))
    upstream = rng.normal(size=(24, 24))
    assert _fd_check(mesh, cam, RasterSettings((24, 24)), upstream, h=1e-5) < 1e-2


def test_interior_translation_does_not_change_total_coverage():
    pts, faces = _tri(BIG_TRIANGLE)
    settings = RasterSettings((64, 64), sigma=0.7)
    img = rasterize(pts, faces, settings)
    total = img.sum()
    g = rasterize_vjp(pts, faces, settings, img, np.ones((64, 64))).sum(axis=0)
    # pixel sampling leaves a small periodic ripple; relative to the area it is < 1e-3
    assert np.abs(g).max() < 1e-3 * total
    shifted = rasterize(pts + [1.0, 0.0], faces, settings).sum()
    assert abs(shifted - total) < 1e-3 * total


def test_near_plane_violation_names_vertex():
    verts = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, -2.95]])
    with pytest.raises(RenderError) as info:
        render_silhouette(Mesh(verts, [[0, 1, 2]]), _camera(), RasterSettings((16, 16)))
    assert info.value.index == 2
    assert "vertex 2" in str(info.value)


def _two_boxes():
    # two quads, far apart on screen, each made of two triangles
    v = np.array([[-0.8, -0.3, 0], [-0.4, -0.3, 0], [-0.4, 0.3, 0], [-0.8, 0.3, 0],
                  [0.4, -0.3, 0], [0.8, -0.3, 0], [0.8, 0.3, 0], [0.4, 0.3, 0]], dtype=float)
    f = np.array([[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]])
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    return Mesh(v, f), labels


def test_single_part_equals_full_render():
    mesh, _ = _two_boxes()
    s = RasterSettings((32, 32))
    cam = WeakPerspectiveCamera()
    (only,) = render_part_silhouettes(mesh, np.zeros(8, dtype=int), cam, s)
    assert np.array_equal(only, render_silhouette(mesh, cam, s))


def test_disjoint_parts_recompose():
    mesh, labels = _two_boxes()
    s = RasterSettings((32, 32))
    cam = WeakPerspectiveCamera()
    parts = render_part_silhouettes(mesh, labels, cam, s)
    assert len(parts) == 2
    np.testing.assert_allclose(np.maximum(*parts), render_silhouette(mesh, cam, s), atol=1e-6)


def test_part_without_faces_is_blank():
    mesh, labels = _two_boxes()
    parts = render_part_silhouettes(mesh, labels, WeakPerspectiveCamera(), RasterSettings((16, 16)),
                                    part_ids=[0, 1, 5])
    assert not parts[2].any()


def test_empty_label_set_rejected():
    mesh, _ = _two_boxes()
    with pytest.raises(ValueError):
        render_part_silhouettes(mesh, [], WeakPerspectiveCamera(), RasterSettings((16, 16)))


def test_face_labels_majority_and_ties():
    faces = np.array([[0, 1, 2], [0, 1, 3], [2, 3, 4]])
    labels = np.array([4, 4, 1, 7, 2])
    assert face_part_labels(faces, labels).tolist() == [4, 4, 1]


def test_png_round_trip(tmp_path, rng):
    img = rng.random((20, 30))
    path = tmp_path / "s.png"
    save_silhouette_png(path, img)
    back = load_silhouette_png(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12
    save_silhouette_png(path, back)
    assert np.array_equal(load_silhouette_png(path), back)


def test_png_rejects_color(tmp_path):
    from PIL import Image

    Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
    with pytest.raises(ValueError):
        load_silhouette_png(tmp_path / "c.png")


def test_render_is_deterministic(rng):
    pts = rng.uniform(0, 40, size=(30, 2))
    faces = rng.integers(0, 30, size=(50, 3))
    s = RasterSettings((40, 40))
    a = rasterize(pts, faces, s)
    up = rng.normal(size=(40, 40))
    assert np.array_equal(a, rasterize(pts, faces, s))
    assert np.array_equal(rasterize_vjp(pts, faces, s, a, up), rasterize_vjp(pts, faces, s, a, up))


@pytest.mark.parametrize("bad", [dict(sigma=0.0), dict(image_size=(0, 4)), dict(near_plane=-1.0)])
def test_settings_validation(bad):
    with pytest.raises(ValueError):
        RasterSettings(**bad)
