import numpy as np
import pytest

from semsimp.labeling import LabelingError, label_cloud, project_point, sample_raster
from semsimp.model import Camera, CameraSet, LabeledCloud, LabelRaster


def _raster(data):
    return LabelRaster(data.shape[1], data.shape[0], data)

FALLBACK = 9


def _identity_camera(cid=0, w=64, h=48):
    return Camera(cid, 1.0, 1.0, 0.0, 0.0, np.eye(3), np.zeros(3), w, h)


def _down_camera(cid=0):
    # 10 m above the origin, looking straight down
    R = np.diag([1.0, -1.0, -1.0])
    return Camera(cid, 100.0, 100.0, 32.0, 24.0, R, np.array([0.0, 0.0, 10.0]), 64, 48)


def test_project_point_examples():
    cam = _identity_camera()
    assert project_point(cam, [0.0, 0.0, 5.0]) == ((0.0, 0.0), 5.0)
    assert project_point(cam, [2.0, 3.0, 1.0]) == ((2.0, 3.0), 1.0)
    uv, z = project_point(cam, [0.0, 0.0, -1.0])
    assert uv is None and z == -1.0


def test_point_on_ground_pixel():
    data = np.full((48, 64), 4, dtype=np.uint8)
    data[24, 32] = 0
    cloud = LabeledCloud(np.array([[0.0, 0.0, 0.0]]), first_observer=np.array([0]))
    out = label_cloud(cloud, CameraSet((_down_camera(),)), {0: _raster(data)}, FALLBACK)
    assert out.labels.tolist() == [0]


def test_outside_raster_gets_fallback():
    pts = np.array([[5.0, 0.0, 0.0], [0.0, 0.0, 20.0], [0.0, 0.0, 0.0]])
    cloud = LabeledCloud(pts, first_observer=np.zeros(3, dtype=np.int64))
    raster = _raster(np.ones((48, 64), dtype=np.uint8))
    out = label_cloud(cloud, CameraSet((_down_camera(),)), {0: raster}, FALLBACK)
    assert out.labels.tolist() == [FALLBACK, FALLBACK, 1]


def _plane_and_box(rng):
    plane = np.column_stack([rng.uniform(-3, -0.3, 400), rng.uniform(-2, 2, 400), np.zeros(400)])
    top = np.column_stack([rng.uniform(0.3, 2, 200), rng.uniform(-2, 2, 200), np.ones(200)])
    pts = np.vstack([plane, top])
    truth = np.r_[np.ones(400, dtype=np.uint8), np.full(200, 2, dtype=np.uint8)]
    data = np.ones((48, 64), dtype=np.uint8)
    data[:, 32:] = 2
    return pts, truth, {0: _raster(data), 1: _raster(data)}


def test_plane_and_box_fully_labeled(rng):
    pts, truth, rasters = _plane_and_box(rng)
    cams = CameraSet((_down_camera(0), _down_camera(1)))
    cloud = LabeledCloud(pts, visibility=tuple((i % 2, 1 - i % 2) for i in range(len(pts))))
    out = label_cloud(cloud, cams, rasters, FALLBACK)
    np.testing.assert_array_equal(out.labels, truth)
    assert out.points.tobytes() == cloud.points.tobytes()


def test_order_independent(rng):
    pts, truth, rasters = _plane_and_box(rng)
    cams = CameraSet((_down_camera(0),))
    perm = rng.permutation(len(pts))
    a = label_cloud(LabeledCloud(pts, first_observer=np.zeros(len(pts), int)), cams, rasters, FALLBACK)
    b = label_cloud(LabeledCloud(pts[perm], first_observer=np.zeros(len(pts), int)), cams, rasters, FALLBACK)
    np.testing.assert_array_equal(a.labels[perm], b.labels)


def test_missing_inputs_raise():
    cloud = LabeledCloud(np.zeros((1, 3)), first_observer=np.array([3]))
    cams = CameraSet((_down_camera(0),))
    with pytest.raises(LabelingError, match="unknown camera"):
        label_cloud(cloud, cams, {0: _raster(np.zeros((48, 64), np.uint8))}, FALLBACK)
    cloud = LabeledCloud(np.zeros((1, 3)), first_observer=np.array([0]))
    with pytest.raises(LabelingError, match="no label raster"):
        label_cloud(cloud, cams, {}, FALLBACK)
    with pytest.raises(LabelingError):
        label_cloud(LabeledCloud(np.zeros((1, 3))), cams, {}, FALLBACK)


def test_sample_raster_rounds_to_nearest():
    raster = _raster(np.arange(6, dtype=np.uint8).reshape(2, 3))
    got = sample_raster(raster, np.array([0.4, 1.6, 2.49, -0.6]), np.array([0.2, 0.9, 0.0, 0.0]),
                        np.ones(4, dtype=bool), FALLBACK)
    assert got.tolist() == [0, 5, 2, FALLBACK]
