import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semsimp.io import (ParseError, format_off, read_cameras, read_depth, read_label_raster, read_off,
                        read_palette, read_ply, read_visibility, write_cameras, write_depth,
                        write_label_raster, write_off, write_palette, write_ply, write_visibility)
from semsimp.labeling import project_point
from semsimp.model import (Camera, CameraSet, DepthMap, LabelInfo, LabeledCloud, LabelRaster, Palette,
                           TriMesh, ValidationError)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def _write(path, text):
    path.write_text(text)
    return path


def test_ply_three_points_with_labels(tmp_path):
    p = _write(tmp_path / "a.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
               "property float y\nproperty float z\nproperty uchar label\nend_header\n"
               "0 0 0 0\n1 0 0 0\n0 1 0 1\n")
    cloud = read_ply(p)
    assert len(cloud) == 3
    assert cloud.labels.tolist() == [0, 0, 1]
    assert cloud.normals is None and cloud.first_observer is None


def test_ply_without_labels(tmp_path):
    p = _write(tmp_path / "a.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\n"
               "property double y\nproperty double z\nend_header\n1 2 3\n")
    assert read_ply(p).labels is None


@pytest.mark.parametrize("body,needle", [
    ("1 2 3\n", "expected 2 vertices"),
    ("1 2 3\n4 5 nan\n", "non-finite"),
    ("1 2\n4 5 6\n", "expected 3 values"),
])
def test_ply_errors_name_the_line(tmp_path, body, needle):
    p = _write(tmp_path / "bad.ply", "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\n"
               "property double y\nproperty double z\nend_header\n" + body)
    with pytest.raises(ParseError) as err:
        read_ply(p)
    assert needle in str(err.value)
    assert "bad.ply:" in str(err.value)


def test_ply_binary(tmp_path):
    pts = np.array([[1.5, -2.0, 3.25], [0.0, 1.0, 2.0]], dtype="<f4")
    header = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
              "property float z\nproperty uchar label\nend_header\n").encode()
    rec = np.zeros(2, dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("label", "u1")])
    rec["x"], rec["y"], rec["z"], rec["label"] = pts[:, 0], pts[:, 1], pts[:, 2], [4, 7]
    (tmp_path / "b.ply").write_bytes(header + rec.tobytes())
    cloud = read_ply(tmp_path / "b.ply")
    np.testing.assert_array_equal(cloud.points, pts.astype(np.float64))
    assert cloud.labels.tolist() == [4, 7]


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=finite),
       st.data())
def test_ply_round_trip(tmp_path_factory, pts, data):
    n = len(pts)
    labels = np.array(data.draw(st.lists(st.integers(0, 255), min_size=n, max_size=n)), dtype=np.uint8)
    normals = data.draw(arrays(np.float64, (n, 3), elements=st.floats(-1, 1)))
    norm = np.linalg.norm(normals, axis=1)
    normals = np.where(norm[:, None] > 1e-3, normals / np.maximum(norm, 1e-3)[:, None], [0.0, 0.0, 1.0])
    cloud = LabeledCloud(pts, labels=labels, normals=normals, first_observer=np.arange(n))
    path = tmp_path_factory.mktemp("ply") / "c.ply"
    write_ply(cloud, path)
    back = read_ply(path)
    np.testing.assert_array_equal(back.points, pts)
    np.testing.assert_array_equal(back.labels, labels)
    np.testing.assert_array_equal(back.normals, normals)
    np.testing.assert_array_equal(back.first_observer, np.arange(n))
    write_ply(back, path.with_suffix(".again.ply"))
    assert path.read_bytes() == path.with_suffix(".again.ply").read_bytes()


def _tetra():
    return TriMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]),
                   np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]))


def test_off_tetrahedron_header(tmp_path):
    write_off(_tetra(), tmp_path / "t.off")
    lines = (tmp_path / "t.off").read_text().splitlines()
    assert lines[:2] == ["OFF", "4 4 0"]
    assert len(lines) == 10


def test_off_empty():
    empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    assert format_off(empty) == "OFF\n0 0 0\n"


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 20), st.just(3)), elements=finite), st.data())
def test_off_round_trip(tmp_path_factory, verts, data):
    nv = len(verts)
    faces = data.draw(st.lists(st.permutations(range(nv)).map(lambda p: p[:3]), min_size=0, max_size=15))
    mesh = TriMesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3))
    path = tmp_path_factory.mktemp("off") / "m.off"
    write_off(mesh, path)
    assert read_off(path) == mesh


def test_off_count_mismatch(tmp_path):
    p = _write(tmp_path / "m.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n3 0 1 2\n")
    with pytest.raises(ParseError, match="count mismatch"):
        read_off(p)


def _camera_line(cid=0, R=None, t=(0, 0, 0)):
    R = np.eye(3) if R is None else np.asarray(R)
    vals = [cid, 1, 1, 0, 0, *R.ravel(), *t, 64, 48]
    return " ".join(map(str, vals)) + "\n"


def test_identity_camera(tmp_path):
    cams = read_cameras(_write(tmp_path / "c.txt", _camera_line()))
    uv, z = project_point(cams[0], [0.0, 0.0, 3.0])
    assert uv == (0.0, 0.0) and z == 3.0


def test_camera_rejects_non_orthonormal(tmp_path):
    R = np.eye(3)
    R[0] *= 1.1
    with pytest.raises(ParseError, match="orthonormal"):
        read_cameras(_write(tmp_path / "c.txt", _camera_line(R=R)))


def test_camera_round_trip(tmp_path):
    a = np.deg2rad(33.0)
    R = np.array([[np.cos(a), -np.sin(a), 0], [np.sin(a), np.cos(a), 0], [0, 0, 1]])
    cams = CameraSet((Camera(3, 500.5, 501.25, 320.1, 240.9, R, [0.1, -2.0, 3.3], 640, 480),))
    write_cameras(cams, tmp_path / "c.txt")
    back = read_cameras(tmp_path / "c.txt")[3]
    np.testing.assert_array_equal(back.R, cams[3].R)
    np.testing.assert_array_equal(back.t, cams[3].t)
    assert (back.fx, back.fy, back.cx, back.cy, back.width, back.height) == (500.5, 501.25, 320.1, 240.9, 640, 480)


def test_pgm_p2_small(tmp_path):
    r = read_label_raster(_write(tmp_path / "r.pgm", "P2\n# comment\n2 2\n255\n0 0\n1 1\n"))
    assert r.data.tolist() == [[0, 0], [1, 1]]
    assert sorted(set(r.data.ravel().tolist())) == [0, 1]


def test_pgm_p5_and_round_trip(tmp_path):
    data = np.arange(12, dtype=np.uint8).reshape(3, 4)
    (tmp_path / "r.pgm").write_bytes(b"P5\n4 3\n255\n" + data.tobytes())
    r = read_label_raster(tmp_path / "r.pgm")
    np.testing.assert_array_equal(r.data, data)
    write_label_raster(r, tmp_path / "s.pgm")
    np.testing.assert_array_equal(read_label_raster(tmp_path / "s.pgm").data, data)


def test_pgm_truncated(tmp_path):
    with pytest.raises(ParseError, match="truncated"):
        read_label_raster(_write(tmp_path / "r.pgm", "P2\n2 2\n255\n0 0 1\n"))


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(0, 1e4, allow_nan=False)))
def test_depth_round_trip(tmp_path_factory, data):
    d = DepthMap(data.shape[1], data.shape[0], data)
    path = tmp_path_factory.mktemp("d") / "x.depth"
    write_depth(d, path)
    np.testing.assert_array_equal(read_depth(path).data, d.data)


def test_depth_rejects_inf(tmp_path):
    with pytest.raises(ParseError, match="non-finite"):
        read_depth(_write(tmp_path / "x.depth", "DEPTH 2 1\n1.0 inf\n"))


def test_palette_and_visibility_round_trip(tmp_path):
    pal = Palette((LabelInfo(0, "ground", True), LabelInfo(5, "tree", False)))
    write_palette(pal, tmp_path / "p.txt")
    assert read_palette(tmp_path / "p.txt") == pal
    vis = ((2, 0), (1,), (0, 1, 2))
    write_visibility(vis, tmp_path / "v.txt")
    assert read_visibility(tmp_path / "v.txt", 3) == vis


def test_visibility_index_out_of_range(tmp_path):
    with pytest.raises(ParseError, match="outside"):
        read_visibility(_write(tmp_path / "v.txt", "5 1 0\n"), 3)


def test_cloud_validation():
    with pytest.raises(ValidationError):
        LabeledCloud(np.array([[0.0, np.nan, 0.0]]))
    with pytest.raises(ValidationError):
        LabeledCloud(np.zeros((2, 3)), labels=np.zeros(3, dtype=np.uint8))
    with pytest.raises(ValidationError):
        LabeledCloud(np.zeros((1, 3)), normals=np.array([[0.0, 0.0, 1.1]]))
    cloud = LabeledCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0


def test_subset_preserves_order():
    pts = np.arange(15, dtype=np.float64).reshape(5, 3)
    cloud = LabeledCloud(pts, labels=np.arange(5, dtype=np.uint8), visibility=((0,), (1,), (2,), (3,), (4,)))
    sub = cloud.subset(np.array([True, False, True, False, True]))
    np.testing.assert_array_equal(sub.points, pts[[0, 2, 4]])
    assert sub.visibility == ((0,), (2,), (4,))
