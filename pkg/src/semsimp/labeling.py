"""Label points from the segmentation raster of their first observing camera."""

from __future__ import annotations

from typing import Mapping, Optional, Tuple

import numpy as np

from .model import Camera, CameraSet, LabeledCloud, LabelRaster


class LabelingError(ValueError):
    pass


def project_point(camera: Camera, point) -> Tuple[Optional[Tuple[float, float]], float]:
    """Pinhole projection of one world point.

    Returns ``((u, v), z)``; the pixel is ``None`` when the point lies on or
    behind the image plane.
    """
    x, y, z = camera.to_camera(point)
    if not z > 0:
        return None, float(z)
    return (camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy), float(z)


def project_points(camera: Camera, points: np.ndarray):
    """Vectorised projection: ``(u, v, z, valid)``."""
    pc = camera.to_camera(points)
    z = pc[:, 2]
    valid = z > 0
    zs = np.where(valid, z, 1.0)
    u = camera.fx * pc[:, 0] / zs + camera.cx
    v = camera.fy * pc[:, 1] / zs + camera.cy
    return u, v, z, valid


def sample_raster(raster: LabelRaster, u, v, valid, fallback: int) -> np.ndarray:
    """Nearest-pixel lookup; anything outside the raster gets ``fallback``."""
    ui = np.rint(np.where(valid, u, -1.0)).astype(np.int64)
    vi = np.rint(np.where(valid, v, -1.0)).astype(np.int64)
    inside = valid & (ui >= 0) & (ui < raster.width) & (vi >= 0) & (vi < raster.height)
    out = np.full(len(ui), fallback, dtype=np.uint8)
    out[inside] = raster.data[vi[inside], ui[inside]]
    return out


def label_cloud(cloud: LabeledCloud, cameras: CameraSet, rasters: Mapping[int, LabelRaster],
                fallback: int) -> LabeledCloud:
    """Return a copy of ``cloud`` whose labels come from each point's first observer.

    The first observer is taken from ``cloud.first_observer`` or, failing
    that, from the first entry of the visibility list.
    """
    if cloud.first_observer is not None:
        observer = np.asarray(cloud.first_observer)
    elif cloud.visibility is not None:
        if any(len(v) == 0 for v in cloud.visibility):
            raise LabelingError("a point has an empty visibility list")
        observer = np.array([v[0] for v in cloud.visibility], dtype=np.int64)
    else:
        raise LabelingError("cloud carries neither first_observer nor visibility")
    used = sorted(set(np.unique(observer).tolist()))
    missing_cam = [c for c in used if c not in cameras]
    if missing_cam:
        raise LabelingError(f"unknown camera ids referenced: {missing_cam}")
    missing_raster = [c for c in used if c not in rasters]
    if missing_raster:
        raise LabelingError(f"no label raster for cameras {missing_raster}")
    labels = np.full(len(cloud), fallback, dtype=np.uint8)
    for cam_id in used:
        sel = np.flatnonzero(observer == cam_id)
        u, v, _, valid = project_points(cameras[cam_id], cloud.points[sel])
        labels[sel] = sample_raster(rasters[cam_id], u, v, valid, fallback)
    return cloud.replace(labels=labels)
