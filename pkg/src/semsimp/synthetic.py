"""Deterministic synthetic scenes with exact ground truth.

The main scene is a ground plane, two walls and a sphere seen by a ring of
cameras.  Points are back-projected from jittered pixel rays with depth
noise; label rasters and depth maps are traced analytically at integer
pixel coordinates.  Two small scenes serve the property tests: a flat
two-class half-plane and a hollow cube observed from inside.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .io import (write_cameras, write_depth, write_label_raster, write_palette, write_ply,
                 write_visibility)
from .model import (Camera, CameraSet, DepthMap, LabelInfo, LabeledCloud, LabelRaster, Palette)

GROUND, WALL, VEGETATION, UNKNOWN = 0, 1, 2, 3

SCENE_PALETTE = Palette((
    LabelInfo(GROUND, "ground", True),
    LabelInfo(WALL, "wall", True),
    LabelInfo(VEGETATION, "vegetation", False),
    LabelInfo(UNKNOWN, "unknown", False),
))

IMAGE_WIDTH, IMAGE_HEIGHT = 64, 48
FOCAL = 44.0
N_CAMERAS = 8
RING_RADIUS = 3.2
RING_HEIGHT = 1.3
LOOK_AT = (0.0, 0.0, 0.6)
DEPTH_NOISE = 0.01
SCENE_EXTENT = 6.0
WALL_HEIGHT = 4.0
SPHERE_CENTER = (0.5, 0.5, 1.0)
SPHERE_RADIUS = 1.0


@dataclass(frozen=True)
class _Rect:
    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    len1: float
    len2: float
    label: int


@dataclass(frozen=True)
class _Sphere:
    center: np.ndarray
    radius: float
    label: int


def _main_primitives():
    o = np.array([-SCENE_EXTENT, -SCENE_EXTENT, 0.0])
    x, y, z = np.eye(3)
    size = 2 * SCENE_EXTENT
    return [
        _Rect(o, x, y, size, size, GROUND),
        _Rect(o, y, z, size, WALL_HEIGHT, WALL),
        _Rect(o, x, z, size, WALL_HEIGHT, WALL),
        _Sphere(np.array(SPHERE_CENTER), SPHERE_RADIUS, VEGETATION),
    ]


def _hit_rect(r: _Rect, o, d):
    n = np.cross(r.e1, r.e2)
    dn = d @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((r.origin - o) @ n) / dn
    q = o + t[:, None] * d
    s1 = (q - r.origin) @ r.e1
    s2 = (q - r.origin) @ r.e2
    ok = (np.abs(dn) > 1e-15) & (t > 1e-9) & (s1 >= 0) & (s1 <= r.len1) & (s2 >= 0) & (s2 <= r.len2)
    return np.where(ok, t, np.inf)


def _hit_sphere(s: _Sphere, o, d):
    oc = o - s.center
    a = np.einsum("ij,ij->i", d, d)
    b = d @ oc
    c = oc @ oc - s.radius ** 2
    disc = b * b - a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    t0 = (-b - root) / a
    t1 = (-b + root) / a
    t = np.where(t0 > 1e-9, t0, np.where(t1 > 1e-9, t1, np.inf))
    return np.where(disc >= 0, t, np.inf)


def trace_scene(primitives, origin, dirs) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest hit parameter and label for rays ``origin + t * dirs``; misses give (inf, 255)."""
    o = np.asarray(origin, dtype=np.float64)
    best = np.full(len(dirs), np.inf)
    label = np.full(len(dirs), 255, dtype=np.uint8)
    for prim in primitives:
        t = _hit_rect(prim, o, dirs) if isinstance(prim, _Rect) else _hit_sphere(prim, o, dirs)
        closer = t < best
        best[closer] = t[closer]
        label[closer] = prim.label
    return best, label


def look_at(cam_id: int, eye, target, width=IMAGE_WIDTH, height=IMAGE_HEIGHT, focal=FOCAL,
            up=(0.0, 0.0, 1.0)) -> Camera:
    """Camera at ``eye`` whose optical axis points at ``target`` (image y runs downwards)."""
    eye = np.asarray(eye, dtype=np.float64)
    zc = np.asarray(target, dtype=np.float64) - eye
    zc /= np.linalg.norm(zc)
    xc = np.cross(zc, up)
    if np.linalg.norm(xc) < 1e-9:
        xc = np.cross(zc, (0.0, 1.0, 0.0))
    xc /= np.linalg.norm(xc)
    yc = np.cross(zc, xc)
    R = np.stack([xc, yc, zc])
    return Camera(cam_id, focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, R, -R @ eye, width, height)


def ring_cameras(n=N_CAMERAS, radius=RING_RADIUS, height=RING_HEIGHT, target=LOOK_AT) -> CameraSet:
    cams = []
    for k in range(n):
        a = 2 * np.pi * (k + 0.5) / n
        cams.append(look_at(k, (radius * np.cos(a), radius * np.sin(a), height), target))
    return CameraSet(tuple(cams))


def _world_dirs(cam: Camera, u, v) -> np.ndarray:
    d = np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones_like(u)], axis=1)
    return d @ cam.R


def _pixel_grid(cam: Camera, offset=0.0):
    v, u = np.mgrid[0:cam.height, 0:cam.width]
    return u.ravel().astype(np.float64) + offset, v.ravel().astype(np.float64) + offset


def render_truth(primitives, cam: Camera, fallback: int) -> Tuple[DepthMap, LabelRaster]:
    """Exact depth and label at integer pixels (camera-frame z equals t for z = 1 directions)."""
    u, v = _pixel_grid(cam)
    t, lab = trace_scene(primitives, cam.center, _world_dirs(cam, u, v))
    hit = np.isfinite(t)
    depth = np.where(hit, t, 0.0)
    labels = np.where(hit, lab, fallback).astype(np.uint8)
    return DepthMap(cam.width, cam.height, depth), LabelRaster(cam.width, cam.height, labels)


def _sees(primitives, cam: Camera, X: np.ndarray) -> np.ndarray:
    pc = cam.to_camera(X)
    z = pc[:, 2]
    ok = z > 1e-9
    zs = np.where(ok, z, 1.0)
    u = cam.fx * pc[:, 0] / zs + cam.cx
    v = cam.fy * pc[:, 1] / zs + cam.cy
    ok &= (u >= -0.5) & (u <= cam.width - 0.5) & (v >= -0.5) & (v <= cam.height - 0.5)
    d = X - cam.center
    dist = np.linalg.norm(d, axis=1)
    t, _ = trace_scene(primitives, cam.center, d / dist[:, None])
    return ok & (np.abs(t - dist) <= 1e-6 * np.maximum(1.0, dist))


@dataclass
class SyntheticScene:
    cloud: LabeledCloud          # points with first_observer and visibility; true labels kept apart
    true_labels: np.ndarray
    cameras: CameraSet
    rasters: Dict[int, LabelRaster]
    depths: Dict[int, DepthMap]
    palette: Palette


def make_main_scene(seed: int = 0, noise: float = DEPTH_NOISE) -> SyntheticScene:
    """Ground + two walls + sphere seen by a ring of eight cameras (~20k points)."""
    prims = _main_primitives()
    cams = ring_cameras()
    rng = np.random.default_rng(seed)
    pts: List[np.ndarray] = []
    labs: List[np.ndarray] = []
    obs: List[np.ndarray] = []
    rasters, depths = {}, {}
    for cam in cams:
        depths[cam.id], rasters[cam.id] = render_truth(prims, cam, UNKNOWN)
        u, v = _pixel_grid(cam)
        u += rng.uniform(0.0, 1.0, len(u)) - 0.5
        v += rng.uniform(0.0, 1.0, len(v)) - 0.5
        d = _world_dirs(cam, u, v)
        d /= np.linalg.norm(d, axis=1)[:, None]
        t, lab = trace_scene(prims, cam.center, d)
        hit = np.isfinite(t)
        pts.append(cam.center + t[hit, None] * d[hit])
        labs.append(lab[hit])
        obs.append(np.full(int(hit.sum()), cam.id, dtype=np.int64))
    exact = np.concatenate(pts)
    labels = np.concatenate(labs)
    first = np.concatenate(obs)

    seen = np.stack([_sees(prims, cam, exact) for cam in cams], axis=1)
    seen[np.arange(len(exact)), first] = True
    visibility = tuple((int(f),) + tuple(int(c) for c in np.flatnonzero(row) if c != f)
                       for f, row in zip(first, seen))

    # depth noise along the generating ray
    centers = np.array([c.center for c in cams])[first]
    ray = exact - centers
    ray /= np.linalg.norm(ray, axis=1)[:, None]
    noisy = exact + rng.normal(0.0, noise, len(exact))[:, None] * ray
    cloud = LabeledCloud(noisy, first_observer=first, visibility=visibility)
    return SyntheticScene(cloud, labels, cams, rasters, depths, SCENE_PALETTE)


def write_scene(scene: SyntheticScene, outdir) -> Dict[str, str]:
    """Write the scene in the on-disk formats the CLI reads; returns the written paths."""
    os.makedirs(os.path.join(outdir, "rasters"), exist_ok=True)
    os.makedirs(os.path.join(outdir, "depth"), exist_ok=True)
    paths = {
        "cloud": os.path.join(outdir, "cloud.ply"),
        "cameras": os.path.join(outdir, "cameras.txt"),
        "visibility": os.path.join(outdir, "visibility.txt"),
        "palette": os.path.join(outdir, "palette.txt"),
        "rasters": os.path.join(outdir, "rasters"),
        "depth": os.path.join(outdir, "depth"),
    }
    write_ply(scene.cloud, paths["cloud"])
    write_cameras(scene.cameras, paths["cameras"])
    write_visibility(scene.cloud.visibility, paths["visibility"])
    write_palette(scene.palette, paths["palette"])
    for cam_id, r in scene.rasters.items():
        write_label_raster(r, os.path.join(paths["rasters"], f"cam_{cam_id}.pgm"))
    for cam_id, d in scene.depths.items():
        write_depth(d, os.path.join(paths["depth"], f"cam_{cam_id}.depth"))
    return paths


# ---------------------------------------------------------------------------
# property-test scenes

HALF_PLANE_PALETTE = Palette((LabelInfo(0, "left", True), LabelInfo(1, "right", True)))


def make_half_plane(seed: int = 0, extent: float = 2.0, spacing: float = 0.04,
                    jitter: float = 0.3, z_noise: float = 0.003) -> LabeledCloud:
    """Jittered grid on z = 0 over [-extent, extent]^2; label 0 for x < 0, label 1 otherwise.

    The true class boundary is the line x = 0.
    """
    rng = np.random.default_rng(seed)
    g = np.arange(-extent + spacing / 2, extent, spacing)
    X, Y = np.meshgrid(g, g, indexing="ij")
    xy = np.stack([X.ravel(), Y.ravel()], axis=1)
    xy += rng.uniform(-jitter, jitter, xy.shape) * spacing
    z = rng.normal(0.0, z_noise, len(xy))
    pts = np.column_stack([xy, z])
    return LabeledCloud(pts, labels=(pts[:, 0] >= 0).astype(np.uint8))


def make_hollow_cube(seed: int = 0, half: float = 2.0, per_side: int = 12,
                     noise: float = 0.002) -> Tuple[LabeledCloud, CameraSet]:
    """Points on the six faces of a cube seen by eight cameras placed inside it.

    Every point lists every camera as an observer.
    """
    rng = np.random.default_rng(seed)
    step = 2 * half / per_side
    g = -half + step * (np.arange(per_side) + 0.5)
    A, B = np.meshgrid(g, g, indexing="ij")
    a, b = A.ravel(), B.ravel()
    faces = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            f = np.empty((len(a), 3))
            o1, o2 = [i for i in range(3) if i != axis]
            f[:, axis] = sign * half
            f[:, o1] = a + rng.uniform(-0.2, 0.2, len(a)) * step
            f[:, o2] = b + rng.uniform(-0.2, 0.2, len(a)) * step
            f[:, axis] += rng.normal(0.0, noise, len(a))
            faces.append(f)
    pts = np.concatenate(faces)
    s = 0.4 * half
    eyes = [(x, y, z) for x in (-s, s) for y in (-s, s) for z in (-s, s)]
    cams = CameraSet(tuple(look_at(i, e, (-e[0], -e[1], -e[2] + 1e-3)) for i, e in enumerate(eyes)))
    vis = tuple(tuple(range(len(eyes))) for _ in range(len(pts)))
    return LabeledCloud(pts, visibility=vis), cams
