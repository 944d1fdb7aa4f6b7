"""Depth map rendering of triangle meshes.

Rays are cast through integer pixel coordinates in the camera frame with a
direction whose z component is 1, so the ray parameter of a hit is its
depth.  The BVH traversal and the brute-force loop call the same
intersection routine, which makes their outputs bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import Camera, DepthMap, TriMesh

HIT_EPS = 1e-9
LEAF_SIZE = 4


@njit(cache=True)
def _intersect(v0, v1, v2, d, kx, ky, kz, sx, sy, sz):
    """Watertight ray/triangle test (Woop, Benthin and Wald) for a ray from the origin.

    Returns the ray parameter of the hit or +inf.
    """
    ax = v0[kx] - sx * v0[kz]
    ay = v0[ky] - sy * v0[kz]
    bx = v1[kx] - sx * v1[kz]
    by = v1[ky] - sy * v1[kz]
    cx = v2[kx] - sx * v2[kz]
    cy = v2[ky] - sy * v2[kz]
    u = cx * by - cy * bx
    v = ax * cy - ay * cx
    w = bx * ay - by * ax
    if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
        return np.inf
    det = u + v + w
    if det == 0.0:
        return np.inf
    az = sz * v0[kz]
    bz = sz * v1[kz]
    cz = sz * v2[kz]
    t = (u * az + v * bz + w * cz) / det
    if t <= HIT_EPS:
        return np.inf
    return t


@njit(cache=True)
def _ray_setup(d):
    kz = 0
    if abs(d[1]) > abs(d[kz]):
        kz = 1
    if abs(d[2]) > abs(d[kz]):
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        kx, ky = ky, kx
    return kx, ky, kz, d[kx] / d[kz], d[ky] / d[kz], 1.0 / d[kz]


@njit(cache=True)
def _render_brute(tris, dirs, out):
    for p in range(len(dirs)):
        d = dirs[p]
        kx, ky, kz, sx, sy, sz = _ray_setup(d)
        best = np.inf
        for i in range(len(tris)):
            t = _intersect(tris[i, 0], tris[i, 1], tris[i, 2], d, kx, ky, kz, sx, sy, sz)
            if t < best:
                best = t
        out[p] = best


@njit(cache=True)
def _slab(lo, hi, inv, best):
    tmin = 0.0
    tmax = best
    for a in range(3):
        t0 = (lo[a]) * inv[a]
        t1 = (hi[a]) * inv[a]
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
    # inclusive so boundary hits are never culled
    return tmin <= tmax * (1.0 + 1e-12) + 1e-12


@njit(cache=True)
def _render_bvh(tris, order, lo, hi, left, right, start, count, dirs, out):
    stack = np.empty(128, dtype=np.int64)
    inv = np.empty(3)
    for p in range(len(dirs)):
        d = dirs[p]
        kx, ky, kz, sx, sy, sz = _ray_setup(d)
        for a in range(3):
            inv[a] = 1.0 / d[a] if d[a] != 0.0 else np.inf
        best = np.inf
        top = 0
        stack[top] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if not _slab(lo[node], hi[node], inv, best):
                continue
            if count[node] > 0:
                for q in range(start[node], start[node] + count[node]):
                    i = order[q]
                    t = _intersect(tris[i, 0], tris[i, 1], tris[i, 2], d, kx, ky, kz, sx, sy, sz)
                    if t < best:
                        best = t
            else:
                stack[top] = left[node]
                stack[top + 1] = right[node]
                top += 2
        out[p] = best


@dataclass(frozen=True, eq=False)
class BVH:
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray


def build_bvh(tris: np.ndarray, leaf_size: int = LEAF_SIZE) -> BVH:
    """Median-split BVH over triangle centroids (tris is (m, 3, 3))."""
    m = len(tris)
    tmin = tris.min(axis=1)
    tmax = tris.max(axis=1)
    cent = tris.mean(axis=1)
    order = np.arange(m, dtype=np.int64)
    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node():
        for lst, val in ((lo, None), (hi, None), (left, -1), (right, -1), (start, 0), (count, 0)):
            lst.append(val)
        return len(left) - 1

    root = new_node()
    work = [(root, 0, m)]
    while work:
        node, s, e = work.pop()
        idx = order[s:e]
        lo[node] = tmin[idx].min(axis=0) if e > s else np.zeros(3)
        hi[node] = tmax[idx].max(axis=0) if e > s else np.zeros(3)
        if e - s <= leaf_size:
            start[node], count[node] = s, e - s
            continue
        c = cent[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        srt = idx[np.argsort(c[:, axis], kind="stable")]
        order[s:e] = srt
        mid = s + (e - s) // 2
        ln, rn = new_node(), new_node()
        left[node], right[node] = ln, rn
        work.append((ln, s, mid))
        work.append((rn, mid, e))
    return BVH(np.array(lo, dtype=np.float64).reshape(-1, 3), np.array(hi, dtype=np.float64).reshape(-1, 3),
               np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
               np.array(start, dtype=np.int64), np.array(count, dtype=np.int64), order)


def pixel_directions(camera: Camera) -> np.ndarray:
    """Camera-frame ray directions (z = 1) through integer pixel coordinates, row-major."""
    v, u = np.mgrid[0:camera.height, 0:camera.width]
    x = (u.ravel() - camera.cx) / camera.fx
    y = (v.ravel() - camera.cy) / camera.fy
    return np.ascontiguousarray(np.stack([x, y, np.ones_like(x)], axis=1))


def _camera_triangles(mesh: TriMesh, camera: Camera) -> np.ndarray:
    vc = camera.to_camera(mesh.vertices)
    return np.ascontiguousarray(vc[mesh.triangles]) if len(mesh.triangles) else np.zeros((0, 3, 3))


def _to_depth(camera: Camera, t: np.ndarray) -> DepthMap:
    return DepthMap(camera.width, camera.height, np.where(np.isfinite(t), t, 0.0))


def render_depth(mesh: TriMesh, camera: Camera) -> DepthMap:
    """Depth of the nearest surface along every pixel ray; 0 where nothing is hit."""
    dirs = pixel_directions(camera)
    out = np.full(len(dirs), np.inf)
    tris = _camera_triangles(mesh, camera)
    if len(tris):
        bvh = build_bvh(tris)
        _render_bvh(tris, bvh.order, bvh.lo, bvh.hi, bvh.left, bvh.right, bvh.start, bvh.count, dirs, out)
    return _to_depth(camera, out)


def render_depth_brute(mesh: TriMesh, camera: Camera) -> DepthMap:
    """Reference renderer testing every triangle for every pixel."""
    dirs = pixel_directions(camera)
    out = np.full(len(dirs), np.inf)
    tris = _camera_triangles(mesh, camera)
    if len(tris):
        _render_brute(tris, dirs, out)
    return _to_depth(camera, out)
