"""Normals, class planes and the in-plane class boundary separator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import LabeledCloud
from .spatial import RegionSpec, SpatialIndex, build_index

RANSAC_ITERATIONS = 256
RANSAC_INLIER_THRESHOLD = 0.05
_TIE_EPS = 1e-12


class GeometryError(ValueError):
    pass


def canonical_sign(n: np.ndarray) -> np.ndarray:
    """Flip vectors so z >= 0; ties fall back to y >= 0, then x >= 0.

    Works on a single vector or an (m, 3) stack.
    """
    n = np.asarray(n, dtype=np.float64)
    v = np.atleast_2d(n)
    flip = (v[:, 2] < -_TIE_EPS) | (
        (np.abs(v[:, 2]) <= _TIE_EPS) & ((v[:, 1] < -_TIE_EPS) | (
            (np.abs(v[:, 1]) <= _TIE_EPS) & (v[:, 0] < 0))))
    out = np.where(flip[:, None], -v, v)
    return out[0] if n.ndim == 1 else out


def _smallest_eigvec(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    return V[..., :, 0]


def estimate_normals(cloud: LabeledCloud, spec: RegionSpec,
                     index: Optional[SpatialIndex] = None) -> np.ndarray:
    """Tangent-plane normals from the covariance of each point's region.

    Returns an (n, 3) array of unit normals with canonical sign.  Rows for
    points whose region has fewer than three members are NaN: those points
    have no normal and are never ranked.
    """
    index = index or build_index(cloud)
    pts = cloud.points
    n = len(pts)
    covs = np.zeros((n, 3, 3))
    valid = np.zeros(n, dtype=bool)
    for i in range(n):
        members = index.neighbors(i, spec)
        if len(members) < 3:
            continue
        q = pts[members]
        d = q - q.mean(axis=0)
        covs[i] = d.T @ d / len(members)
        valid[i] = True
    normals = np.full((n, 3), np.nan)
    if valid.any():
        normals[valid] = canonical_sign(_smallest_eigvec(covs[valid]))
    return normals


def orient_normals(normals: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip each normal into the half-space of ``reference`` (n . ref >= 0)."""
    normals = np.asarray(normals, dtype=np.float64)
    s = normals @ np.asarray(reference, dtype=np.float64)
    return np.where((s < 0)[..., None], -normals, normals)


def ranking_score(n_i, n_l):
    """Squared distance between a point normal and the class normal.

    Accepts single vectors or (m, 3) stacks for ``n_i``.  Callers orient
    ``n_i`` towards ``n_l`` first.
    """
    d = np.asarray(n_i, dtype=np.float64) - np.asarray(n_l, dtype=np.float64)
    return (d * d).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class ClassPlane:
    label: int
    normal: np.ndarray
    offset: float  # plane is {x : normal . x == offset}
    u: np.ndarray
    v: np.ndarray
    inliers: int = 0

    @property
    def origin(self) -> np.ndarray:
        return self.offset * self.normal


def plane_basis(normal: np.ndarray):
    """Orthonormal in-plane axes; the first comes from the coordinate axis least aligned with ``normal``."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    u = e - (e @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    v /= np.linalg.norm(v)
    return u, v


def make_plane(label: int, normal, offset: float, inliers: int = 0) -> ClassPlane:
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    u, v = plane_basis(n)
    return ClassPlane(int(label), n, float(offset), u, v, int(inliers))


def _lsq_plane(pts: np.ndarray):
    c = pts.mean(axis=0)
    d = pts - c
    n = canonical_sign(_smallest_eigvec(d.T @ d))
    return n, float(n @ c)


def fit_class_plane(cloud: LabeledCloud, label: int, iterations: int = RANSAC_ITERATIONS,
                    inlier_threshold: float = RANSAC_INLIER_THRESHOLD, seed: int = 0) -> ClassPlane:
    """RANSAC plane over all points of one class, refined by least squares on the inliers."""
    if cloud.labels is None:
        raise GeometryError("plane fitting needs a labeled cloud")
    pts = cloud.points[cloud.labels == label]
    if len(pts) < 3:
        raise GeometryError(f"class {label} has fewer than 3 points")
    rng = np.random.default_rng(seed)
    scale = max(float(np.ptp(pts, axis=0).max()), 1.0)
    best_count, best_mask = -1, None
    for _ in range(int(iterations)):
        a, b, c = pts[rng.choice(len(pts), 3, replace=False)]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm <= 1e-12 * scale * scale:
            continue
        n /= norm
        mask = np.abs(pts @ n - n @ a) <= inlier_threshold
        count = int(np.count_nonzero(mask))
        if count > best_count:
            best_count, best_mask = count, mask
    if best_mask is None:
        raise GeometryError(f"class {label}: every RANSAC sample was degenerate")
    inl = pts[best_mask]
    if len(inl) >= 3:
        n, off = _lsq_plane(inl)
    else:
        n, off = _lsq_plane(pts)
    return make_plane(label, n, off, best_count)


def project_to_plane(points, plane: ClassPlane) -> np.ndarray:
    """2D coordinates of points in the plane's (u, v) frame."""
    p = np.asarray(points, dtype=np.float64) - plane.origin
    return np.stack([p @ plane.u, p @ plane.v], axis=-1)


def lift_from_plane(coords, plane: ClassPlane) -> np.ndarray:
    c = np.asarray(coords, dtype=np.float64)
    return plane.origin + c[..., :1] * plane.u + c[..., 1:2] * plane.v


@dataclass(frozen=True, eq=False)
class Separator2D:
    w: np.ndarray
    b: float

    def decision(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.w + self.b


def _hinge_objective(z, y, w, b, lam):
    margins = y * (z @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.maximum(0.0, 1.0 - margins).mean())


def fit_separator(points2d, labels, iterations: int = 300, regularization: float = 1e-3,
                  seed: int = 0) -> Separator2D:
    """Linear max-margin separator by full-batch sub-gradient descent on the hinge loss.

    Coordinates are centered and scaled before training; the step size is
    ``1/sqrt(t+1)`` from zero initialisation and the iterate with the lowest
    objective is returned.  ``labels`` are booleans; ``True`` maps to the
    positive side.  ``seed`` is accepted for interface stability; the
    procedure draws no random numbers.
    """
    x = np.asarray(points2d, dtype=np.float64).reshape(-1, 2)
    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    if len(x) != len(y):
        raise GeometryError("points and labels differ in length")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise GeometryError("no boundary: separator needs both classes")
    center = x.mean(axis=0)
    z = x - center
    scale = float(np.sqrt((z * z).sum(axis=1).mean()))
    if scale <= 0:
        raise GeometryError("no boundary: all points coincide")
    z /= scale
    lam = float(regularization)
    w = np.zeros(2)
    b = 0.0
    best = (_hinge_objective(z, y, w, b, lam), w.copy(), b)
    m = len(y)
    for t in range(int(iterations)):
        active = y * (z @ w + b) < 1.0
        gw = lam * w - (y[active, None] * z[active]).sum(axis=0) / m
        gb = -y[active].sum() / m
        eta = 1.0 / np.sqrt(t + 1.0)
        w = w - eta * gw
        b = b - eta * gb
        obj = _hinge_objective(z, y, w, b, lam)
        if obj < best[0]:
            best = (obj, w.copy(), b)
    _, w, b = best
    if not np.any(w):
        raise GeometryError("no boundary: descent did not leave the zero separator")
    w_x = w / scale
    return Separator2D(w_x, float(b - w_x @ center))


def distance_to_line(point2d, sep: Separator2D):
    p = np.asarray(point2d, dtype=np.float64)
    return np.abs(p @ sep.w + sep.b) / np.linalg.norm(sep.w)
