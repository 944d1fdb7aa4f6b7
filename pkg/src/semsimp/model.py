"""Core data types shared by every stage of the pipeline.

Arrays held by these types are marked read-only after construction so the
objects can be shared freely between stages without defensive copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

ORTHONORMAL_TOL = 1e-6
UNIT_NORMAL_TOL = 1e-6


class ValidationError(ValueError):
    """An object violates one of its type invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabelInfo:
    id: int
    name: str
    simplifiable: bool


@dataclass(frozen=True)
class Palette:
    """Mapping label id -> (name, simplifiable flag)."""

    labels: Tuple[LabelInfo, ...]

    def __post_init__(self):
        ids = [lab.id for lab in self.labels]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate label id in palette")
        for lab in self.labels:
            if not 0 <= lab.id <= 255:
                raise ValidationError(f"label id {lab.id} outside 0..255")

    def __contains__(self, label_id) -> bool:
        return any(lab.id == int(label_id) for lab in self.labels)

    def __getitem__(self, label_id) -> LabelInfo:
        for lab in self.labels:
            if lab.id == int(label_id):
                return lab
        raise KeyError(label_id)

    @property
    def ids(self) -> List[int]:
        return [lab.id for lab in self.labels]

    @property
    def simplifiable(self) -> frozenset:
        return frozenset(lab.id for lab in self.labels if lab.simplifiable)

    def name(self, label_id) -> str:
        return self[label_id].name


@dataclass(frozen=True, eq=False)
class LabeledCloud:
    """Points with optional per-point label, normal, first observer and visibility.

    Point order is the identity of every point downstream; nothing in the
    package reorders a cloud.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None
    first_observer: Optional[np.ndarray] = None
    visibility: Optional[Tuple[Tuple[int, ...], ...]] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("cloud contains non-finite coordinates")
        n = len(pts)
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (n,):
                raise ValidationError("labels length differs from point count")
            if labels.size and (labels.min() < 0 or labels.max() > 255):
                raise ValidationError("label ids must fit in 8 bits")
            object.__setattr__(self, "labels", _frozen(labels.astype(np.uint8)))
        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(normals) != n:
                raise ValidationError("normals length differs from point count")
            norms = np.linalg.norm(normals, axis=1)
            if not np.all(np.abs(norms - 1.0) <= UNIT_NORMAL_TOL):
                raise ValidationError("normals must have unit length")
            object.__setattr__(self, "normals", _frozen(normals))
        if self.first_observer is not None:
            fo = np.asarray(self.first_observer, dtype=np.int64)
            if fo.shape != (n,):
                raise ValidationError("first_observer length differs from point count")
            object.__setattr__(self, "first_observer", _frozen(fo))
        if self.visibility is not None:
            vis = tuple(tuple(int(c) for c in row) for row in self.visibility)
            if len(vis) != n:
                raise ValidationError("visibility length differs from point count")
            object.__setattr__(self, "visibility", vis)

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, keep) -> "LabeledCloud":
        """Return the points selected by a boolean mask or index array, order preserved."""
        keep = np.asarray(keep)
        idx = np.flatnonzero(keep) if keep.dtype == bool else np.sort(keep)
        return LabeledCloud(
            points=self.points[idx],
            labels=None if self.labels is None else self.labels[idx],
            normals=None if self.normals is None else self.normals[idx],
            first_observer=None if self.first_observer is None else self.first_observer[idx],
            visibility=None if self.visibility is None else tuple(self.visibility[i] for i in idx),
        )

    def replace(self, **changes) -> "LabeledCloud":
        fields_ = dict(points=self.points, labels=self.labels, normals=self.normals,
                       first_observer=self.first_observer, visibility=self.visibility)
        fields_.update(changes)
        return LabeledCloud(**fields_)


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera; ``R`` and ``t`` map world points into the camera frame."""

    id: int
    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValidationError(f"camera {self.id}: non-finite pose")
        if np.abs(R.T @ R - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValidationError(f"camera {self.id}: rotation is not orthonormal")
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"camera {self.id}: focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValidationError(f"camera {self.id}: image size must be positive")
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "t", _frozen(t))

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    def to_camera(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.R.T + self.t


@dataclass(frozen=True)
class CameraSet:
    cameras: Tuple[Camera, ...]

    def __post_init__(self):
        ids = [c.id for c in self.cameras]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate camera id")

    def __getitem__(self, cam_id) -> Camera:
        for c in self.cameras:
            if c.id == int(cam_id):
                return c
        raise KeyError(cam_id)

    def __contains__(self, cam_id) -> bool:
        return any(c.id == int(cam_id) for c in self.cameras)

    def __iter__(self):
        return iter(self.cameras)

    def __len__(self):
        return len(self.cameras)

    @property
    def ids(self) -> List[int]:
        return [c.id for c in self.cameras]


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertices")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError("triangle index out of range")
        if f.size and np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValidationError("degenerate triangle (repeated vertex)")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "triangles", _frozen(f))

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (self.vertices.shape == other.vertices.shape
                and np.array_equal(self.triangles, other.triangles)
                and np.allclose(self.vertices, other.vertices, rtol=0, atol=1e-9))

    def edges(self) -> np.ndarray:
        """Undirected edges, one row per (triangle, edge) incidence, sorted per row."""
        f = self.triangles
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.sort(e, axis=1)

    def euler_characteristic(self) -> int:
        e = self.edges()
        n_edges = len(np.unique(e, axis=0)) if len(e) else 0
        used = len(np.unique(self.triangles)) if len(self.triangles) else 0
        return used - n_edges + len(self.triangles)


@dataclass(frozen=True, eq=False)
class LabelRaster:
    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.size != self.width * self.height:
            raise ValidationError("raster data length differs from width*height")
        object.__setattr__(self, "data", _frozen(d.reshape(self.height, self.width).astype(np.uint8)))

    def check_palette(self, palette: Palette):
        missing = sorted(set(np.unique(self.data).tolist()) - set(palette.ids))
        if missing:
            raise ValidationError(f"raster uses label ids absent from palette: {missing}")


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Row-major depth in meters; non-positive values mark invalid pixels."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.size != self.width * self.height:
            raise ValidationError("depth data length differs from width*height")
        if not np.all(np.isfinite(d)):
            raise ValidationError("depth map contains non-finite values")
        object.__setattr__(self, "data", _frozen(d.reshape(self.height, self.width)))

    @property
    def valid(self) -> np.ndarray:
        return self.data > 0


def label_counts(labels: Optional[np.ndarray], ids: Iterable[int]) -> Dict[int, int]:
    if labels is None:
        return {int(i): 0 for i in ids}
    return {int(i): int(np.count_nonzero(labels == i)) for i in ids}
