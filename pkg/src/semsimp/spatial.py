"""Exact neighborhood queries and region statistics.

Queries run on a scipy kd-tree for candidate generation; the final member
set and its order are decided from squared distances computed here, so
results are identical to a brute-force scan using the same formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .model import LabeledCloud

MIN_REGION_AREA = 1e-12
MIN_REGION_MEMBERS = 3


class RegionError(ValueError):
    pass


@dataclass(frozen=True)
class RegionSpec:
    mode: str  # "knn" or "radius"
    k: int = 0
    radius: float = 0.0

    def __post_init__(self):
        if self.mode == "knn":
            if int(self.k) < 3:
                raise RegionError("knn regions need k >= 3")
        elif self.mode == "radius":
            if not self.radius > 0:
                raise RegionError("radius regions need radius > 0")
        else:
            raise RegionError(f"unknown region mode {self.mode!r}; expected 'knn' or 'radius'")

    @classmethod
    def knn(cls, k: int) -> "RegionSpec":
        return cls("knn", k=int(k))

    @classmethod
    def sphere(cls, radius: float) -> "RegionSpec":
        return cls("radius", radius=float(radius))


@dataclass(frozen=True, eq=False)
class Region:
    center_index: int
    member_indices: np.ndarray  # ordered by (distance, id), center first
    density: float
    area: float
    other_class_fraction: float
    degenerate: bool = False

    @property
    def size(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class ClassStats:
    label: int
    mean_density: float
    region_count: int


def _order(d2: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.lexsort((idx, d2))


class SpatialIndex:
    """kd-tree over the points of a cloud with exact, deterministic queries."""

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(pts) == 0:
            raise RegionError("cannot index an empty cloud")
        self.points = pts
        self._tree = cKDTree(pts)

    def __len__(self):
        return len(self.points)

    def _sqdist(self, idx: np.ndarray, q: np.ndarray) -> np.ndarray:
        diff = self.points[idx] - q
        return (diff * diff).sum(axis=1)

    def radius(self, q, r: float):
        """Indices within distance ``r`` (inclusive) of ``q`` and their squared distances."""
        q = np.asarray(q, dtype=np.float64)
        cand = np.asarray(self._tree.query_ball_point(q, r * (1 + 1e-9) + 1e-12), dtype=np.int64)
        d2 = self._sqdist(cand, q)
        keep = d2 <= r * r
        cand, d2 = cand[keep], d2[keep]
        o = _order(d2, cand)
        return cand[o], d2[o]

    def knn(self, q, k: int):
        """The ``k`` nearest indices to ``q``; ties at equal distance go to the lower id."""
        q = np.asarray(q, dtype=np.float64)
        k = min(int(k), len(self.points))
        dist, _ = self._tree.query(q, k=k)
        kth = float(np.atleast_1d(dist)[-1])
        cand = np.asarray(self._tree.query_ball_point(q, kth * (1 + 1e-9) + 1e-12), dtype=np.int64)
        d2 = self._sqdist(cand, q)
        o = _order(d2, cand)[:k]
        return cand[o], d2[o]

    def neighbors(self, center: int, spec: RegionSpec) -> np.ndarray:
        q = self.points[center]
        if spec.mode == "radius":
            return self.radius(q, spec.radius)[0]
        return self.knn(q, spec.k)[0]


def build_index(cloud: LabeledCloud) -> SpatialIndex:
    return SpatialIndex(cloud.points)


def region_area(points: np.ndarray, spec: RegionSpec) -> float:
    """Flat-surface area of a region.

    Radius regions use the disc of the search radius.  KNN regions use the
    largest face of the axis-aligned box around the members.
    """
    if spec.mode == "radius":
        return math.pi * spec.radius ** 2
    ext = points.max(axis=0) - points.min(axis=0)
    return float(max(ext[0] * ext[1], ext[0] * ext[2], ext[1] * ext[2]))


def extract_region(index: SpatialIndex, center: int, spec: RegionSpec,
                   cloud: LabeledCloud) -> Region:
    if not 0 <= center < len(index):
        raise RegionError(f"center {center} out of range")
    members = index.neighbors(center, spec)
    degenerate = False
    if spec.mode == "knn" and len(index) < spec.k:
        degenerate = True
    area = region_area(index.points[members], spec)
    if area < MIN_REGION_AREA or len(members) < MIN_REGION_MEMBERS:
        degenerate = True
    density = len(members) / area if area > 0 else 0.0
    if cloud.labels is not None:
        other = float(np.count_nonzero(cloud.labels[members] != cloud.labels[center])) / len(members)
    else:
        other = 0.0
    return Region(int(center), members, float(density), float(area), other, degenerate)


def extract_regions(index: SpatialIndex, centers: Sequence[int], spec: RegionSpec,
                    cloud: LabeledCloud) -> List[Region]:
    return [extract_region(index, int(c), spec, cloud) for c in centers]


def class_stats(cloud: LabeledCloud, spec: RegionSpec, label: int,
                regions: Optional[Sequence[Region]] = None,
                index: Optional[SpatialIndex] = None) -> ClassStats:
    """Average region density of one class.

    By default regions are centered on every point carrying ``label``;
    callers that sample centers pass their own ``regions``.
    """
    if regions is None:
        if cloud.labels is None:
            raise RegionError("class statistics need a labeled cloud")
        index = index or build_index(cloud)
        centers = np.flatnonzero(cloud.labels == label)
        regions = extract_regions(index, centers, spec, cloud)
    dens = [r.density for r in regions if not r.degenerate]
    if not dens:
        raise RegionError(f"class {label} has no measurable density")
    return ClassStats(int(label), float(np.mean(dens)), len(dens))
