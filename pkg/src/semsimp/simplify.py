"""Class-aware point decimation.

Four strategies share one driver: linear (LS), adaptive (AS), adaptive-class
(ACS) and probabilistic (PS).  Only points of simplifiable labels are ever
discarded, and every region is evaluated against the original cloud.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional

import numpy as np

from .geometry import (RANSAC_INLIER_THRESHOLD, RANSAC_ITERATIONS, ClassPlane, GeometryError,
                       distance_to_line, estimate_normals, fit_class_plane, fit_separator,
                       orient_normals, project_to_plane, ranking_score)
from .model import LabeledCloud, label_counts
from .spatial import (Region, RegionError, RegionSpec, SpatialIndex, build_index, class_stats,
                      extract_region, extract_regions)

log = logging.getLogger(__name__)

METHODS = ("ls", "as", "acs", "ps")

# probabilistic simplification constants
PS_REGION_DIVISOR = 8
BOUNDARY_FRACTION_THRESHOLD = 0.1

DEFAULT_TARGET = 0.4
DEFAULT_STRETCH = 1.0


class SimplifyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# conservation factors

def conservation_linear(D: float, D_mean: float, target: float) -> float:
    if not D_mean > 0:
        raise SimplifyError("average density must be positive")
    c = -(D_mean / target) * (D - D_mean) + target
    return min(1.0, max(0.0, c))


def sigmoid_f(x, w: float):
    x = np.asarray(x, dtype=np.float64)
    out = 0.5 + (w * x) / (2.0 * (1.0 + w * np.abs(x)))
    return float(out) if out.ndim == 0 else out


def sigmoid_f_inverse(y: float, w: float) -> float:
    s = 2.0 * y - 1.0
    return s / (w * (1.0 - abs(s)))


def calibrate_tau(D_mean: float, target: float, w: float) -> float:
    """Shift such that ``sigmoid_f(D_mean - tau, w) == target``."""
    if not 0.0 < target < 1.0:
        raise SimplifyError("target conservation must lie strictly between 0 and 1")
    return D_mean - sigmoid_f_inverse(target, w)


def conservation_adaptive(D: float, D_mean: float, target: float, w: float,
                          negate_density_axis: bool = False) -> float:
    tau = calibrate_tau(D_mean, target, w)
    if negate_density_axis:
        # mirror around D_mean so c(D_mean) stays at target
        return sigmoid_f(2.0 * D_mean - D - tau, w)
    return sigmoid_f(D - tau, w)


def conservation_adaptive_class(D: float, D_mean: float, target: float, w: float,
                                other_fraction: float, negate_density_axis: bool = False) -> float:
    if not 0.0 <= other_fraction <= 1.0:
        raise SimplifyError("class-mix fraction must lie in [0, 1]")
    f = conservation_adaptive(D, D_mean, target, w, negate_density_axis)
    return min(1.0, (1.0 + other_fraction) * f)


# ---------------------------------------------------------------------------
# probabilistic kernels

def prob_interior(p2d, center2d, D: float, D_mean: float, sigma: float):
    """Conservation probability growing with distance from the region center.

    One minus a peak-normalised isotropic Gaussian whose variance is
    ``(D / D_mean) * sigma**2``.
    """
    if not D_mean > 0:
        raise SimplifyError("average density must be positive")
    ratio = D / D_mean
    if not ratio > 0:
        raise SimplifyError("density ratio must be positive")
    d = np.asarray(p2d, dtype=np.float64) - np.asarray(center2d, dtype=np.float64)
    r2 = (d * d).sum(axis=-1)
    return 1.0 - np.exp(-r2 / (2.0 * ratio * sigma * sigma))


def prob_boundary(d_pb, sigma: float):
    """Peak-normalised Gaussian of the distance to the class boundary."""
    d = np.asarray(d_pb, dtype=np.float64)
    return np.exp(-d * d / (2.0 * sigma * sigma))


def boundary_indicator(other_fraction: float) -> int:
    """1 when the region is away from class boundaries, 0 near them."""
    return 0 if other_fraction >= BOUNDARY_FRACTION_THRESHOLD else 1


# ---------------------------------------------------------------------------
# configuration and results

@dataclass(frozen=True)
class SimplifyConfig:
    method: str
    region: RegionSpec
    target: float = DEFAULT_TARGET
    stretch: float = DEFAULT_STRETCH
    sigma: Optional[float] = None
    seed: int = 42
    simplifiable: FrozenSet[int] = frozenset()
    ransac_iterations: int = RANSAC_ITERATIONS
    ransac_threshold: float = RANSAC_INLIER_THRESHOLD
    negate_density_axis: bool = False

    def __post_init__(self):
        m = str(self.method).lower()
        if m not in METHODS:
            raise SimplifyError(f"unknown method {self.method!r}; choose one of {{{', '.join(METHODS)}}}")
        object.__setattr__(self, "method", m)
        object.__setattr__(self, "simplifiable", frozenset(int(i) for i in self.simplifiable))
        if not 0.0 < self.target < 1.0:
            raise SimplifyError("target conservation must lie strictly between 0 and 1")
        if not self.stretch > 0:
            raise SimplifyError("stretching factor must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise SimplifyError("sigma must be positive")

    def resolved_sigma(self, regions: Optional[List[Region]] = None, points=None) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        if self.region.mode == "radius":
            return 0.5 * self.region.radius
        # knn: half the median reach of the regions in use
        reach = [float(np.linalg.norm(points[r.member_indices[-1]] - points[r.center_index]))
                 for r in (regions or []) if r.size > 1]
        if not reach or not np.median(reach) > 0:
            raise SimplifyError("cannot derive sigma for knn regions; pass it explicitly")
        return 0.5 * float(np.median(reach))


@dataclass(frozen=True)
class RegionRecord:
    center: int
    label: int
    density: float
    mean_density: float
    other_fraction: float
    conservation: float  # c for ranked methods, mean P_c of same-class members for PS


@dataclass
class DecimationResult:
    keep: np.ndarray
    counts_before: Dict[int, int]
    counts_after: Dict[int, int]
    records: List[RegionRecord] = field(default_factory=list)
    planes: Dict[int, ClassPlane] = field(default_factory=dict)

    def apply(self, cloud: LabeledCloud) -> LabeledCloud:
        return cloud.subset(self.keep)

    def retention(self, label: int) -> float:
        before = self.counts_before.get(label, 0)
        return self.counts_after.get(label, 0) / before if before else 1.0


# ---------------------------------------------------------------------------
# ranked decimation (LS, AS, ACS)

def _conservation(cfg: SimplifyConfig, region: Region, D_mean: float) -> float:
    if cfg.method == "ls":
        return conservation_linear(region.density, D_mean, cfg.target)
    if cfg.method == "as":
        return conservation_adaptive(region.density, D_mean, cfg.target, cfg.stretch,
                                     cfg.negate_density_axis)
    return conservation_adaptive_class(region.density, D_mean, cfg.target, cfg.stretch,
                                       region.other_class_fraction, cfg.negate_density_axis)


def decimate_ranked(cloud: LabeledCloud, plane: ClassPlane, config: SimplifyConfig,
                    normals: np.ndarray, index: Optional[SpatialIndex] = None,
                    regions: Optional[List[Region]] = None):
    """Discard the worst-ranked same-class members of every region of one class.

    Returns ``(discard_mask, records)``.  A point is discarded as soon as any
    region discards it.
    """
    if config.method not in ("ls", "as", "acs"):
        raise SimplifyError("decimate_ranked handles ls, as and acs only")
    label = plane.label
    labels = cloud.labels
    index = index or build_index(cloud)
    if regions is None:
        regions = extract_regions(index, np.flatnonzero(labels == label), config.region, cloud)
    try:
        stats = class_stats(cloud, config.region, label, regions=regions)
    except RegionError as exc:
        raise SimplifyError(str(exc)) from None

    has_normal = np.isfinite(normals[:, 0])
    oriented = orient_normals(np.where(has_normal[:, None], normals, 0.0), plane.normal)
    scores = ranking_score(oriented, plane.normal)

    discard = np.zeros(len(cloud), dtype=bool)
    records = []
    for region in regions:
        if region.degenerate:
            continue
        c = _conservation(config, region, stats.mean_density)
        records.append(RegionRecord(region.center_index, label, region.density,
                                    stats.mean_density, region.other_class_fraction, c))
        mem = region.member_indices
        mem = np.sort(mem[(labels[mem] == label) & has_normal[mem]])
        m = len(mem)
        n_drop = int(math.floor((1.0 - c) * m))
        if n_drop <= 0:
            continue
        order = np.lexsort((mem, scores[mem]))  # score ascending, id breaks ties
        discard[mem[order[m - n_drop:]]] = True
    return discard, records


# ---------------------------------------------------------------------------
# probabilistic decimation (PS)

def ps_region_count(class_size: int) -> int:
    return class_size // PS_REGION_DIVISOR


def decimate_probabilistic(cloud: LabeledCloud, plane: ClassPlane, config: SimplifyConfig,
                           normals: np.ndarray, index: Optional[SpatialIndex] = None,
                           rng: Optional[np.random.Generator] = None):
    """Randomly discard same-class points of sampled regions.

    Regions far from other classes keep points with a probability that grows
    away from the region center; regions touching other classes keep points
    close to the fitted in-plane class boundary.  One random stream feeds both
    center sampling and the per-point draws, in a fixed order.
    """
    label = plane.label
    labels = cloud.labels
    index = index or build_index(cloud)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    class_idx = np.flatnonzero(labels == label)
    n_regions = ps_region_count(len(class_idx))
    discard = np.zeros(len(cloud), dtype=bool)
    if n_regions == 0:
        return discard, []
    centers = rng.choice(class_idx, size=n_regions, replace=False)
    regions = extract_regions(index, centers, config.region, cloud)
    try:
        stats = class_stats(cloud, config.region, label, regions=regions)
    except RegionError as exc:
        raise SimplifyError(str(exc)) from None
    sigma = config.resolved_sigma(regions, cloud.points)
    has_normal = np.isfinite(normals[:, 0])

    records = []
    for region in regions:
        if region.degenerate:
            continue
        mem = region.member_indices
        same = np.sort(mem[labels[mem] == label])
        p2d = project_to_plane(cloud.points[same], plane)
        p_c = None
        if boundary_indicator(region.other_class_fraction) == 0:
            all2d = project_to_plane(cloud.points[mem], plane)
            try:
                sep = fit_separator(all2d, labels[mem] == label, seed=config.seed)
                p_c = prob_boundary(distance_to_line(p2d, sep), sigma)
            except GeometryError:
                log.debug("region %d: separator failed, using interior kernel", region.center_index)
        if p_c is None:
            if not region.density > 0:
                continue
            center2d = project_to_plane(cloud.points[region.center_index], plane)
            p_c = prob_interior(p2d, center2d, region.density, stats.mean_density, sigma)
        draws = rng.random(len(same))
        drop = (draws > p_c) & has_normal[same]
        discard[same[drop]] = True
        records.append(RegionRecord(region.center_index, label, region.density, stats.mean_density,
                                    region.other_class_fraction, float(np.mean(p_c))))
    return discard, records


# ---------------------------------------------------------------------------
# driver

def simplify(cloud: LabeledCloud, config: SimplifyConfig,
             normals: Optional[np.ndarray] = None) -> DecimationResult:
    """Run the configured strategy over every simplifiable class present in the cloud."""
    if cloud.labels is None:
        raise SimplifyError("cloud has no label property; run labeling first")
    index = build_index(cloud)
    if normals is None:
        normals = cloud.normals if cloud.normals is not None else estimate_normals(cloud, config.region, index)
    present = sorted(set(np.unique(cloud.labels).tolist()))
    discard = np.zeros(len(cloud), dtype=bool)
    records: List[RegionRecord] = []
    planes: Dict[int, ClassPlane] = {}
    for label in present:
        if label not in config.simplifiable:
            continue
        try:
            plane = fit_class_plane(cloud, label, config.ransac_iterations,
                                    config.ransac_threshold, seed=_sub_seed(config.seed, label, 0))
        except GeometryError as exc:
            raise SimplifyError(str(exc)) from None
        planes[label] = plane
        if config.method == "ps":
            rng = np.random.default_rng(_sub_seed(config.seed, label, 1))
            d, recs = decimate_probabilistic(cloud, plane, config, normals, index, rng)
        else:
            d, recs = decimate_ranked(cloud, plane, config, normals, index)
        discard |= d
        records.extend(recs)
        log.info("class %d: %d of %d points discarded", label,
                 int(np.count_nonzero(d)), int(np.count_nonzero(cloud.labels == label)))
    keep = ~discard
    ids = present
    return DecimationResult(keep, label_counts(cloud.labels, ids),
                            label_counts(cloud.labels[keep], ids), records, planes)


def _sub_seed(seed: int, label: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & (2 ** 64 - 1), int(label), int(stream)])
