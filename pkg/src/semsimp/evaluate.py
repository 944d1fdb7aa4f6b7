"""Depth RMSE against ground truth and cloud/mesh bookkeeping."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .io import format_off
from .model import CameraSet, DepthMap, LabeledCloud, Palette, TriMesh
from .render import render_depth


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class DepthError:
    rmse: float
    valid: int
    sse: float


def depth_rmse(rendered: DepthMap, truth: DepthMap) -> DepthError:
    """RMSE over pixels valid (positive) in both maps."""
    if (rendered.width, rendered.height) != (truth.width, truth.height):
        raise EvaluationError("depth maps differ in size")
    both = rendered.valid & truth.valid
    n = int(np.count_nonzero(both))
    if n == 0:
        raise EvaluationError("no pixel is valid in both depth maps")
    diff = rendered.data[both] - truth.data[both]
    sse = float(diff @ diff)
    return DepthError(math.sqrt(sse / n), n, sse)


@dataclass(frozen=True)
class ClassRow:
    label: int
    name: str
    before: int
    after: int

    @property
    def retention(self) -> float:
        return self.after / self.before if self.before else 1.0


def cloud_stats(before: LabeledCloud, after: LabeledCloud, palette: Palette) -> List[ClassRow]:
    """Per-label point counts before and after simplification, in palette order."""
    rows = []
    for lab in palette.labels:
        b = int(np.count_nonzero(before.labels == lab.id)) if before.labels is not None else 0
        a = int(np.count_nonzero(after.labels == lab.id)) if after.labels is not None else 0
        rows.append(ClassRow(lab.id, lab.name, b, a))
    return rows


def stats_table(rows: Sequence[ClassRow]) -> str:
    tb = sum(r.before for r in rows)
    ta = sum(r.after for r in rows)
    lines = [f"{'id':>4} {'class':<16} {'before':>10} {'after':>10} {'retention':>10}"]
    for r in rows:
        lines.append(f"{r.label:>4} {r.name:<16} {r.before:>10} {r.after:>10} {r.retention:>10.4f}")
    total = ta / tb if tb else 1.0
    lines.append(f"{'':>4} {'total':<16} {tb:>10} {ta:>10} {total:>10.4f}")
    return "\n".join(lines) + "\n"


def stats_csv(rows: Sequence[ClassRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "name", "before", "after", "retention"])
    for r in rows:
        w.writerow([r.label, r.name, r.before, r.after, repr(r.retention)])
    return buf.getvalue()


def parse_stats_csv(text: str) -> List[ClassRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(ClassRow(int(rec["label"]), rec["name"], int(rec["before"]), int(rec["after"])))
    return rows


def off_size(mesh: TriMesh) -> int:
    """Bytes of the mesh serialized as uncompressed ASCII OFF."""
    return len(format_off(mesh).encode("ascii"))


@dataclass
class EvalReport:
    per_camera: Dict[int, DepthError] = field(default_factory=dict)
    n_vertices: int = 0
    n_triangles: int = 0
    off_bytes: int = 0
    class_rows: List[ClassRow] = field(default_factory=list)

    @property
    def valid(self) -> int:
        return sum(e.valid for e in self.per_camera.values())

    @property
    def global_rmse(self) -> float:
        """Pooled over every jointly valid pixel of every camera."""
        n = self.valid
        if n == 0:
            return float("nan")
        return math.sqrt(sum(e.sse for e in self.per_camera.values()) / n)

    def text(self) -> str:
        lines = [f"mesh: {self.n_vertices} vertices, {self.n_triangles} triangles, {self.off_bytes} bytes (OFF)",
                 f"global depth RMSE: {self.global_rmse:.6f} m over {self.valid} pixels"]
        for cam, e in sorted(self.per_camera.items()):
            lines.append(f"  camera {cam}: RMSE {e.rmse:.6f} m over {e.valid} pixels")
        if self.class_rows:
            lines.append("")
            lines.append(stats_table(self.class_rows).rstrip("\n"))
        return "\n".join(lines) + "\n"


def evaluate_mesh(mesh: TriMesh, cameras: CameraSet, truth: Mapping[int, DepthMap],
                  rendered: Optional[Dict[int, DepthMap]] = None) -> EvalReport:
    """Render (unless given) and score every camera that has a ground-truth map.

    Cameras where nothing is jointly valid are skipped.
    """
    report = EvalReport(n_vertices=len(mesh.vertices), n_triangles=len(mesh.triangles),
                        off_bytes=off_size(mesh))
    for cam in cameras:
        if cam.id not in truth:
            continue
        r = rendered[cam.id] if rendered is not None else render_depth(mesh, cam)
        try:
            report.per_camera[cam.id] = depth_rmse(r, truth[cam.id])
        except EvaluationError:
            continue
    if not report.per_camera:
        raise EvaluationError("no camera has jointly valid depth")
    return report
