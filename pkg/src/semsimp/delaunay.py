"""Visibility-consistent manifold reconstruction on a 3D Delaunay triangulation.

The triangulation covers the input points plus the eight corners of an
enlarged bounding box, so every camera center lies inside it.  Visibility
rays vote free space into the cells they cross and matter into the cells
just behind each point.  The surface is the boundary of a region grown
greedily from the most voted cell, accepting a cell only if the boundary
stays a 2-manifold.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy.spatial import Delaunay, QhullError

from .model import CameraSet, LabeledCloud, TriMesh

log = logging.getLogger(__name__)

SIGMA_FREE = 0.05
SIGMA_MATTER = 0.01
MATTER_EXTENSION_FACTOR = 10.0
N_BOX_VERTICES = 8

_FACE_VERTS = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


class DelaunayError(ValueError):
    pass


@dataclass(eq=False)
class TetMesh:
    """Tetrahedralization with per-cell visibility accumulators.

    ``neighbors[c, j]`` is the cell across the face opposite ``cells[c, j]``
    (-1 on the hull).  Vertices ``n_input ..`` are the bounding box corners.
    """

    vertices: np.ndarray
    cells: np.ndarray
    neighbors: np.ndarray
    n_input: int
    vertex_of_point: np.ndarray  # input point -> triangulation vertex
    mu_free: np.ndarray = field(default=None)
    mu_matter: np.ndarray = field(default=None)
    inside: np.ndarray = field(default=None)

    def __post_init__(self):
        m = len(self.cells)
        if self.mu_free is None:
            self.mu_free = np.zeros(m)
        if self.mu_matter is None:
            self.mu_matter = np.zeros(m)
        if self.inside is None:
            self.inside = np.zeros(m, dtype=bool)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def touches_box(self) -> np.ndarray:
        return np.any(self.cells >= self.n_input, axis=1)

    @cached_property
    def on_hull(self) -> np.ndarray:
        """Cells with a face on the convex hull (adjacent to the unbounded exterior)."""
        return np.any(self.neighbors < 0, axis=1)

    @cached_property
    def finite_cells(self) -> np.ndarray:
        return self.cells[~self.touches_box]

    @cached_property
    def face_planes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unit outward face normals (m, 4, 3) and offsets (m, 4)."""
        v = self.vertices
        c = self.cells
        fv = c[:, _FACE_VERTS]  # (m, 4, 3)
        a, b, d = v[fv[..., 0]], v[fv[..., 1]], v[fv[..., 2]]
        n = np.cross(b - a, d - a)
        s = np.einsum("mjk,mjk->mj", n, v[c] - a)
        n = np.where((s > 0)[..., None], -n, n)
        norm = np.linalg.norm(n, axis=2)
        n = n / np.where(norm > 0, norm, 1.0)[..., None]
        off = np.einsum("mjk,mjk->mj", n, a)
        return np.ascontiguousarray(n), np.ascontiguousarray(off)

    @cached_property
    def star(self) -> Tuple[np.ndarray, np.ndarray]:
        """CSR lists of the cells incident to each vertex."""
        flat = self.cells.ravel()
        order = np.argsort(flat, kind="stable")
        ptr = np.zeros(len(self.vertices) + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat, minlength=len(self.vertices)), out=ptr[1:])
        return ptr, (order // 4).astype(np.int64)

    def reset_weights(self):
        self.mu_free[:] = 0.0
        self.mu_matter[:] = 0.0
        self.inside[:] = False


def bounding_box_corners(points: np.ndarray, extra: Optional[np.ndarray] = None,
                         margin: float = 1.0) -> np.ndarray:
    """Corners of the box around ``points`` (and ``extra``) grown by ``margin`` times its size."""
    allp = points if extra is None or len(extra) == 0 else np.vstack([points, extra])
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    size = max(float((hi - lo).max()), 1.0)
    lo = lo - margin * size
    hi = hi + margin * size
    return np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])


def build_delaunay(points, extra_bounds: Optional[np.ndarray] = None, margin: float = 1.0) -> TetMesh:
    """Delaunay tetrahedralization of ``points`` plus eight bounding box corners.

    ``extra_bounds`` (typically camera centers) only enlarge the box.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise DelaunayError("need at least 4 points")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise DelaunayError("all points are coplanar")
    corners = bounding_box_corners(pts, extra_bounds, margin)
    allp = np.vstack([pts, corners])
    try:
        tri = Delaunay(allp)
    except QhullError as exc:
        raise DelaunayError(f"triangulation failed: {exc}") from None
    cells = tri.simplices.astype(np.int64)
    neighbors = tri.neighbors.astype(np.int64)
    alias = np.arange(len(allp), dtype=np.int64)
    if len(tri.coplanar):
        # duplicates / near-duplicates Qhull left out: route them to their nearest vertex
        alias[tri.coplanar[:, 0]] = tri.coplanar[:, 2]
    return TetMesh(allp, cells, neighbors, len(pts), alias[:len(pts)])


# ---------------------------------------------------------------------------
# ray tracing

@njit(cache=True)
def _weight(d, sigma):
    return 1.0 - np.exp(-d * d / (2.0 * sigma * sigma))


@njit(cache=True)
def _exit_face(cell, p, d, only, excl, fn, fo):
    """Ray parameter and face through which p + s*d leaves ``cell``."""
    best_s = np.inf
    best_j = -1
    for j in range(4):
        if j == excl or (only >= 0 and j != only):
            continue
        den = fn[cell, j, 0] * d[0] + fn[cell, j, 1] * d[1] + fn[cell, j, 2] * d[2]
        if den <= 0.0:
            continue
        num = fo[cell, j] - (fn[cell, j, 0] * p[0] + fn[cell, j, 1] * p[1] + fn[cell, j, 2] * p[2])
        s = num / den
        if s < best_s:
            best_s = s
            best_j = j
    return best_s, best_j


@njit(cache=True)
def _walk(cell, p, d, first_face, max_len, sigma, acc, fn, fo, nbr):
    """Walk from ``cell`` along p + s*d, adding the weight of the entry distance of every later cell."""
    s_cur = 0.0
    only = first_face
    excl = -1
    for _ in range(1000000):
        s, j = _exit_face(cell, p, d, only, excl, fn, fo)
        only = -1
        if j < 0:
            return
        if s < s_cur:
            s = s_cur
        if s >= max_len:
            return
        nxt = nbr[cell, j]
        if nxt < 0:
            return
        excl = -1
        for k in range(4):
            if nbr[nxt, k] == cell:
                excl = k
        cell = nxt
        s_cur = s
        acc[cell] += _weight(s_cur, sigma)


@njit(cache=True)
def _cone_cell(v, d, cells, fn, star_ptr, star_cells):
    """Cell of the star of vertex ``v`` that contains direction ``d`` at ``v``."""
    best = np.inf
    best_c = -1
    best_k = -1
    for q in range(star_ptr[v], star_ptr[v + 1]):
        c = star_cells[q]
        k = 0
        for t in range(4):
            if cells[c, t] == v:
                k = t
        worst = -np.inf
        for j in range(4):
            if j == k:
                continue
            val = fn[c, j, 0] * d[0] + fn[c, j, 1] * d[1] + fn[c, j, 2] * d[2]
            if val > worst:
                worst = val
        if worst < best:
            best = worst
            best_c = c
            best_k = k
    return best_c, best_k


@njit(cache=True)
def _trace_vertex_rays(origins, targets, verts, cells, nbr, fn, fo, star_ptr, star_cells,
                       sigma_free, sigma_matter, extension, mu_free, mu_matter):
    d = np.empty(3)
    nd = np.empty(3)
    for r in range(len(targets)):
        v = targets[r]
        p = verts[v]
        length = 0.0
        for i in range(3):
            d[i] = origins[r, i] - p[i]
            length += d[i] * d[i]
        length = np.sqrt(length)
        if length == 0.0:
            continue
        for i in range(3):
            d[i] /= length
            nd[i] = -d[i]
        # free space: from the point back towards the camera
        c0, k0 = _cone_cell(v, d, cells, fn, star_ptr, star_cells)
        if c0 >= 0:
            mu_free[c0] += _weight(0.0, sigma_free)
            _walk(c0, p, d, k0, length, sigma_free, mu_free, fn, fo, nbr)
        # matter: short extension behind the point
        c1, k1 = _cone_cell(v, nd, cells, fn, star_ptr, star_cells)
        if c1 >= 0:
            mu_matter[c1] += _weight(0.0, sigma_matter)
            _walk(c1, p, nd, k1, extension, sigma_matter, mu_matter, fn, fo, nbr)


@njit(cache=True)
def _locate(p, hint, fn, fo, nbr):
    cell = hint
    for _ in range(100000):
        best = 0.0
        best_j = -1
        for j in range(4):
            s = fn[cell, j, 0] * p[0] + fn[cell, j, 1] * p[1] + fn[cell, j, 2] * p[2] - fo[cell, j]
            if s > best:
                best = s
                best_j = j
        if best_j < 0:
            return cell
        cell = nbr[cell, best_j]
        if cell < 0:
            return -1
    return -2


@dataclass(frozen=True, eq=False)
class VisibilityRay:
    """Camera-to-point ray; ``target_vertex`` is set when the target is a mesh vertex."""

    origin: np.ndarray
    target: np.ndarray
    extension: float
    target_vertex: Optional[int] = None


def make_ray(origin, target, sigma_matter: float = SIGMA_MATTER,
             target_vertex: Optional[int] = None) -> VisibilityRay:
    return VisibilityRay(np.asarray(origin, dtype=np.float64), np.asarray(target, dtype=np.float64),
                         MATTER_EXTENSION_FACTOR * sigma_matter, target_vertex)


def _locate_cell(mesh: TetMesh, p: np.ndarray) -> int:
    fn, fo = mesh.face_planes
    c = _locate(p, 0, fn, fo, mesh.neighbors)
    if c == -2:  # walk did not settle; fall back to a scan
        s = np.einsum("mjk,k->mj", fn, p) - fo
        hits = np.flatnonzero(np.all(s <= 1e-12, axis=1))
        c = int(hits[0]) if len(hits) else -1
    return int(c)


def trace_ray(mesh: TetMesh, ray: VisibilityRay, sigma_free: float = SIGMA_FREE,
              sigma_matter: float = SIGMA_MATTER) -> None:
    """Accumulate one ray's free-space and matter votes into ``mesh``."""
    if not (sigma_free > 0 and sigma_matter > 0):
        raise ValueError("sigmas must be positive")
    fn, fo = mesh.face_planes
    ptr, star_cells = mesh.star
    if ray.target_vertex is not None:
        _trace_vertex_rays(ray.origin[None, :], np.array([ray.target_vertex], dtype=np.int64),
                           mesh.vertices, mesh.cells, mesh.neighbors, fn, fo, ptr, star_cells,
                           sigma_free, sigma_matter, ray.extension, mesh.mu_free, mesh.mu_matter)
        return
    p = ray.target
    cell = _locate_cell(mesh, p)
    if cell < 0:
        log.warning("ray target outside the triangulation; ray ignored")
        return
    d = ray.origin - p
    length = float(np.linalg.norm(d))
    if length == 0:
        return
    d = d / length
    s_fwd, _ = _exit_face(cell, p, d, -1, -1, fn, fo)
    s_back, _ = _exit_face(cell, p, -d, -1, -1, fn, fo)
    mesh.mu_free[cell] += _weight(min(s_fwd, s_back), sigma_free)
    _walk(cell, p, d, -1, length, sigma_free, mesh.mu_free, fn, fo, mesh.neighbors)
    mesh.mu_matter[cell] += _weight(0.0, sigma_matter)
    _walk(cell, p, -d, -1, ray.extension, sigma_matter, mesh.mu_matter, fn, fo, mesh.neighbors)


def visibility_rays(cloud_size: int, visibility: Sequence[Sequence[int]], cameras: CameraSet):
    """Ray origins and target point indices, ordered by point then by listed camera."""
    centers = {c.id: c.center for c in cameras}
    origins, targets = [], []
    for i in range(cloud_size):
        for cam in visibility[i]:
            if cam not in centers:
                raise KeyError(f"visibility references unknown camera {cam}")
            origins.append(centers[cam])
            targets.append(i)
    return (np.array(origins, dtype=np.float64).reshape(-1, 3), np.array(targets, dtype=np.int64))


def trace_visibility(mesh: TetMesh, origins: np.ndarray, point_ids: np.ndarray,
                     sigma_free: float = SIGMA_FREE, sigma_matter: float = SIGMA_MATTER) -> None:
    fn, fo = mesh.face_planes
    ptr, star_cells = mesh.star
    targets = mesh.vertex_of_point[np.asarray(point_ids, dtype=np.int64)]
    _trace_vertex_rays(np.ascontiguousarray(origins, dtype=np.float64), targets, mesh.vertices,
                       mesh.cells, mesh.neighbors, fn, fo, ptr, star_cells, sigma_free, sigma_matter,
                       MATTER_EXTENSION_FACTOR * sigma_matter, mesh.mu_free, mesh.mu_matter)


# ---------------------------------------------------------------------------
# manifold growing

@njit(cache=True)
def _in_region(c, cnew, inside):
    return inside[c] or c == cnew


@njit(cache=True)
def _star_connected(v, want, cnew, inside, cells, nbr, star_ptr, star_cells, local, total):
    start = star_ptr[v]
    n = star_ptr[v + 1] - start
    seen = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for q in range(n):
        c = star_cells[start + q]
        if _in_region(c, cnew, inside) == want:
            stack[0] = c
            seen[q] = True
            top = 1
            break
    count = 0
    while top > 0:
        top -= 1
        c = stack[top]
        count += 1
        for j in range(4):
            if cells[c, j] == v:
                continue
            nb = nbr[c, j]
            if nb < 0:
                continue
            li = local[nb]
            if li < 0 or seen[li]:
                continue
            if _in_region(nb, cnew, inside) != want:
                continue
            seen[li] = True
            stack[top] = nb
            top += 1
    return count == total


@njit(cache=True)
def _vertex_regular(v, cnew, inside, cells, nbr, star_ptr, star_cells, local):
    """Would the boundary stay a single disc around ``v`` with ``cnew`` added?"""
    start = star_ptr[v]
    end = star_ptr[v + 1]
    n_in = 0
    for q in range(start, end):
        c = star_cells[q]
        local[c] = q - start
        if _in_region(c, cnew, inside):
            n_in += 1
    n_out = (end - start) - n_in
    ok = True
    if n_in > 0 and n_out > 0:
        ok = (_star_connected(v, True, cnew, inside, cells, nbr, star_ptr, star_cells, local, n_in)
              and _star_connected(v, False, cnew, inside, cells, nbr, star_ptr, star_cells, local, n_out))
    for q in range(start, end):
        local[star_cells[q]] = -1
    return ok


@njit(cache=True)
def _push_frontier(heap, inside, free, nbr, mu_free):
    for c in range(len(inside)):
        if inside[c] or not free[c]:
            continue
        for j in range(4):
            nb = nbr[c, j]
            if nb >= 0 and inside[nb]:
                heapq.heappush(heap, (-mu_free[c], np.int64(c)))
                break


@njit(cache=True)
def _try_group(c, verts, inside, free, cells, nbr, star_ptr, star_cells, local, group):
    """Add ``c`` together with every free outside cell around the given vertices; keep it
    if all touched vertices stay regular, otherwise roll back.  Returns the group size
    (0 on failure)."""
    inside[c] = True
    group[0] = c
    n = 1
    for v in verts:
        for q in range(star_ptr[v], star_ptr[v + 1]):
            g = star_cells[q]
            if free[g] and not inside[g]:
                inside[g] = True
                group[n] = g
                n += 1
    ok = True
    for i in range(n):
        for t in range(4):
            if not _vertex_regular(cells[group[i], t], -1, inside, cells, nbr, star_ptr, star_cells, local):
                ok = False
                break
        if not ok:
            break
    if not ok:
        for i in range(n):
            inside[group[i]] = False
        return 0
    return n


@njit(cache=True)
def _grow(cells, nbr, star_ptr, star_cells, free, mu_free, seed):
    m = len(cells)
    inside = np.zeros(m, dtype=np.bool_)
    local = np.full(m, -1, dtype=np.int64)
    order = np.empty(m, dtype=np.int64)
    steps = np.empty(m + 1, dtype=np.int64)
    group = np.empty(m, dtype=np.int64)
    inside[seed] = True
    order[0] = seed
    n_added = 1
    n_steps = 1
    steps[0] = 0
    steps[1] = 1
    heap = [(0.0, np.int64(0))]
    heap.pop()
    changed = True
    while changed:
        changed = False
        # single-cell growth in order of decreasing free-space vote
        _push_frontier(heap, inside, free, nbr, mu_free)
        while len(heap) > 0:
            _, c = heapq.heappop(heap)
            if inside[c]:
                continue
            ok = True
            for t in range(4):
                if not _vertex_regular(cells[c, t], c, inside, cells, nbr, star_ptr, star_cells, local):
                    ok = False
                    break
            if not ok:
                continue
            inside[c] = True
            order[n_added] = c
            n_added += 1
            n_steps += 1
            steps[n_steps] = n_added
            changed = True
            for j in range(4):
                nb = nbr[c, j]
                if nb >= 0 and free[nb] and not inside[nb]:
                    heapq.heappush(heap, (-mu_free[nb], np.int64(nb)))
        # stuck cells: close the pinch around a blocking vertex in one step
        _push_frontier(heap, inside, free, nbr, mu_free)
        while len(heap) > 0:
            _, c = heapq.heappop(heap)
            if inside[c]:
                continue
            blocking = np.empty(4, dtype=np.int64)
            nb_ = 0
            for t in range(4):
                v = cells[c, t]
                if not _vertex_regular(v, c, inside, cells, nbr, star_ptr, star_cells, local):
                    blocking[nb_] = v
                    nb_ += 1
            k = 0
            for t in range(nb_):
                k = _try_group(c, blocking[t:t + 1], inside, free, cells, nbr, star_ptr, star_cells,
                               local, group)
                if k > 0:
                    break
            if k == 0 and nb_ > 1:
                k = _try_group(c, blocking[:nb_], inside, free, cells, nbr, star_ptr, star_cells,
                               local, group)
            if k > 0:
                for i in range(k):
                    order[n_added] = group[i]
                    n_added += 1
                n_steps += 1
                steps[n_steps] = n_added
                changed = True
    return inside, order[:n_added], steps[:n_steps + 1]


def free_cells(mesh: TetMesh) -> np.ndarray:
    """Cells voted free that do not touch the bounding box corners."""
    return (mesh.mu_free > mesh.mu_matter) & ~mesh.touches_box


def boundary_triangles(mesh: TetMesh, inside: np.ndarray) -> np.ndarray:
    """Faces between inside and outside cells, wound so normals leave the inside region."""
    cells, nbr = mesh.cells, mesh.neighbors
    ci, fj = np.nonzero(inside[:, None] & ~np.where(nbr >= 0, inside[np.maximum(nbr, 0)], False))
    if len(ci) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    tri = cells[ci[:, None], _FACE_VERTS[fj]]
    v = mesh.vertices
    a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
    opp = v[cells[ci, fj]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), opp - a) > 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def compact_mesh(vertices: np.ndarray, triangles: np.ndarray) -> TriMesh:
    if len(triangles) == 0:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    used = np.unique(triangles)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(vertices[used], remap[triangles])


def extract_manifold(mesh: TetMesh, debug: bool = False) -> TriMesh:
    """Grow the free-space region and return its boundary surface.

    With ``debug`` the growth is replayed cell by cell and the surface is
    checked after every accepted cell (quadratic; small meshes only).
    """
    free = free_cells(mesh)
    if not free.any():
        log.warning("no free-space cell; returning an empty mesh")
        mesh.inside[:] = False
        return compact_mesh(mesh.vertices, np.zeros((0, 3), dtype=np.int64))
    cand = np.flatnonzero(free)
    seed = int(cand[np.lexsort((cand, -mesh.mu_free[cand]))[0]])
    ptr, star_cells = mesh.star
    inside, order, steps = _grow(mesh.cells, mesh.neighbors, ptr, star_cells, free, mesh.mu_free, seed)
    mesh.inside[:] = inside
    if debug:
        partial = np.zeros_like(inside)
        for a, b in zip(steps[:-1], steps[1:]):
            partial[order[a:b]] = True
            problems = manifold_defects(compact_mesh(mesh.vertices, boundary_triangles(mesh, partial)))
            assert not problems, f"manifold violated after adding cells {order[a:b].tolist()}: {problems}"
    out = compact_mesh(mesh.vertices, boundary_triangles(mesh, inside))
    problems = manifold_defects(out)
    if problems:
        raise AssertionError(f"extracted surface is not a 2-manifold: {problems}")
    return out


def manifold_defects(mesh: TriMesh) -> list:
    """Describe edges without exactly two triangles and vertices whose fan is not one closed cycle."""
    f = mesh.triangles
    if len(f) == 0:
        return []
    problems = []
    edges, counts = np.unique(mesh.edges(), axis=0, return_counts=True)
    bad = counts != 2
    if bad.any():
        problems.append(f"{int(bad.sum())} edges without exactly two triangles")
    # fan test: the link of every vertex must be one cycle
    links = {}
    for a, b, c in f.tolist():
        for v, x, y in ((a, b, c), (b, c, a), (c, a, b)):
            links.setdefault(v, []).append((x, y))
    n_bad = 0
    for v, link in links.items():
        adj = {}
        for x, y in link:
            adj.setdefault(x, []).append(y)
            adj.setdefault(y, []).append(x)
        if any(len(nb) != 2 for nb in adj.values()):
            n_bad += 1
            continue
        start = next(iter(adj))
        prev, cur, steps = None, start, 0
        while True:
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            prev, cur = cur, nxt
            steps += 1
            if cur == start:
                break
        if steps != len(adj):
            n_bad += 1
    if n_bad:
        problems.append(f"{n_bad} vertices with a non-disc fan")
    return problems


def reconstruct(cloud: LabeledCloud, cameras: CameraSet, visibility: Sequence[Sequence[int]],
                sigma_free: float = SIGMA_FREE, sigma_matter: float = SIGMA_MATTER):
    """Triangulate, vote and extract; returns ``(surface, tetmesh)``."""
    centers = np.array([c.center for c in cameras])
    mesh = build_delaunay(cloud.points, extra_bounds=centers)
    origins, targets = visibility_rays(len(cloud), visibility, cameras)
    trace_visibility(mesh, origins, targets, sigma_free, sigma_matter)
    surface = extract_manifold(mesh)
    log.info("reconstruction: %d cells, %d inside, %d triangles", mesh.n_cells,
             int(mesh.inside.sum()), len(surface.triangles))
    return surface, mesh
