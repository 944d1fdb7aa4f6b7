"""Readers and writers for clouds (PLY), meshes (OFF), cameras, label rasters
(PGM), depth maps, palettes and visibility lists.

All writers emit ASCII.  Floats are written with ``repr`` so every value
round-trips exactly.
"""

from __future__ import annotations

import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import (Camera, CameraSet, DepthMap, LabelInfo, LabeledCloud, LabelRaster,
                    Palette, TriMesh, ValidationError)


class ParseError(ValueError):
    """Malformed input file; the message names the file and line."""

    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {msg}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _finite(value: str, path, lineno) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {value!r}") from None
    if not math.isfinite(x):
        raise ParseError(path, lineno, f"non-finite value {value!r}")
    return x


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply_header(f, path):
    magic = f.readline()
    if magic.strip() != b"ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    fmt = None
    elements = []  # (name, count, [(prop, type) or (prop, ('list', count_t, item_t))])
    lineno = 1
    while True:
        raw = f.readline()
        lineno += 1
        if not raw:
            raise ParseError(path, lineno, "unexpected end of header")
        tok = raw.decode("ascii", errors="replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) != 3 or tok[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise ParseError(path, lineno, f"unsupported format line {raw!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3:
                raise ParseError(path, lineno, "malformed element line")
            try:
                count = int(tok[2])
            except ValueError:
                raise ParseError(path, lineno, "element count is not an integer") from None
            elements.append((tok[1], count, []))
        elif tok[0] == "property":
            if not elements:
                raise ParseError(path, lineno, "property before any element")
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise ParseError(path, lineno, "malformed list property")
                elements[-1][2].append((tok[4], ("list", _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]])))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise ParseError(path, lineno, f"unknown property type in {raw!r}")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
        elif tok[0] == "end_header":
            break
        else:
            raise ParseError(path, lineno, f"unexpected header line {raw!r}")
    if fmt is None:
        raise ParseError(path, lineno, "missing format line")
    return fmt, elements, lineno


def read_ply(path) -> LabeledCloud:
    """Read a point cloud from an ASCII or binary PLY file.

    Recognised vertex properties are ``x y z``, ``nx ny nz``, ``label`` and
    ``first_observer``; anything else is ignored.  Optional properties that
    are missing leave the matching cloud attribute as ``None``.
    """
    with open(path, "rb") as f:
        fmt, elements, lineno = _read_ply_header(f, path)
        if not elements or elements[0][0] != "vertex":
            raise ParseError(path, lineno, "first element must be 'vertex'")
        _, n, props = elements[0]
        names = [p[0] for p in props]
        for axis in "xyz":
            if axis not in names:
                raise ParseError(path, lineno, f"vertex element lacks property {axis!r}")
        if any(isinstance(p[1], tuple) for p in props):
            raise ParseError(path, lineno, "list properties on vertices are not supported")
        if fmt == "ascii":
            table = np.empty((n, len(props)), dtype=np.float64)
            for i in range(n):
                raw = f.readline()
                lineno += 1
                if not raw:
                    raise ParseError(path, lineno, f"element count mismatch: expected {n} vertices, got {i}")
                tok = raw.split()
                if len(tok) != len(props):
                    raise ParseError(path, lineno, f"expected {len(props)} values, got {len(tok)}")
                for j, value in enumerate(tok):
                    table[i, j] = _finite(value.decode("ascii", errors="replace"), path, lineno)
            if len(elements) == 1:
                for raw in f:
                    lineno += 1
                    if raw.strip():
                        raise ParseError(path, lineno, "element count mismatch: trailing data after vertices")
            cols = {name: table[:, j] for j, name in enumerate(names)}
        else:
            endian = "<" if fmt == "binary_little_endian" else ">"
            dtype = np.dtype([(name, endian + t) for name, t in props])
            buf = f.read(dtype.itemsize * n)
            if len(buf) != dtype.itemsize * n:
                raise ParseError(path, None, f"element count mismatch: truncated binary data for {n} vertices")
            rec = np.frombuffer(buf, dtype=dtype, count=n)
            cols = {name: rec[name].astype(np.float64) for name in names}
            xyz = np.stack([cols["x"], cols["y"], cols["z"]], axis=1)
            bad = np.flatnonzero(~np.all(np.isfinite(xyz), axis=1))
            if len(bad):
                raise ParseError(path, None, f"non-finite coordinate in vertex {int(bad[0])}")

    points = np.stack([cols["x"], cols["y"], cols["z"]], axis=1)
    normals = None
    if all(k in cols for k in ("nx", "ny", "nz")):
        normals = np.stack([cols["nx"], cols["ny"], cols["nz"]], axis=1)
    labels = None
    if "label" in cols:
        lab = cols["label"]
        if np.any(lab != np.round(lab)) or np.any((lab < 0) | (lab > 255)):
            raise ParseError(path, None, "label values must be integers in 0..255")
        labels = lab.astype(np.uint8)
    first_observer = None
    if "first_observer" in cols:
        fo = cols["first_observer"]
        if np.any(fo != np.round(fo)):
            raise ParseError(path, None, "first_observer values must be integers")
        first_observer = fo.astype(np.int64)
    try:
        return LabeledCloud(points=points, labels=labels, normals=normals, first_observer=first_observer)
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_ply(cloud: LabeledCloud, path, normals: bool = True) -> None:
    """Write an ASCII PLY with every attribute the cloud carries (visibility excluded)."""
    props = ["property double x", "property double y", "property double z"]
    has_n = normals and cloud.normals is not None
    if has_n:
        props += ["property double nx", "property double ny", "property double nz"]
    if cloud.labels is not None:
        props.append("property uchar label")
    if cloud.first_observer is not None:
        props.append("property int first_observer")
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}", *props, "end_header"]
    pts = cloud.points.tolist()
    nrm = cloud.normals.tolist() if has_n else None
    lab = cloud.labels.tolist() if cloud.labels is not None else None
    fo = cloud.first_observer.tolist() if cloud.first_observer is not None else None
    for i, p in enumerate(pts):
        row = [repr(p[0]), repr(p[1]), repr(p[2])]
        if nrm is not None:
            row += [repr(v) for v in nrm[i]]
        if lab is not None:
            row.append(str(lab[i]))
        if fo is not None:
            row.append(str(fo[i]))
        lines.append(" ".join(row))
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# OFF

def format_off(mesh: TriMesh) -> str:
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    lines += [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(lines) + "\n"


def write_off(mesh: TriMesh, path) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(format_off(mesh))


def read_off(path) -> TriMesh:
    with open(path) as f:
        rows = [(i + 1, line.split("#", 1)[0].split()) for i, line in enumerate(f)]
    rows = [(i, tok) for i, tok in rows if tok]
    if not rows or rows[0][1][0] != "OFF":
        raise ParseError(path, rows[0][0] if rows else 1, "missing OFF magic")
    head = rows[0][1][1:]
    body = rows[1:]
    if not head:
        if not body:
            raise ParseError(path, 1, "missing counts line")
        (lineno, head), body = body[0], body[1:]
    else:
        lineno = rows[0][0]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise ParseError(path, lineno, "malformed counts line") from None
    if len(body) != nv + nf:
        raise ParseError(path, body[-1][0] if body else lineno,
                         f"element count mismatch: expected {nv + nf} lines, got {len(body)}")
    verts = np.empty((nv, 3))
    for k in range(nv):
        lineno, tok = body[k]
        if len(tok) < 3:
            raise ParseError(path, lineno, "vertex needs 3 coordinates")
        verts[k] = [_finite(t, path, lineno) for t in tok[:3]]
    faces = np.empty((nf, 3), dtype=np.int64)
    for k in range(nf):
        lineno, tok = body[nv + k]
        if len(tok) < 4 or tok[0] != "3":
            raise ParseError(path, lineno, "only triangular faces are supported")
        try:
            faces[k] = [int(t) for t in tok[1:4]]
        except ValueError:
            raise ParseError(path, lineno, "face index is not an integer") from None
    try:
        return TriMesh(verts, faces)
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


# ---------------------------------------------------------------------------
# cameras

def read_cameras(path) -> CameraSet:
    """One camera per line: ``id fx fy cx cy r11..r33 t1 t2 t3 width height``."""
    cams = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            if len(tok) != 19:
                raise ParseError(path, lineno, f"camera line needs 19 fields, got {len(tok)}")
            vals = [_finite(t, path, lineno) for t in tok]
            if any(v != int(v) for v in (vals[0], vals[17], vals[18])):
                raise ParseError(path, lineno, "id, width and height must be integers")
            try:
                cams.append(Camera(id=int(vals[0]), fx=vals[1], fy=vals[2], cx=vals[3], cy=vals[4],
                                   R=np.reshape(vals[5:14], (3, 3)), t=vals[14:17],
                                   width=int(vals[17]), height=int(vals[18])))
            except ValidationError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    try:
        return CameraSet(tuple(cams))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_cameras(cameras, path) -> None:
    lines = []
    for c in cameras:
        vals = [c.fx, c.fy, c.cx, c.cy, *c.R.ravel().tolist(), *c.t.tolist()]
        lines.append(" ".join([str(c.id), *map(_fmt, vals), str(c.width), str(c.height)]))
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# PGM label rasters

def _pgm_tokens(data: bytes, count: int, start: int, path):
    """Pull ``count`` whitespace separated header tokens, skipping comments."""
    out = []
    i = start
    n = len(data)
    while len(out) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise ParseError(path, None, "truncated PGM header")
        out.append(data[i:j])
        i = j
    return out, i


def read_label_raster(path) -> LabelRaster:
    with open(path, "rb") as f:
        data = f.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ParseError(path, 1, f"unknown PGM magic {magic!r}")
    tok, pos = _pgm_tokens(data, 3, 2, path)
    try:
        w, h, maxval = (int(t) for t in tok)
    except ValueError:
        raise ParseError(path, None, "malformed PGM header") from None
    if w <= 0 or h <= 0 or not 0 < maxval <= 255:
        raise ParseError(path, None, "PGM must be 8-bit with positive size")
    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        raw = data[pos:pos + w * h]
        if len(raw) != w * h:
            raise ParseError(path, None, f"truncated data: expected {w * h} bytes, got {len(raw)}")
        values = np.frombuffer(raw, dtype=np.uint8)
    else:
        parts = data[pos:].split()
        if len(parts) < w * h:
            raise ParseError(path, None, f"truncated data: expected {w * h} values, got {len(parts)}")
        if len(parts) > w * h:
            raise ParseError(path, None, "trailing data after raster values")
        try:
            values = np.array([int(p) for p in parts], dtype=np.int64)
        except ValueError:
            raise ParseError(path, None, "non-integer raster value") from None
        if values.min() < 0 or values.max() > maxval:
            raise ParseError(path, None, "raster value outside 0..maxval")
    return LabelRaster(w, h, values)


def write_label_raster(raster: LabelRaster, path) -> None:
    lines = ["P2", f"{raster.width} {raster.height}", "255"]
    lines += [" ".join(map(str, row)) for row in raster.data.tolist()]
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# depth maps

def read_depth(path) -> DepthMap:
    with open(path) as f:
        header = f.readline()
        tok = header.split()
        if len(tok) != 3 or tok[0] != "DEPTH":
            raise ParseError(path, 1, "missing 'DEPTH w h' header")
        try:
            w, h = int(tok[1]), int(tok[2])
        except ValueError:
            raise ParseError(path, 1, "depth size must be integers") from None
        values = []
        for lineno, line in enumerate(f, 2):
            values.extend(_finite(t, path, lineno) for t in line.split())
    if len(values) != w * h:
        raise ParseError(path, None, f"truncated data: expected {w * h} values, got {len(values)}")
    return DepthMap(w, h, np.array(values))


def write_depth(depth: DepthMap, path) -> None:
    lines = [f"DEPTH {depth.width} {depth.height}"]
    lines += [" ".join(map(_fmt, row)) for row in depth.data.tolist()]
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# palette and visibility

def read_palette(path) -> Palette:
    labels = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            if len(tok) != 3 or tok[2] not in ("0", "1"):
                raise ParseError(path, lineno, "palette line must be 'id name simplifiable{0|1}'")
            try:
                labels.append(LabelInfo(int(tok[0]), tok[1], tok[2] == "1"))
            except ValueError:
                raise ParseError(path, lineno, "label id is not an integer") from None
    try:
        return Palette(tuple(labels))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_palette(palette: Palette, path) -> None:
    with open(path, "w", newline="\n") as f:
        for lab in palette.labels:
            f.write(f"{lab.id} {lab.name} {int(lab.simplifiable)}\n")


def read_visibility(path, n_points: Optional[int] = None) -> Tuple[Tuple[int, ...], ...]:
    """Lines ``point_index n cam_1 ... cam_n``; the first camera is the first observer."""
    rows: Dict[int, Tuple[int, ...]] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            tok = line.split("#", 1)[0].split()
            if not tok:
                continue
            try:
                vals = [int(t) for t in tok]
            except ValueError:
                raise ParseError(path, lineno, "visibility entries must be integers") from None
            if len(vals) < 2 or len(vals) != 2 + vals[1]:
                raise ParseError(path, lineno, "visibility line must be 'point_index n cam_1 .. cam_n'")
            if vals[0] in rows:
                raise ParseError(path, lineno, f"duplicate point index {vals[0]}")
            rows[vals[0]] = tuple(vals[2:])
    n = n_points if n_points is not None else (max(rows) + 1 if rows else 0)
    if rows and (min(rows) < 0 or max(rows) >= n):
        raise ParseError(path, None, f"point index outside 0..{n - 1}")
    return tuple(rows.get(i, ()) for i in range(n))


def write_visibility(visibility: Sequence[Sequence[int]], path) -> None:
    with open(path, "w", newline="\n") as f:
        for i, cams in enumerate(visibility):
            f.write(" ".join(map(str, (i, len(cams), *cams))) + "\n")
