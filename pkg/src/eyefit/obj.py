"""Wavefront OBJ subset parser: v / vt / vn / f with fan triangulation.

OBJ attributes are per-corner while Mesh attributes are per-vertex, so a
position referenced with conflicting vt/vn gets duplicated (the standard
attribute split). Negative (relative) indices are rejected explicitly.
"""

from __future__ import annotations

import numpy as np

from .errors import ObjParseError, UnsupportedFeatureError
from .mesh import Mesh


def _parse_floats(parts: list[str], n: int, line_no: int, what: str) -> list[float]:
    if len(parts) < n:
        raise ObjParseError(f"{what} needs {n} values, got {len(parts)}", line_no)
    try:
        return [float(p) for p in parts[:n]]
    except ValueError as e:
        raise ObjParseError(f"bad {what} value: {e}", line_no) from e


def _parse_corner(token: str, line_no: int) -> tuple[int, int | None, int | None]:
    fields = token.split("/")
    if len(fields) > 3:
        raise ObjParseError(f"malformed face corner {token!r}", line_no)
    out: list[int | None] = [None, None, None]
    for i, fieldtext in enumerate(fields):
        if fieldtext == "":
            continue
        try:
            value = int(fieldtext)
        except ValueError as e:
            raise ObjParseError(f"bad index {fieldtext!r}", line_no) from e
        if value < 0:
            raise UnsupportedFeatureError(
                f"line {line_no}: negative (relative) OBJ indices are not supported"
            )
        if value == 0:
            raise ObjParseError("OBJ indices are 1-based; 0 is invalid", line_no)
        out[i] = value - 1
    if out[0] is None:
        raise ObjParseError(f"face corner {token!r} has no vertex index", line_no)
    return out[0], out[1], out[2]


def parse_obj(data: bytes | str) -> Mesh:
    """Parse OBJ text into a Mesh; polygons are fan-triangulated from the first corner."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data

    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    normals_in: list[list[float]] = []
    corners: list[tuple[int, int | None, int | None]] = []  # one entry per face corner
    faces: list[tuple[int, int, int]] = []  # indices into the resolved vertex list

    # Vertex resolution state: each output vertex is a position plus one
    # (vt, vn) assignment; conflicting assignments split the vertex.
    assigned: list[tuple[int | None, int | None] | None] = []
    extra_positions: list[int] = []  # source position index for split vertices
    remap: dict[tuple[int, int | None, int | None], int] = {}

    def resolve(corner: tuple[int, int | None, int | None], line_no: int) -> int:
        v, vt, vn = corner
        if v >= len(positions):
            raise ObjParseError(f"vertex index {v + 1} out of range ({len(positions)} declared)", line_no)
        if vt is not None and vt >= len(texcoords):
            raise ObjParseError(f"texcoord index {vt + 1} out of range", line_no)
        if vn is not None and vn >= len(normals_in):
            raise ObjParseError(f"normal index {vn + 1} out of range", line_no)
        key = (v, vt, vn)
        if key in remap:
            return remap[key]
        if assigned[v] is None:
            assigned[v] = (vt, vn)
            remap[key] = v
            return v
        index = len(positions) + len(extra_positions)
        extra_positions.append(v)
        assigned.append((vt, vn))
        remap[key] = index
        return index

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        keyword, rest = parts[0], parts[1:]
        if keyword == "v":
            positions.append(_parse_floats(rest, 3, line_no, "vertex"))
            assigned.append(None)
        elif keyword == "vt":
            texcoords.append(_parse_floats(rest, 2, line_no, "texcoord"))
        elif keyword == "vn":
            normals_in.append(_parse_floats(rest, 3, line_no, "normal"))
        elif keyword == "f":
            if len(rest) < 3:
                raise ObjParseError(f"face needs at least 3 corners, got {len(rest)}", line_no)
            ring = [resolve(_parse_corner(tok, line_no), line_no) for tok in rest]
            for i in range(1, len(ring) - 1):
                faces.append((ring[0], ring[i], ring[i + 1]))
        # other keywords (o, g, s, mtllib, usemtl, ...) are ignored

    n_out = len(positions) + len(extra_positions)
    verts = np.zeros((n_out, 3))
    verts[: len(positions)] = positions if positions else np.zeros((0, 3))
    for i, src in enumerate(extra_positions):
        verts[len(positions) + i] = positions[src]

    uv = None
    if texcoords and any(a is not None and a[0] is not None for a in assigned):
        uv = np.zeros((n_out, 2))
        for i, a in enumerate(assigned):
            if a is not None and a[0] is not None:
                uv[i] = texcoords[a[0]]
    normals = None
    if normals_in and any(a is not None and a[1] is not None for a in assigned):
        normals = np.zeros((n_out, 3))
        for i, a in enumerate(assigned):
            if a is not None and a[1] is not None:
                normals[i] = normals_in[a[1]]

    return Mesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3), uv=uv, normals=normals)
