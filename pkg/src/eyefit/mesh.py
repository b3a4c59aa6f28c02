"""Indexed triangle mesh container."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Similarity3, as_points, vertex_normals


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: float64 vertices in mm, int64 triangle indices, optional per-vertex uv/normals."""

    vertices: np.ndarray
    triangles: np.ndarray
    uv: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        verts = as_points(self.vertices, "vertices")
        tris = np.asarray(self.triangles, dtype=np.int64)
        if tris.size == 0:
            tris = tris.reshape(0, 3)
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise InvalidArgumentError(f"triangles must have shape (m, 3), got {tris.shape}")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise InvalidArgumentError("triangle indices out of vertex range")
        object.__setattr__(self, "vertices", _frozen(verts))
        object.__setattr__(self, "triangles", _frozen(tris))
        if self.uv is not None:
            uv = np.asarray(self.uv, dtype=np.float64)
            if uv.shape != (len(verts), 2):
                raise InvalidArgumentError(f"uv must have shape ({len(verts)}, 2), got {uv.shape}")
            object.__setattr__(self, "uv", _frozen(uv))
        if self.normals is not None:
            normals = np.asarray(self.normals, dtype=np.float64)
            if normals.shape != (len(verts), 3):
                raise InvalidArgumentError(f"normals must have shape ({len(verts)}, 3), got {normals.shape}")
            object.__setattr__(self, "normals", _frozen(normals))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def with_vertex_normals(self) -> "Mesh":
        """Copy of the mesh with freshly computed area-weighted vertex normals."""
        return replace(self, normals=vertex_normals(self.vertices, self.triangles))

    def transformed(self, transform: Similarity3) -> "Mesh":
        """Bake a similarity transform into the vertices (normals rotate, uv unchanged)."""
        normals = None if self.normals is None else self.normals @ transform.rotation.T
        return Mesh(transform.apply(self.vertices), self.triangles, uv=self.uv, normals=normals)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.setflags(write=False)
    return a


def merge_meshes(meshes: list[Mesh]) -> Mesh:
    """Concatenate meshes into one; uv/normals survive only if every input has them."""
    if not meshes:
        raise InvalidArgumentError("cannot merge an empty mesh list")
    verts = np.concatenate([m.vertices for m in meshes])
    offsets = np.cumsum([0] + [m.n_vertices for m in meshes[:-1]])
    tris = np.concatenate([m.triangles + off for m, off in zip(meshes, offsets)])
    uv = None
    if all(m.uv is not None for m in meshes):
        uv = np.concatenate([m.uv for m in meshes])
    normals = None
    if all(m.normals is not None for m in meshes):
        normals = np.concatenate([m.normals for m in meshes])
    return Mesh(verts, tris, uv=uv, normals=normals)
