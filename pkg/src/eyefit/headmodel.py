"""Parametric head model: linear shape/expression blendshapes plus a jaw joint.

A model asset ships as a JSON manifest (`<name>.fma.json`) describing tensor
layout, unit string, vertex groups, and the landmark embedding, next to one
little-endian binary blob (`<name>.fma.bin`) holding the tensors, each 4-byte
aligned. All geometry is converted to millimeters on load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptAssetError, InvalidArgumentError, InvalidAssetError
from .geometry import rodrigues
from .mesh import Mesh

FORMAT_VERSION = 1
LANDMARK_COUNT = 68
REQUIRED_GROUPS = ("left_eye", "right_eye", "nose_bridge", "left_temple", "right_temple")

UNIT_TO_MM = {
    "millimeters": 1.0,
    "mm": 1.0,
    "centimeters": 10.0,
    "cm": 10.0,
    "meters": 1000.0,
    "m": 1000.0,
}

_DTYPES = {"float32": np.dtype("<f4"), "uint32": np.dtype("<u4")}


@dataclass(frozen=True)
class ParamVector:
    """Fit target: shape/expression coefficients plus jaw and global pose."""

    beta: np.ndarray
    psi: np.ndarray
    jaw_pose: np.ndarray
    global_pose: np.ndarray
    global_translation: np.ndarray

    def __post_init__(self):
        for name in ("beta", "psi"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if not np.all(np.isfinite(v)):
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        for name in ("jaw_pose", "global_pose", "global_translation"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(3)
            if not np.all(np.isfinite(v)):
                raise InvalidArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @classmethod
    def zeros(cls, n_beta: int, n_psi: int) -> "ParamVector":
        return cls(np.zeros(n_beta), np.zeros(n_psi), np.zeros(3), np.zeros(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "psi": self.psi.tolist(),
            "jaw_pose": self.jaw_pose.tolist(),
            "global_pose": self.global_pose.tolist(),
            "global_translation": self.global_translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        return cls(
            np.asarray(d["beta"], dtype=np.float64),
            np.asarray(d["psi"], dtype=np.float64),
            np.asarray(d.get("jaw_pose", (0.0, 0.0, 0.0)), dtype=np.float64),
            np.asarray(d.get("global_pose", (0.0, 0.0, 0.0)), dtype=np.float64),
            np.asarray(d.get("global_translation", (0.0, 0.0, 0.0)), dtype=np.float64),
        )


@dataclass(frozen=True)
class HeadModelAsset:
    """Loaded, validated, millimeter-converted head model."""

    name: str
    template_vertices: np.ndarray  # (n, 3)
    triangles: np.ndarray  # (m, 3)
    uv: np.ndarray  # (n, 2)
    shape_basis: np.ndarray  # (3n, n_beta), vertex-major rows (x0 y0 z0 x1 ...)
    expression_basis: np.ndarray  # (3n, n_psi)
    jaw_joint: np.ndarray  # (3,)
    jaw_weights: np.ndarray  # (n,)
    landmark_triangles: np.ndarray  # (68,)
    landmark_barycentrics: np.ndarray  # (68, 3)
    vertex_groups: dict  # name -> int array
    source_units: str
    content_hash: str = ""

    @property
    def n_vertices(self) -> int:
        return len(self.template_vertices)

    @property
    def n_beta(self) -> int:
        return self.shape_basis.shape[1]

    @property
    def n_psi(self) -> int:
        return self.expression_basis.shape[1]

    def template_mesh(self) -> Mesh:
        return Mesh(self.template_vertices, self.triangles, uv=self.uv)

    def validate(self):
        n = self.n_vertices
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise InvalidAssetError("triangle indices out of range")
        if self.uv.shape != (n, 2):
            raise InvalidAssetError("uv must be per-vertex (n, 2)")
        if np.any(self.uv < 0.0) or np.any(self.uv > 1.0):
            raise InvalidAssetError("uv coordinates must lie in [0, 1]")
        for basis, label in ((self.shape_basis, "shape"), (self.expression_basis, "expression")):
            if basis.shape[0] != 3 * n:
                raise InvalidAssetError(f"{label} basis rows must equal 3*n_vertices")
        if self.jaw_weights.shape != (n,):
            raise InvalidAssetError("jaw_weights must be per-vertex")
        if np.any(self.jaw_weights < 0.0) or np.any(self.jaw_weights > 1.0):
            raise InvalidAssetError("jaw_weights must lie in [0, 1]")
        if self.landmark_triangles.shape != (LANDMARK_COUNT,) or self.landmark_barycentrics.shape != (
            LANDMARK_COUNT,
            3,
        ):
            raise InvalidAssetError(f"landmark embedding must have exactly {LANDMARK_COUNT} entries")
        if self.landmark_triangles.min() < 0 or self.landmark_triangles.max() >= len(self.triangles):
            raise InvalidAssetError("landmark triangle indices out of range")
        if np.any(self.landmark_barycentrics < 0.0):
            raise InvalidAssetError("barycentric weights must be nonnegative")
        if np.max(np.abs(self.landmark_barycentrics.sum(axis=1) - 1.0)) > 1e-9:
            raise InvalidAssetError("barycentric weights must sum to 1")
        for group in REQUIRED_GROUPS:
            idx = self.vertex_groups.get(group)
            if idx is None or len(idx) == 0:
                raise InvalidAssetError(f"missing or empty required vertex group '{group}'")
        for group, idx in self.vertex_groups.items():
            if len(idx) and (idx.min() < 0 or idx.max() >= n):
                raise InvalidAssetError(f"vertex group '{group}' has out-of-range indices")


def _tensor_from_blob(blob: bytes, name: str, entry: dict) -> np.ndarray:
    dtype = _DTYPES.get(entry.get("dtype"))
    if dtype is None:
        raise InvalidAssetError(f"tensor '{name}' has unsupported dtype {entry.get('dtype')!r}")
    shape = tuple(int(s) for s in entry["shape"])
    offset = int(entry["byte_offset"])
    if offset % 4 != 0:
        raise CorruptAssetError(f"tensor '{name}' offset {offset} is not 4-byte aligned")
    nbytes = int(np.prod(shape)) * dtype.itemsize
    if offset + nbytes > len(blob):
        raise CorruptAssetError(
            f"blob too short for tensor '{name}': needs {offset + nbytes} bytes, have {len(blob)}"
        )
    return np.frombuffer(blob, dtype=dtype, count=int(np.prod(shape)), offset=offset).reshape(shape)


def load_asset(manifest_path) -> HeadModelAsset:
    """Load and validate a model asset, converting all geometry to millimeters."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptAssetError(f"manifest is not valid JSON: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise InvalidAssetError(f"unsupported format_version {manifest.get('format_version')!r}")
    units = manifest.get("units")
    if units not in UNIT_TO_MM:
        raise InvalidAssetError(f"unknown unit string {units!r}")
    to_mm = UNIT_TO_MM[units]

    blob_path = manifest_path.parent / manifest["blob"]
    blob = blob_path.read_bytes()
    tensors = manifest["tensors"]

    def tensor(name: str, as_float: bool = True) -> np.ndarray:
        if name not in tensors:
            raise InvalidAssetError(f"manifest missing tensor '{name}'")
        raw = _tensor_from_blob(blob, name, tensors[name])
        return raw.astype(np.float64) if as_float else raw.astype(np.int64)

    embedding = manifest.get("landmark_embedding", [])
    if len(embedding) != LANDMARK_COUNT:
        raise InvalidAssetError(f"landmark embedding must list {LANDMARK_COUNT} entries")
    lm_tris = np.array([e[0] for e in embedding], dtype=np.int64)
    lm_bary = np.array([e[1] for e in embedding], dtype=np.float64)

    groups = {
        name: np.asarray(idx, dtype=np.int64)
        for name, idx in manifest.get("vertex_groups", {}).items()
    }

    digest = hashlib.sha256()
    digest.update(manifest_path.read_bytes())
    digest.update(blob)

    asset = HeadModelAsset(
        name=manifest.get("name", manifest_path.stem),
        template_vertices=tensor("template_vertices") * to_mm,
        triangles=tensor("triangles", as_float=False),
        uv=tensor("uv"),
        shape_basis=tensor("shape_basis") * to_mm,
        expression_basis=tensor("expression_basis") * to_mm,
        jaw_joint=tensor("jaw_joint").reshape(3) * to_mm,
        jaw_weights=tensor("jaw_weights"),
        landmark_triangles=lm_tris,
        landmark_barycentrics=lm_bary,
        vertex_groups=groups,
        source_units=units,
        content_hash=digest.hexdigest(),
    )
    n_beta = int(manifest.get("n_beta", asset.n_beta))
    n_psi = int(manifest.get("n_psi", asset.n_psi))
    if asset.n_beta != n_beta or asset.n_psi != n_psi:
        raise InvalidAssetError(
            f"basis columns ({asset.n_beta}, {asset.n_psi}) do not match declared ({n_beta}, {n_psi})"
        )
    asset.validate()
    return asset


def save_asset(asset: HeadModelAsset, out_prefix) -> tuple[Path, Path]:
    """Write `<prefix>.fma.json` + `<prefix>.fma.bin` (always in millimeters)."""
    out_prefix = Path(out_prefix)
    blob_parts: list[bytes] = []
    tensors: dict = {}
    offset = 0

    def add(name: str, array: np.ndarray, dtype: str):
        nonlocal offset
        data = np.ascontiguousarray(array, dtype=_DTYPES[dtype]).tobytes()
        tensors[name] = {"dtype": dtype, "shape": list(array.shape), "byte_offset": offset}
        blob_parts.append(data)
        pad = (-len(data)) % 4
        if pad:
            blob_parts.append(b"\x00" * pad)
        offset += len(data) + pad

    add("template_vertices", asset.template_vertices, "float32")
    add("triangles", asset.triangles, "uint32")
    add("uv", asset.uv, "float32")
    add("shape_basis", asset.shape_basis, "float32")
    add("expression_basis", asset.expression_basis, "float32")
    add("jaw_joint", asset.jaw_joint, "float32")
    add("jaw_weights", asset.jaw_weights, "float32")

    manifest = {
        "format_version": FORMAT_VERSION,
        "name": asset.name,
        "units": "millimeters",
        "n_beta": asset.n_beta,
        "n_psi": asset.n_psi,
        "blob": out_prefix.name + ".fma.bin",
        "tensors": tensors,
        "landmark_embedding": [
            [int(t), [float(w) for w in bary]]
            for t, bary in zip(asset.landmark_triangles, asset.landmark_barycentrics)
        ],
        "vertex_groups": {name: idx.tolist() for name, idx in asset.vertex_groups.items()},
    }
    manifest_path = out_prefix.with_name(out_prefix.name + ".fma.json")
    blob_path = out_prefix.with_name(out_prefix.name + ".fma.bin")
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    blob_path.write_bytes(b"".join(blob_parts))
    return manifest_path, blob_path


def decode(asset: HeadModelAsset, params: ParamVector) -> Mesh:
    """Evaluate the model: blendshapes, jaw blend-skinning, then global pose.

    Zero parameters reproduce the template bitwise; the identity branches below
    are load-bearing for that, not an optimization.
    """
    if len(params.beta) != asset.n_beta or len(params.psi) != asset.n_psi:
        raise InvalidArgumentError(
            f"parameter dims ({len(params.beta)}, {len(params.psi)}) do not match asset "
            f"({asset.n_beta}, {asset.n_psi})"
        )
    verts = asset.template_vertices
    if np.any(params.beta) or np.any(params.psi):
        offsets = asset.shape_basis @ params.beta + asset.expression_basis @ params.psi
        verts = verts + offsets.reshape(-1, 3)

    if np.any(params.jaw_pose):
        rot = rodrigues(params.jaw_pose)
        pivoted = (verts - asset.jaw_joint) @ rot.T + asset.jaw_joint
        w = asset.jaw_weights[:, None]
        verts = w * pivoted + (1.0 - w) * verts

    if np.any(params.global_pose):
        verts = verts @ rodrigues(params.global_pose).T
    if np.any(params.global_translation):
        verts = verts + params.global_translation

    return Mesh(verts, asset.triangles, uv=asset.uv)


def embed_landmarks(asset: HeadModelAsset, mesh: Mesh) -> np.ndarray:
    """Evaluate the 68 barycentric landmarks on a mesh decoded from this asset."""
    if mesh.n_vertices != asset.n_vertices or mesh.n_triangles != len(asset.triangles):
        raise InvalidArgumentError("mesh topology does not match the asset")
    corners = mesh.vertices[asset.triangles[asset.landmark_triangles]]  # (68, 3, 3)
    return np.einsum("lcd,lc->ld", corners, asset.landmark_barycentrics)


def eye_centers(asset: HeadModelAsset, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Centroids of the left/right eye vertex groups on a decoded mesh."""
    if mesh.n_vertices != asset.n_vertices:
        raise InvalidArgumentError("mesh topology does not match the asset")
    out = []
    for group in ("left_eye", "right_eye"):
        idx = asset.vertex_groups.get(group)
        if idx is None or len(idx) == 0:
            raise InvalidAssetError(f"missing or empty vertex group '{group}'")
        out.append(mesh.vertices[idx].mean(axis=0))
    return out[0], out[1]
