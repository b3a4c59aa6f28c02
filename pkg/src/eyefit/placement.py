"""Eyewear placement: head anchor frame, placement transform, clearance resolution.

The head anchor frame puts the origin midway between the eye-group centroids
with `right` along the eye axis, `up` toward the scalp (nose-bridge hint), and
`forward` out of the face. Glasses are scaled by the head's interpupillary
distance over the asset's lens-center span and pushed along `forward` until
they clear the head surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import closest_points_on_mesh
from .errors import CannotFitError, DegenerateInputError, InvalidArgumentError, InvalidAssetError
from .geometry import Similarity3
from .headmodel import HeadModelAsset, eye_centers
from .mesh import Mesh

ANCHORS_FORMAT_VERSION = 1
_ANCHOR_KEYS = ("bridge_anchor", "hinge_left", "hinge_right", "lens_center_left", "lens_center_right")


@dataclass(frozen=True)
class EyewearAsset:
    """Glasses mesh plus anchor metadata, all in the asset-local frame (mm).

    Local frame convention: +x toward the frame's right temple, +y up,
    +z from the lens plane toward whoever is looking at the wearer.
    """

    mesh: Mesh
    bridge_anchor: np.ndarray
    hinge_left: np.ndarray
    hinge_right: np.ndarray
    lens_center_left: np.ndarray
    lens_center_right: np.ndarray
    display_name: str
    id: str
    base_color: tuple = (0.2, 0.2, 0.2, 1.0)

    def __post_init__(self):
        for key in _ANCHOR_KEYS:
            v = np.asarray(getattr(self, key), dtype=np.float64).reshape(3)
            if not np.all(np.isfinite(v)):
                raise InvalidAssetError(f"{key} must be finite")
            object.__setattr__(self, key, v)
        if self.hinge_span <= 0.0:
            raise InvalidAssetError("hinge span must be positive")
        if self.lens_span <= 0.0:
            raise InvalidAssetError("lens-center span must be positive")

    @property
    def hinge_span(self) -> float:
        return float(np.linalg.norm(self.hinge_right - self.hinge_left))

    @property
    def lens_span(self) -> float:
        return float(np.linalg.norm(self.lens_center_right - self.lens_center_left))


@dataclass(frozen=True)
class AnchorFrame:
    """Right-handed orthonormal frame anchored at the eye-center midpoint."""

    origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    forward: np.ndarray
    ipd: float  # derived: eye-center separation, drives the default scale

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        axes = []
        for key in ("right", "up", "forward"):
            v = np.asarray(getattr(self, key), dtype=np.float64).reshape(3)
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise InvalidArgumentError(f"{key} must be unit length")
            object.__setattr__(self, key, v)
            axes.append(v)
        r, u, f = axes
        if max(abs(np.dot(r, u)), abs(np.dot(u, f)), abs(np.dot(r, f))) > 1e-9:
            raise InvalidArgumentError("frame axes must be pairwise orthogonal")
        if np.max(np.abs(np.cross(r, u) - f)) > 1e-9:
            raise InvalidArgumentError("frame must satisfy right x up = forward")
        if not np.isfinite(self.ipd) or self.ipd <= 0.0:
            raise InvalidArgumentError("ipd must be positive")

    @property
    def rotation(self) -> np.ndarray:
        """World-from-local rotation whose columns are (right, up, forward)."""
        return np.stack([self.right, self.up, self.forward], axis=1)


@dataclass(frozen=True)
class FitParams:
    """User-steerable placement: offsets from the eye-center origin plus optional scale override."""

    forward_offset_mm: float = 10.0
    vertical_offset_mm: float = 0.0
    scale_override: float | None = None

    def __post_init__(self):
        if self.scale_override is not None and not self.scale_override > 0.0:
            raise InvalidArgumentError("scale_override must be positive")


def head_anchor_frame(asset: HeadModelAsset, mesh: Mesh) -> AnchorFrame:
    """Anchor frame from eye-group centroids and the nose-bridge up hint.

    The nose-bridge group must sit scalp-ward of the eye line (the loader
    cannot check intent, only non-degeneracy).
    """
    left, right_center = eye_centers(asset, mesh)
    axis = right_center - left
    ipd = float(np.linalg.norm(axis))
    if ipd < 1e-9:
        raise DegenerateInputError("eye centers coincide")
    right = axis / ipd

    bridge_idx = asset.vertex_groups["nose_bridge"]
    hint = mesh.vertices[bridge_idx].mean(axis=0) - (left + right_center) / 2.0
    hint_perp = hint - np.dot(hint, right) * right
    norm = np.linalg.norm(hint_perp)
    if norm < 1e-9:
        raise DegenerateInputError("nose-bridge hint is parallel to the eye axis")
    up = hint_perp / norm
    forward = np.cross(right, up)
    forward /= np.linalg.norm(forward)
    up = np.cross(forward, right)
    up /= np.linalg.norm(up)
    return AnchorFrame(origin=(left + right_center) / 2.0, right=right, up=up, forward=forward, ipd=ipd)


def compute_placement(frame: AnchorFrame, eyewear: EyewearAsset, fit: FitParams = FitParams()) -> Similarity3:
    """Similarity mapping eyewear-local coordinates onto the head.

    Scale defaults to head IPD over the asset's lens-center span; the rotation
    is the axis permutation local(+x,+y,+z) -> (right, up, forward); the
    translation lands the bridge anchor at the configured offsets from the
    eye-center origin.
    """
    if eyewear.lens_span <= 0.0:
        raise InvalidAssetError("lens-center span must be positive")
    scale = fit.scale_override if fit.scale_override is not None else frame.ipd / eyewear.lens_span
    rotation = frame.rotation
    target = (
        frame.origin
        + fit.forward_offset_mm * frame.forward
        + fit.vertical_offset_mm * frame.up
    )
    translation = target - scale * rotation @ eyewear.bridge_anchor
    return Similarity3(scale, rotation, translation)


def resolve_clearance(
    head: Mesh,
    eyewear: Mesh,
    placement: Similarity3,
    min_clearance_mm: float = 0.5,
    step_mm: float = 0.5,
    max_steps: int = 40,
) -> Similarity3:
    """Push the placement along its forward axis until the frame clears the head.

    The forward direction is read off the placement itself (rotated local +z).
    A vertex counts as inside the head when its offset from the closest
    surface point opposes that triangle's outward normal, which works without
    requiring a watertight head.
    """
    forward = placement.rotation[:, 2]
    head_face_normals = _face_normals(head)
    for k in range(max_steps + 1):
        candidate = placement.translated(k * step_mm * forward)
        verts = candidate.apply(eyewear.vertices)
        dist, closest, tri_idx = closest_points_on_mesh(verts, head)
        inside = ((verts - closest) * head_face_normals[tri_idx]).sum(axis=1) < 0.0
        if float(dist.min()) >= min_clearance_mm and not bool(inside.any()):
            return candidate
    raise CannotFitError(
        f"no clearance >= {min_clearance_mm} mm within {max_steps} steps of {step_mm} mm"
    )


def place_eyewear(
    head_asset: HeadModelAsset,
    head_mesh: Mesh,
    eyewear: EyewearAsset,
    fit: FitParams = FitParams(),
    min_clearance_mm: float = 0.5,
) -> Similarity3:
    """Full placement pipeline: anchor frame, nominal placement, clearance resolution."""
    frame = head_anchor_frame(head_asset, head_mesh)
    placement = compute_placement(frame, eyewear, fit)
    return resolve_clearance(head_mesh, eyewear.mesh, placement, min_clearance_mm=min_clearance_mm)


def _face_normals(mesh: Mesh) -> np.ndarray:
    tri = mesh.vertices[mesh.triangles]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    lengths = np.linalg.norm(n, axis=1)
    lengths[lengths == 0.0] = 1.0  # degenerate faces get a null normal, never a NaN
    return n / lengths[:, None]


def load_eyewear_asset(glb_path, anchors_path=None) -> EyewearAsset:
    """Load a GLB + `<id>.anchors.json` sidecar pair into an EyewearAsset."""
    from .glb import read_glb  # local import: glb also consumes this module's types via service

    glb_path = Path(glb_path)
    if anchors_path is None:
        anchors_path = glb_path.with_suffix("").with_suffix("")  # strip .glb
        anchors_path = glb_path.parent / (glb_path.stem + ".anchors.json")
    anchors_path = Path(anchors_path)

    scene = read_glb(glb_path.read_bytes())
    meshes = [node.mesh.transformed(node.transform) for node in scene.nodes]
    if not meshes:
        raise InvalidAssetError(f"{glb_path} contains no mesh")
    from .mesh import merge_meshes

    mesh = meshes[0] if len(meshes) == 1 else merge_meshes(meshes)

    try:
        anchors = json.loads(anchors_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidAssetError(f"{anchors_path} is not valid JSON: {e}") from e
    if anchors.get("format_version") != ANCHORS_FORMAT_VERSION:
        raise InvalidAssetError(f"unsupported anchors format_version {anchors.get('format_version')!r}")
    missing = [k for k in _ANCHOR_KEYS if k not in anchors]
    if missing:
        raise InvalidAssetError(f"anchors file missing {missing}")

    return EyewearAsset(
        mesh=mesh,
        bridge_anchor=np.asarray(anchors["bridge_anchor"], dtype=np.float64),
        hinge_left=np.asarray(anchors["hinge_left"], dtype=np.float64),
        hinge_right=np.asarray(anchors["hinge_right"], dtype=np.float64),
        lens_center_left=np.asarray(anchors["lens_center_left"], dtype=np.float64),
        lens_center_right=np.asarray(anchors["lens_center_right"], dtype=np.float64),
        display_name=anchors.get("display_name", anchors.get("id", glb_path.stem)),
        id=anchors.get("id", glb_path.stem),
        base_color=tuple(anchors.get("base_color", (0.2, 0.2, 0.2, 1.0))),
    )


def save_eyewear_asset(asset: EyewearAsset, out_dir) -> tuple[Path, Path]:
    """Write `<id>.glb` + `<id>.anchors.json` into a catalog directory."""
    from .glb import Material, Scene, SceneNode, write_glb

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    glb_path = out_dir / f"{asset.id}.glb"
    anchors_path = out_dir / f"{asset.id}.anchors.json"

    scene = Scene(
        nodes=(
            SceneNode(
                name=asset.id,
                mesh=asset.mesh,
                transform=Similarity3.identity(),
                material=Material(base_color=asset.base_color),
            ),
        )
    )
    glb_path.write_bytes(write_glb(scene))
    anchors = {
        "format_version": ANCHORS_FORMAT_VERSION,
        "id": asset.id,
        "display_name": asset.display_name,
        "base_color": list(asset.base_color),
    }
    for key in _ANCHOR_KEYS:
        anchors[key] = [float(x) for x in getattr(asset, key)]
    anchors_path.write_text(json.dumps(anchors, indent=1, sort_keys=True), encoding="utf-8")
    return glb_path, anchors_path
