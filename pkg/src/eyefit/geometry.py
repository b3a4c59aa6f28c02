"""Low-level 3D math shared by fitting, placement, and evaluation.

World-space coordinates are millimeters throughout. Points are float64 arrays
of shape (3,) or (n, 3), rotations are 3x3 orthonormal matrices with det +1,
and axis-angle vectors encode a rotation of |v| radians about v/|v|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError

# Ratio of singular values below which a point configuration counts as
# collinear (rank < 2) and alignment is refused.
DEGENERACY_RATIO = 1e-12

_ORTHONORMALITY_TOL = 1e-9


def as_points(points, name: str = "points") -> np.ndarray:
    """Coerce to a float64 (n, 3) array, accepting a single (3,) point."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.shape == (3,):
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError(f"{name} must have shape (n, 3), got {pts.shape}")
    return pts


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


def rodrigues(rotvec) -> np.ndarray:
    """Rotation matrix for an axis-angle vector (radians); the zero vector yields identity."""
    v = np.asarray(rotvec, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("rotation vector must be finite")
    theta = float(np.linalg.norm(v))
    if theta == 0.0:
        return np.eye(3)
    k = v / theta
    kx, ky, kz = k
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return np.eye(3) + np.sin(theta) * cross + (1.0 - np.cos(theta)) * (cross @ cross)


def rotation_to_rotvec(rot) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (inverse of rodrigues), angle in [0, pi]."""
    r = np.asarray(rot, dtype=np.float64)
    if r.shape != (3, 3):
        raise InvalidArgumentError(f"rotation must be 3x3, got {r.shape}")
    cos_theta = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if theta < 1e-7:
        # sin(theta)/theta ~ 1; skew/2 is the rotvec to first order
        return skew / 2.0
    if theta > np.pi - 1e-5:
        # Near pi the skew part vanishes; recover the axis from the symmetric part.
        b = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(b), 0.0, None))
        i = int(np.argmax(axis))
        if axis[i] == 0.0:
            raise DegenerateInputError("cannot extract axis from rotation matrix")
        axis = b[:, i] / axis[i]
        axis /= np.linalg.norm(axis)
        # Choose the sign that agrees with the (possibly tiny) skew part.
        if np.dot(axis, skew) < 0.0:
            axis = -axis
        return theta * axis
    return theta * skew / (2.0 * np.sin(theta))


def is_rotation(rot, tol: float = _ORTHONORMALITY_TOL) -> bool:
    """True when rot is orthonormal with det +1 within tol."""
    r = np.asarray(rot, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
        return False
    return abs(float(np.linalg.det(r)) - 1.0) <= tol


@dataclass(frozen=True)
class Similarity3:
    """p -> scale * rotation @ p + translation with scale > 0."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        scale = float(self.scale)
        if not np.isfinite(scale) or scale <= 0.0:
            raise InvalidArgumentError(f"scale must be positive and finite, got {scale}")
        rot = np.asarray(self.rotation, dtype=np.float64)
        if not is_rotation(rot):
            raise InvalidArgumentError("rotation must be orthonormal with det +1")
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(trans)):
            raise InvalidArgumentError("translation must be finite")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "rotation", _readonly(rot))
        object.__setattr__(self, "translation", _readonly(trans))

    @classmethod
    def identity(cls) -> "Similarity3":
        return cls(1.0, np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        pts = as_points(points)
        return pts @ (self.scale * self.rotation).T + self.translation

    def compose(self, inner: "Similarity3") -> "Similarity3":
        """self ∘ inner: the transform that applies `inner` first, then self."""
        return Similarity3(
            self.scale * inner.scale,
            self.rotation @ inner.rotation,
            self.scale * self.rotation @ inner.translation + self.translation,
        )

    def inverse(self) -> "Similarity3":
        rot_inv = self.rotation.T
        return Similarity3(1.0 / self.scale, rot_inv, -rot_inv @ self.translation / self.scale)

    def translated(self, offset) -> "Similarity3":
        """Same rotation and scale with `offset` added to the translation."""
        off = np.asarray(offset, dtype=np.float64).reshape(3)
        return Similarity3(self.scale, self.rotation, self.translation + off)


def apply_transform(points, transform: Similarity3) -> np.ndarray:
    """Map each point p to scale * R @ p + translation."""
    return transform.apply(points)


def umeyama_similarity(src, dst, with_scale: bool = True):
    """Dimension-generic Umeyama alignment; returns (scale, rotation, translation).

    Least-squares similarity (rigid when with_scale is off) mapping src onto
    dst. The reflection case is resolved by flipping the sign of the smallest
    singular direction, so the returned rotation always has det +1.
    """
    s = np.asarray(src, dtype=np.float64)
    d = np.asarray(dst, dtype=np.float64)
    if s.ndim != 2 or d.shape != s.shape:
        raise InvalidArgumentError(f"src/dst must be equal-shape (n, d) arrays, got {s.shape} vs {d.shape}")
    n, dim = s.shape
    if n < 3:
        raise DegenerateInputError(f"alignment needs at least 3 correspondences, got {n}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(d))):
        raise InvalidArgumentError("alignment inputs must be finite")

    mu_s = s.mean(axis=0)
    mu_d = d.mean(axis=0)
    ds = s - mu_s
    dd = d - mu_d

    for label, demeaned in (("src", ds), ("dst", dd)):
        sv = np.linalg.svd(demeaned, compute_uv=False)
        # Collinear (rank < 2) configurations leave the rotation undetermined.
        if sv[1] < DEGENERACY_RATIO * sv[0]:
            raise DegenerateInputError(f"{label} points are collinear or coincident")

    cov = dd.T @ ds / n
    u, sing, vt = np.linalg.svd(cov)
    sign = np.eye(dim)
    if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
        sign[-1, -1] = -1.0
    rot = u @ sign @ vt

    if with_scale:
        var_src = float((ds**2).sum()) / n
        scale = float(np.trace(np.diag(sing) @ sign)) / var_src
    else:
        scale = 1.0
    if scale <= 0.0:
        raise DegenerateInputError("alignment collapsed to a non-positive scale")
    trans = mu_d - scale * rot @ mu_s
    return scale, rot, trans


def umeyama(src, dst, with_scale: bool = True) -> Similarity3:
    """Least-squares similarity (or rigid) transform mapping 3D src points onto dst."""
    s = as_points(src, "src")
    d = as_points(dst, "dst")
    scale, rot, trans = umeyama_similarity(s, d, with_scale=with_scale)
    return Similarity3(scale, rot, trans)


def vertex_normals(vertices, triangles) -> np.ndarray:
    """Per-vertex unit normals: area-weighted average of incident face normals.

    The cross product of two triangle edges has magnitude twice the face area,
    so summing raw cross products per vertex is exactly the area weighting.
    """
    verts = as_points(vertices, "vertices")
    tris = np.asarray(triangles, dtype=np.int64)
    if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] == 0:
        raise InvalidArgumentError("mesh must have at least one triangle")
    face = np.cross(verts[tris[:, 1]] - verts[tris[:, 0]], verts[tris[:, 2]] - verts[tris[:, 0]])
    acc = np.zeros_like(verts)
    for corner in range(3):
        np.add.at(acc, tris[:, corner], face)
    norms = np.linalg.norm(acc, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise DegenerateInputError(f"vertex {bad} has no incident triangle with nonzero area")
    return acc / norms[:, None]
