"""Synthetic desk-scale assets: a parametric toy head, a unit sphere, toy eyewear.

The toy head is a feature-bumped ellipsoid in the canonical model frame
(+x toward the subject's right eye group, +y toward the scalp, +z out of the
face), exactly mirror-symmetric about x = 0, with smooth random blendshape
bases. It exists so fitting, placement, and export can be exercised without
any licensed face-model data.
"""

from __future__ import annotations

import numpy as np

from .geometry import vertex_normals
from .headmodel import LANDMARK_COUNT, HeadModelAsset
from .mesh import Mesh, merge_meshes
from .placement import EyewearAsset

HEAD_RADII = (75.0, 95.0, 80.0)  # mm: half-width, half-height, half-depth


def _ellipsoid_grid(rings: int, segments: int, radii) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lat-long ellipsoid with poles on +y/-y; returns (vertices, triangles, uv)."""
    rx, ry, rz = radii
    verts = [np.array([0.0, ry, 0.0])]
    uv = [np.array([0.0, 0.0])]
    for i in range(1, rings):
        theta = np.pi * i / rings
        for j in range(segments):
            phi = 2.0 * np.pi * j / segments
            verts.append(
                np.array(
                    [
                        rx * np.sin(theta) * np.cos(phi),
                        ry * np.cos(theta),
                        rz * np.sin(theta) * np.sin(phi),
                    ]
                )
            )
            uv.append(np.array([j / segments, i / rings]))
    verts.append(np.array([0.0, -ry, 0.0]))
    uv.append(np.array([0.0, 1.0]))
    verts = np.array(verts)
    uv = np.array(uv)

    def ring(i: int, j: int) -> int:
        return 1 + (i - 1) * segments + (j % segments)

    tris = []
    for j in range(segments):
        tris.append([0, ring(1, j + 1), ring(1, j)])
    for i in range(1, rings - 1):
        for j in range(segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append([a, b, d])
            tris.append([a, d, c])
    last = len(verts) - 1
    for j in range(segments):
        tris.append([last, ring(rings - 1, j), ring(rings - 1, j + 1)])
    tris = np.array(tris, dtype=np.int64)

    # Orient all faces outward (the ellipsoid is star-shaped around the origin).
    centroids = verts[tris].mean(axis=1)
    normals = np.cross(verts[tris[:, 1]] - verts[tris[:, 0]], verts[tris[:, 2]] - verts[tris[:, 0]])
    flip = (normals * centroids).sum(axis=1) < 0.0
    tris[flip] = tris[flip][:, ::-1]
    return verts, tris, uv


def _mirror_pairs(rings: int, segments: int) -> list[tuple[int, int]]:
    """Vertex index pairs exchanged by the x -> -x mirror (phi -> pi - phi)."""
    pairs = []
    for i in range(1, rings):
        base = 1 + (i - 1) * segments
        for j in range(segments):
            j2 = (segments // 2 - j) % segments
            if j < j2:
                pairs.append((base + j, base + j2))
    return pairs


def _symmetrize(verts: np.ndarray, pairs: list[tuple[int, int]]) -> np.ndarray:
    """Force exact bilateral symmetry about x = 0 (and x = 0 on self-mirrored vertices)."""
    out = verts.copy()
    for a, b in pairs:
        x = (out[a, 0] - out[b, 0]) / 2.0
        yz = (out[a, 1:] + out[b, 1:]) / 2.0
        out[a] = [x, *yz]
        out[b] = [-x, *yz]
    mirrored = {i for pair in pairs for i in pair}
    for i in range(len(out)):
        if i not in mirrored:
            out[i, 0] = 0.0
    return out


def _nearest_vertices(verts: np.ndarray, target, k: int) -> np.ndarray:
    d = np.linalg.norm(verts - np.asarray(target, dtype=np.float64), axis=1)
    return np.sort(np.argsort(d, kind="stable")[:k])


def _nearest_front_triangle(verts: np.ndarray, tris: np.ndarray, target) -> int:
    centroids = verts[tris].mean(axis=1)
    d = np.linalg.norm(centroids - np.asarray(target, dtype=np.float64), axis=1)
    d[centroids[:, 2] < 10.0] = np.inf  # keep landmarks on the face, not the skull
    return int(np.argmin(d))


def _landmark_targets() -> np.ndarray:
    """68 target points laid out like the usual annotation convention (jaw, brows, nose, eyes, mouth)."""
    targets = np.zeros((LANDMARK_COUNT, 3))
    t = np.linspace(-1.0, 1.0, 17)
    targets[0:17] = np.stack(
        [68.0 * np.sin(t * 1.4), -8.0 - 58.0 * np.cos(t * 1.4), 30.0 + 38.0 * np.cos(t * 1.4)], axis=1
    )
    for side, sign in ((17, -1.0), (22, 1.0)):
        xs = sign * np.linspace(14.0, 52.0, 5)
        targets[side : side + 5] = np.stack(
            [xs, np.full(5, 34.0) + 6.0 * np.sin(np.linspace(0, np.pi, 5)), np.full(5, 58.0)], axis=1
        )
    targets[27:31] = np.stack(
        [np.zeros(4), np.linspace(26.0, -2.0, 4), np.linspace(66.0, 80.0, 4)], axis=1
    )
    targets[31:36] = np.stack(
        [np.linspace(-14.0, 14.0, 5), np.full(5, -12.0), np.full(5, 70.0)], axis=1
    )
    for start, cx in ((36, -31.0), (42, 31.0)):
        a = np.linspace(0.0, 2.0 * np.pi, 6, endpoint=False)
        targets[start : start + 6] = np.stack(
            [cx + 13.0 * np.cos(a), 10.0 + 7.0 * np.sin(a), np.full(6, 62.0)], axis=1
        )
    a = np.linspace(0.0, 2.0 * np.pi, 20, endpoint=False)
    targets[48:68] = np.stack(
        [24.0 * np.cos(a), -36.0 + 10.0 * np.sin(a), np.full(20, 66.0)], axis=1
    )
    return targets


def _smooth_random_basis(rng: np.random.Generator, verts: np.ndarray, n_cols: int, rms_mm: float) -> np.ndarray:
    """Columns are sums of Gaussian displacement bumps plus a tiny white floor for rank."""
    n = len(verts)
    basis = np.zeros((3 * n, n_cols))
    for k in range(n_cols):
        field = np.zeros((n, 3))
        for _ in range(4):
            center = verts[rng.integers(n)]
            sigma = rng.uniform(25.0, 60.0)
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            weight = np.exp(-((verts - center) ** 2).sum(axis=1) / (2.0 * sigma**2))
            field += rng.uniform(0.5, 1.5) * weight[:, None] * direction
        field += 0.03 * rng.normal(size=(n, 3))
        field *= rms_mm / np.sqrt((field**2).sum(axis=1).mean())
        basis[:, k] = field.reshape(-1)
    return basis


def toy_head_asset(seed: int = 0, rings: int = 18, segments: int = 28, n_beta: int = 10, n_psi: int = 5) -> HeadModelAsset:
    """Build the synthetic head model (about 480 vertices at the default resolution)."""
    rng = np.random.default_rng(seed)
    verts, tris, uv = _ellipsoid_grid(rings, segments, HEAD_RADII)

    # Nose: a smooth frontal bump, symmetric in x by construction.
    frontness = np.clip(verts[:, 2] / HEAD_RADII[2], 0.0, 1.0)
    bump = 10.0 * np.exp(-((verts[:, 0] / 13.0) ** 2 + ((verts[:, 1] + 10.0) / 18.0) ** 2))
    verts = verts.copy()
    verts[:, 2] += frontness * bump

    verts = _symmetrize(verts, _mirror_pairs(rings, segments))

    groups = {
        "left_eye": _nearest_vertices(verts, (-31.0, 8.0, 62.0), 10),
        "right_eye": _nearest_vertices(verts, (31.0, 8.0, 62.0), 10),
        "nose_bridge": _nearest_vertices(verts, (0.0, 34.0, 60.0), 6),
        "left_temple": _nearest_vertices(verts, (-74.0, 10.0, 0.0), 6),
        "right_temple": _nearest_vertices(verts, (74.0, 10.0, 0.0), 6),
    }

    lm_tris = np.array(
        [_nearest_front_triangle(verts, tris, t) for t in _landmark_targets()], dtype=np.int64
    )
    lm_bary = rng.dirichlet(np.ones(3) * 4.0, size=LANDMARK_COUNT)
    lm_bary /= lm_bary.sum(axis=1, keepdims=True)

    jaw_weights = np.clip((-8.0 - verts[:, 1]) / 50.0, 0.0, 1.0) * np.clip(
        (verts[:, 2] + 25.0) / 50.0, 0.0, 1.0
    )

    asset = HeadModelAsset(
        name=f"toy-head-{seed}",
        template_vertices=verts,
        triangles=tris,
        uv=uv,
        shape_basis=_smooth_random_basis(rng, verts, n_beta, rms_mm=3.0),
        expression_basis=_smooth_random_basis(rng, verts, n_psi, rms_mm=2.0),
        jaw_joint=np.array([0.0, -15.0, 5.0]),
        jaw_weights=jaw_weights,
        landmark_triangles=lm_tris,
        landmark_barycentrics=lm_bary,
        vertex_groups=groups,
        source_units="millimeters",
    )
    asset.validate()
    return asset


def unit_sphere(rings: int = 24, segments: int = 32) -> Mesh:
    """Unit sphere with exact radial normals and lat-long uv (displacement testbed)."""
    verts, tris, uv = _ellipsoid_grid(rings, segments, (1.0, 1.0, 1.0))
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return Mesh(verts, tris, uv=uv, normals=verts)


def _box(lo, hi) -> Mesh:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append([a, b, c])
        tris.append([a, c, d])
    return Mesh(corners, np.array(tris, dtype=np.int64))


def _lens_ring(center, radius_x: float, radius_y: float, tube: float, n_ring: int = 20, n_tube: int = 8) -> Mesh:
    cx, cy, cz = center
    verts = []
    for i in range(n_ring):
        a = 2.0 * np.pi * i / n_ring
        for j in range(n_tube):
            b = 2.0 * np.pi * j / n_tube
            verts.append(
                [
                    cx + (radius_x + tube * np.cos(b)) * np.cos(a),
                    cy + (radius_y + tube * np.cos(b)) * np.sin(a),
                    cz + tube * np.sin(b),
                ]
            )
    tris = []
    for i in range(n_ring):
        for j in range(n_tube):
            p00 = i * n_tube + j
            p01 = i * n_tube + (j + 1) % n_tube
            p10 = ((i + 1) % n_ring) * n_tube + j
            p11 = ((i + 1) % n_ring) * n_tube + (j + 1) % n_tube
            tris.append([p00, p10, p11])
            tris.append([p00, p11, p01])
    return Mesh(np.array(verts), np.array(tris, dtype=np.int64))


def toy_eyewear(style: str = "classic") -> EyewearAsset:
    """Simple glasses frame in the asset-local convention (+x right, +y up, +z toward the onlooker)."""
    styles = {
        "classic": {"lens_rx": 23.0, "lens_ry": 17.0, "tube": 1.6, "color": (0.15, 0.15, 0.18, 1.0)},
        "round": {"lens_rx": 19.0, "lens_ry": 19.0, "tube": 1.8, "color": (0.45, 0.28, 0.12, 1.0)},
        "wide": {"lens_rx": 26.0, "lens_ry": 15.0, "tube": 1.4, "color": (0.10, 0.25, 0.40, 1.0)},
    }
    if style not in styles:
        raise KeyError(f"unknown toy eyewear style {style!r}; choose from {sorted(styles)}")
    cfg = styles[style]
    lens_cx = 31.0
    rim_x = lens_cx + cfg["lens_rx"] + cfg["tube"]
    # Hinges sit wide of the lenses so the temples straddle the skull when
    # worn, with margin for the toy model's random shape variation.
    hinge_x = 86.0

    parts = [
        _lens_ring((-lens_cx, 0.0, 0.0), cfg["lens_rx"], cfg["lens_ry"], cfg["tube"]),
        _lens_ring((lens_cx, 0.0, 0.0), cfg["lens_rx"], cfg["lens_ry"], cfg["tube"]),
        _box((-(lens_cx - cfg["lens_rx"]), 1.0, -1.2), (lens_cx - cfg["lens_rx"], 5.0, 1.2)),
        _box((-hinge_x, 0.0, -1.2), (-rim_x + 2.0, 4.0, 1.2)),  # left end piece
        _box((rim_x - 2.0, 0.0, -1.2), (hinge_x, 4.0, 1.2)),  # right end piece
        _box((-hinge_x - 1.8, -1.0, -110.0), (-hinge_x, 3.0, 0.0)),
        _box((hinge_x, -1.0, -110.0), (hinge_x + 1.8, 3.0, 0.0)),
    ]
    mesh = merge_meshes(parts)
    mesh = Mesh(
        mesh.vertices,
        mesh.triangles,
        normals=vertex_normals(mesh.vertices, mesh.triangles),
    )
    return EyewearAsset(
        mesh=mesh,
        bridge_anchor=np.array([0.0, 3.0, 0.0]),
        hinge_left=np.array([-hinge_x, 1.0, 0.0]),
        hinge_right=np.array([hinge_x, 1.0, 0.0]),
        lens_center_left=np.array([-lens_cx, 0.0, 0.0]),
        lens_center_right=np.array([lens_cx, 0.0, 0.0]),
        display_name=f"Toy {style.title()}",
        id=f"toy-{style}",
        base_color=cfg["color"],
    )
