"""Exact point-to-triangle-mesh distances.

The production path prunes triangle candidates with a bounding argument
(distance to the nearest mesh vertex is an upper bound on the surface
distance; centroid distance minus circumscribed radius is a lower bound per
triangle) and runs the exact closest-point computation only on survivors.
Results are bitwise-equal to the pure all-pairs evaluation, including the
first-lowest-index tie rule, because the surviving set always contains every
minimizer and per-pair arithmetic is identical.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .geometry import as_points
from .mesh import Mesh

_PRUNE_MARGIN = 1e-9  # mm; absorbs rounding in the bound arithmetic


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    nonzero = den != 0.0
    return np.where(nonzero, num, 0.0) / np.where(nonzero, den, 1.0)


def _closest_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest point on triangle (a, b, c) for each p; shapes broadcast elementwise.

    Barycentric region classification; regions are applied lowest-priority
    first so the final overwrite order matches the sequential algorithm.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    v_in = _safe_div(vb, va + vb + vc)
    w_in = _safe_div(vc, va + vb + vc)
    closest = a + ab * v_in[..., None] + ac * w_in[..., None]

    on_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    t_bc = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))[..., None]
    closest = np.where(on_bc[..., None], b + t_bc * (c - b), closest)

    on_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    t_ac = _safe_div(d2, d2 - d6)[..., None]
    closest = np.where(on_ac[..., None], a + t_ac * ac, closest)

    at_c = (d6 >= 0.0) & (d5 <= d6)
    closest = np.where(at_c[..., None], np.broadcast_to(c, closest.shape), closest)

    on_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    t_ab = _safe_div(d1, d1 - d3)[..., None]
    closest = np.where(on_ab[..., None], a + t_ab * ab, closest)

    at_b = (d3 >= 0.0) & (d4 <= d3)
    closest = np.where(at_b[..., None], np.broadcast_to(b, closest.shape), closest)

    at_a = (d1 <= 0.0) & (d2 <= 0.0)
    closest = np.where(at_a[..., None], np.broadcast_to(a, closest.shape), closest)
    return closest


def _pair_distances_sq(p: np.ndarray, closest: np.ndarray) -> np.ndarray:
    return ((p - closest) ** 2).sum(-1)


def _sq_dists(points: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances (n, m) via the expanded product (BLAS-backed)."""
    cross = points @ targets.T
    out = (points**2).sum(1)[:, None] + (targets**2).sum(1)[None, :] - 2.0 * cross
    return np.maximum(out, 0.0)


def brute_force_closest_points(points, mesh: Mesh, chunk: int = 256):
    """All-pairs reference path; the pruned path must match it bitwise."""
    pts = as_points(points)
    if mesh.n_triangles == 0:
        raise InvalidArgumentError("mesh has no triangles")
    tri = mesh.vertices[mesh.triangles]
    a = tri[None, :, 0]
    b = tri[None, :, 1]
    c = tri[None, :, 2]
    dists = np.empty(len(pts))
    closest = np.empty((len(pts), 3))
    tri_idx = np.empty(len(pts), dtype=np.int64)
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk, None, :]
        cand = _closest_on_triangles(p, a, b, c)
        d2 = _pair_distances_sq(p, cand)
        best = np.argmin(d2, axis=1)
        rows = np.arange(len(best))
        dists[start : start + chunk] = np.sqrt(d2[rows, best])
        closest[start : start + chunk] = cand[rows, best]
        tri_idx[start : start + chunk] = best
    return dists, closest, tri_idx


def closest_points_on_mesh(points, mesh: Mesh, chunk: int = 2048):
    """Per point: (distance, closest surface point, index of the nearest triangle)."""
    pts = as_points(points)
    if mesh.n_triangles == 0:
        raise InvalidArgumentError("mesh has no triangles")
    tri = mesh.vertices[mesh.triangles]  # (T, 3, 3)
    centroids = tri.mean(axis=1)
    radii = np.sqrt(((tri - centroids[:, None, :]) ** 2).sum(-1).max(-1))

    dists = np.empty(len(pts))
    closest = np.empty((len(pts), 3))
    tri_idx = np.empty(len(pts), dtype=np.int64)
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk]
        # Upper bound: nearest mesh vertex is itself a surface point.
        ub = np.sqrt(_sq_dists(p, mesh.vertices).min(axis=1))
        # Lower bound per (point, triangle): centroid distance minus radius.
        lb = np.sqrt(_sq_dists(p, centroids)) - radii[None, :]
        pi, ti = np.nonzero(lb <= (ub[:, None] + _PRUNE_MARGIN))

        cand = _closest_on_triangles(p[pi], tri[ti, 0], tri[ti, 1], tri[ti, 2])
        d2 = _pair_distances_sq(p[pi], cand)

        best_d2 = np.full(len(p), np.inf)
        np.minimum.at(best_d2, pi, d2)
        winners = d2 == best_d2[pi]
        # np.nonzero emits pairs in (point, ascending triangle) order, so the
        # first winner per point is the lowest triangle index, matching argmin.
        win_rows = np.nonzero(winners)[0]
        points_of_win, first = np.unique(pi[win_rows], return_index=True)
        sel = win_rows[first]
        if len(points_of_win) != len(p):
            raise AssertionError("pruning lost a candidate set; bounds are broken")
        dists[start : start + chunk] = np.sqrt(best_d2)
        closest[start : start + chunk][points_of_win] = cand[sel]
        tri_idx[start : start + chunk][points_of_win] = ti[sel]
    return dists, closest, tri_idx
