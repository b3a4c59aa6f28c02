"""Benchmark-style evaluation: rigid landmark alignment, scan-to-mesh distances,
median/mean/std summaries, and cumulative error curves.

Alignment is rigid (no scale) by default so shape error is not absorbed into
a scale factor; callers opt into similarity alignment explicitly. The std is
the population standard deviation of the full error set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distance import closest_points_on_mesh
from .errors import InvalidArgumentError
from .geometry import Similarity3, as_points, umeyama
from .mesh import Mesh


@dataclass(frozen=True)
class ErrorSummary:
    median_mm: float
    mean_mm: float
    std_mm: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise InvalidArgumentError("summary needs at least one distance")
        if self.std_mm < 0.0 or self.median_mm < 0.0 or self.mean_mm < 0.0:
            raise InvalidArgumentError("summary statistics must be nonnegative")


@dataclass(frozen=True)
class ErrorCurve:
    thresholds_mm: np.ndarray
    fraction_below: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds_mm, dtype=np.float64)
        f = np.asarray(self.fraction_below, dtype=np.float64)
        if t.ndim != 1 or t.shape != f.shape:
            raise InvalidArgumentError("thresholds and fractions must be equal-length 1-d arrays")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidArgumentError("thresholds must be strictly ascending")
        if np.any(np.diff(f) < 0.0) or np.any(f < 0.0) or np.any(f > 1.0):
            raise InvalidArgumentError("fractions must be nondecreasing within [0, 1]")
        object.__setattr__(self, "thresholds_mm", t)
        object.__setattr__(self, "fraction_below", f)


def align_rigid_landmarks(pred, gt, with_scale: bool = False) -> Similarity3:
    """Least-squares transform mapping predicted landmarks onto ground truth.

    Rigid by default; pass with_scale=True to absorb a global scale as well.
    """
    return umeyama(as_points(pred, "pred"), as_points(gt, "gt"), with_scale=with_scale)


def scan_to_mesh_distances(points, mesh: Mesh) -> np.ndarray:
    """Exact distance from each scan point to the nearest point on the mesh surface."""
    pts = as_points(points, "scan points")
    if len(pts) == 0:
        raise InvalidArgumentError("no scan points given")
    if mesh.n_triangles == 0:
        raise InvalidArgumentError("mesh has no triangles")
    distances, _, _ = closest_points_on_mesh(pts, mesh)
    return distances


def summarize(distances) -> ErrorSummary:
    """Median, arithmetic mean, and population standard deviation of an error set."""
    d = np.asarray(distances, dtype=np.float64).reshape(-1)
    if d.size == 0:
        raise InvalidArgumentError("cannot summarize an empty distance list")
    if not np.all(np.isfinite(d)):
        raise InvalidArgumentError("distances must be finite")
    return ErrorSummary(
        median_mm=float(np.median(d)),
        mean_mm=float(np.mean(d)),
        std_mm=float(np.std(d)),  # population std (ddof=0)
        count=int(d.size),
    )


def cumulative_curve(distances, max_mm: float, n_steps: int) -> ErrorCurve:
    """Fraction of errors at or below each of n_steps thresholds evenly spaced in [0, max_mm]."""
    d = np.asarray(distances, dtype=np.float64).reshape(-1)
    if d.size == 0:
        raise InvalidArgumentError("cannot build a curve from an empty distance list")
    if n_steps < 2:
        raise InvalidArgumentError("n_steps must be at least 2")
    if max_mm <= 0.0:
        raise InvalidArgumentError("max_mm must be positive")
    thresholds = np.linspace(0.0, max_mm, n_steps)
    sorted_d = np.sort(d)
    fractions = np.searchsorted(sorted_d, thresholds, side="right") / d.size
    return ErrorCurve(thresholds, fractions)


def render_error_table(rows) -> str:
    """Plain-text table in the benchmark's layout: Median/Mean/Std, each split LQ/HQ.

    `rows` is a sequence of (method, lq_summary_or_None, hq_summary_or_None).
    """
    header1 = f"{'Method':<14}{'Median (mm)':<18}{'Mean (mm)':<18}{'Std (mm)':<18}"
    header2 = f"{'':<14}" + "".join(f"{'LQ':<9}{'HQ':<9}" for _ in range(3))
    lines = [header1, header2, "-" * len(header1)]
    for method, lq, hq in rows:
        cells = []
        for stat in ("median_mm", "mean_mm", "std_mm"):
            for summary in (lq, hq):
                cells.append(f"{getattr(summary, stat):<9.2f}" if summary is not None else f"{'-':<9}")
        lines.append(f"{method:<14}" + "".join(cells))
    return "\n".join(lines) + "\n"


def curve_to_csv(curve: ErrorCurve) -> str:
    """CSV with a `threshold_mm,fraction` header row."""
    lines = ["threshold_mm,fraction"]
    for t, f in zip(curve.thresholds_mm, curve.fraction_below):
        lines.append(f"{t:.6g},{f:.6g}")
    return "\n".join(lines) + "\n"
