"""UV displacement maps: offset mesh vertices along their stored normals.

Maps arrive as grayscale PNGs (8- or 16-bit). Raw values map linearly onto
[-range_mm, +range_mm]: 0 -> -range, max raw value -> +range. Sampling is
bilinear with clamped edges; uv (0, 0) hits the center of the first texel of
the first row, (1, 1) the center of the last.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError
from .mesh import Mesh


@dataclass(frozen=True)
class DisplacementMap:
    """Scalar offsets in mm on a (height, width) grid; addressing clamps at the edges."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidArgumentError(f"map must be a (height, width) grid, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("map values must be finite")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def sample(self, uv) -> np.ndarray:
        """Bilinear sample at uv in [0,1]^2 (clamped outside); returns mm offsets."""
        uv = np.asarray(uv, dtype=np.float64)
        if uv.ndim == 1:
            uv = uv[None, :]
        if uv.ndim != 2 or uv.shape[1] != 2:
            raise InvalidArgumentError(f"uv must have shape (n, 2), got {uv.shape}")
        x = np.clip(uv[:, 0], 0.0, 1.0) * (self.width - 1)
        y = np.clip(uv[:, 1], 0.0, 1.0) * (self.height - 1)
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        x1 = np.minimum(x0 + 1, self.width - 1)
        y1 = np.minimum(y0 + 1, self.height - 1)
        fx = x - x0
        fy = y - y0
        v = self.values
        top = v[y0, x0] * (1.0 - fx) + v[y0, x1] * fx
        bottom = v[y1, x0] * (1.0 - fx) + v[y1, x1] * fx
        return top * (1.0 - fy) + bottom * fy


def apply_displacement(mesh: Mesh, disp: DisplacementMap, gain: float = 1.0) -> Mesh:
    """v' = v + gain * sample(map, uv(v)) * normal(v), normals frozen from the input mesh."""
    if mesh.uv is None:
        raise InvalidArgumentError("mesh must carry per-vertex uv")
    if mesh.normals is None:
        raise InvalidArgumentError("mesh must carry per-vertex normals")
    if gain == 0.0:
        return mesh
    offsets = gain * disp.sample(mesh.uv)
    return Mesh(
        mesh.vertices + offsets[:, None] * mesh.normals,
        mesh.triangles,
        uv=mesh.uv,
        normals=mesh.normals,
    )


def load_displacement_png(source, range_mm: float) -> DisplacementMap:
    """Decode an 8- or 16-bit grayscale PNG into a map spanning [-range_mm, +range_mm]."""
    if range_mm <= 0.0:
        raise InvalidArgumentError("range_mm must be positive")
    if isinstance(source, (bytes, bytearray)):
        image = Image.open(io.BytesIO(source))
    else:
        image = Image.open(source)
    if image.mode == "L":
        max_raw = 255.0
    elif image.mode in ("I;16", "I;16B", "I"):
        max_raw = 65535.0
    else:
        image = image.convert("L")
        max_raw = 255.0
    raw = np.asarray(image, dtype=np.float64)
    return DisplacementMap(raw / max_raw * 2.0 * range_mm - range_mm)
