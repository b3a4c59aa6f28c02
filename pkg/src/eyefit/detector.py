"""Client interface for an external face-landmark detector service.

The pipeline never looks at images itself; when a photo is uploaded, the
configured detector turns it into 68 2D landmarks plus confidences. Tests use
in-process fakes; the bundled HTTP client posts raw image bytes and expects
`{"points": [[x, y] * 68], "confidence": [...]}` back.
"""

from __future__ import annotations

from typing import Protocol

import httpx
import numpy as np

from .errors import DetectorError
from .headmodel import LANDMARK_COUNT


class LandmarkDetectorClient(Protocol):
    def detect(self, image_bytes: bytes) -> tuple[np.ndarray, np.ndarray]:
        """Return (points (68, 2), confidence (68,)) for one face image."""
        ...


def _validate_detection(points, confidence) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape != (LANDMARK_COUNT, 2):
        raise DetectorError(f"detector returned {pts.shape}, expected ({LANDMARK_COUNT}, 2)")
    conf = (
        np.ones(LANDMARK_COUNT)
        if confidence is None
        else np.asarray(confidence, dtype=np.float64).reshape(-1)
    )
    if conf.shape != (LANDMARK_COUNT,):
        raise DetectorError("detector confidence array has the wrong length")
    if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(conf))):
        raise DetectorError("detector returned non-finite values")
    return pts, np.clip(conf, 0.0, 1.0)


class HttpLandmarkDetector:
    """POSTs image bytes to a detector endpoint and validates the JSON reply."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def detect(self, image_bytes: bytes) -> tuple[np.ndarray, np.ndarray]:
        try:
            response = httpx.post(
                self.endpoint,
                content=image_bytes,
                headers={"content-type": "application/octet-stream"},
                timeout=self.timeout_s,
            )
            response.raise_for_status()
            payload = response.json()
        except httpx.HTTPError as e:
            raise DetectorError(f"detector request failed: {e}") from e
        except ValueError as e:
            raise DetectorError(f"detector returned invalid JSON: {e}") from e
        if "points" not in payload:
            raise DetectorError('detector reply lacks "points"')
        return _validate_detection(payload["points"], payload.get("confidence"))
