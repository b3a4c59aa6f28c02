"""Try-on HTTP service: subjects from landmarks (or a detector), a frame
catalog, try-on renders to content-addressed GLB files.

Everything persists as plain files under one data directory:
`subjects/*.json`, `outputs/<key>.glb`, `catalog/` with `<id>.glb` +
`<id>.anchors.json` pairs. Renders are synchronous; identical requests hit the
content-addressed cache and return the same bytes without recomputing.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import glb as glbmod
from .detector import HttpLandmarkDetector, LandmarkDetectorClient
from .errors import (
    CannotFitError,
    DetectorError,
    EyefitError,
    InsufficientDataError,
    InvalidArgumentError,
    IngestError,
    NumericalFailureError,
)
from .fitting import FitConfig, fit_landmarks2d, fit_landmarks3d, parse_landmarks_json
from .headmodel import HeadModelAsset, ParamVector, decode, load_asset
from .placement import EyewearAsset, FitParams, load_eyewear_asset, place_eyewear

PIPELINE_VERSION = "1"

_ENV_OVERRIDES = {
    "EYEFIT_DATA_DIR": "data_dir",
    "EYEFIT_HEAD_ASSET": "head_asset",
    "EYEFIT_DETECTOR_URL": "detector_url",
    "EYEFIT_HOST": "host",
    "EYEFIT_PORT": "port",
    "EYEFIT_FRONTEND_DIR": "frontend_dir",
}


@dataclass
class ServiceConfig:
    data_dir: Path
    head_asset: Path
    detector_url: str | None = None
    detector_timeout_s: float = 10.0
    host: str = "127.0.0.1"
    port: int = 8080
    frontend_dir: Path | None = None

    @classmethod
    def load(cls, config_path=None, **overrides) -> "ServiceConfig":
        """Config file values, overridden by EYEFIT_* env vars, then by kwargs."""
        raw: dict = {}
        if config_path is not None:
            raw.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        for env_name, key in _ENV_OVERRIDES.items():
            if os.environ.get(env_name):
                raw[key] = os.environ[env_name]
        raw.update({k: v for k, v in overrides.items() if v is not None})
        if "data_dir" not in raw or "head_asset" not in raw:
            raise InvalidArgumentError("config requires data_dir and head_asset")
        return cls(
            data_dir=Path(raw["data_dir"]),
            head_asset=Path(raw["head_asset"]),
            detector_url=raw.get("detector_url"),
            detector_timeout_s=float(raw.get("detector_timeout_s", 10.0)),
            host=raw.get("host", "127.0.0.1"),
            port=int(raw.get("port", 8080)),
            frontend_dir=Path(raw["frontend_dir"]) if raw.get("frontend_dir") else None,
        )


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    display_name: str
    glb_path: Path
    anchors_path: Path
    thumbnail: Path | None = None

    def to_json(self) -> dict:
        return {"id": self.id, "display_name": self.display_name}


@dataclass
class CatalogIngest:
    entries: list = field(default_factory=list)
    problems: list = field(default_factory=list)  # (entry id or filename, reason)


def ingest_catalog(directory) -> CatalogIngest:
    """Validate every `<id>.glb` + `<id>.anchors.json` pair in a catalog directory.

    Invalid entries are reported with reasons, never silently skipped;
    duplicate ids abort the whole ingest.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"catalog directory {directory} does not exist")
    result = CatalogIngest()
    seen: set[str] = set()
    for glb_path in sorted(directory.glob("*.glb")):
        entry_id = glb_path.stem
        if entry_id in seen:
            raise IngestError(f"duplicate catalog id {entry_id!r}")
        seen.add(entry_id)
        anchors_path = directory / f"{entry_id}.anchors.json"
        if not anchors_path.exists():
            result.problems.append((entry_id, "missing anchors sidecar"))
            continue
        violations = glbmod.validate_glb(glb_path.read_bytes())
        if violations:
            result.problems.append((entry_id, f"invalid GLB: {violations[0]}"))
            continue
        try:
            asset = load_eyewear_asset(glb_path, anchors_path)
        except EyefitError as e:
            result.problems.append((entry_id, str(e)))
            continue
        thumbnail = directory / f"{entry_id}.png"
        result.entries.append(
            CatalogEntry(
                id=asset.id,
                display_name=asset.display_name,
                glb_path=glb_path,
                anchors_path=anchors_path,
                thumbnail=thumbnail if thumbnail.exists() else None,
            )
        )
    return result


@dataclass(frozen=True)
class Subject:
    subject_id: str
    params: ParamVector
    source: str  # "landmarks-file" | "detector"
    created_at: float

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "params": self.params.to_dict(),
            "source": self.source,
            "created_at": self.created_at,
        }


class SubjectStore:
    """Append-only subject persistence: one JSON file per subject, atomic writes."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def create(self, params: ParamVector, source: str) -> Subject:
        subject = Subject(uuid.uuid4().hex, params, source, time.time())
        _atomic_write(
            self.directory / f"{subject.subject_id}.json",
            json.dumps(subject.to_json(), indent=1, sort_keys=True).encode("utf-8"),
        )
        return subject

    def load(self, subject_id: str) -> Subject | None:
        path = self.directory / f"{subject_id}.json"
        if not path.exists() or not subject_id or "/" in subject_id:
            return None
        raw = json.loads(path.read_text(encoding="utf-8"))
        return Subject(
            raw["subject_id"], ParamVector.from_dict(raw["params"]), raw["source"], raw["created_at"]
        )


def _atomic_write(path: Path, data: bytes):
    tmp = path.parent / f".tmp-{uuid.uuid4().hex}"
    tmp.write_bytes(data)
    os.replace(tmp, path)


def render_key(
    model_hash: str, params: ParamVector, frame_id: str, frame_hash: str, fit: FitParams
) -> str:
    """Content address for a render: any input change changes the key."""
    payload = json.dumps(
        {
            "pipeline": PIPELINE_VERSION,
            "model": model_hash,
            "params": {k: [float(x).hex() for x in v] for k, v in params.to_dict().items()},
            "frame": frame_id,
            "frame_hash": frame_hash,
            "fit": [
                float(fit.forward_offset_mm).hex(),
                float(fit.vertical_offset_mm).hex(),
                None if fit.scale_override is None else float(fit.scale_override).hex(),
            ],
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TryonPipeline:
    """Shared immutable pipeline state: head asset, catalog, eyewear cache."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.head_asset: HeadModelAsset = load_asset(config.head_asset)
        self.data_dir = Path(config.data_dir)
        self.outputs_dir = self.data_dir / "outputs"
        self.outputs_dir.mkdir(parents=True, exist_ok=True)
        self.subjects = SubjectStore(self.data_dir / "subjects")
        catalog_dir = self.data_dir / "catalog"
        if catalog_dir.is_dir():
            ingest = ingest_catalog(catalog_dir)
        else:
            ingest = CatalogIngest()
        self.catalog: dict[str, CatalogEntry] = {e.id: e for e in ingest.entries}
        self.catalog_problems = ingest.problems
        self._eyewear_cache: dict[str, tuple[EyewearAsset, str]] = {}
        self.detector: LandmarkDetectorClient | None = None
        if config.detector_url:
            self.detector = HttpLandmarkDetector(config.detector_url, config.detector_timeout_s)

    def eyewear(self, frame_id: str) -> tuple[EyewearAsset, str]:
        if frame_id not in self._eyewear_cache:
            entry = self.catalog[frame_id]
            glb_bytes = entry.glb_path.read_bytes()
            anchors_bytes = entry.anchors_path.read_bytes()
            frame_hash = hashlib.sha256(glb_bytes + anchors_bytes).hexdigest()
            self._eyewear_cache[frame_id] = (
                load_eyewear_asset(entry.glb_path, entry.anchors_path),
                frame_hash,
            )
        return self._eyewear_cache[frame_id]

    def fit_from_landmarks(self, landmark_payload) -> ParamVector:
        lm = parse_landmarks_json(landmark_payload)
        if lm.is_3d:
            result = fit_landmarks3d(self.head_asset, lm.points, lm.confidence, FitConfig())
        else:
            result = fit_landmarks2d(self.head_asset, lm.observation2d(), FitConfig())
        return result.params

    def render(self, subject: Subject, frame_id: str, fit: FitParams) -> tuple[str, bool]:
        """Render (or reuse) a try-on GLB; returns (key, cached)."""
        eyewear, frame_hash = self.eyewear(frame_id)
        key = render_key(self.head_asset.content_hash, subject.params, frame_id, frame_hash, fit)
        out_path = self.outputs_dir / f"{key}.glb"
        if out_path.exists():
            return key, True
        head_mesh = decode(self.head_asset, subject.params).with_vertex_normals()
        placement = place_eyewear(self.head_asset, head_mesh, eyewear, fit)
        scene = glbmod.merge_scene(
            head_mesh,
            eyewear.mesh,
            placement,
            head_material=glbmod.Material(base_color=(0.85, 0.72, 0.62, 1.0)),
            eyewear_material=glbmod.Material(base_color=eyewear.base_color),
        )
        _atomic_write(out_path, glbmod.write_glb(scene))
        return key, False

    def output_path(self, key: str) -> Path:
        return self.outputs_dir / f"{key}.glb"


def create_app(config: ServiceConfig) -> FastAPI:
    pipeline = TryonPipeline(config)
    app = FastAPI(title="eyefit try-on service")
    app.state.pipeline = pipeline

    @app.get("/api/health")
    def health():
        return {"status": "ok", "model_asset_hash": pipeline.head_asset.content_hash,
                "detector_configured": pipeline.detector is not None}

    @app.get("/api/catalog")
    def catalog():
        return {
            "entries": [e.to_json() for e in pipeline.catalog.values()],
            "problems": [{"id": pid, "reason": reason} for pid, reason in pipeline.catalog_problems],
        }

    @app.post("/api/subjects", status_code=201)
    async def create_subject(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            form = await request.form()
            upload = form.get("image")
            if upload is None:
                raise HTTPException(422, "multipart body must carry an 'image' file field")
            if pipeline.detector is None:
                raise HTTPException(503, "photo upload unavailable: no landmark detector configured")
            image_bytes = await upload.read()
            try:
                points, confidence = pipeline.detector.detect(image_bytes)
            except DetectorError as e:
                raise HTTPException(502, f"landmark detector failed: {e}") from e
            payload = {"points": points.tolist(), "confidence": confidence.tolist()}
            source = "detector"
        else:
            payload = await request.body()
            source = "landmarks-file"
        try:
            params = pipeline.fit_from_landmarks(payload)
        except (InvalidArgumentError, InsufficientDataError) as e:
            raise HTTPException(422, str(e)) from e
        except NumericalFailureError as e:
            raise HTTPException(500, f"fit failed: {e}") from e
        subject = pipeline.subjects.create(params, source)
        return JSONResponse({"subject_id": subject.subject_id}, status_code=201)

    @app.post("/api/tryon")
    async def tryon(request: Request):
        body = await request.json()
        for field_name in ("subject_id", "frame_id"):
            if field_name not in body:
                raise HTTPException(422, f"missing {field_name}")
        subject = pipeline.subjects.load(str(body["subject_id"]))
        if subject is None:
            raise HTTPException(404, f"unknown subject {body['subject_id']!r}")
        frame_id = str(body["frame_id"])
        if frame_id not in pipeline.catalog:
            raise HTTPException(404, f"unknown frame {frame_id!r}")
        try:
            fit = FitParams(
                forward_offset_mm=float(body.get("forward_offset_mm", 10.0)),
                vertical_offset_mm=float(body.get("vertical_offset_mm", 0.0)),
                scale_override=(
                    float(body["scale_override"]) if body.get("scale_override") is not None else None
                ),
            )
        except (TypeError, ValueError, InvalidArgumentError) as e:
            raise HTTPException(422, f"bad fit parameters: {e}") from e
        try:
            key, cached = pipeline.render(subject, frame_id, fit)
        except CannotFitError as e:
            raise HTTPException(422, f"cannot fit: {e}") from e
        return {"glb_url": f"/assets/{key}.glb", "key": key, "cached": cached}

    @app.get("/assets/{key}.glb")
    def asset(key: str):
        path = pipeline.output_path(key)
        if "/" in key or not path.exists():
            raise HTTPException(404, "no such asset")
        return Response(path.read_bytes(), media_type="model/gltf-binary")

    if config.frontend_dir is not None and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="frontend")
    return app
