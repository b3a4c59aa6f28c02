"""Recover head parameters (and a weak-perspective camera) from 2D or 3D landmarks.

Damped least squares over three residual blocks: confidence-weighted landmark
differences, eyelid-pair gap differences, and Tikhonov terms on the shape and
expression coefficients. Jacobians are central finite differences; at toy
basis sizes that is a few hundred microseconds per iteration, so analytic
derivatives would buy nothing but surface area.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError, NumericalFailureError
from .geometry import rodrigues, rotation_to_rotvec, umeyama_similarity
from .headmodel import LANDMARK_COUNT, HeadModelAsset, ParamVector

# Eyelid/eye-corner landmark pairs of the 68-point annotation convention
# (0-based): per eye, the horizontal corner pair plus the two upper/lower lid
# pairs. The observation may override them.
DEFAULT_EYE_CLOSURE_PAIRS = ((36, 39), (37, 41), (38, 40), (42, 45), (43, 47), (44, 46))


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    """Orthographic drop of z followed by uniform scale (px/mm) and 2D shift (px)."""

    scale: float
    translation: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise InvalidArgumentError(f"camera scale must be positive, got {self.scale}")
        t = np.asarray(self.translation, dtype=np.float64).reshape(2)
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("camera translation must be finite")
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "translation", t)


def project(points, camera: WeakPerspectiveCamera) -> np.ndarray:
    """Weak-perspective projection: (x, y) -> scale * (x, y) + translation."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return camera.scale * pts[:, :2] + camera.translation


@dataclass(frozen=True)
class Observation2D:
    """68 pixel landmarks with per-point confidence and eyelid pair indices."""

    points: np.ndarray
    confidence: np.ndarray = None
    eye_closure_pairs: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (LANDMARK_COUNT, 2):
            raise InvalidArgumentError(f"expected ({LANDMARK_COUNT}, 2) landmarks, got {pts.shape}")
        conf = self.confidence
        conf = np.ones(LANDMARK_COUNT) if conf is None else np.asarray(conf, dtype=np.float64)
        if conf.shape != (LANDMARK_COUNT,):
            raise InvalidArgumentError(f"confidence must have shape ({LANDMARK_COUNT},)")
        if np.any(conf < 0.0) or np.any(conf > 1.0) or not np.all(np.isfinite(conf)):
            raise InvalidArgumentError("confidence values must lie in [0, 1]")
        pairs = self.eye_closure_pairs
        pairs = np.asarray(
            DEFAULT_EYE_CLOSURE_PAIRS if pairs is None else pairs, dtype=np.int64
        ).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= LANDMARK_COUNT):
            raise InvalidArgumentError("eye closure pair indices must be valid landmark indices")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "eye_closure_pairs", pairs)


@dataclass(frozen=True)
class FitConfig:
    lambda_beta: float = 1e-4
    lambda_psi: float = 1e-4
    w_eye: float = 1.0
    max_iters: int = 200
    rel_tol: float = 1e-10
    jacobian_step: float = 1e-6
    init_damping: float = 1e-3
    damping_factor: float = 10.0
    max_damping: float = 1e12

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.rel_tol <= 0.0:
            raise InvalidArgumentError("rel_tol must be positive")
        if min(self.lambda_beta, self.lambda_psi, self.w_eye) < 0.0:
            raise InvalidArgumentError("weights must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    params: ParamVector
    camera: WeakPerspectiveCamera | None
    residual_rms: dict
    iterations: int
    converged: bool
    cost: float
    cost_history: tuple = field(repr=False, default=())


class _LandmarkModel:
    """Decode only the vertices the landmark embedding touches (fit inner loop)."""

    def __init__(self, asset: HeadModelAsset):
        corners = asset.triangles[asset.landmark_triangles]  # (68, 3) vertex ids
        self.vertex_ids = np.unique(corners)
        local = {int(v): i for i, v in enumerate(self.vertex_ids)}
        self.corner_local = np.array([[local[int(v)] for v in row] for row in corners])
        self.bary = asset.landmark_barycentrics
        rows = (3 * self.vertex_ids[:, None] + np.arange(3)).reshape(-1)
        self.template = asset.template_vertices[self.vertex_ids]
        self.shape_basis = asset.shape_basis[rows]
        self.expression_basis = asset.expression_basis[rows]
        self.jaw_joint = asset.jaw_joint
        self.jaw_weights = asset.jaw_weights[self.vertex_ids][:, None]

    def landmarks(self, params: ParamVector) -> np.ndarray:
        verts = self.template + (
            self.shape_basis @ params.beta + self.expression_basis @ params.psi
        ).reshape(-1, 3)
        if params.jaw_pose.any():
            rot = rodrigues(params.jaw_pose)
            pivoted = (verts - self.jaw_joint) @ rot.T + self.jaw_joint
            verts = self.jaw_weights * pivoted + (1.0 - self.jaw_weights) * verts
        if params.global_pose.any():
            verts = verts @ rodrigues(params.global_pose).T
        verts = verts + params.global_translation
        return np.einsum("lcd,lc->ld", verts[self.corner_local], self.bary)


def _residual_blocks_2d(model, params, camera, obs, cfg):
    projected = project(model.landmarks(params), camera)
    lmk = (obs.confidence[:, None] * (projected - obs.points)).reshape(-1)
    pairs = obs.eye_closure_pairs
    if len(pairs) and cfg.w_eye > 0.0:
        gap_pred = projected[pairs[:, 0]] - projected[pairs[:, 1]]
        gap_obs = obs.points[pairs[:, 0]] - obs.points[pairs[:, 1]]
        eye = (cfg.w_eye * (gap_pred - gap_obs)).reshape(-1)
    else:
        eye = np.zeros(2 * len(pairs))
    reg = np.concatenate(
        [np.sqrt(cfg.lambda_beta) * params.beta, np.sqrt(cfg.lambda_psi) * params.psi]
    )
    return lmk, eye, reg


def residuals(
    asset: HeadModelAsset,
    params: ParamVector,
    camera: WeakPerspectiveCamera,
    obs: Observation2D,
    cfg: FitConfig = FitConfig(),
) -> np.ndarray:
    """Stacked residual vector [landmarks | eye closure | regularization]."""
    if len(params.beta) != asset.n_beta or len(params.psi) != asset.n_psi:
        raise InvalidArgumentError("parameter dimensions do not match the asset")
    lmk, eye, reg = _residual_blocks_2d(_LandmarkModel(asset), params, camera, obs, cfg)
    return np.concatenate([lmk, eye, reg])


def _rms(block: np.ndarray) -> float:
    return float(np.sqrt(np.mean(block**2))) if block.size else 0.0


def _central_difference_jacobian(fun, x: np.ndarray, step: float) -> np.ndarray:
    cols = []
    for i in range(len(x)):
        forward = x.copy()
        forward[i] += step
        backward = x.copy()
        backward[i] -= step
        cols.append((fun(forward) - fun(backward)) / (2.0 * step))
    return np.stack(cols, axis=1)


def _levenberg_marquardt(fun, x0: np.ndarray, cfg: FitConfig):
    residual = fun(x0)
    if not np.all(np.isfinite(residual)):
        raise NumericalFailureError("initial cost is not finite")
    cost = float(residual @ residual)
    history = [cost]
    x = x0.copy()
    damping = cfg.init_damping
    iterations = 0
    converged = False
    for _ in range(cfg.max_iters):
        iterations += 1
        jac = _central_difference_jacobian(fun, x, cfg.jacobian_step)
        if not np.all(np.isfinite(jac)):
            raise NumericalFailureError("jacobian is not finite")
        gradient = jac.T @ residual
        hessian = jac.T @ jac
        diag = np.diag(hessian).copy()
        diag[diag < 1e-12] = 1e-12
        previous = cost
        accepted = False
        while damping <= cfg.max_damping:
            try:
                step = np.linalg.solve(hessian + damping * np.diag(diag), -gradient)
            except np.linalg.LinAlgError:
                damping *= cfg.damping_factor
                continue
            trial = fun(x + step)
            trial_cost = float(trial @ trial) if np.all(np.isfinite(trial)) else np.inf
            if trial_cost < cost:
                x = x + step
                residual = trial
                cost = trial_cost
                damping = max(damping / cfg.damping_factor, 1e-15)
                accepted = True
                break
            damping *= cfg.damping_factor
        history.append(cost)
        if not accepted:
            converged = True  # no descending step exists at numerical scale
            break
        if previous - cost <= cfg.rel_tol * max(previous, np.finfo(float).tiny):
            converged = True
            break
    return x, residual, cost, iterations, converged, tuple(history)


def fit_landmarks2d(
    asset: HeadModelAsset, obs: Observation2D, cfg: FitConfig = FitConfig()
) -> FitResult:
    """Fit (beta, psi, jaw, global pose, camera) to 2D landmark observations.

    Initialization: zero parameters; camera from a 2D similarity alignment of
    the template landmarks' xy onto the observed points.
    """
    usable = int(np.count_nonzero(obs.confidence > 0.0))
    if usable < 4:
        raise InsufficientDataError(f"need at least 4 landmarks with confidence > 0, got {usable}")
    model = _LandmarkModel(asset)
    nb, npsi = asset.n_beta, asset.n_psi

    template_lmk = model.landmarks(ParamVector.zeros(nb, npsi))
    mask = obs.confidence > 0.0
    scale0, _, trans0 = umeyama_similarity(
        template_lmk[mask, :2], obs.points[mask], with_scale=True
    )
    x0 = np.concatenate(
        [np.zeros(nb + npsi + 6), [scale0], trans0]
    )

    def unpack(x):
        params = ParamVector(
            x[:nb], x[nb : nb + npsi], x[nb + npsi : nb + npsi + 3],
            x[nb + npsi + 3 : nb + npsi + 6], np.zeros(3),
        )
        return params, x[nb + npsi + 6], x[nb + npsi + 7 :]

    n_residuals = 2 * LANDMARK_COUNT + 2 * len(obs.eye_closure_pairs) + nb + npsi

    def fun(x):
        params, cam_scale, cam_trans = unpack(x)
        if cam_scale <= 0.0:
            return np.full(n_residuals, np.inf)
        camera = WeakPerspectiveCamera(cam_scale, cam_trans)
        return np.concatenate(_residual_blocks_2d(model, params, camera, obs, cfg))

    x, residual, cost, iterations, converged, history = _levenberg_marquardt(fun, x0, cfg)
    params, cam_scale, cam_trans = unpack(x)
    n_lmk = 2 * LANDMARK_COUNT
    n_eye = 2 * len(obs.eye_closure_pairs)
    return FitResult(
        params=params,
        camera=WeakPerspectiveCamera(cam_scale, cam_trans),
        residual_rms={
            "landmarks": _rms(residual[:n_lmk]),
            "eye_closure": _rms(residual[n_lmk : n_lmk + n_eye]),
            "regularization": _rms(residual[n_lmk + n_eye :]),
            "total": _rms(residual),
        },
        iterations=iterations,
        converged=converged,
        cost=cost,
        cost_history=history,
    )


def fit_landmarks3d(
    asset: HeadModelAsset,
    points3d,
    confidence=None,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Fit (beta, psi, jaw, global pose/translation) to 3D landmarks; no camera.

    The global pose is initialized by rigidly aligning the template landmarks
    onto the high-confidence observations.
    """
    pts = np.asarray(points3d, dtype=np.float64)
    if pts.shape != (LANDMARK_COUNT, 3):
        raise InvalidArgumentError(f"expected ({LANDMARK_COUNT}, 3) landmarks, got {pts.shape}")
    conf = np.ones(LANDMARK_COUNT) if confidence is None else np.asarray(confidence, dtype=np.float64)
    if conf.shape != (LANDMARK_COUNT,):
        raise InvalidArgumentError(f"confidence must have shape ({LANDMARK_COUNT},)")
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise InvalidArgumentError("confidence values must lie in [0, 1]")
    usable = int(np.count_nonzero(conf > 0.0))
    if usable < 3:
        raise InsufficientDataError(f"need at least 3 landmarks with confidence > 0, got {usable}")

    model = _LandmarkModel(asset)
    nb, npsi = asset.n_beta, asset.n_psi
    template_lmk = model.landmarks(ParamVector.zeros(nb, npsi))
    mask = conf > 0.0
    _, rot0, trans0 = umeyama_similarity(template_lmk[mask], pts[mask], with_scale=False)
    x0 = np.concatenate([np.zeros(nb + npsi + 3), rotation_to_rotvec(rot0), trans0])

    def unpack(x):
        return ParamVector(
            x[:nb], x[nb : nb + npsi], x[nb + npsi : nb + npsi + 3],
            x[nb + npsi + 3 : nb + npsi + 6], x[nb + npsi + 6 :],
        )

    def fun(x):
        params = unpack(x)
        lmk = (conf[:, None] * (model.landmarks(params) - pts)).reshape(-1)
        reg = np.concatenate(
            [np.sqrt(cfg.lambda_beta) * params.beta, np.sqrt(cfg.lambda_psi) * params.psi]
        )
        return np.concatenate([lmk, reg])

    x, residual, cost, iterations, converged, history = _levenberg_marquardt(fun, x0, cfg)
    n_lmk = 3 * LANDMARK_COUNT
    return FitResult(
        params=unpack(x),
        camera=None,
        residual_rms={
            "landmarks": _rms(residual[:n_lmk]),
            "eye_closure": 0.0,
            "regularization": _rms(residual[n_lmk:]),
            "total": _rms(residual),
        },
        iterations=iterations,
        converged=converged,
        cost=cost,
        cost_history=history,
    )


@dataclass(frozen=True)
class LandmarkFile:
    """Parsed landmark JSON: 68 2D or 3D points plus optional confidence/pairs."""

    points: np.ndarray
    confidence: np.ndarray
    eye_closure_pairs: np.ndarray | None

    @property
    def is_3d(self) -> bool:
        return self.points.shape[1] == 3

    def observation2d(self) -> Observation2D:
        if self.is_3d:
            raise InvalidArgumentError("landmarks are 3D; use fit_landmarks3d")
        return Observation2D(self.points, self.confidence, self.eye_closure_pairs)


def parse_landmarks_json(source) -> LandmarkFile:
    """Parse the landmark file schema: a bare 68-point array, or an object with
    "points" plus optional "confidence" and "eye_closure_pairs"."""
    if isinstance(source, (bytes, str)):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"landmark file is not valid JSON: {e}") from e
    if isinstance(source, list):
        payload = {"points": source}
    elif isinstance(source, dict):
        payload = source
    else:
        raise InvalidArgumentError("landmark JSON must be an array or an object")
    if "points" not in payload:
        raise InvalidArgumentError('landmark object must carry a "points" array')
    pts = np.asarray(payload["points"], dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise InvalidArgumentError(f"landmarks must be (n, 2) or (n, 3), got {pts.shape}")
    if pts.shape[0] != LANDMARK_COUNT:
        raise InvalidArgumentError(f"expected {LANDMARK_COUNT} landmarks, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("landmarks must be finite")
    conf = payload.get("confidence")
    conf = np.ones(LANDMARK_COUNT) if conf is None else np.asarray(conf, dtype=np.float64)
    if conf.shape != (LANDMARK_COUNT,) or np.any(conf < 0.0) or np.any(conf > 1.0):
        raise InvalidArgumentError(f"confidence must be {LANDMARK_COUNT} values in [0, 1]")
    pairs = payload.get("eye_closure_pairs")
    pairs = None if pairs is None else np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return LandmarkFile(points=pts, confidence=conf, eye_closure_pairs=pairs)
