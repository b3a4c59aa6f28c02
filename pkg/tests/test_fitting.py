import json

import numpy as np
import pytest

from eyefit.errors import InsufficientDataError, InvalidArgumentError
from eyefit.fitting import (
    DEFAULT_EYE_CLOSURE_PAIRS,
    FitConfig,
    Observation2D,
    WeakPerspectiveCamera,
    _central_difference_jacobian,
    fit_landmarks2d,
    fit_landmarks3d,
    parse_landmarks_json,
    project,
    residuals,
)
from eyefit.geometry import rodrigues
from eyefit.headmodel import ParamVector, decode, embed_landmarks

from conftest import random_params

RECOVERY_CFG = FitConfig(lambda_beta=1e-6, lambda_psi=1e-6)


def synth_observation(asset, params, camera):
    landmarks = embed_landmarks(asset, decode(asset, params))
    return Observation2D(project(landmarks, camera))


def draw_scene(asset, rng):
    params = random_params(asset, rng)
    camera = WeakPerspectiveCamera(rng.uniform(2.0, 5.0), rng.uniform(150.0, 450.0, size=2))
    return params, camera


def block_errors(result, true_params, true_camera=None):
    """Per-block error relative to the truth with a unit floor for near-zero blocks."""
    def rel(a, b):
        return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1.0)

    errs = [
        rel(result.params.beta, true_params.beta),
        rel(result.params.psi, true_params.psi),
        rel(result.params.jaw_pose, true_params.jaw_pose),
        rel(result.params.global_pose, true_params.global_pose),
    ]
    if true_camera is not None:
        errs.append(abs(result.camera.scale - true_camera.scale) / true_camera.scale)
        errs.append(rel(result.camera.translation, true_camera.translation))
    else:
        errs.append(rel(result.params.global_translation, true_params.global_translation))
    return max(errs)


class TestProject:
    def test_identity_camera_drops_z(self):
        cam = WeakPerspectiveCamera(1.0, np.zeros(2))
        pts = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, -6.0]])
        np.testing.assert_array_equal(project(pts, cam), pts[:, :2])

    def test_scale_linearity(self, rng):
        pts = rng.normal(size=(10, 3))
        trans = np.array([7.0, -3.0])
        p1 = project(pts, WeakPerspectiveCamera(2.0, trans))
        p2 = project(pts, WeakPerspectiveCamera(4.0, trans))
        np.testing.assert_allclose(p2 - trans, 2.0 * (p1 - trans), atol=1e-12)

    def test_matches_pinhole_at_large_distance(self, rng):
        # Points spanning ~100 mm at ~10 m depth: weak perspective approximates
        # a pinhole to well under 1% after a least-squares scale/shift match.
        pts = rng.normal(size=(60, 3)) * 50.0
        pts[:, 2] += 10000.0
        focal = 8000.0
        pinhole = focal * pts[:, :2] / pts[:, 2:3]
        design = np.concatenate([pts[:, :2].reshape(-1, 1), np.tile(np.eye(2), (len(pts), 1))], axis=1)
        coef, *_ = np.linalg.lstsq(design, pinhole.reshape(-1), rcond=None)
        weak = project(pts, WeakPerspectiveCamera(coef[0], coef[1:]))
        scatter = np.linalg.norm(pinhole - pinhole.mean(axis=0), axis=1).max()
        assert np.abs(weak - pinhole).max() / scatter < 0.01

    def test_invalid_scale_rejected(self):
        with pytest.raises(InvalidArgumentError):
            WeakPerspectiveCamera(-1.0, np.zeros(2))


class TestResiduals:
    def test_self_consistent_observation_zeroes_data_blocks(self, toy_asset, rng):
        params, camera = draw_scene(toy_asset, rng)
        obs = synth_observation(toy_asset, params, camera)
        cfg = FitConfig(lambda_beta=0.04, lambda_psi=0.09)
        r = residuals(toy_asset, params, camera, obs, cfg)
        n_lmk = 2 * 68
        n_eye = 2 * len(obs.eye_closure_pairs)
        np.testing.assert_allclose(r[: n_lmk + n_eye], 0.0, atol=1e-9)
        expected_reg = np.concatenate([0.2 * params.beta, 0.3 * params.psi])
        np.testing.assert_allclose(r[n_lmk + n_eye :], expected_reg, atol=1e-12)

    def test_zero_weights_leave_only_regularization(self, toy_asset, rng):
        params, camera = draw_scene(toy_asset, rng)
        obs = Observation2D(rng.normal(size=(68, 2)), confidence=np.zeros(68))
        cfg = FitConfig(w_eye=0.0)
        r = residuals(toy_asset, params, camera, obs, cfg)
        n_data = 2 * 68 + 2 * len(obs.eye_closure_pairs)
        np.testing.assert_array_equal(r[:n_data], 0.0)
        assert np.any(r[n_data:] != 0.0)

    def test_closed_eye_pairs_zero_the_eye_block(self, toy_asset, rng):
        # Duplicate landmark indices in a pair make both the decoded and the
        # observed gap exactly zero, like a fully closed eyelid.
        params, camera = draw_scene(toy_asset, rng)
        landmarks = embed_landmarks(toy_asset, decode(toy_asset, params))
        projected = project(landmarks, camera)
        pairs = np.array([[37, 37], [43, 43]])
        obs = Observation2D(projected, eye_closure_pairs=pairs)
        r = residuals(toy_asset, params, camera, obs, FitConfig())
        eye_block = r[2 * 68 : 2 * 68 + 2 * len(pairs)]
        np.testing.assert_array_equal(eye_block, 0.0)

    def test_default_pairs_are_the_six_standard_ones(self):
        obs = Observation2D(np.zeros((68, 2)))
        assert obs.eye_closure_pairs.shape == (6, 2)
        assert tuple(map(tuple, obs.eye_closure_pairs)) == DEFAULT_EYE_CLOSURE_PAIRS


class TestFit2D:
    def test_generate_then_recover(self, toy_asset, rng):
        for _ in range(5):
            params, camera = draw_scene(toy_asset, rng)
            obs = synth_observation(toy_asset, params, camera)
            result = fit_landmarks2d(toy_asset, obs, RECOVERY_CFG)
            assert result.converged
            assert block_errors(result, params, camera) < 1e-3

    def test_noise_floor(self, toy_asset):
        # With sigma=1 px landmark noise the final landmark rms must sit near sigma.
        sigma = 1.0
        rms_values = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            params, camera = draw_scene(toy_asset, rng)
            obs = synth_observation(toy_asset, params, camera)
            noisy = Observation2D(
                obs.points + rng.normal(scale=sigma, size=(68, 2)),
                obs.confidence,
                obs.eye_closure_pairs,
            )
            result = fit_landmarks2d(toy_asset, noisy, FitConfig(lambda_beta=1e-4, lambda_psi=1e-4))
            rms_values.append(result.residual_rms["landmarks"])
        mean_rms = float(np.mean(rms_values))
        assert 0.5 * sigma <= mean_rms <= 2.0 * sigma

    def test_three_landmarks_insufficient(self, toy_asset, rng):
        conf = np.zeros(68)
        conf[:3] = 1.0
        obs = Observation2D(rng.normal(size=(68, 2)), confidence=conf)
        with pytest.raises(InsufficientDataError):
            fit_landmarks2d(toy_asset, obs)

    def test_determinism_bitwise(self, toy_asset, rng):
        params, camera = draw_scene(toy_asset, rng)
        obs = synth_observation(toy_asset, params, camera)
        a = fit_landmarks2d(toy_asset, obs, RECOVERY_CFG)
        b = fit_landmarks2d(toy_asset, obs, RECOVERY_CFG)
        assert np.array_equal(a.params.beta, b.params.beta)
        assert np.array_equal(a.params.psi, b.params.psi)
        assert np.array_equal(a.params.jaw_pose, b.params.jaw_pose)
        assert np.array_equal(a.params.global_pose, b.params.global_pose)
        assert a.camera.scale == b.camera.scale
        assert np.array_equal(a.camera.translation, b.camera.translation)
        assert a.cost == b.cost and a.cost_history == b.cost_history

    def test_monotone_cost_history(self, toy_asset, rng):
        params, camera = draw_scene(toy_asset, rng)
        obs = synth_observation(toy_asset, params, camera)
        noisy = Observation2D(obs.points + rng.normal(scale=2.0, size=(68, 2)))
        result = fit_landmarks2d(toy_asset, noisy)
        history = np.array(result.cost_history)
        assert np.all(np.diff(history) <= 0.0)
        assert result.cost <= history[0]

    def test_near_zero_weights_drive_coefficients_to_zero(self, toy_asset, rng):
        # Observation weights effectively zero: the regularizer owns the fit
        # and must keep beta/psi pinned at the origin no matter the landmarks.
        conf = np.full(68, 1e-30)
        obs = Observation2D(rng.normal(size=(68, 2)) * 1e3, confidence=conf)
        result = fit_landmarks2d(toy_asset, obs, FitConfig(w_eye=0.0))
        assert np.abs(result.params.beta).max() < 1e-8
        assert np.abs(result.params.psi).max() < 1e-8

    def test_jacobian_matches_forward_difference_oracle(self, toy_asset, rng):
        params, camera = draw_scene(toy_asset, rng)
        obs = synth_observation(toy_asset, params, camera)
        cfg = FitConfig()
        x = np.concatenate(
            [params.beta, params.psi, params.jaw_pose, params.global_pose,
             [camera.scale], camera.translation]
        )
        nb, npsi = toy_asset.n_beta, toy_asset.n_psi

        def fun(v):
            p = ParamVector(v[:nb], v[nb:nb + npsi], v[nb + npsi:nb + npsi + 3],
                            v[nb + npsi + 3:nb + npsi + 6], np.zeros(3))
            cam = WeakPerspectiveCamera(v[nb + npsi + 6], v[nb + npsi + 7:])
            return residuals(toy_asset, p, cam, obs, cfg)

        central = _central_difference_jacobian(fun, x, cfg.jacobian_step)
        forward = np.stack(
            [(fun(x + cfg.jacobian_step * e) - fun(x)) / cfg.jacobian_step
             for e in np.eye(len(x))],
            axis=1,
        )
        rel = np.linalg.norm(central - forward) / np.linalg.norm(central)
        assert rel < 1e-4


class TestFit3D:
    def test_generate_then_recover(self, toy_asset, rng):
        params = random_params(toy_asset, rng)
        obs3d = embed_landmarks(toy_asset, decode(toy_asset, params))
        result = fit_landmarks3d(toy_asset, obs3d, cfg=RECOVERY_CFG)
        assert result.converged
        assert block_errors(result, params) < 1e-3

    def test_rigid_equivariance(self, toy_asset, rng):
        params = random_params(toy_asset, rng)
        obs3d = embed_landmarks(toy_asset, decode(toy_asset, params))
        base = fit_landmarks3d(toy_asset, obs3d, cfg=RECOVERY_CFG)
        rot = rodrigues(rng.normal(size=3))
        trans = rng.uniform(-50.0, 50.0, size=3)
        moved = fit_landmarks3d(toy_asset, obs3d @ rot.T + trans, cfg=RECOVERY_CFG)
        np.testing.assert_allclose(
            rodrigues(moved.params.global_pose), rot @ rodrigues(base.params.global_pose), atol=1e-6
        )
        np.testing.assert_allclose(
            moved.params.global_translation,
            rot @ base.params.global_translation + trans,
            atol=1e-6,
        )
        np.testing.assert_allclose(moved.params.beta, base.params.beta, atol=1e-6)
        np.testing.assert_allclose(moved.params.psi, base.params.psi, atol=1e-6)

    def test_all_zero_confidence_insufficient(self, toy_asset, rng):
        obs3d = rng.normal(size=(68, 3))
        with pytest.raises(InsufficientDataError):
            fit_landmarks3d(toy_asset, obs3d, confidence=np.zeros(68))


class TestLandmarkJson:
    def test_bare_array(self):
        pts = [[float(i), float(i + 1)] for i in range(68)]
        parsed = parse_landmarks_json(json.dumps(pts))
        assert not parsed.is_3d
        np.testing.assert_array_equal(parsed.points, pts)
        np.testing.assert_array_equal(parsed.confidence, np.ones(68))

    def test_object_with_confidence_and_pairs(self):
        payload = {
            "points": [[0.0, 0.0, 0.0]] * 68,
            "confidence": [0.5] * 68,
            "eye_closure_pairs": [[37, 41]],
        }
        parsed = parse_landmarks_json(json.dumps(payload))
        assert parsed.is_3d
        assert parsed.eye_closure_pairs.tolist() == [[37, 41]]

    def test_wrong_count_rejected(self):
        with pytest.raises(InvalidArgumentError):
            parse_landmarks_json(json.dumps([[0.0, 0.0]] * 60))

    def test_3d_points_refuse_observation2d(self):
        parsed = parse_landmarks_json(json.dumps([[0.0, 0.0, 0.0]] * 68))
        with pytest.raises(InvalidArgumentError):
            parsed.observation2d()
