"""Command-line access to every pipeline stage.

Exit codes: 0 success, 1 processing error, 2 usage error. All diagnostics go
to stderr; file outputs land only at paths given by flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import glb as glbmod
from .errors import EyefitError, InvalidArgumentError
from .fitting import FitConfig, fit_landmarks2d, fit_landmarks3d, parse_landmarks_json
from .geometry import as_points
from .headmodel import ParamVector, decode, load_asset, save_asset
from .mesh import merge_meshes
from .metrics import (
    align_rigid_landmarks,
    cumulative_curve,
    curve_to_csv,
    render_error_table,
    scan_to_mesh_distances,
    summarize,
)
from .placement import FitParams, load_eyewear_asset, place_eyewear, save_eyewear_asset
from .service import ServiceConfig, create_app
from .toymodel import toy_eyewear, toy_head_asset


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eyefit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit head parameters to a landmark file")
    p_fit.add_argument("--model", required=True, help="head model manifest (.fma.json)")
    p_fit.add_argument("--landmarks", required=True, help="landmark JSON file (2D or 3D)")
    p_fit.add_argument("-o", "--output", required=True, help="output params JSON")
    p_fit.add_argument("--lambda-beta", type=float, default=1e-4)
    p_fit.add_argument("--lambda-psi", type=float, default=1e-4)
    p_fit.add_argument("--w-eye", type=float, default=1.0)
    p_fit.add_argument("--max-iters", type=int, default=200)

    p_tryon = sub.add_parser("tryon", help="place eyewear on fitted params and export GLB")
    p_tryon.add_argument("--model", required=True)
    p_tryon.add_argument("--params", required=True, help="params JSON from `fit`")
    p_tryon.add_argument("--frame", required=True, help="eyewear GLB")
    p_tryon.add_argument("--anchors", default=None, help="anchors sidecar (default: <frame>.anchors.json)")
    p_tryon.add_argument("-o", "--output", required=True, help="output GLB path")
    p_tryon.add_argument("--forward-offset-mm", type=float, default=10.0)
    p_tryon.add_argument("--vertical-offset-mm", type=float, default=0.0)
    p_tryon.add_argument("--scale-override", type=float, default=None)

    p_eval = sub.add_parser("eval", help="scan-to-mesh error of a predicted mesh vs ground truth")
    p_eval.add_argument("--pred", required=True, help="predicted mesh GLB")
    p_eval.add_argument("--gt", required=True, help="ground-truth scan points (.xyz)")
    p_eval.add_argument("--pred-landmarks", required=True, help="3D landmarks on the prediction")
    p_eval.add_argument("--gt-landmarks", required=True, help="3D landmarks on the scan")
    p_eval.add_argument("--method", default="eyefit")
    p_eval.add_argument("--split", choices=("LQ", "HQ"), default="LQ")
    p_eval.add_argument("--with-scale", action="store_true", help="allow scale in the alignment")
    p_eval.add_argument("--json", action="store_true", help="machine-readable output")
    p_eval.add_argument("--curve", default=None, help="write a cumulative-error CSV here")
    p_eval.add_argument("--max-mm", type=float, default=7.0)
    p_eval.add_argument("--steps", type=int, default=141)

    p_val = sub.add_parser("validate", help="validate a GLB file or a catalog directory")
    p_val.add_argument("path")

    p_gen = sub.add_parser("gen-toy-model", help="emit the synthetic toy head asset")
    p_gen.add_argument("-o", "--out", default="toy", help="output prefix (writes <prefix>.fma.json/.bin)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--eyewear-dir", default=None, help="also emit the toy eyewear catalog here")

    p_serve = sub.add_parser("serve", help="run the try-on HTTP service")
    p_serve.add_argument("--config", default=None, help="service config JSON")
    p_serve.add_argument("--data-dir", default=None)
    p_serve.add_argument("--model", default=None, help="head model manifest")
    p_serve.add_argument("--detector-url", default=None)
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--frontend-dir", default=None)
    return parser


def _cmd_fit(args) -> int:
    asset = load_asset(args.model)
    landmarks = parse_landmarks_json(Path(args.landmarks).read_text(encoding="utf-8"))
    cfg = FitConfig(
        lambda_beta=args.lambda_beta,
        lambda_psi=args.lambda_psi,
        w_eye=args.w_eye,
        max_iters=args.max_iters,
    )
    if landmarks.is_3d:
        result = fit_landmarks3d(asset, landmarks.points, landmarks.confidence, cfg)
    else:
        result = fit_landmarks2d(asset, landmarks.observation2d(), cfg)
    payload = fit_result_json(result)
    Path(args.output).write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")
    print(
        f"fit: {result.iterations} iterations, converged={result.converged}, "
        f"landmark rms {result.residual_rms['landmarks']:.4g}",
        file=sys.stderr,
    )
    return 0


def fit_result_json(result) -> dict:
    payload = {
        "params": result.params.to_dict(),
        "residual_rms": result.residual_rms,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    if result.camera is not None:
        payload["camera"] = {
            "scale": result.camera.scale,
            "translation": result.camera.translation.tolist(),
        }
    return payload


def _cmd_tryon(args) -> int:
    asset = load_asset(args.model)
    raw = json.loads(Path(args.params).read_text(encoding="utf-8"))
    params = ParamVector.from_dict(raw["params"] if "params" in raw else raw)
    eyewear = load_eyewear_asset(args.frame, args.anchors)
    head_mesh = decode(asset, params).with_vertex_normals()
    fit = FitParams(
        forward_offset_mm=args.forward_offset_mm,
        vertical_offset_mm=args.vertical_offset_mm,
        scale_override=args.scale_override,
    )
    placement = place_eyewear(asset, head_mesh, eyewear, fit)
    scene = glbmod.merge_scene(
        head_mesh,
        eyewear.mesh,
        placement,
        head_material=glbmod.Material(base_color=(0.85, 0.72, 0.62, 1.0)),
        eyewear_material=glbmod.Material(base_color=eyewear.base_color),
    )
    data = glbmod.write_glb(scene)
    violations = glbmod.validate_glb(data)
    if violations:
        raise EyefitError(f"emitted GLB failed validation: {violations}")
    Path(args.output).write_bytes(data)
    print(f"tryon: wrote {args.output} ({len(data)} bytes)", file=sys.stderr)
    return 0


def _load_xyz(path) -> np.ndarray:
    rows = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3:
            raise InvalidArgumentError(f"{path}:{line_no}: expected 'x y z'")
        rows.append([float(v) for v in parts[:3]])
    if not rows:
        raise InvalidArgumentError(f"{path} contains no points")
    return as_points(rows)


def _scene_mesh(path) -> "object":
    scene = glbmod.read_glb(Path(path).read_bytes())
    baked = [node.mesh.transformed(node.transform) for node in scene.nodes]
    return baked[0] if len(baked) == 1 else merge_meshes(baked)


def _cmd_eval(args) -> int:
    pred_mesh = _scene_mesh(args.pred)
    gt_points = _load_xyz(args.gt)
    pred_lm = parse_landmarks_json(Path(args.pred_landmarks).read_text(encoding="utf-8"))
    gt_lm = parse_landmarks_json(Path(args.gt_landmarks).read_text(encoding="utf-8"))
    if not (pred_lm.is_3d and gt_lm.is_3d):
        raise InvalidArgumentError("eval expects 3D landmark files")
    alignment = align_rigid_landmarks(pred_lm.points, gt_lm.points, with_scale=args.with_scale)
    distances = scan_to_mesh_distances(gt_points, pred_mesh.transformed(alignment))
    summary = summarize(distances)
    if args.curve:
        curve = cumulative_curve(distances, max_mm=args.max_mm, n_steps=args.steps)
        Path(args.curve).write_text(curve_to_csv(curve), encoding="utf-8")
    if args.json:
        print(
            json.dumps(
                {
                    "method": args.method,
                    "split": args.split,
                    "median_mm": summary.median_mm,
                    "mean_mm": summary.mean_mm,
                    "std_mm": summary.std_mm,
                    "count": summary.count,
                },
                sort_keys=True,
            )
        )
    else:
        lq = summary if args.split == "LQ" else None
        hq = summary if args.split == "HQ" else None
        print(render_error_table([(args.method, lq, hq)]), end="")
    return 0


def _cmd_validate(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        from .service import ingest_catalog

        result = ingest_catalog(path)
        for entry in result.entries:
            print(f"ok: {entry.id}")
        for entry_id, reason in result.problems:
            print(f"invalid: {entry_id}: {reason}", file=sys.stderr)
        return 1 if result.problems else 0
    violations = glbmod.validate_glb(path.read_bytes())
    if violations:
        for v in violations:
            print(f"invalid: {v}", file=sys.stderr)
        return 1
    print(f"ok: {path}")
    return 0


def _cmd_gen_toy_model(args) -> int:
    asset = toy_head_asset(seed=args.seed)
    manifest_path, blob_path = save_asset(asset, args.out)
    print(f"wrote {manifest_path} and {blob_path}")
    if args.eyewear_dir:
        for style in ("classic", "round", "wide"):
            glb_path, anchors_path = save_eyewear_asset(toy_eyewear(style), args.eyewear_dir)
            print(f"wrote {glb_path} and {anchors_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    config = ServiceConfig.load(
        args.config,
        data_dir=args.data_dir,
        head_asset=args.model,
        detector_url=args.detector_url,
        host=args.host,
        port=args.port,
        frontend_dir=args.frontend_dir,
    )
    app = create_app(config)
    print(f"serving on http://{config.host}:{config.port}", file=sys.stderr)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "tryon": _cmd_tryon,
    "eval": _cmd_eval,
    "validate": _cmd_validate,
    "gen-toy-model": _cmd_gen_toy_model,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EyefitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
