#!/usr/bin/env python3
"""Build a self-contained demo workspace: toy head model, eyewear catalog,
a sample landmark observation, and a ready-to-run service config.

Usage: python3 scripts/make_demo_assets.py [--out demo-data] [--seed 0]
Then:  eyefit serve --config demo-data/config.json
"""

import argparse
import json
from pathlib import Path

import numpy as np

from eyefit.fitting import WeakPerspectiveCamera, project
from eyefit.headmodel import ParamVector, decode, embed_landmarks, save_asset
from eyefit.placement import save_eyewear_asset
from eyefit.toymodel import toy_eyewear, toy_head_asset


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo-data")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    asset = toy_head_asset(seed=args.seed)
    manifest_path, blob_path = save_asset(asset, out / "toy")
    print(f"head model: {manifest_path}, {blob_path}")

    catalog = out / "data" / "catalog"
    for style in ("classic", "round", "wide"):
        glb_path, anchors_path = save_eyewear_asset(toy_eyewear(style), catalog)
        print(f"eyewear:    {glb_path}")

    # A plausible subject: random shape/expression seen by a fixed camera.
    rng = np.random.default_rng(args.seed + 100)
    params = ParamVector(
        rng.normal(size=asset.n_beta) * 0.8,
        rng.normal(size=asset.n_psi) * 0.6,
        rng.uniform(-0.15, 0.15, size=3),
        np.zeros(3),
        np.zeros(3),
    )
    camera = WeakPerspectiveCamera(3.0, np.array([256.0, 256.0]))
    points = project(embed_landmarks(asset, decode(asset, params)), camera)
    landmarks_path = out / "sample-landmarks.json"
    landmarks_path.write_text(json.dumps({"points": points.tolist()}, indent=1))
    print(f"landmarks:  {landmarks_path}")

    config_path = out / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "data_dir": str(out / "data"),
                "head_asset": str(manifest_path),
                "host": "127.0.0.1",
                "port": 8080,
                "frontend_dir": "frontend/dist",
            },
            indent=1,
        )
    )
    print(f"config:     {config_path}")
    print("\nnext: eyefit serve --config", config_path)


if __name__ == "__main__":
    main()
