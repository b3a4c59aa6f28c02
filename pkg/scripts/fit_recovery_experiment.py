#!/usr/bin/env python3
"""Recovery experiment: how well do noiseless/noisy 2D landmark fits recover
known parameters on the toy head, and how does runtime scale?

Usage: python3 scripts/fit_recovery_experiment.py [--runs 50] [--noise 0 0.5 1 2]
"""

import argparse
import time

import numpy as np

from eyefit.fitting import FitConfig, Observation2D, WeakPerspectiveCamera, fit_landmarks2d, project
from eyefit.headmodel import ParamVector, decode, embed_landmarks
from eyefit.toymodel import toy_head_asset


def run(asset, rng, noise_px, cfg):
    true = ParamVector(
        rng.normal(size=asset.n_beta),
        rng.normal(size=asset.n_psi),
        rng.uniform(-0.25, 0.25, size=3),
        np.zeros(3),
        np.zeros(3),
    )
    camera = WeakPerspectiveCamera(rng.uniform(2.0, 5.0), rng.uniform(150.0, 450.0, size=2))
    points = project(embed_landmarks(asset, decode(asset, true)), camera)
    if noise_px > 0:
        points = points + rng.normal(scale=noise_px, size=points.shape)
    result = fit_landmarks2d(asset, Observation2D(points), cfg)
    beta_err = np.linalg.norm(result.params.beta - true.beta) / max(np.linalg.norm(true.beta), 1.0)
    return beta_err, result.residual_rms["landmarks"], result.iterations


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--noise", type=float, nargs="*", default=[0.0, 0.5, 1.0, 2.0])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    asset = toy_head_asset(seed=0)
    cfg = FitConfig(lambda_beta=1e-6, lambda_psi=1e-6)
    print(f"{'noise px':>9} {'median beta err':>16} {'p90 beta err':>13} {'lmk rms':>9} {'iters':>6} {'ms/fit':>7}")
    for noise in args.noise:
        rng = np.random.default_rng(args.seed)
        errs, rmss, iters = [], [], []
        t0 = time.perf_counter()
        for _ in range(args.runs):
            e, r, i = run(asset, rng, noise, cfg)
            errs.append(e)
            rmss.append(r)
            iters.append(i)
        per_fit_ms = (time.perf_counter() - t0) / args.runs * 1000.0
        print(
            f"{noise:9.2f} {np.median(errs):16.3e} {np.quantile(errs, 0.9):13.3e} "
            f"{np.mean(rmss):9.3f} {np.mean(iters):6.1f} {per_fit_ms:7.1f}"
        )


if __name__ == "__main__":
    main()
