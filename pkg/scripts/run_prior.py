"""Learn the latent prior of a two-Gaussian mixture with a frozen, pretrained likelihood.

Pretrains the likelihood once, then for each target weight runs one exact
training and several shot-based trainings per shot budget.

    python scripts/run_prior.py --seeds 6 --shots 200 1000
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from bqc.circuits import build_bqc
from bqc.cli import parse_config
from bqc.datasets import discretized_gaussian, mixture_target
from bqc.trainer import component_tv, pretrain_likelihood, train

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", nargs="+", default=["prior_70_30.json", "prior_85_15.json"])
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--shots", type=int, nargs="+", default=[200, 1000])
    args = ap.parse_args()

    cfgs = [parse_config(json.loads((CONFIGS / name).read_text())) for name in args.configs]
    base = cfgs[0]
    comps = [discretized_gaussian(g) for _, g in base.mixture.components]
    params = pretrain_likelihood(base.layout, comps, base.pretrain)
    tvs = component_tv(base.layout, params, comps)
    print("pretrained likelihood, per-component TV: " + ", ".join(f"{t:.3f}" for t in tvs), flush=True)

    circuit = build_bqc(base.layout)
    for name, cfg in zip(args.configs, cfgs):
        # the likelihood is shared, so every config must use the same components
        assert [g for _, g in cfg.mixture.components] == [g for _, g in base.mixture.components], name
        target = mixture_target(cfg.mixture)
        w = cfg.mixture.weights[0]
        exact = train(circuit, params, target, cfg.train).final_prior.probs[0]
        print(f"{name}: target P(lambda_1)={w:.2f} exact={exact:.4f}", flush=True)
        for shots in args.shots:
            vals = np.array([train(circuit, params, target, replace(cfg.train, shots=shots, seed=s))
                             .final_prior.probs[0] for s in range(args.seeds)])
            print(f"  shots={shots:5d} mean={vals.mean():.4f} var={vals.var(ddof=1):.3e} "
                  f"values={np.round(vals, 4).tolist()}", flush=True)


if __name__ == "__main__":
    main()
