#!/usr/bin/env python3
"""Multi-seed loss-mode ablation on the synthetic benchmark.

Trains the four loss arms (ce, hcl-hier, hcl-cl, hcl) on a fresh synthetic
dataset per seed — same data and split shared by all arms within a seed —
and prints a markdown table of seed-averaged test metrics. The defaults
reproduce the directional-ablation acceptance criterion.

Usage:
    python3 scripts/run_desk_ablation.py --epochs 50 --noise 0.15 --out ablation.json
"""

import argparse
import json
import time

import numpy as np

from hcl import data, metrics, mlp

ARMS = ("ce", "hcl-hier", "hcl-cl", "hcl")


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.15, help="synthetic label noise")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4],
                   help="one dataset/split/training seed per run")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--branching", type=int, default=3)
    p.add_argument("--examples-per-leaf", type=int, default=150)
    p.add_argument("--out", help="write per-seed and mean results as JSON")
    return p.parse_args()


def run_seed(args, seed: int) -> dict[str, dict[str, float]]:
    d = data.synth_generate(data.SynthConfig(
        levels=args.levels,
        branching=args.branching,
        examples_per_leaf=args.examples_per_leaf,
        label_noise=args.noise,
        seed=seed,
    ))
    d = data.split(d, ratios=(0.6, 0.2, 0.2), seed=seed)
    d, _ = data.normalize(d)

    out = {}
    for arm in ARMS:
        tc = mlp.TrainConfig(loss_mode=arm, epochs=args.epochs, seed=seed)
        params, _ = mlp.train(d, d.taxonomy, tc)
        idx = d.indices("test")
        scores, _ = mlp.forward(params, d.features[idx])
        rep = metrics.evaluate(d.labels[idx], scores, d.taxonomy)
        out[arm] = {
            "hit1": 100.0 * rep.hit_at_1,
            "mrr": 100.0 * rep.mrr,
            "hierdist": rep.hier_dist,
        }
        print(f"  seed {seed} {arm:9s} hit@1 {out[arm]['hit1']:6.2f}  "
              f"mrr {out[arm]['mrr']:6.2f}  hierdist {out[arm]['hierdist']:.4f}")
    return out


def main() -> int:
    args = parse_args()
    start = time.perf_counter()

    per_seed = {seed: run_seed(args, seed) for seed in args.seeds}
    means = {
        arm: {
            key: float(np.mean([per_seed[s][arm][key] for s in args.seeds]))
            for key in ("hit1", "mrr", "hierdist")
        }
        for arm in ARMS
    }
    duration = time.perf_counter() - start

    print(f"\n{len(args.seeds)}-seed means "
          f"(noise={args.noise}, epochs={args.epochs}, {duration:.0f}s):\n")
    print("| Loss | Hit@1 | MRR | HierDist |")
    print("| --- | --- | --- | --- |")
    for arm in ARMS:
        m = means[arm]
        print(f"| {arm} | {m['hit1']:.2f} | {m['mrr']:.2f} | {m['hierdist']:.4f} |")

    hcl, ce = means["hcl"]["hierdist"], means["ce"]["hierdist"]
    parts = min(means["hcl-hier"]["hierdist"], means["hcl-cl"]["hierdist"])
    print(f"\nhcl vs ce:          {hcl:.4f} <= {ce:.4f}  "
          f"({'holds' if hcl <= ce else 'FAILS'})")
    print(f"hcl vs parts+0.02:  {hcl:.4f} <= {parts + 0.02:.4f}  "
          f"({'holds' if hcl <= parts + 0.02 else 'FAILS'})")

    if args.out:
        payload = {
            "config": vars(args) | {"out": None},
            "duration_sec": duration,
            "per_seed": {str(s): per_seed[s] for s in args.seeds},
            "means": means,
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
