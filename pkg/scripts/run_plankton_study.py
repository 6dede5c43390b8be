#!/usr/bin/env python
"""Full plankton study: a year of daily data at production particle counts.

Writes ESS traces, per-parameter posterior quantiles, 80% one-step
predictive bands, cumulative cost, and the evidence comparison between the
two mortality variants. Expect this to take over an hour per run on a
single core; pass --profile desk for a quick (noisier) version.
"""

import argparse
from pathlib import Path

from seqmc.experiment import parse_config, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--profile", choices=("production", "desk"), default="production")
    parser.add_argument("--replicates", type=int, default=5)
    parser.add_argument("--outdir", default="results")
    args = parser.parse_args()

    base = Path(args.outdir)
    common = {"seed": args.seed, "profile": args.profile, "rk4_step": 0.1,
              "plots": True}

    config = parse_config("smc2", flag_values={
        **common, "model": "pz", "outdir": str(base / f"{args.profile}_smc2"),
    })
    print(f"[1/2] nested sampler, {args.profile} profile -> {config.outdir}")
    run_experiment(config)

    config = parse_config("compare", flag_values={
        **common, "replicates": args.replicates,
        "outdir": str(base / f"{args.profile}_compare"),
    })
    print(f"[2/2] variant comparison x{args.replicates} -> {config.outdir}")
    run_experiment(config)


if __name__ == "__main__":
    main()
