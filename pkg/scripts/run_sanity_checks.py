#!/usr/bin/env python
"""Quick end-to-end sanity pass over every subcommand (a couple of minutes).

Runs each inference method on a small synthetic problem and prints one
line per check. Useful after environment or dependency changes; the real
verification lives in the test suite.
"""

import tempfile
from pathlib import Path

import numpy as np

from seqmc.cli import main as cli_main


def run(argv) -> Path:
    rc = cli_main(argv)
    assert rc == 0, f"exit code {rc} for {argv}"
    return Path(argv[argv.index("--outdir") + 1])


def main():
    tmp = Path(tempfile.mkdtemp(prefix="seqmc-sanity-"))

    out = run(["simulate", "--model", "pz", "--seed", "1", "--T", "50",
               "--rk4-step", "0.1", "--outdir", str(tmp / "sim")])
    obs = np.loadtxt(out / "observations.csv", delimiter=",", skiprows=1)
    assert (obs[:, 1] > 0).all()
    print(f"simulate: {obs.shape[0]} positive observations")

    out = run(["pf", "--model", "lg", "--seed", "1", "--T", "40",
               "--n-x", "500", "--outdir", str(tmp / "pf")])
    table = np.loadtxt(out / "filter.csv", delimiter=",", skiprows=1)
    gap = np.abs(table[:, 1] - table[:, 2]).max()
    assert gap < 0.5
    print(f"pf: max |particle - exact| filter mean gap {gap:.3f}")

    out = run(["abc", "--model", "lg", "--seed", "1", "--T", "10",
               "--epsilon", "6", "--n-accept", "25",
               "--max-attempts", "20000", "--outdir", str(tmp / "abc")])
    acc = np.loadtxt(out / "abc_accepted.csv", delimiter=",", skiprows=1)
    print(f"abc: {acc.shape[0]} draws accepted")

    out = run(["pmmh", "--model", "lg", "--seed", "1", "--T", "30",
               "--n-x", "200", "--n-iters", "400", "--proposal-scale", "0.1",
               "--outdir", str(tmp / "pmmh")])
    chain = np.loadtxt(out / "chain.csv", delimiter=",", skiprows=1)
    print(f"pmmh: acceptance {chain[:, 3].mean():.2f}, "
          f"posterior mean a = {chain[200:, 1].mean():.3f}")

    out = run(["smc", "--model", "lg", "--seed", "1", "--T", "40",
               "--n-theta", "400", "--outdir", str(tmp / "smc")])
    ev = np.loadtxt(out / "evidence.csv", delimiter=",", skiprows=1,
                    usecols=(0, 2))
    print(f"smc: final log evidence {ev[-1, 1]:.2f}")

    out = run(["smc2", "--model", "pz", "--seed", "1", "--T", "30",
               "--n-theta", "64", "--n-x", "64", "--rk4-step", "0.1",
               "--outdir", str(tmp / "smc2")])
    pred = np.loadtxt(out / "predictive.csv", delimiter=",", skiprows=1)
    print(f"smc2: {int(pred[:, 4].sum())}/{pred.shape[0]} observations "
          "outside the 80% band")

    run(["compare", "--seed", "1", "--T", "25", "--n-theta", "48",
         "--n-x", "48", "--rk4-step", "0.1", "--replicates", "1",
         "--outdir", str(tmp / "compare")])
    bf = np.loadtxt(tmp / "compare" / "bayes_factor.csv", delimiter=",",
                    skiprows=1)
    print(f"compare: Bayes factor at t={int(bf[-1, 0])} is {bf[-1, 2]:.2f}")

    print(f"all checks passed (outputs in {tmp})")


if __name__ == "__main__":
    main()
