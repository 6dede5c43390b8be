"""Command-line entry point.

Every subcommand takes an explicit --seed (outputs are a deterministic
function of configuration and seed) and optionally a key=value config
file; flags override file values.
"""

import argparse
import sys

from seqmc.errors import SeqmcError
from seqmc.experiment import (
    COMMANDS,
    UsageError,
    parse_config,
    read_config_file,
    run_experiment,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqmc",
        description="Sequential Monte Carlo inference for implicit state-space models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "simulate": "draw a synthetic dataset from a model",
        "pf": "bootstrap particle filter on one dataset",
        "abc": "likelihood-free rejection sampling",
        "pmmh": "particle marginal Metropolis-Hastings chain",
        "smc": "adaptive sequential sampler (tractable likelihood)",
        "smc2": "nested sequential sampler over parameters and states",
        "compare": "evidence comparison of the two plankton variants",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=help_text[name])
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--seed", type=int, help="master seed (required)")
        p.add_argument("--model", choices=("lg", "pz", "pzstar"))
        p.add_argument("--T", type=int, help="number of observation steps")
        p.add_argument("--n-theta", dest="n_theta", type=int)
        p.add_argument("--n-x", dest="n_x", type=int)
        p.add_argument("--ess-threshold", dest="ess_threshold", type=float)
        p.add_argument("--n-moves", dest="n_moves", type=int)
        p.add_argument("--rk4-step", dest="rk4_step", type=float)
        p.add_argument("--replicates", type=int)
        p.add_argument("--outdir")
        p.add_argument("--profile", choices=("production", "desk"))
        p.add_argument("--n-iters", dest="n_iters", type=int)
        p.add_argument("--proposal-scale", dest="proposal_scale", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--n-accept", dest="n_accept", type=int)
        p.add_argument("--max-attempts", dest="max_attempts", type=int)
        p.add_argument("--plots", action="store_const", const=True, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config") and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        config = parse_config(args.command, file_values, flags)
        outdir = run_experiment(config)
    except UsageError as exc:
        print(f"seqmc: usage error: {exc}", file=sys.stderr)
        return 2
    except SeqmcError as exc:
        print(f"seqmc: error: {exc}", file=sys.stderr)
        return 1
    print(outdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
