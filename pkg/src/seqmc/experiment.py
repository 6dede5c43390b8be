"""Seeded experiment orchestration and CSV/SVG emission.

CSV files are the single source of truth; SVG plots are derived views.
Outputs are a deterministic function of (config, seed): every random
stream is derived from the master seed, never from the wall clock.
"""

import json
import time
import zlib
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from seqmc.abc import abc_rejection, distance_euclidean, distance_euclidean_log
from seqmc.errors import SeqmcError
from seqmc.kalman import kalman_filter
from seqmc.models import LGParams, PZ_TRUE_THETA, get_model, lg_model, simulate
from seqmc.pmmh import ProposalSpec, pmmh_run
from seqmc.rngstream import derive_rng
from seqmc.smc_sampler import smc_sampler_run
from seqmc.smc2 import Smc2Config, bayes_factor, smc2_run

COMMANDS = ("simulate", "pf", "abc", "pmmh", "smc", "smc2", "compare")

QUANTILE_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9)
PREDICT_LEVELS = (0.1, 0.9)

PROFILES = {
    "production": {"n_theta": 1024, "n_x": 1024, "ess_threshold": 0.5, "n_moves": 5, "T": 365},
    "desk": {"n_theta": 128, "n_x": 256, "ess_threshold": 0.5, "n_moves": 5, "T": 365},
}


class UsageError(SeqmcError):
    """Invalid configuration; message names the offending key."""


@dataclass
class RunConfig:
    command: str
    seed: int
    model: str = "pz"
    T: int = 365
    n_theta: int = 128
    n_x: int = 256
    ess_threshold: float = 0.5
    n_moves: int = 5
    rk4_step: float = 0.1
    replicates: int = 1
    outdir: str = "out"
    profile: str | None = None
    # command-specific knobs
    n_iters: int = 1000          # pmmh
    proposal_scale: float | None = None  # pmmh random-walk scale
    epsilon: float = 5.0         # abc
    n_accept: int = 100          # abc
    max_attempts: int = 100000   # abc
    plots: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"command: unknown command {self.command!r}")
        if self.seed is None:
            raise UsageError("seed: a seed is required (no wall-clock seeding)")
        for key in ("T", "n_theta", "n_x", "n_moves", "replicates", "n_iters",
                    "n_accept", "max_attempts"):
            if int(getattr(self, key)) <= 0:
                raise UsageError(f"{key}: must be positive")
        if not 0.0 < self.ess_threshold < 1.0:
            raise UsageError("ess_threshold: must lie in (0, 1)")
        if self.rk4_step <= 0:
            raise UsageError("rk4_step: must be positive")
        if self.model not in ("lg", "pz", "pzstar"):
            raise UsageError(f"model: unknown model {self.model!r}")


_INT_KEYS = {"seed", "T", "n_theta", "n_x", "n_moves", "replicates", "n_iters",
             "n_accept", "max_attempts"}
_FLOAT_KEYS = {"ess_threshold", "rk4_step", "epsilon", "proposal_scale"}
_BOOL_KEYS = {"plots"}


def parse_config(command: str, file_values: dict | None = None,
                 flag_values: dict | None = None) -> RunConfig:
    """Build a RunConfig: defaults < profile < config file < flags.

    Unknown keys are rejected; missing seed or out-of-range values raise a
    UsageError naming the key."""
    known = set(RunConfig.__dataclass_fields__) - {"command"}
    merged: dict = {}
    profile = None
    for source in (file_values or {}, flag_values or {}):
        if "profile" in source and source["profile"] is not None:
            profile = source["profile"]
    if profile is not None:
        if profile not in PROFILES:
            raise UsageError(f"profile: unknown profile {profile!r}")
        merged.update(PROFILES[profile])
    for source in (file_values or {}, flag_values or {}):
        for key, value in source.items():
            if key not in known:
                raise UsageError(f"{key}: unknown configuration key")
            if value is None:
                continue
            if key in _INT_KEYS:
                value = int(value)
            elif key in _FLOAT_KEYS:
                value = float(value)
            elif key in _BOOL_KEYS:
                value = value in (True, "true", "1", "yes")
            merged[key] = value
    merged["profile"] = profile
    if "seed" not in merged:
        raise UsageError("seed: a seed is required (no wall-clock seeding)")
    config = RunConfig(command=command, **merged)
    config.validate()
    return config


def read_config_file(path: str) -> dict:
    """Flat key=value text; blank lines and #-comments ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


# ---------------------------------------------------------------------------
# CSV / manifest helpers


def _fmt(v) -> str:
    if isinstance(v, bool) or isinstance(v, (np.bool_,)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path: Path, header: list, rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_manifest(outdir: Path, config: RunConfig, started: float, files: list):
    manifest = {
        "config": asdict(config),
        "seed": config.seed,
        "duration_seconds": round(time.time() - started, 3),
        "files": [f.name for f in files],
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _maybe_plot(config, outdir: Path, name: str, plot_fn) -> list:
    if not config.plots:
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(8, 4))
    plot_fn(ax)
    path = outdir / f"{name}.svg"
    fig.savefig(path, format="svg")
    plt.close(fig)
    return [path]


# ---------------------------------------------------------------------------
# Dataset generation


def make_dataset(config: RunConfig, data_model: str | None = None):
    """Synthetic observations regenerated from the stated data-generating
    parameters (fixed per seed; PZ data always comes from the full PZ
    model so both variants are compared on the same series)."""
    name = data_model or config.model
    rng = derive_rng(config.seed, 0xDA7A)
    if name == "lg":
        model = lg_model(LGParams())
        theta = np.zeros(0)
    else:
        model = get_model("pz", rk4_step=config.rk4_step)
        theta = PZ_TRUE_THETA
    states, obs = simulate(model, theta, config.T, rng)
    return states, obs


# ---------------------------------------------------------------------------
# Commands


def _cmd_simulate(config, outdir):
    states, obs = make_dataset(config)
    files = [write_csv(outdir / "observations.csv", ["t", "y"],
                       ((t, obs[t]) for t in range(obs.size)))]
    header = ["t"] + [f"x{j}" for j in range(states.shape[1])]
    files.append(write_csv(outdir / "states.csv", header,
                           ((t, *states[t]) for t in range(states.shape[0]))))
    files += _maybe_plot(config, outdir, "observations",
                         lambda ax: ax.plot(obs, marker="o", ms=2, lw=0.5))
    return files


def _cmd_pf(config, outdir):
    from seqmc.particle_filter import pf_estimate, pf_init, pf_step

    _, obs = make_dataset(config)
    rng = derive_rng(config.seed, 1)
    if config.model == "lg":
        model = lg_model(LGParams())
        theta = np.zeros(0)
        kf = kalman_filter(LGParams(), obs)
    else:
        model = get_model(config.model, rk4_step=config.rk4_step)
        theta = PZ_TRUE_THETA[: model.dim_theta]
        kf = None
    state = pf_init(model, theta, config.n_x, rng, store_genealogy=False)
    rows = []
    for t in range(obs.size):
        pf_step(state, obs[t], rng)
        est = pf_estimate(state, lambda x: x[:, 0])
        if kf is not None:
            rows.append((t, est, kf.filter_means[t], state.cum_loglik))
        else:
            rows.append((t, est, state.cum_loglik))
    header = ["t", "pf_mean", "kalman_mean", "cum_loglik"] if kf is not None \
        else ["t", "pf_mean", "cum_loglik"]
    return [write_csv(outdir / "filter.csv", header, rows)]


def _cmd_abc(config, outdir):
    _, obs = make_dataset(config)
    model = get_model(config.model, rk4_step=config.rk4_step,
                      free=("a",) if config.model == "lg" else ())
    distance = distance_euclidean if config.model == "lg" else distance_euclidean_log
    rng = derive_rng(config.seed, 2)
    result = abc_rejection(model, obs, config.epsilon, distance,
                           config.n_accept, config.max_attempts, rng)
    names = model.theta_names or tuple(f"theta{j}" for j in range(model.dim_theta))
    rows = [theta for theta, _ in result.accepted]
    files = [write_csv(outdir / "abc_accepted.csv", list(names), rows)]
    (outdir / "abc_summary.json").write_text(json.dumps({
        "attempts": result.attempts,
        "accepted": len(result.accepted),
        "min_distance": result.min_distance,
        "epsilon": config.epsilon,
    }, indent=2) + "\n")
    return files


def _cmd_pmmh(config, outdir):
    _, obs = make_dataset(config)
    model = get_model(config.model, rk4_step=config.rk4_step,
                      free=("a",) if config.model == "lg" else ())
    rng = derive_rng(config.seed, 3)
    init = model.prior.sample(rng, 1)[0]
    proposal = None
    if config.proposal_scale is not None:
        proposal = ProposalSpec(kind="random_walk",
                                scale=np.full(model.dim_theta, config.proposal_scale))
    result = pmmh_run(model, obs, config.n_x, config.n_iters, proposal, init, rng)
    names = model.theta_names or tuple(f"theta{j}" for j in range(model.dim_theta))
    header = ["iteration", *names, "logZ", "accepted"]
    rows = ((i, *result.thetas[i], result.logzs[i], result.accepted[i])
            for i in range(config.n_iters))
    return [write_csv(outdir / "chain.csv", header, rows)]


def _cmd_smc(config, outdir):
    if config.model != "lg":
        raise UsageError("model: the smc command needs a tractable likelihood (lg only)")
    _, obs = make_dataset(config)
    model = lg_model(LGParams(), free=("a",))
    rng = derive_rng(config.seed, 4)
    trace = smc_sampler_run(model, obs, config.n_theta,
                            ess_threshold=config.ess_threshold,
                            n_moves=config.n_moves, rng=rng)
    rejuv_at = {t for t, _ in trace.rejuvenations}
    acc = dict(trace.rejuvenations)
    files = [
        write_csv(outdir / "ess_trace.csv",
                  ["t", "ess", "rejuvenated", "acceptance_rate"],
                  ((t, trace.ess_trace[t], t in rejuv_at, acc.get(t, ""))
                   for t in range(obs.size))),
        write_csv(outdir / "evidence.csv", ["t", "model", "log_evidence"],
                  ((t, "lg", trace.log_evidence_trace[t]) for t in range(obs.size))),
    ]
    return files


def _run_smc2_once(config, model_name, obs, rep: int):
    model = get_model(model_name, rk4_step=config.rk4_step,
                      free=("a",) if model_name == "lg" else ())
    rng = derive_rng(config.seed, 5, rep, zlib.crc32(model_name.encode()))
    smc2_config = Smc2Config(
        n_theta=config.n_theta, n_x=config.n_x,
        ess_threshold=config.ess_threshold, n_moves=config.n_moves,
    )
    return smc2_run(model, obs, smc2_config, rng,
                    predict_levels=PREDICT_LEVELS, quantile_levels=QUANTILE_LEVELS)


def _cmd_smc2(config, outdir):
    _, obs = make_dataset(config, data_model="pz" if config.model != "lg" else "lg")
    model_name = config.model
    result = _run_smc2_once(config, model_name, obs, 0)
    names = result.state.model.theta_names or tuple(
        f"theta{j}" for j in range(result.state.thetas.shape[1]))
    T1 = obs.size
    rejuv_at = {t for t, _ in result.rejuvenations}
    acc = dict(result.rejuvenations)
    files = [
        write_csv(outdir / "ess_trace.csv",
                  ["t", "ess", "rejuvenated", "acceptance_rate"],
                  ((t, result.ess_trace[t], t in rejuv_at, acc.get(t, ""))
                   for t in range(T1))),
        write_csv(outdir / "cost.csv", ["t", "f_calls_per_theta", "g_calls_per_theta"],
                  ((t, result.cost_trace[t, 0], result.cost_trace[t, 1])
                   for t in range(T1))),
        write_csv(outdir / "posterior_quantiles.csv",
                  ["t", "parameter", "level", "value"],
                  ((t, names[j], QUANTILE_LEVELS[q], result.quantile_trace[t][j, q])
                   for t in range(T1)
                   for j in range(len(names))
                   for q in range(len(QUANTILE_LEVELS)))),
        write_csv(outdir / "predictive.csv",
                  ["t", "q10", "q90", "y_observed", "outside"],
                  result.predictive),
        write_csv(outdir / "evidence.csv", ["t", "model", "log_evidence"],
                  ((t, model_name, result.log_evidence_trace[t]) for t in range(T1))),
    ]
    files += _maybe_plot(config, outdir, "ess_trace",
                         lambda ax: ax.plot(result.ess_trace))
    files += _maybe_plot(config, outdir, "cost",
                         lambda ax: ax.plot(result.cost_trace[:, 0]))

    def plot_predictive(ax):
        pred = np.asarray([(p[0], p[1], p[2], p[3]) for p in result.predictive])
        ax.fill_between(pred[:, 0], pred[:, 1], pred[:, 2], alpha=0.4)
        ax.plot(pred[:, 0], pred[:, 3], "o", ms=2)

    files += _maybe_plot(config, outdir, "predictive", plot_predictive)
    return files


def _cmd_compare(config, outdir):
    _, obs = make_dataset(config, data_model="pz")
    evidence_rows = []
    factor_rows = []
    final_factors = []
    for rep in range(config.replicates):
        results = {name: _run_smc2_once(config, name, obs, rep)
                   for name in ("pz", "pzstar")}
        for name, res in results.items():
            for t in range(obs.size):
                evidence_rows.append((t, name, rep, res.log_evidence_trace[t]))
        for t in range(obs.size):
            factor_rows.append((
                t, rep,
                bayes_factor(results["pz"].log_evidence_trace[t],
                             results["pzstar"].log_evidence_trace[t]),
            ))
        final_factors.append(factor_rows[-1][2])
    files = [
        write_csv(outdir / "evidence.csv", ["t", "model", "replicate", "log_evidence"],
                  evidence_rows),
        write_csv(outdir / "bayes_factor.csv", ["t", "replicate", "factor"],
                  factor_rows),
    ]

    def plot_factors(ax):
        arr = np.asarray(factor_rows)
        for rep in range(config.replicates):
            sel = arr[:, 1] == rep
            ax.semilogy(arr[sel, 0], arr[sel, 2])
        ax.axhline(1.0, ls="--", c="k")
        ax.axhline(100.0, ls="--", c="k")

    files += _maybe_plot(config, outdir, "bayes_factor", plot_factors)
    return files


_DISPATCH = {
    "simulate": _cmd_simulate,
    "pf": _cmd_pf,
    "abc": _cmd_abc,
    "pmmh": _cmd_pmmh,
    "smc": _cmd_smc,
    "smc2": _cmd_smc2,
    "compare": _cmd_compare,
}


def run_experiment(config: RunConfig) -> Path:
    """Run one command and write its artifacts; returns the output dir."""
    config.validate()
    started = time.time()
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = _DISPATCH[config.command](config, outdir)
    _write_manifest(outdir, config, started, files)
    return outdir
