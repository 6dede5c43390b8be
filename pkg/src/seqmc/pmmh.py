"""Particle marginal Metropolis-Hastings.

Pseudo-marginal MH on theta: every proposal runs a fresh particle filter
over the whole dataset and its likelihood estimate enters the acceptance
ratio. The chain targets the exact joint posterior for any finite number
of x-particles.
"""

from dataclasses import dataclass, field

import numpy as np

from seqmc.errors import ContractViolationError, ParticleCollapseError
from seqmc.particle_filter import pf_sample_path, run_particle_filter


@dataclass(frozen=True)
class ProposalSpec:
    """Gaussian proposal: random-walk (scale) or independent (mean, cov)."""

    kind: str  # "random_walk" | "independent"
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    scale: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("random_walk", "independent"):
            raise ContractViolationError(f"unknown proposal kind {self.kind!r}")
        if self.kind == "independent":
            cov = np.atleast_2d(np.asarray(self.cov, float))
            try:
                chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ContractViolationError("proposal covariance must be s.p.d.") from None
            object.__setattr__(self, "cov", cov)
            object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, float)))
            object.__setattr__(self, "_chol", chol)
        else:
            object.__setattr__(self, "scale", np.atleast_1d(np.asarray(self.scale, float)))

    def sample(self, current: np.ndarray, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        if self.kind == "random_walk":
            return current + self.scale * rng.standard_normal((n, current.shape[-1]))
        z = rng.standard_normal((n, self.mean.size))
        return self.mean + z @ self._chol.T

    def logq(self, proposed: np.ndarray, current: np.ndarray) -> np.ndarray:
        """log q(proposed | current); constant in ``current`` for the
        independent kind, symmetric (returns 0) for the random walk."""
        proposed = np.atleast_2d(proposed)
        if self.kind == "random_walk":
            return np.zeros(proposed.shape[0])
        diff = proposed - self.mean
        sol = np.linalg.solve(self._chol, diff.T)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        d = self.mean.size
        return -0.5 * (np.sum(sol**2, axis=0) + logdet + d * np.log(2.0 * np.pi))


def mh_log_accept(logz_star, logprior_star, logq_rev, logz, logprior, logq_fwd) -> float:
    """log of the MH acceptance probability; -inf rejects outright."""
    for v in (logz, logprior, logq_fwd, logq_rev):
        if not np.isfinite(v):
            raise ContractViolationError("current-state quantities must be finite")
    if np.isinf(logprior_star) and logprior_star < 0:
        return -np.inf
    return float(min(0.0, (logz_star + logprior_star + logq_rev) - (logz + logprior + logq_fwd)))


@dataclass
class PmmhResult:
    thetas: np.ndarray          # (n_iters, d)
    logzs: np.ndarray           # (n_iters,)
    log_priors: np.ndarray      # (n_iters,)
    accepted: np.ndarray        # bool (n_iters,); iteration 0 counts as accepted
    acceptance_rate: float
    paths: list | None          # per-iteration sampled trajectory, if kept
    n_collapsed: int            # proposals rejected due to filter collapse
    f_draws: int                # transition draws across all filters run

    def posterior_mean(self, burn_in: int = 0) -> np.ndarray:
        return self.thetas[burn_in:].mean(axis=0)


def default_random_walk(prior, d: int) -> ProposalSpec:
    """Random-walk scale 2.38/sqrt(d) times the prior standard deviation."""
    width = np.asarray(prior.high - prior.low, float)
    prior_sd = width / np.sqrt(12.0)
    return ProposalSpec(kind="random_walk", scale=2.38 / np.sqrt(d) * prior_sd)


def pmmh_run(model, y, n_x: int, n_iters: int, proposal: ProposalSpec | None,
             init_theta, rng: np.random.Generator, scheme: str = "systematic",
             keep_paths: bool = False) -> PmmhResult:
    """Run the PMMH chain for n_iters iterations (the first one just
    instantiates the initial state with a fresh filter).

    A collapsed proposal filter is treated as a -inf likelihood estimate,
    i.e. rejection, and counted in diagnostics. Out-of-support proposals
    are rejected through the prior term; nothing is simulated for them.
    """
    y = np.asarray(y, float)
    theta = np.atleast_1d(np.asarray(init_theta, float))
    d = theta.size
    if proposal is None:
        proposal = default_random_walk(model.prior, d)
    logprior = float(model.prior.logpdf(theta)[0])
    if not np.isfinite(logprior):
        raise ContractViolationError("init_theta outside prior support")

    f_draws = 0

    def run_filter(th):
        nonlocal f_draws
        state = run_particle_filter(model, th, y, n_x, rng, scheme=scheme,
                                    store_genealogy=keep_paths)
        f_draws += state.f_draws
        return state

    state = run_filter(theta)
    logz = state.cum_loglik
    path = pf_sample_path(state, rng) if keep_paths else None

    thetas = np.empty((n_iters, d))
    logzs = np.empty(n_iters)
    log_priors = np.empty(n_iters)
    accepted = np.zeros(n_iters, dtype=bool)
    paths = [] if keep_paths else None
    n_collapsed = 0

    thetas[0], logzs[0], log_priors[0], accepted[0] = theta, logz, logprior, True
    if keep_paths:
        paths.append(path)

    for i in range(1, n_iters):
        theta_star = proposal.sample(theta, rng)[0]
        logprior_star = float(model.prior.logpdf(theta_star)[0])
        if np.isfinite(logprior_star):
            try:
                star = run_filter(theta_star)
                logz_star = star.cum_loglik
                path_star = pf_sample_path(star, rng) if keep_paths else None
            except ParticleCollapseError:
                logz_star, path_star = -np.inf, None
                n_collapsed += 1
            log_a = mh_log_accept(
                logz_star, logprior_star,
                float(proposal.logq(theta, theta_star)[0]),
                logz, logprior,
                float(proposal.logq(theta_star, theta)[0]),
            )
        else:
            log_a = -np.inf
        if np.log(rng.random()) < log_a:
            theta, logz, logprior, path = theta_star, logz_star, logprior_star, path_star
            accepted[i] = True
        thetas[i], logzs[i], log_priors[i] = theta, logz, logprior
        if keep_paths:
            paths.append(path)

    return PmmhResult(
        thetas=thetas,
        logzs=logzs,
        log_priors=log_priors,
        accepted=accepted,
        acceptance_rate=float(accepted[1:].mean()) if n_iters > 1 else 1.0,
        paths=paths,
        n_collapsed=n_collapsed,
        f_draws=f_draws,
    )
