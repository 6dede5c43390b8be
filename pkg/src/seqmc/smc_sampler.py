"""Adaptive SMC sampler over parameters, for models with a tractable
incremental likelihood (the ideal algorithm that SMC2 imitates).

Each observation multiplies the theta-weights by the incremental
likelihood; when the effective sample size falls below the threshold, the
population is resampled (systematic), an independent Gaussian proposal is
fitted to the pre-reset weighted cloud and each particle gets a fixed
number of MH moves targeting the posterior given the data so far.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from seqmc.errors import ContractViolationError, ParticleCollapseError
from seqmc.pmmh import ProposalSpec
from seqmc.resampling import ess, resample_systematic

_COV_JITTER = 1e-6


def fit_gaussian_proposal(thetas, weights) -> ProposalSpec:
    """Independent Gaussian proposal with the weighted empirical mean and
    covariance of the cloud, diagonal-jittered by 1e-6 * trace / d."""
    thetas = np.atleast_2d(np.asarray(thetas, float))
    w = np.asarray(weights, float)
    if thetas.shape[0] < 2 or (w > 0).sum() < 2:
        raise ContractViolationError("need at least two weighted particles")
    w = w / w.sum()
    mean = w @ thetas
    centered = thetas - mean
    cov = (centered * w[:, None]).T @ centered
    d = thetas.shape[1]
    jitter = _COV_JITTER * max(np.trace(cov), 1.0) / d
    cov = cov + jitter * np.eye(d)
    return ProposalSpec(kind="independent", mean=mean, cov=cov)


@dataclass
class SmcSamplerTrace:
    thetas: np.ndarray            # final cloud (N, d)
    log_weights: np.ndarray       # final normalized theta log-weights
    log_evidence: float
    ess_trace: np.ndarray         # ESS of the pre-update weights, per step
    log_evidence_trace: np.ndarray
    rejuvenations: list = field(default_factory=list)  # (t, mean acceptance)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def smc_sampler_run(model, y, n_theta: int, ess_threshold: float = 0.5,
                    n_moves: int = 1, rng: np.random.Generator = None) -> SmcSamplerTrace:
    """Run the adaptive SMC sampler over all observations in y."""
    if model.tractable_batch is None:
        raise ContractViolationError("model does not expose a tractable likelihood")
    if not 0.0 < ess_threshold < 1.0:
        raise ContractViolationError("ESS threshold must lie in (0, 1)")
    y = np.asarray(y, float)
    batch = model.tractable_batch

    thetas = model.prior.sample(rng, n_theta)
    log_w = np.full(n_theta, -np.log(n_theta))
    carry = batch.init_carry(n_theta)
    cum_loglik = np.zeros(n_theta)
    log_evidence = 0.0
    ess_trace = np.empty(y.size)
    log_evidence_trace = np.empty(y.size)
    rejuvenations = []

    for t, y_t in enumerate(y):
        current_ess = ess(np.exp(log_w))
        ess_trace[t] = current_ess
        if t > 0 and current_ess < ess_threshold:
            proposal = fit_gaussian_proposal(thetas, np.exp(log_w))
            anc = resample_systematic(np.exp(log_w), n_theta, rng)
            thetas = thetas[anc]
            cum_loglik = cum_loglik[anc]
            carry = {"m": carry["m"][anc], "P": carry["P"][anc], "t": carry["t"]}
            log_w = np.full(n_theta, -np.log(n_theta))
            acc_rates = []
            for _ in range(n_moves):
                star = proposal.sample(thetas, rng, n_theta)
                logprior_star = model.prior.logpdf(star)
                logprior = model.prior.logpdf(thetas)
                _, cum_star = batch.replay(star, y[:t])
                log_a = (
                    (cum_star + logprior_star + proposal.logq(thetas, star))
                    - (cum_loglik + logprior + proposal.logq(star, thetas))
                )
                accept = np.log(rng.random(n_theta)) < log_a
                thetas[accept] = star[accept]
                cum_loglik[accept] = cum_star[accept]
                acc_rates.append(float(accept.mean()))
            # rebuild the Kalman carries at the (possibly moved) thetas
            carry, cum_loglik = batch.replay(thetas, y[:t])
            rejuvenations.append((t, float(np.mean(acc_rates))))
        carry, incr = batch.step(carry, thetas, y_t)
        cum_loglik += incr
        lw = log_w + incr
        log_incr_evidence = logsumexp(lw)
        if not np.isfinite(log_incr_evidence):
            raise ParticleCollapseError(f"theta-level collapse at t={t}", t=t)
        log_evidence += float(log_incr_evidence)
        log_evidence_trace[t] = log_evidence
        log_w = lw - log_incr_evidence

    return SmcSamplerTrace(
        thetas=thetas,
        log_weights=log_w,
        log_evidence=log_evidence,
        ess_trace=ess_trace,
        log_evidence_trace=log_evidence_trace,
        rejuvenations=rejuvenations,
    )
