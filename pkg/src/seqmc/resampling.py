"""Weight normalization, effective sample size and resampling schemes.

Weights are carried in log-space end to end; normalization uses
shift-by-max log-sum-exp so that measurement densities that underflow in
linear space (hundreds of steps of the PZ model) remain usable.
"""

from dataclasses import dataclass

import numpy as np

from seqmc.errors import ContractViolationError, InvalidWeightError, ParticleCollapseError

_NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class WeightVector:
    """Normalized particle weights together with their log-space origin.

    logw: the unnormalized per-particle log-weights as given.
    w: normalized weights summing to one.
    log_mean: log of the arithmetic mean of the unnormalized weights,
        i.e. logsumexp(logw) - log(N). This is the per-step increment of
        the particle-filter likelihood estimator.
    """

    logw: np.ndarray
    w: np.ndarray
    log_mean: float

    def __len__(self) -> int:
        return len(self.w)


def normalize(logw) -> WeightVector:
    """Normalize log-weights via shift-by-max log-sum-exp.

    Raises InvalidWeightError on NaN entries and ParticleCollapseError
    when every entry is -inf (total weight zero).
    """
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0:
        raise ContractViolationError("empty log-weight vector")
    if np.isnan(logw).any():
        raise InvalidWeightError("invalid weight: NaN log-weight")
    shift = logw.max()
    if shift == -np.inf:
        raise ParticleCollapseError("particle collapse: all log-weights are -inf")
    # inline shift-by-max log-sum-exp; this sits on the per-step hot path
    # of every filter, where scipy's generic version costs more than the
    # resampling and propagation combined
    shifted = np.exp(logw - shift)
    total_shifted = shifted.sum()
    w = shifted / total_shifted
    log_mean = float(shift + np.log(total_shifted) - np.log(logw.size))
    return WeightVector(logw=logw, w=w, log_mean=log_mean)


def ess(w) -> float:
    """Effective sample size fraction 1 / (N * sum(w^2)), in [1/N, 1].

    ``w`` must be normalized; anything else is a contract violation.
    """
    w = np.asarray(w, dtype=float)
    if w.size == 0 or (w < 0).any() or abs(w.sum() - 1.0) > _NORMALIZATION_TOL:
        raise ContractViolationError("ess requires normalized weights")
    return float(1.0 / (w.size * np.sum(w**2)))


def _check_normalized(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.size == 0 or (w < 0).any() or abs(w.sum() - 1.0) > _NORMALIZATION_TOL:
        raise ContractViolationError("resampling requires normalized weights")
    return w


def resample_multinomial(w, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ancestors drawn i.i.d. from the categorical distribution given by w."""
    w = _check_normalized(w)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    u = rng.random(n)
    return np.searchsorted(cum, u, side="right").astype(np.int64)


def resample_systematic(w, n: int, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform u, grid (u+i)/n inverted through
    the cumulative weights. Per-index counts are floor(n*w[i]) or
    ceil(n*w[i]). A grid point strictly below a cumulative boundary
    selects that boundary's index.
    """
    w = _check_normalized(w)
    cum = np.cumsum(w)
    cum[-1] = 1.0
    u = rng.random()
    grid = (u + np.arange(n)) / n
    idx = np.searchsorted(cum, grid, side="right")
    return np.minimum(idx, w.size - 1).astype(np.int64)
