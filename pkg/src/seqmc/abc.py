"""ABC rejection sampling for fully implicit models.

Repeats prior draw -> simulate hidden path -> simulate observations ->
accept iff the synthetic series lands within tolerance of the data. Needs
only the ability to sample from the model, never a density evaluation.
"""

from dataclasses import dataclass

import numpy as np

from seqmc.errors import ContractViolationError, ToleranceError
from seqmc.models import simulate


def distance_euclidean_log(y_hat, y) -> float:
    """Euclidean norm of (log y_hat - log y), for positive-valued data."""
    y_hat = np.asarray(y_hat, float)
    y = np.asarray(y, float)
    if y_hat.shape != y.shape:
        raise ContractViolationError("observation vectors must have equal length")
    if (y_hat <= 0).any() or (y <= 0).any():
        raise ContractViolationError("log distance requires positive entries")
    return float(np.linalg.norm(np.log(y_hat) - np.log(y)))


def distance_euclidean(y_hat, y) -> float:
    """Identity-scale Euclidean distance (for real-valued data)."""
    y_hat = np.asarray(y_hat, float)
    y = np.asarray(y, float)
    if y_hat.shape != y.shape:
        raise ContractViolationError("observation vectors must have equal length")
    return float(np.linalg.norm(y_hat - y))


@dataclass(frozen=True)
class AbcResult:
    accepted: list  # (theta, states) pairs
    attempts: int
    min_distance: float


def abc_rejection(model, y, epsilon: float, distance, n_accept: int,
                  max_attempts: int, rng: np.random.Generator) -> AbcResult:
    """Rejection sampler: stops at n_accept acceptances or max_attempts
    attempts, whichever comes first. Raises ToleranceError (carrying the
    smallest observed distance) if the budget runs out with nothing
    accepted."""
    if epsilon < 0:
        raise ContractViolationError("tolerance must be nonnegative")
    if max_attempts < n_accept:
        raise ContractViolationError("max_attempts must be at least n_accept")
    y = np.asarray(y, float)
    T = y.size - 1
    accepted = []
    attempts = 0
    min_dist = np.inf
    while len(accepted) < n_accept and attempts < max_attempts:
        attempts += 1
        theta = model.prior.sample(rng, 1)[0]
        states, y_hat = simulate(model, theta, T, rng)
        d = distance(y_hat, y)
        min_dist = min(min_dist, d)
        if d <= epsilon:
            accepted.append((theta, states))
    if not accepted:
        raise ToleranceError(
            f"tolerance too tight: 0/{attempts} accepted; smallest distance {min_dist:.6g}",
            min_distance=float(min_dist),
        )
    return AbcResult(accepted=accepted, attempts=attempts, min_distance=float(min_dist))
