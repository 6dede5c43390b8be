"""Exact filtering and likelihood for the scalar linear-Gaussian model.

This is the ground-truth oracle: every particle estimator in the test
suite is validated against these closed-form recursions.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from seqmc.errors import ContractViolationError

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class KalmanResult:
    filter_means: np.ndarray
    filter_vars: np.ndarray
    incremental_logliks: np.ndarray
    total_loglik: float


def _predict(m, P, first, params):
    if first:
        return params.mu0, params.var0
    return params.a * m, params.a**2 * P + params.var_x


def kalman_filter(params, y) -> KalmanResult:
    """Predict/update recursion over observations y[0..T]; O(T) cost.

    Returns per-step filter means/variances of x_t given y_{0:t} and the
    incremental log-likelihoods log p(y_t | y_{0:t-1}).
    """
    y = np.asarray(y, dtype=float)
    if not np.isfinite(y).all():
        raise ContractViolationError("observations must be finite")
    T = y.size
    means = np.empty(T)
    variances = np.empty(T)
    incr = np.empty(T)
    m, P = 0.0, 0.0
    b, vy = params.b, params.var_y
    for t in range(T):
        m_pred, P_pred = _predict(m, P, t == 0, params)
        S = b**2 * P_pred + vy
        resid = y[t] - b * m_pred
        incr[t] = -0.5 * (resid**2 / S + np.log(S) + _LOG_2PI)
        gain = P_pred * b / S
        m = m_pred + gain * resid
        P = (1.0 - gain * b) * P_pred
        means[t] = m
        variances[t] = P
    return KalmanResult(means, variances, incr, float(incr.sum()))


class LGTractableBatch:
    """Vectorized incremental Kalman likelihood over a batch of thetas.

    Used by the ideal SMC sampler: carry one (mean, variance) pair per
    theta-particle and update it in O(1) per observation.
    """

    def __init__(self, params, free):
        self.params = params
        self.free = tuple(free)

    def _resolve(self, name, thetas):
        if name in self.free:
            return thetas[:, self.free.index(name)]
        return getattr(self.params, name)

    def init_carry(self, n: int):
        return {"m": np.zeros(n), "P": np.zeros(n), "t": 0}

    def step(self, carry, thetas, y_t):
        """Advance the batch one observation; returns (carry, incr_loglik)."""
        thetas = np.atleast_2d(np.asarray(thetas, float))
        a = self._resolve("a", thetas)
        vx = self._resolve("var_x", thetas)
        b = self._resolve("b", thetas)
        vy = self._resolve("var_y", thetas)
        if carry["t"] == 0:
            m_pred = np.broadcast_to(self._resolve("mu0", thetas), carry["m"].shape).astype(float)
            P_pred = np.broadcast_to(self._resolve("var0", thetas), carry["P"].shape).astype(float)
        else:
            m_pred = a * carry["m"]
            P_pred = a**2 * carry["P"] + vx
        S = b**2 * P_pred + vy
        resid = float(y_t) - b * m_pred
        incr = -0.5 * (resid**2 / S + np.log(S) + _LOG_2PI)
        gain = P_pred * b / S
        new = {
            "m": m_pred + gain * resid,
            "P": (1.0 - gain * b) * P_pred,
            "t": carry["t"] + 1,
        }
        return new, incr

    def replay(self, thetas, y):
        """Fresh carry and cumulative loglik over all of y (used after
        rejuvenation moves replace thetas)."""
        thetas = np.atleast_2d(np.asarray(thetas, float))
        carry = self.init_carry(thetas.shape[0])
        cum = np.zeros(thetas.shape[0])
        for y_t in np.asarray(y, float):
            carry, incr = self.step(carry, thetas, y_t)
            cum += incr
        return carry, cum


def lg_posterior_reference(params, free_name: str, prior, y, n_grid: int = 2001):
    """Grid reference posterior/evidence for one unknown LG parameter.

    Evaluates prior(theta) * exp(Kalman loglik) on a uniform grid over the
    prior's (bounded) support, trapezoid-normalized. Returns a dict with
    the grid, normalized density, posterior mean and quadrature
    log-evidence.
    """
    low, high = float(prior.low[0]), float(prior.high[0])
    if not (np.isfinite(low) and np.isfinite(high)):
        raise ContractViolationError("grid reference requires a bounded prior")
    grid = np.linspace(low, high, n_grid)
    y = np.asarray(y, float)
    logpost = np.empty(n_grid)
    prior_const = float(prior.logpdf(np.array([[low]]))[0])
    for i, v in enumerate(grid):
        p = params.__class__(**{**params.__dict__, free_name: float(v)})
        logpost[i] = kalman_filter(p, y).total_loglik + prior_const
    # trapezoid quadrature in log space: weights (h/2, h, ..., h, h/2)
    h = grid[1] - grid[0]
    logw = np.full(n_grid, np.log(h))
    logw[0] = logw[-1] = np.log(h / 2.0)
    log_evidence = float(logsumexp(logpost + logw))
    density = np.exp(logpost - log_evidence)
    mean = float(np.trapezoid(grid * density, grid))
    return {
        "grid": grid,
        "density": density,
        "log_evidence": log_evidence,
        "posterior_mean": mean,
    }
