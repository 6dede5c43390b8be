"""The plug-and-play model contract and the built-in models.

A model bundle exposes exactly what the particle algorithms need: sample
the initial state, sample the transition, evaluate the measurement
log-density and sample a measurement. All callables are vectorized over a
leading particle axis: states are ``(n, dim_x)`` arrays and ``theta`` is
either a single ``(dim_theta,)`` vector or a per-row ``(n, dim_theta)``
batch.

Built-ins:
  - ``lg_model``: scalar linear-Gaussian autoregression, with a tractable
    likelihood delegated to the Kalman oracle.
  - ``pz_model``: the phytoplankton-zooplankton Lotka-Volterra variant,
    an implicit model whose transition integrates an ODE. The "pzstar"
    variant drops the quadratic mortality term.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from seqmc.errors import ContractViolationError, IntegratorDivergenceError

# Fixed PZ constants (clearance rate, growth efficiency, initial law).
PZ_C = 0.25
PZ_E = 0.3
PZ_MU_P = np.log(2.0)
PZ_MU_Z = np.log(2.0)
PZ_SIGMA_P = 0.2
PZ_SIGMA_Z = 0.1

PZ_THETA_NAMES = ("mu_alpha", "sigma_alpha", "sigma_y", "m_l", "m_q")
PZSTAR_THETA_NAMES = ("mu_alpha", "sigma_alpha", "sigma_y", "m_l")

# Parameters that generated the year-long synthetic dataset.
PZ_TRUE_THETA = np.array([0.7, 0.5, 0.2, 0.1, 0.1])

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Priors


@dataclass(frozen=True)
class UniformBoxPrior:
    """Independent uniform prior over an axis-aligned box."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "low", np.atleast_1d(np.asarray(self.low, float)))
        object.__setattr__(self, "high", np.atleast_1d(np.asarray(self.high, float)))
        if (self.high <= self.low).any():
            raise ValueError("prior box must have positive volume")

    @property
    def dim(self) -> int:
        return self.low.size

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, self.dim))

    def logpdf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, float))
        inside = ((theta >= self.low) & (theta <= self.high)).all(axis=1)
        const = -np.sum(np.log(self.high - self.low))
        out = np.where(inside, const, -np.inf)
        return out

    def clip(self, theta: np.ndarray) -> np.ndarray:
        """Project strictly inside the box (used to keep simulators on
        valid inputs when an out-of-support proposal is still simulated;
        such proposals are always rejected through their -inf prior)."""
        margin = 1e-9 * (self.high - self.low)
        return np.clip(theta, self.low + margin, self.high - margin)


@dataclass(frozen=True)
class DiracPrior:
    """Point-mass prior, useful for oracle comparisons at a known theta."""

    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, float)))

    @property
    def dim(self) -> int:
        return self.point.size

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(self.point, (n, 1))

    def logpdf(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, float))
        match = np.all(theta == self.point, axis=1)
        return np.where(match, 0.0, -np.inf)

    def clip(self, theta: np.ndarray) -> np.ndarray:
        return np.tile(self.point, (np.atleast_2d(theta).shape[0], 1))


# ---------------------------------------------------------------------------
# Model contract


@dataclass
class ModelSpec:
    """Everything the plug-and-play algorithms may touch.

    ``tractable_incremental_loglik`` is present only for models with an
    exact likelihood (linear-Gaussian); implicit models leave it None.
    ``tractable_batch`` is its vectorized carry-based form used by the
    ideal SMC sampler.
    """

    name: str
    dim_x: int
    dim_y: int
    dim_theta: int
    sample_initial: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    sample_transition: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    measurement_logdensity: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    sample_measurement: Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
    prior: object
    theta_names: tuple = ()
    tractable_incremental_loglik: Optional[Callable] = None
    tractable_batch: Optional[object] = None


def _theta_param(theta, j: int):
    """Column j of a theta vector or batch; broadcasts against particles."""
    theta = np.asarray(theta, float)
    if theta.ndim == 1:
        return theta[j]
    return theta[:, j]


# ---------------------------------------------------------------------------
# Linear-Gaussian model


@dataclass(frozen=True)
class LGParams:
    """Scalar linear-Gaussian state-space parameters (variances, not s.d.)."""

    mu0: float = 0.0
    var0: float = 1.0
    a: float = 0.9
    var_x: float = 1.0
    b: float = 1.0
    var_y: float = 1.0

    def __post_init__(self):
        for name in ("var0", "var_x", "var_y"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def lg_model(params: LGParams, free: tuple = (), prior=None) -> ModelSpec:
    """Scalar linear-Gaussian model; ``free`` names parameters taken from
    theta (in order) instead of ``params``, e.g. free=("a",) for unknown
    autoregression coefficient with a Uniform[0,1] prior by default.
    """
    free = tuple(free)
    idx = {name: j for j, name in enumerate(free)}

    def resolve(name, theta):
        if name in idx:
            return _theta_param(theta, idx[name])
        return getattr(params, name)

    def sample_initial(theta, n, rng):
        mu0 = resolve("mu0", theta)
        sd0 = np.sqrt(resolve("var0", theta))
        return (mu0 + sd0 * rng.standard_normal(n))[:, None]

    def sample_transition(x, theta, rng):
        a = np.asarray(resolve("a", theta), float)
        sd = np.sqrt(resolve("var_x", theta))
        drift = x * (a[:, None] if a.ndim == 1 else a)
        return drift + (sd * rng.standard_normal(x.shape[0]))[:, None]

    def measurement_logdensity(y, x, theta):
        b = resolve("b", theta)
        vy = resolve("var_y", theta)
        resid = float(y) - np.asarray(b) * x[:, 0]
        return -0.5 * (resid**2 / vy + np.log(vy) + _LOG_2PI)

    def sample_measurement(x, theta, rng):
        b = resolve("b", theta)
        sdy = np.sqrt(resolve("var_y", theta))
        return np.asarray(b) * x[:, 0] + sdy * rng.standard_normal(x.shape[0])

    if prior is None:
        prior = UniformBoxPrior(np.zeros(len(free)), np.ones(len(free))) if free else DiracPrior(np.zeros(0))

    def substitute(theta):
        values = {name: float(np.asarray(theta).reshape(-1)[j]) for name, j in idx.items()}
        return LGParams(**{**params.__dict__, **values})

    def tractable_incremental_loglik(theta, y_prefix):
        from seqmc.kalman import kalman_filter

        res = kalman_filter(substitute(theta), np.asarray(y_prefix, float))
        return float(res.incremental_logliks[-1])

    from seqmc.kalman import LGTractableBatch

    model = ModelSpec(
        name="lg",
        dim_x=1,
        dim_y=1,
        dim_theta=len(free),
        sample_initial=sample_initial,
        sample_transition=sample_transition,
        measurement_logdensity=measurement_logdensity,
        sample_measurement=sample_measurement,
        prior=prior,
        theta_names=free,
        tractable_incremental_loglik=tractable_incremental_loglik,
    )
    model.tractable_batch = LGTractableBatch(params, free)
    model.substitute = substitute
    return model


# ---------------------------------------------------------------------------
# PZ Lotka-Volterra model


@njit(cache=True, fastmath=True)
def _rk4_lv_kernel(logp, logz, alpha, ml, mq, c, e, n_sub, h):
    n = logp.shape[0]
    for i in range(n):
        u = logp[i]
        v = logz[i]
        a = alpha[i]
        l = ml[i]
        q = mq[i]
        for _ in range(n_sub):
            z1 = np.exp(v)
            p1 = np.exp(u)
            k1u = a - c * z1
            k1v = e * c * p1 - l - q * z1
            z2 = np.exp(v + 0.5 * h * k1v)
            p2 = np.exp(u + 0.5 * h * k1u)
            k2u = a - c * z2
            k2v = e * c * p2 - l - q * z2
            z3 = np.exp(v + 0.5 * h * k2v)
            p3 = np.exp(u + 0.5 * h * k2u)
            k3u = a - c * z3
            k3v = e * c * p3 - l - q * z3
            z4 = np.exp(v + h * k3v)
            p4 = np.exp(u + h * k3u)
            k4u = a - c * z4
            k4v = e * c * p4 - l - q * z4
            u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        logp[i] = u
        logz[i] = v


def rk4_lv_step(logp, logz, alpha, m_l, m_q, duration=1.0, h=0.01, c=PZ_C, e=PZ_E):
    """Classic fixed-step RK4 on the log-transformed predator-prey system

        d(log p)/dt = alpha - c z,   d(log z)/dt = e c p - m_l - m_q z

    integrated over ``duration`` days in substeps of ``h``. Inputs may be
    scalars or equal-length arrays. Returns (logp', logz').
    """
    if h <= 0:
        raise ContractViolationError("step size h must be positive")
    n_sub = round(duration / h)
    if n_sub < 1 or abs(n_sub * h - duration) > 1e-9 * max(duration, 1.0):
        raise ContractViolationError("duration must be a positive integer multiple of h")
    scalar = np.isscalar(logp) or np.asarray(logp).ndim == 0
    n = 1 if scalar else len(np.asarray(logp))

    def arr(v):
        v = np.asarray(v, float)
        return np.full(n, float(v)) if v.ndim == 0 else np.ascontiguousarray(v, float)

    lp, lz = arr(logp).copy(), arr(logz).copy()
    _rk4_lv_kernel(lp, lz, arr(alpha), arr(m_l), arr(m_q), float(c), float(e), n_sub, float(h))
    if not (np.isfinite(lp).all() and np.isfinite(lz).all()):
        raise IntegratorDivergenceError("integrator divergence: non-finite log-state")
    if scalar:
        return float(lp[0]), float(lz[0])
    return lp, lz


def pz_model(variant: str = "pz", rk4_step: float = 0.01) -> ModelSpec:
    """Phytoplankton-zooplankton model. State columns: (alpha, log p, log z).

    ``variant`` is "pz" (5 free parameters) or "pzstar" (quadratic
    mortality removed, 4 free parameters). Observations are noisy
    phytoplankton measurements: log y_t ~ Normal(log p_t, sigma_y^2); the
    measurement density is evaluated as that Gaussian in log y.
    """
    if variant not in ("pz", "pzstar"):
        raise ValueError(f"unknown PZ variant: {variant!r}")
    has_mq = variant == "pz"
    names = PZ_THETA_NAMES if has_mq else PZSTAR_THETA_NAMES
    d = len(names)

    def unpack(theta, n):
        mu_a = _theta_param(theta, 0)
        s_a = _theta_param(theta, 1)
        s_y = _theta_param(theta, 2)
        m_l = _theta_param(theta, 3)
        m_q = _theta_param(theta, 4) if has_mq else 0.0
        return mu_a, s_a, s_y, m_l, m_q

    def sample_initial(theta, n, rng):
        mu_a, s_a, *_ = unpack(theta, n)
        alpha = rng.normal(mu_a, s_a, size=n)
        logp = rng.normal(PZ_MU_P, PZ_SIGMA_P, size=n)
        logz = rng.normal(PZ_MU_Z, PZ_SIGMA_Z, size=n)
        return np.column_stack([alpha, logp, logz])

    def full(v, n):
        v = np.asarray(v, float)
        return np.full(n, float(v)) if v.ndim == 0 else np.ascontiguousarray(v)

    def sample_transition(x, theta, rng):
        n = x.shape[0]
        mu_a, s_a, _, m_l, m_q = unpack(theta, n)
        alpha = rng.normal(mu_a, s_a, size=n)
        lp = np.ascontiguousarray(x[:, 1])
        lz = np.ascontiguousarray(x[:, 2])
        _rk4_lv_kernel(
            lp, lz, alpha, full(m_l, n), full(m_q, n), PZ_C, PZ_E,
            round(1.0 / rk4_step), float(rk4_step),
        )
        if not (np.isfinite(lp).all() and np.isfinite(lz).all()):
            raise IntegratorDivergenceError("integrator divergence in PZ transition")
        return np.column_stack([alpha, lp, lz])

    def measurement_logdensity(y, x, theta):
        y = float(y)
        if y <= 0:
            raise ContractViolationError("PZ observations must be positive")
        s_y = unpack(theta, x.shape[0])[2]
        resid = np.log(y) - x[:, 1]
        return -0.5 * (resid**2 / s_y**2 + _LOG_2PI) - np.log(s_y)

    def sample_measurement(x, theta, rng):
        s_y = unpack(theta, x.shape[0])[2]
        return np.exp(rng.normal(x[:, 1], s_y))

    return ModelSpec(
        name=variant,
        dim_x=3,
        dim_y=1,
        dim_theta=d,
        sample_initial=sample_initial,
        sample_transition=sample_transition,
        measurement_logdensity=measurement_logdensity,
        sample_measurement=sample_measurement,
        prior=UniformBoxPrior(np.zeros(d), np.ones(d)),
        theta_names=names,
    )


def get_model(name: str, lg_params: LGParams | None = None, rk4_step: float = 0.01,
              free: tuple = ()) -> ModelSpec:
    """Model lookup by name: "lg", "pz" or "pzstar"."""
    if name == "lg":
        return lg_model(lg_params or LGParams(), free=free)
    if name in ("pz", "pzstar"):
        return pz_model(name, rk4_step=rk4_step)
    raise ValueError(f"unknown model name: {name!r}")


def simulate(model: ModelSpec, theta, T: int, rng: np.random.Generator):
    """Exact forward draw of (states, observations) for times 0..T."""
    theta = np.asarray(theta, float)
    if model.dim_theta and not np.isfinite(model.prior.logpdf(theta)).all():
        raise ContractViolationError("theta outside prior support")
    states = np.empty((T + 1, model.dim_x))
    obs = np.empty(T + 1)
    x = model.sample_initial(theta, 1, rng)
    states[0] = x[0]
    obs[0] = model.sample_measurement(x, theta, rng)[0]
    for t in range(1, T + 1):
        x = model.sample_transition(x, theta, rng)
        states[t] = x[0]
        obs[t] = model.sample_measurement(x, theta, rng)[0]
    return states, obs
