"""Bootstrap particle filter with genealogy, likelihood estimate and
degeneracy diagnostics.

The step ordering is the lazy-transition form of the standard algorithm:
``pf_step`` first resamples the previous weights and propagates (except at
t=0, where ``pf_init`` already provided particles), then weights against
the new observation. After assimilating y_0..y_t this has spent exactly
Nx*(t+1) transition draws (initial draws included) and Nx*(t+1)
measurement-density evaluations.
"""

from dataclasses import dataclass, field

import numpy as np

from seqmc.errors import ContractViolationError, ParticleCollapseError
from seqmc.resampling import WeightVector, normalize, resample_multinomial, resample_systematic

_SCHEMES = {"multinomial": resample_multinomial, "systematic": resample_systematic}


@dataclass
class FilterState:
    """Live state of one bootstrap particle filter.

    ``t`` is the time of the last assimilated observation (-1 right after
    init). ``origin[k]`` tracks the time-0 ancestor index of particle k,
    maintained across resampling, so unique-ancestor counts do not need
    the full genealogy. When ``store_genealogy`` is set, per-step particle
    arrays and ancestor vectors are kept for path sampling.
    """

    model: object
    theta: np.ndarray
    t: int
    particles: np.ndarray
    weights: WeightVector | None
    cum_loglik: float
    f_draws: int
    g_evals: int
    origin: np.ndarray
    store_genealogy: bool
    history: list = field(default_factory=list)
    ancestors: list = field(default_factory=list)

    @property
    def n_particles(self) -> int:
        return self.particles.shape[0]


def pf_init(model, theta, n_x: int, rng: np.random.Generator,
            store_genealogy: bool = True) -> FilterState:
    """Nx i.i.d. draws from the initial distribution; no weights yet."""
    if n_x < 1:
        raise ContractViolationError("need at least one particle")
    theta = np.asarray(theta, float)
    particles = model.sample_initial(theta, n_x, rng)
    return FilterState(
        model=model,
        theta=theta,
        t=-1,
        particles=particles,
        weights=None,
        cum_loglik=0.0,
        f_draws=n_x,
        g_evals=0,
        origin=np.arange(n_x),
        store_genealogy=store_genealogy,
    )


def pf_step(state: FilterState, y_t, rng: np.random.Generator,
            scheme: str = "systematic") -> FilterState:
    """Assimilate the next observation: resample, propagate, weight."""
    resample = _SCHEMES[scheme]
    n = state.n_particles
    if state.t >= 0:
        anc = resample(state.weights.w, n, rng)
        state.particles = state.model.sample_transition(
            state.particles[anc], state.theta, rng
        )
        state.origin = state.origin[anc]
        state.f_draws += n
        if state.store_genealogy:
            state.ancestors.append(anc)
    logg = state.model.measurement_logdensity(y_t, state.particles, state.theta)
    state.g_evals += n
    try:
        state.weights = normalize(logg)
    except ParticleCollapseError:
        raise ParticleCollapseError(
            f"particle collapse at t={state.t + 1}", t=state.t + 1
        ) from None
    state.cum_loglik += state.weights.log_mean
    state.t += 1
    if state.store_genealogy:
        state.history.append(state.particles.copy())
    return state


def pf_estimate(state: FilterState, phi) -> float:
    """Weighted average of phi over the current particles."""
    if state.weights is None:
        raise ContractViolationError("no weights computed yet")
    values = np.asarray(phi(state.particles), float)
    return float(np.dot(state.weights.w, values))


def pf_sample_path(state: FilterState, rng: np.random.Generator) -> np.ndarray:
    """One trajectory drawn with probability proportional to its weight,
    traced backward through the stored genealogy."""
    if not state.store_genealogy or not state.history:
        raise ContractViolationError("path sampling requires a stored genealogy")
    k = int(resample_multinomial(state.weights.w, 1, rng)[0])
    path = np.empty((state.t + 1, state.particles.shape[1]))
    path[state.t] = state.history[state.t][k]
    for s in range(state.t - 1, -1, -1):
        k = int(state.ancestors[s][k])
        path[s] = state.history[s][k]
    return path


def pf_unique_initial_ancestors(state: FilterState) -> int:
    """Distinct time-0 ancestors among the surviving lineages."""
    return int(np.unique(state.origin).size)


def pf_predict(state: FilterState, k: int, rng: np.random.Generator):
    """Propagate every particle k steps with no conditioning, then draw
    measurements. Returns (states, observations, weights); the weights are
    the current filter weights, unchanged. Does not touch the counters
    (prediction is a diagnostic, not inference cost)."""
    if k < 1:
        raise ContractViolationError("prediction horizon must be >= 1")
    if state.weights is None:
        raise ContractViolationError("no weights computed yet")
    x = state.particles
    for _ in range(k):
        x = state.model.sample_transition(x, state.theta, rng)
    y = state.model.sample_measurement(x, state.theta, rng)
    return x, y, state.weights


def run_particle_filter(model, theta, y, n_x: int, rng: np.random.Generator,
                        scheme: str = "systematic",
                        store_genealogy: bool = False) -> FilterState:
    """Convenience: init then assimilate every observation in y."""
    state = pf_init(model, theta, n_x, rng, store_genealogy=store_genealogy)
    for y_t in np.asarray(y, float):
        pf_step(state, y_t, rng, scheme=scheme)
    return state
