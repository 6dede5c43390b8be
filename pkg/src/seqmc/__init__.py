"""Sequential Bayesian inference for implicit hidden Markov models.

Particle filtering, particle marginal Metropolis-Hastings, adaptive SMC
samplers and SMC2, with a Kalman oracle for linear-Gaussian validation and
a phytoplankton-zooplankton (PZ) Lotka-Volterra example model.
"""

from seqmc.resampling import (
    WeightVector,
    normalize,
    ess,
    resample_multinomial,
    resample_systematic,
)
from seqmc.models import lg_model, pz_model, simulate, LGParams, UniformBoxPrior
from seqmc.kalman import kalman_filter, lg_posterior_reference
from seqmc.particle_filter import (
    FilterState,
    pf_init,
    pf_step,
    pf_estimate,
    pf_sample_path,
    pf_unique_initial_ancestors,
    pf_predict,
    run_particle_filter,
)
from seqmc.smc2 import bayes_factor

__all__ = [
    "WeightVector",
    "normalize",
    "ess",
    "resample_multinomial",
    "resample_systematic",
    "lg_model",
    "pz_model",
    "simulate",
    "LGParams",
    "UniformBoxPrior",
    "kalman_filter",
    "lg_posterior_reference",
    "FilterState",
    "pf_init",
    "pf_step",
    "pf_estimate",
    "pf_sample_path",
    "pf_unique_initial_ancestors",
    "pf_predict",
    "run_particle_filter",
    "bayes_factor",
]
