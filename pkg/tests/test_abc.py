import numpy as np
import pytest

from seqmc.abc import (
    abc_rejection,
    distance_euclidean,
    distance_euclidean_log,
)
from seqmc.errors import ContractViolationError, ToleranceError
from seqmc.models import (
    LGParams,
    ModelSpec,
    PZ_TRUE_THETA,
    UniformBoxPrior,
    get_model,
    lg_model,
    simulate,
)
from seqmc.rngstream import derive_rng


def sticky_coin_model() -> ModelSpec:
    """A fully enumerable model for exact checks: theta = (p,), the hidden
    state is a single Bernoulli(p) draw frozen over time, and observations
    report it without noise. With data (1, 1) the acceptance probability
    of a candidate p at zero tolerance is exactly p, so accepted draws
    follow a Beta(2, 1) density with mean 2/3."""

    def sample_initial(theta, n, rng):
        p = np.broadcast_to(np.asarray(theta, float).reshape(-1)[0], n)
        return (rng.random(n) < p).astype(float)[:, None]

    def sample_transition(x, theta, rng):
        return x.copy()

    def measurement_logdensity(y, x, theta):
        return np.where(x[:, 0] == float(y), 0.0, -np.inf)

    def sample_measurement(x, theta, rng):
        return x[:, 0].copy()

    return ModelSpec(
        name="sticky-coin",
        dim_x=1,
        dim_y=1,
        dim_theta=1,
        sample_initial=sample_initial,
        sample_transition=sample_transition,
        measurement_logdensity=measurement_logdensity,
        sample_measurement=sample_measurement,
        prior=UniformBoxPrior(np.zeros(1), np.ones(1)),
        theta_names=("p",),
    )


class TestDistances:
    def test_euclidean_simple(self):
        assert distance_euclidean([1.0, 2.0], [1.0, 0.0]) == pytest.approx(2.0)

    def test_log_distance_scale_invariance(self):
        # multiplying both series by a constant leaves the log distance alone
        y = np.array([1.0, 2.0, 4.0])
        y_hat = np.array([1.5, 1.0, 8.0])
        assert distance_euclidean_log(3 * y_hat, 3 * y) == pytest.approx(
            distance_euclidean_log(y_hat, y)
        )

    def test_log_distance_rejects_nonpositive(self):
        with pytest.raises(ContractViolationError):
            distance_euclidean_log([1.0, 0.0], [1.0, 1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractViolationError):
            distance_euclidean([1.0], [1.0, 2.0])


class TestRejectionExact:
    def test_accepted_draws_follow_beta_posterior(self):
        model = sticky_coin_model()
        y = np.array([1.0, 1.0])
        rng = derive_rng(30, 0)
        result = abc_rejection(model, y, 0.0, distance_euclidean,
                               n_accept=1500, max_attempts=200000, rng=rng)
        ps = np.array([theta[0] for theta, _ in result.accepted])
        # Beta(2,1): mean 2/3, sd sqrt(1/18)
        se = np.sqrt(1 / 18) / np.sqrt(ps.size)
        assert ps.mean() == pytest.approx(2 / 3, abs=4 * se)

    def test_overall_acceptance_rate_is_half(self):
        # marginal acceptance probability: integral of p over U[0,1]
        model = sticky_coin_model()
        y = np.array([1.0, 1.0])
        rng = derive_rng(30, 1)
        result = abc_rejection(model, y, 0.0, distance_euclidean,
                               n_accept=4000, max_attempts=4000, rng=rng)
        rate = len(result.accepted) / result.attempts
        assert rate == pytest.approx(0.5, abs=4 * 0.5 / np.sqrt(4000))

    def test_zero_tolerance_only_exact_matches(self):
        model = sticky_coin_model()
        y = np.array([1.0, 1.0])
        rng = derive_rng(30, 2)
        result = abc_rejection(model, y, 0.0, distance_euclidean,
                               n_accept=200, max_attempts=100000, rng=rng)
        for _, states in result.accepted:
            assert (states[:, 0] == 1.0).all()


class TestRejectionBehaviour:
    def test_looser_tolerance_accepts_superset(self):
        model = lg_model(LGParams(), free=("a",))
        _, y = simulate(model, np.array([0.8]), 8, derive_rng(31, 0))
        accepted = {}
        for eps in (4.0, 6.0):
            result = abc_rejection(model, y, eps, distance_euclidean,
                                   n_accept=600, max_attempts=600,
                                   rng=derive_rng(31, 1))
            accepted[eps] = {round(t[0], 12) for t, _ in result.accepted}
        assert accepted[4.0]
        assert accepted[4.0] <= accepted[6.0]

    def test_impossible_tolerance_reports_best_distance(self):
        model = lg_model(LGParams(), free=("a",))
        _, y = simulate(model, np.array([0.8]), 8, derive_rng(31, 2))
        with pytest.raises(ToleranceError) as exc:
            abc_rejection(model, y, 1e-9, distance_euclidean,
                          n_accept=5, max_attempts=300, rng=derive_rng(31, 3))
        assert np.isfinite(exc.value.min_distance)
        assert exc.value.min_distance > 1e-9

    def test_negative_tolerance_rejected(self):
        model = sticky_coin_model()
        with pytest.raises(ContractViolationError):
            abc_rejection(model, np.ones(2), -1.0, distance_euclidean,
                          n_accept=1, max_attempts=10, rng=derive_rng(31, 4))

    def test_budget_smaller_than_quota_rejected(self):
        model = sticky_coin_model()
        with pytest.raises(ContractViolationError):
            abc_rejection(model, np.ones(2), 1.0, distance_euclidean,
                          n_accept=100, max_attempts=10, rng=derive_rng(31, 5))

    def test_runs_on_plankton_model(self):
        model = get_model("pz", rk4_step=0.1)
        _, y = simulate(model, PZ_TRUE_THETA, 10, derive_rng(31, 6))
        result = abc_rejection(model, y, 20.0, distance_euclidean_log,
                               n_accept=20, max_attempts=20000,
                               rng=derive_rng(31, 7))
        assert len(result.accepted) == 20
        thetas = np.array([t for t, _ in result.accepted])
        assert thetas.shape == (20, 5)
        assert (thetas >= 0).all() and (thetas <= 1).all()
