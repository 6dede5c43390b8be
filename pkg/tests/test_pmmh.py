import numpy as np
import pytest
from scipy import stats

from seqmc.errors import ContractViolationError
from seqmc.kalman import lg_posterior_reference
from seqmc.models import LGParams, UniformBoxPrior, lg_model, simulate
from seqmc.pmmh import (
    ProposalSpec,
    default_random_walk,
    mh_log_accept,
    pmmh_run,
)
from seqmc.rngstream import derive_rng


class TestProposalSpec:
    def test_random_walk_is_symmetric(self):
        prop = ProposalSpec(kind="random_walk", scale=np.array([0.2]))
        assert prop.logq(np.array([0.5]), np.array([0.1]))[0] == 0.0

    def test_independent_logq_matches_reference_density(self):
        mean = np.array([0.3, -0.2])
        cov = np.array([[0.5, 0.1], [0.1, 0.4]])
        prop = ProposalSpec(kind="independent", mean=mean, cov=cov)
        point = np.array([0.0, 0.1])
        expected = stats.multivariate_normal(mean, cov).logpdf(point)
        assert prop.logq(point, np.zeros(2))[0] == pytest.approx(expected)

    def test_independent_samples_have_target_moments(self):
        mean = np.array([1.0, -1.0])
        cov = np.array([[1.0, 0.6], [0.6, 1.0]])
        prop = ProposalSpec(kind="independent", mean=mean, cov=cov)
        draws = prop.sample(np.zeros(2), derive_rng(40, 0), n=20000)
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.05)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.05)

    def test_non_spd_covariance_rejected(self):
        with pytest.raises(ContractViolationError):
            ProposalSpec(kind="independent", mean=np.zeros(2),
                         cov=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ContractViolationError):
            ProposalSpec(kind="adaptive")


class TestAcceptanceRule:
    def test_better_candidate_always_accepted(self):
        assert mh_log_accept(-5.0, 0.0, 0.0, -10.0, 0.0, 0.0) == 0.0

    def test_ratio_for_worse_candidate(self):
        assert mh_log_accept(-12.0, 0.0, 0.0, -10.0, 0.0, 0.0) == pytest.approx(-2.0)

    def test_out_of_support_candidate_rejected(self):
        assert mh_log_accept(-5.0, -np.inf, 0.0, -10.0, 0.0, 0.0) == -np.inf

    def test_nonfinite_current_state_is_a_bug(self):
        with pytest.raises(ContractViolationError):
            mh_log_accept(-5.0, 0.0, 0.0, -np.inf, 0.0, 0.0)


@pytest.fixture(scope="module")
def lg_problem():
    params = LGParams(a=0.8)
    model = lg_model(params, free=("a",))
    _, y = simulate(lg_model(params), np.zeros(0), 25, derive_rng(41, 0))
    return params, model, y


class TestChain:
    def test_posterior_mean_matches_grid_reference(self, lg_problem):
        params, model, y = lg_problem
        ref = lg_posterior_reference(params, "a",
                                     UniformBoxPrior(np.zeros(1), np.ones(1)), y)
        proposal = ProposalSpec(kind="random_walk", scale=np.array([0.12]))
        result = pmmh_run(model, y, n_x=300, n_iters=3000, proposal=proposal,
                          init_theta=np.array([0.5]), rng=derive_rng(41, 1))
        mean = result.posterior_mean(burn_in=500)[0]
        assert mean == pytest.approx(ref["posterior_mean"], abs=0.05)
        assert 0.1 < result.acceptance_rate < 0.9

    def test_chain_stays_in_prior_support(self, lg_problem):
        _, model, y = lg_problem
        result = pmmh_run(model, y[:10], n_x=100, n_iters=300, proposal=None,
                          init_theta=np.array([0.5]), rng=derive_rng(41, 2))
        assert (result.thetas >= 0).all() and (result.thetas <= 1).all()

    def test_zero_scale_proposal_never_moves(self, lg_problem):
        _, model, y = lg_problem
        proposal = ProposalSpec(kind="random_walk", scale=np.array([0.0]))
        result = pmmh_run(model, y[:10], n_x=50, n_iters=100, proposal=proposal,
                          init_theta=np.array([0.5]), rng=derive_rng(41, 3))
        assert (result.thetas == 0.5).all()

    def test_filter_cost_accounting(self, lg_problem):
        # every evaluated proposal runs one fresh filter over all of y, and
        # out-of-support proposals run none; total transition draws must be
        # a multiple of the per-filter budget
        _, model, y = lg_problem
        n_x, T1 = 80, y.size
        result = pmmh_run(model, y, n_x=n_x, n_iters=200, proposal=None,
                          init_theta=np.array([0.5]), rng=derive_rng(41, 4))
        per_filter = n_x * T1
        assert result.f_draws % per_filter == 0
        n_filters = result.f_draws // per_filter
        assert 1 <= n_filters <= 200

    def test_out_of_support_init_rejected(self, lg_problem):
        _, model, y = lg_problem
        with pytest.raises(ContractViolationError):
            pmmh_run(model, y[:5], n_x=20, n_iters=10, proposal=None,
                     init_theta=np.array([1.5]), rng=derive_rng(41, 5))

    def test_kept_paths_have_trajectory_shape(self, lg_problem):
        _, model, y = lg_problem
        result = pmmh_run(model, y[:6], n_x=40, n_iters=20, proposal=None,
                          init_theta=np.array([0.5]), rng=derive_rng(41, 6),
                          keep_paths=True)
        assert len(result.paths) == 20
        assert all(p.shape == (6, 1) for p in result.paths)

    def test_default_proposal_scales_with_prior_width(self):
        prior = UniformBoxPrior(np.zeros(2), np.array([1.0, 10.0]))
        prop = default_random_walk(prior, 2)
        assert prop.scale[1] == pytest.approx(10 * prop.scale[0])
