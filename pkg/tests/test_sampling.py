import math

import numpy as np
import pytest
from scipy import stats

from gbicost import metrics, sampling, tasks
from gbicost.distances import DistanceConfig
from gbicost.rng import derive_rng


class TestPotential:
    def test_beta_zero_equals_prior(self):
        task = tasks.get_task("uniform1d")
        pot = sampling.Potential.from_oracle(task, 0.0, np.array([0.2]))
        rng = derive_rng(0, "pot0")
        for theta in task.prior_sample(20, rng):
            assert pot(theta) == pytest.approx(task.prior_log_prob(theta))

    def test_outside_support_is_minus_inf(self):
        task = tasks.get_task("uniform1d")
        pot = sampling.Potential.from_oracle(task, 5.0, np.array([0.2]))
        assert pot(np.array([2.0])) == -math.inf

    def test_linearity_in_beta(self):
        task = tasks.get_task("uniform1d")
        x_o = np.array([0.3])
        rng = derive_rng(1, "potlin")
        b = 3.0
        pot1 = sampling.Potential.from_oracle(task, b, x_o)
        pot2 = sampling.Potential.from_oracle(task, 2 * b, x_o)
        for theta in task.prior_sample(10, rng):
            cost = task.true_cost(theta, x_o)
            assert pot2(theta) - pot1(theta) == pytest.approx(-b * cost, rel=1e-12)

    def test_nonfinite_cost_raises(self):
        pot = sampling.Potential(lambda t, x: math.nan, lambda t: 0.0, 1.0,
                                 np.array([0.0]))
        with pytest.raises(FloatingPointError):
            pot(np.array([0.0]))


class TestSliceSampler:
    def test_standard_normal_moments(self):
        cfg = sampling.SliceConfig(n_chains=100, n_samples=10_000, burn_in=50,
                                   step_width=1.0)
        res = sampling.slice_sample(
            lambda th: -0.5 * th[0] ** 2, cfg, derive_rng(2, "slice-n"),
            init_sampler=lambda n, r: r.normal(size=(n, 1)))
        s = res.samples[:, 0]
        assert len(res) == 10_000
        assert abs(s.mean()) < 0.05
        assert abs(s.var() - 1.0) < 0.1

    def test_uniform_ks(self):
        def logp(th):
            return 0.0 if -1.0 <= th[0] <= 1.0 else -math.inf

        cfg = sampling.SliceConfig(n_chains=100, n_samples=10_000, burn_in=50,
                                   step_width=0.6)
        res = sampling.slice_sample(
            logp, cfg, derive_rng(3, "slice-u"),
            init_sampler=lambda n, r: r.uniform(-1, 1, size=(n, 1)))
        ks = stats.kstest(res.samples[:, 0],
                          stats.uniform(loc=-1, scale=2).cdf).statistic
        assert ks < 0.02

    def test_correlated_gaussian(self):
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        prec = np.linalg.inv(cov)

        def logp(th):
            return -0.5 * float(th @ prec @ th)

        cfg = sampling.SliceConfig(n_chains=100, n_samples=10_000, burn_in=100,
                                   step_width=1.0)
        res = sampling.slice_sample(
            logp, cfg, derive_rng(4, "slice-c"),
            init_sampler=lambda n, r: r.normal(size=(n, 2)))
        s = res.samples
        assert np.all(np.abs(s.mean(axis=0)) < 0.05)
        assert np.all(np.abs(s.var(axis=0) - 1.0) < 0.1)
        corr = np.corrcoef(s.T)[0, 1]
        assert abs(corr - 0.8) < 0.05

    def test_samples_respect_prior_support(self):
        task = tasks.get_task("uniform1d")
        pot = sampling.Potential.from_oracle(task, 10.0, np.array([0.2]))
        cfg = sampling.SliceConfig(n_chains=20, n_samples=500, burn_in=50,
                                   step_width=task.prior_std())
        res = sampling.slice_sample(pot, cfg, derive_rng(5, "slice-s"))
        lps = task.prior_log_prob_batch(res.samples)
        assert np.all(np.isfinite(lps))

    def test_deterministic_given_seed(self):
        cfg = sampling.SliceConfig(n_chains=10, n_samples=200, burn_in=20,
                                   step_width=1.0)
        runs = [
            sampling.slice_sample(lambda th: -0.5 * th[0] ** 2, cfg,
                                  derive_rng(6, "slice-det"),
                                  init_sampler=lambda n, r: r.normal(size=(n, 1)))
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].samples, runs[1].samples)

    def test_requires_initializer(self):
        cfg = sampling.SliceConfig(step_width=1.0)
        with pytest.raises(ValueError, match="init"):
            sampling.slice_sample(lambda th: 0.0, cfg, derive_rng(7, "x"))


class TestRejectionGt:
    def test_beta_zero_accepts_everything(self):
        task = tasks.get_task("uniform1d")
        res = sampling.rejection_sample_gt(
            task, 0.0, np.array([0.2]), 1000, derive_rng(8, "rej0"),
            chunk_size=1000)
        assert res.diagnostics["acceptance_rate"] == 1.0
        assert len(res) == 1000
        # output is prior distributed: KS against the uniform prior CDF
        ks = stats.kstest(res.samples[:, 0],
                          stats.uniform(loc=-1.5, scale=3).cdf).statistic
        assert ks < 0.05

    def test_histogram_matches_grid_density(self):
        # chi-square test of rejection samples against the quadrature-
        # normalized density exp(-beta cost) * prior over 50 bins
        task = tasks.get_task("uniform1d")
        beta = 20.0
        x_o = np.array([0.4])
        res = sampling.rejection_sample_gt(task, beta, x_o, 20_000,
                                           derive_rng(9, "rej-hist"))
        edges = np.linspace(-1.5, 1.5, 51)
        # in-bin quadrature of exp(-beta cost) on a 100x finer grid
        fine = np.linspace(-1.5, 1.5, 5001)[:-1] + 3 / 5000 / 2
        dens = np.exp(-beta * task.true_cost_batch(fine[:, None], x_o))
        probs = np.add.reduceat(dens, np.arange(0, 5000, 100))
        probs /= probs.sum()
        counts, _ = np.histogram(res.samples[:, 0], bins=edges)
        expected = probs * counts.sum()
        mask = expected > 5
        chi2 = float(np.sum((counts[mask] - expected[mask]) ** 2 / expected[mask]))
        dof = int(mask.sum()) - 1
        assert chi2 < stats.chi2.ppf(0.999, dof)

    def test_acceptance_floor_error(self):
        task = tasks.get_task("uniform1d")
        with pytest.raises(RuntimeError, match="acceptance"):
            sampling.rejection_sample_gt(
                task, 5000.0, np.array([5.0]), 100_000,
                derive_rng(10, "rej-floor"), chunk_size=1000,
                max_proposals=5000)

    def test_gt_consistency_rejection_vs_slice(self):
        # the two ground-truth routes target the same density
        task = tasks.get_task("uniform1d")
        beta = 20.0
        x_o = np.array([0.1])
        rej = sampling.rejection_sample_gt(task, beta, x_o, 2000,
                                           derive_rng(11, "gtc-r"))
        pot = sampling.Potential.from_oracle(task, beta, x_o)
        cfg = sampling.SliceConfig(n_chains=100, n_samples=2000, burn_in=100,
                                   step_width=task.prior_std())
        sli = sampling.slice_sample(pot, cfg, derive_rng(12, "gtc-s"))
        acc = metrics.c2st(rej.samples, sli.samples,
                           metrics.C2stConfig(seed=0), derive_rng(13, "gtc-c"))
        assert acc <= 0.55

    def test_mode_centered_proposal_prior_fallback(self):
        task = tasks.get_task("gaussian_mixture")
        rng = derive_rng(14, "modeprop")
        x_o = task.simulate(np.array([3.0, -4.0]), rng)
        # broad posterior: prior proposal is fine
        assert sampling.mode_centered_proposal(task, 2.0, x_o) is None
        # concentrated posterior: Gaussian proposal near the generating theta
        prop = sampling.mode_centered_proposal(task, 5000.0, x_o)
        assert isinstance(prop, sampling.GaussianProposal)
        assert np.linalg.norm(prop.mean - np.array([3.0, -4.0])) < 1.5


class TestLinearGaussianGt:
    def test_prior_limit(self):
        post = sampling.linear_gaussian_gt(0.0, np.ones(10))
        assert np.allclose(post.mean, 0.0)
        assert post.var == pytest.approx(0.1, abs=1e-12)

    def test_large_beta_limit(self):
        x_o = np.linspace(-1, 1, 10)
        post = sampling.linear_gaussian_gt(1e9, x_o)
        assert np.allclose(post.mean, x_o, atol=1e-6)

    def test_formula(self):
        x_o = np.arange(10.0) / 10
        beta = 7.0
        post = sampling.linear_gaussian_gt(beta, x_o)
        var = 1.0 / (1.0 / 0.1 + 2 * beta / 10)
        assert post.var == pytest.approx(var, abs=1e-15)
        assert np.allclose(post.mean, var * (2 * beta / 10) * x_o)

    def test_tempering_monotonicity(self):
        # posterior variance strictly decreases in beta (exact formula)
        x_o = np.zeros(10)
        variances = [sampling.linear_gaussian_gt(b, x_o).var
                     for b in [0.5, 1, 2, 5, 10, 50, 100, 1000]]
        assert all(a > b for a, b in zip(variances, variances[1:]))

    def test_sampler_moments(self):
        x_o = np.full(10, 0.3)
        post = sampling.linear_gaussian_gt(10.0, x_o)
        s = post.sample(200_000, derive_rng(15, "lg-s"))
        assert np.allclose(s.mean(axis=0), post.mean, atol=4 * math.sqrt(post.var / 200_000))
        assert np.allclose(s.var(axis=0), post.var, rtol=0.05)


@pytest.fixture(scope="module")
def reference():
    from gbicost import targets

    task = tasks.get_task("uniform1d")
    return task, targets.simulate_dataset(task, 10_000, derive_rng(16, "abc-ref"))


class TestAbc:
    def test_beta_zero_accepts_all(self, reference):
        task, sims = reference
        res = sampling.abc_kernel_sample(sims, np.array([0.2]),
                                         DistanceConfig("mse"), 0.0,
                                         derive_rng(17, "abc0"))
        assert len(res) == len(sims)
        assert res.diagnostics["final_beta"] == 0.0

    def test_self_target_accepted_with_probability_one(self, reference):
        task, sims = reference
        x_o = sims.xs[123].copy()
        res = sampling.abc_kernel_sample(sims, x_o, DistanceConfig("mse"),
                                         1e12, derive_rng(18, "abc-self"),
                                         min_accept=1)
        assert any(np.array_equal(row, sims.thetas[123]) for row in res.samples)

    def test_min_accept_satisfied(self, reference):
        task, sims = reference
        res = sampling.abc_kernel_sample(sims, np.array([0.2]),
                                         DistanceConfig("mse"), 1e6,
                                         derive_rng(19, "abc-min"))
        assert len(res) >= 50
        assert res.diagnostics["final_beta"] < 1e6
        assert res.diagnostics["n_halvings"] > 0

    def test_min_accept_too_large(self, reference):
        task, sims = reference
        with pytest.raises(ValueError):
            sampling.abc_kernel_sample(sims, np.array([0.2]),
                                       DistanceConfig("mse"), 1.0,
                                       derive_rng(20, "abc-err"),
                                       min_accept=len(sims) + 1)

    def test_deterministic(self, reference):
        task, sims = reference
        runs = [
            sampling.abc_kernel_sample(sims, np.array([0.2]),
                                       DistanceConfig("mse"), 100.0,
                                       derive_rng(21, "abc-det"))
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].samples, runs[1].samples)
