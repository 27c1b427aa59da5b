import numpy as np
import pytest
from scipy import stats

from gbicost import targets
from gbicost.distances import DistanceConfig
from gbicost.rng import derive_rng
from gbicost.tasks import get_task


@pytest.fixture(scope="module")
def uniform1d_bits():
    task = get_task("uniform1d")
    rng = derive_rng(0, "targets-fixture")
    sims = targets.simulate_dataset(task, 10_000, rng)
    bounds = task.prior_predictive_bounds(100_000, rng)
    return task, sims, bounds


class TestBuildTargetSet:
    def test_paper_counts_10120(self, uniform1d_bits):
        task, sims, bounds = uniform1d_bits
        rng = derive_rng(1, "counts")
        noise = targets.NoiseConfig.from_bounds(bounds, n_augmented=100)
        obs = task.simulate_batch(task.prior_sample(20, rng), rng)
        tset = targets.build_target_set(sims, noise, obs, rng)
        assert len(tset) == 10_120
        assert tset.count("raw") == 10_000
        assert tset.count("augmented") == 100
        assert tset.count("observation") == 20

    def test_identity_construction(self, uniform1d_bits):
        _, sims, _ = uniform1d_bits
        rng = derive_rng(2, "identity")
        tset = targets.build_target_set(
            sims, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        assert np.array_equal(tset.xs, sims.xs)
        assert tset.count("raw") == len(sims)

    def test_augmented_noise_moments(self):
        # With constant simulations, augmented-row minus source is pure noise.
        const = targets.SimDataset(
            task_name="uniform1d",
            thetas=np.zeros((8000, 1)),
            xs=np.full((8000, 2), 1.25),
        )
        sigma = np.array([0.5, 2.0])
        rng = derive_rng(3, "noise-moment")
        noise = targets.NoiseConfig(n_augmented=5000, sigma=sigma)
        tset = targets.build_target_set(const, noise, None, rng)
        aug = tset.xs[tset.provenance == "augmented"] - 1.25
        std = aug.std(axis=0)
        assert np.all(np.abs(std - sigma) < 0.05 * sigma)
        assert np.all(np.abs(aug.mean(axis=0)) < 4 * sigma / np.sqrt(5000))

    def test_dim_mismatch(self, uniform1d_bits):
        _, sims, _ = uniform1d_bits
        rng = derive_rng(4, "mismatch")
        with pytest.raises(ValueError):
            targets.build_target_set(
                sims, targets.NoiseConfig(n_augmented=0, sigma=1.0),
                np.zeros((3, 2)), rng)

    def test_reproducible(self, uniform1d_bits):
        task, sims, bounds = uniform1d_bits
        noise = targets.NoiseConfig.from_bounds(bounds)
        obs = task.simulate_batch(task.prior_sample(5, derive_rng(5, "o")),
                                  derive_rng(5, "o2"))
        t1 = targets.build_target_set(sims, noise, obs, derive_rng(6, "t"))
        t2 = targets.build_target_set(sims, noise, obs, derive_rng(6, "t"))
        assert np.array_equal(t1.xs, t2.xs)
        assert np.array_equal(t1.provenance, t2.provenance)


class TestMisspecified:
    def test_outside_bounds_every_dimension(self):
        for name in ("uniform1d", "two_moons", "linear_gaussian"):
            task = get_task(name)
            rng = derive_rng(7, "mis", name)
            bounds = task.prior_predictive_bounds(100_000, rng)
            obs = targets.make_misspecified_observations(
                task, bounds, targets.MisspecConfig(n_observations=20), rng)
            outside = (obs.xs < bounds.low) | (obs.xs > bounds.high)
            assert outside.all(), f"{name}: some dimension inside the envelope"

    def test_well_specified_inside_bounds(self):
        task = get_task("uniform1d")
        rng = derive_rng(8, "well")
        bounds = task.prior_predictive_bounds(100_000, rng)
        obs = targets.well_specified_observations(task, 200, rng)
        inside = (obs.xs >= bounds.low) & (obs.xs <= bounds.high)
        assert inside.mean() > 0.95

    def test_mixture_displaced_component(self):
        task = get_task("gaussian_mixture")
        rng = derive_rng(9, "gm-mis")
        theta = np.array([[1.0, -1.0]])
        pts = np.concatenate(
            [task.simulate_misspecified_batch(theta, rng) for _ in range(2000)],
            axis=0).reshape(-1, 2)
        displaced = pts[np.linalg.norm(pts - np.array([12.5, -12.5]), axis=1) < 5]
        assert len(displaced) > 3000  # about half of 10000 points
        assert np.allclose(displaced.mean(axis=0), [12.5, -12.5], atol=0.05)

    def test_determinism(self):
        task = get_task("two_moons")
        bounds = task.prior_predictive_bounds(100_000, derive_rng(10, "b"))
        cfg = targets.MisspecConfig(n_observations=5)
        o1 = targets.make_misspecified_observations(task, bounds, cfg, derive_rng(11, "m"))
        o2 = targets.make_misspecified_observations(task, bounds, cfg, derive_rng(11, "m"))
        assert np.array_equal(o1.xs, o2.xs)
        assert np.array_equal(o1.thetas, o2.thetas)

    def test_requires_large_bounds_sample(self):
        task = get_task("uniform1d")
        bounds = task.prior_predictive_bounds(1000, derive_rng(12, "small"))
        with pytest.raises(ValueError, match="100000"):
            targets.make_misspecified_observations(
                task, bounds, targets.MisspecConfig(), derive_rng(13, "m"))

    def test_iteration_cap(self):
        task = get_task("uniform1d")
        bounds = task.prior_predictive_bounds(100_000, derive_rng(14, "b"))
        cfg = targets.MisspecConfig(n_observations=5, max_iterations=1)
        with pytest.raises(RuntimeError, match="iterations"):
            targets.make_misspecified_observations(task, bounds, cfg,
                                                   derive_rng(15, "m"))


class TestSampleTrainingPairs:
    def test_exhaustive_draw_covers_every_target(self, uniform1d_bits):
        task, _, _ = uniform1d_bits
        rng = derive_rng(16, "exhaustive")
        small = targets.simulate_dataset(task, 6, rng)
        tset = targets.build_target_set(
            small, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        _, x_t, _ = targets.sample_training_pairs(
            small, tset, n_target=len(tset), distance=DistanceConfig("mse"),
            rng=rng)
        for i in range(len(small)):
            block = x_t[i * len(tset): (i + 1) * len(tset)]
            assert np.array_equal(np.sort(block, axis=0), np.sort(tset.xs, axis=0))

    def test_self_target_label_zero(self, uniform1d_bits):
        _, sims, _ = uniform1d_bits
        rng = derive_rng(17, "self")
        tset = targets.build_target_set(
            sims, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        theta_rows, x_t, labels = targets.sample_training_pairs(
            sims, tset, n_target=len(tset), distance=DistanceConfig("mse"),
            rng=rng, indices=np.array([3]))
        self_rows = np.isclose(x_t[:, 0], sims.xs[3, 0])
        assert labels[self_rows].min() == 0.0

    def test_selection_uniformity_chi2(self, uniform1d_bits):
        task, _, _ = uniform1d_bits
        rng = derive_rng(18, "chi2")
        small = targets.simulate_dataset(task, 50, rng)
        tset = targets.build_target_set(
            small, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        counts = np.zeros(len(tset))
        pick = targets._draw_distinct(len(tset), 50_000, 2, rng)
        np.add.at(counts, pick.ravel(), 1)
        chi2 = stats.chisquare(counts)
        assert chi2.pvalue > 0.001

    def test_too_many_targets(self, uniform1d_bits):
        _, sims, _ = uniform1d_bits
        rng = derive_rng(19, "toomany")
        tset = targets.build_target_set(
            sims, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        with pytest.raises(ValueError):
            targets.sample_training_pairs(sims, tset, len(tset) + 1,
                                          DistanceConfig("mse"), rng)

    def test_labels_computed_on_the_fly(self, uniform1d_bits):
        _, sims, _ = uniform1d_bits
        rng = derive_rng(20, "labels")
        tset = targets.build_target_set(
            sims, targets.NoiseConfig(n_augmented=0, sigma=1.0), None, rng)
        theta_rows, x_t, labels = targets.sample_training_pairs(
            sims, tset, 2, DistanceConfig("mse"), rng,
            indices=np.arange(100))
        x_rep = np.repeat(sims.xs[:100], 2, axis=0)
        assert np.allclose(labels, np.mean((x_rep - x_t) ** 2, axis=1))
        assert np.array_equal(theta_rows, np.repeat(sims.thetas[:100], 2, axis=0))
