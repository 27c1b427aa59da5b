import numpy as np
import pytest

from gbicost import distances as dist
from gbicost.rng import derive_rng
from gbicost.tasks import get_task


def naive_mmd2(x, y, gamma):
    """Brute-force double-sum oracle for the biased MMD^2 estimator."""
    def k(a, b):
        return np.exp(-np.sum((a - b) ** 2) / (2 * gamma**2))

    def mean_k(s, t):
        return np.mean([k(a, b) for a in s for b in t])

    return mean_k(x, x) + mean_k(y, y) - 2 * mean_k(x, y)


def naive_energy(x, y, p):
    def mean_d(s, t):
        return np.mean([np.linalg.norm(a - b) ** p for a in s for b in t])

    return 2 * mean_d(x, y) - mean_d(x, x) - mean_d(y, y)


class TestMse:
    def test_zero_on_identical(self):
        x = np.array([1.0, -2.0, 3.0])
        assert dist.mse_distance(x, x) == 0.0

    def test_direct_arithmetic(self):
        assert dist.mse_distance(np.array([0.0, 0.0]), np.array([2.0, 0.0])) == 2.0

    def test_symmetry(self):
        rng = derive_rng(0, "mse-sym")
        for _ in range(20):
            x, y = rng.normal(size=(2, 4))
            assert dist.mse_distance(x, y) == dist.mse_distance(y, x)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            dist.mse_distance(np.zeros(2), np.zeros(3))


class TestMmd2:
    def test_identical_sets_exactly_zero(self):
        rng = derive_rng(1, "mmd-id")
        s = rng.normal(size=(5, 3))
        assert dist.mmd2_biased(s, s.copy(), bandwidth=1.3) == 0.0

    def test_singleton_formula(self):
        a = np.array([0.5, -1.0])
        b = np.array([2.0, 1.0])
        gamma = 0.7
        expected = 2.0 - 2.0 * np.exp(-np.sum((a - b) ** 2) / (2 * gamma**2))
        got = dist.mmd2_biased(a[None, :], b[None, :], gamma)
        assert got == pytest.approx(expected, abs=1e-14)

    def test_matches_naive_double_sum(self):
        rng = derive_rng(2, "mmd-naive")
        for _ in range(25):
            x = rng.normal(size=(5, 2))
            y = rng.normal(size=(5, 2))
            gamma = float(rng.uniform(0.3, 3.0))
            assert dist.mmd2_biased(x, y, gamma) == pytest.approx(
                naive_mmd2(x, y, gamma), abs=1e-12)

    def test_symmetric_and_nonnegative(self):
        rng = derive_rng(3, "mmd-sym")
        for _ in range(20):
            x = rng.normal(size=(4, 3))
            y = rng.normal(size=(6, 3))
            d1 = dist.mmd2_biased(x, y, 1.0)
            d2 = dist.mmd2_biased(y, x, 1.0)
            assert d1 == pytest.approx(d2, abs=1e-14)
            assert d1 >= 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            dist.mmd2_biased(np.zeros((0, 2)), np.zeros((3, 2)), 1.0)
        with pytest.raises(ValueError):
            dist.mmd2_biased(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)


class TestEnergy:
    def test_identical_sets_zero(self):
        rng = derive_rng(4, "en-id")
        s = rng.normal(size=(5, 2))
        assert dist.energy_distance(s, s.copy(), 1.0) == 0.0

    def test_singleton_p1(self):
        a = np.array([1.0, 2.0])
        b = np.array([4.0, 6.0])
        assert dist.energy_distance(a[None, :], b[None, :], 1.0) == pytest.approx(
            2 * np.linalg.norm(a - b), abs=1e-12)

    def test_nonnegative_many_random_pairs(self):
        rng = derive_rng(5, "en-pos")
        for _ in range(1000):
            x = rng.normal(size=(4, 2))
            y = rng.normal(size=(4, 2)) + rng.normal()
            assert dist.energy_distance(x, y, 1.0) >= 0.0

    def test_matches_naive(self):
        rng = derive_rng(6, "en-naive")
        for _ in range(25):
            x = rng.normal(size=(5, 3))
            y = rng.normal(size=(5, 3))
            p = float(rng.uniform(0.2, 1.8))
            assert dist.energy_distance(x, y, p) == pytest.approx(
                naive_energy(x, y, p), abs=1e-12)

    def test_exponent_bounds(self):
        x = np.zeros((2, 2))
        for bad in (0.0, 2.0, -1.0):
            with pytest.raises(ValueError):
                dist.energy_distance(x, x, bad)

    def test_singleton_p_to_2_approaches_scaled_mse(self):
        # energy(a, b; p) -> 2 |a-b|^2 = 2 D mse(a, b) as p -> 2
        a = np.array([0.3, -0.7, 1.2])
        b = np.array([1.1, 0.4, -0.2])
        en = dist.energy_distance(a[None, :], b[None, :], 2.0 - 1e-9)
        assert en / (2 * a.size) == pytest.approx(dist.mse_distance(a, b), rel=1e-6)


class TestMedianHeuristic:
    def test_two_points(self):
        pts = np.array([[0.0, 0.0], [2.0, 0.0]])
        assert dist.median_heuristic_bandwidth(pts) == 2.0

    def test_scale_equivariance(self):
        rng = derive_rng(7, "mh-scale")
        pts = rng.normal(size=(40, 3))
        g1 = dist.median_heuristic_bandwidth(pts)
        g2 = dist.median_heuristic_bandwidth(3.5 * pts)
        assert g2 == pytest.approx(3.5 * g1, rel=1e-12)

    def test_deterministic_subsample(self):
        rng = derive_rng(8, "mh-det")
        pts = rng.normal(size=(3000, 2))
        g1 = dist.median_heuristic_bandwidth(pts, rng=derive_rng(9, "sub"))
        g2 = dist.median_heuristic_bandwidth(pts, rng=derive_rng(9, "sub"))
        assert g1 == g2

    def test_identical_points_error(self):
        with pytest.raises(ValueError):
            dist.median_heuristic_bandwidth(np.ones((10, 2)))


class TestBatchVariants:
    def test_batch_matches_scalar(self):
        rng = derive_rng(10, "batch")
        xs = rng.normal(size=(8, 5, 2))
        ys = rng.normal(size=(8, 5, 2))
        got = dist.mmd2_batch(xs, ys, 1.1)
        for i in range(8):
            assert got[i] == pytest.approx(dist.mmd2_biased(xs[i], ys[i], 1.1), abs=1e-12)
        gote = dist.energy_batch(xs, ys, 1.4)
        for i in range(8):
            assert gote[i] == pytest.approx(dist.energy_distance(xs[i], ys[i], 1.4), abs=1e-12)
        vx = rng.normal(size=(6, 4))
        vy = rng.normal(size=(6, 4))
        gotm = dist.mse_batch(vx, vy)
        for i in range(6):
            assert gotm[i] == pytest.approx(dist.mse_distance(vx[i], vy[i]), abs=1e-14)


class TestExpectationIdentity:
    def test_mmd2_mc_mean_converges_to_closed_form(self):
        # For a fixed parameter of the mixture task, the Monte-Carlo mean of
        # the biased MMD^2 over N fresh simulated sets converges to the
        # closed-form expectation at the 1/sqrt(N) rate.
        task = get_task("gaussian_mixture")
        rng = derive_rng(11, "exp-id")
        theta = np.array([1.5, -2.0])
        y = task.simulate(np.array([1.0, -2.5]), rng)
        closed = task.true_cost(theta, y)
        gamma = task.default_distance.bandwidth

        errors = {}
        for n in (100, 10_000):
            sims = task.simulate_batch(np.tile(theta, (n, 1)), rng)
            vals = dist.mmd2_batch(sims, np.broadcast_to(y, sims.shape).copy(), gamma)
            se = vals.std() / np.sqrt(n)
            errors[n] = (abs(float(vals.mean()) - closed), se)
        for n, (err, se) in errors.items():
            assert err < 5 * se, f"N={n}: error {err} not within 5 standard errors {se}"
        # the error scale itself shrinks ~10x from N=100 to N=10000
        assert errors[10_000][1] < errors[100][1] / 5
