import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import kmeans_deviation as kd
from kmeans_deviation import quantization as qz
from kmeans_deviation._rng import generator_for
from kmeans_deviation.errors import PreconditionError

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


class TestDist2:
    def test_point_at_center(self):
        assert kd.dist2(np.array([0.0]), np.array([[0.0]])) == 0.0

    def test_nearer_center_wins(self):
        assert kd.dist2(np.array([1.0, 0.0]), np.array([[0.0, 0.0], [3.0, 0.0]])) == 1.0

    def test_tie_value_well_defined(self):
        assert kd.dist2(np.array([2.0]), np.array([[1.0], [3.0]])) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError, match="dimension"):
            kd.dist2(np.array([1.0, 2.0]), np.array([[0.0]]))

    @given(seed=st.integers(0, 2**32 - 1))
    def test_triangle_bound_pointwise(self, seed):
        # d(x,Q)^2 <= 2 d(x,mu)^2 + 2 d(mu,Q)^2 for arbitrary x, mu, Q
        rng = np.random.Generator(np.random.Philox(seed))
        x = rng.normal(size=3) * 10
        mu = rng.normal(size=3) * 5
        Q = rng.normal(size=(4, 3)) * 8
        lhs = kd.dist2(x, Q)
        rhs = 2 * float(np.sum((x - mu) ** 2)) + 2 * kd.dist2(mu, Q)
        assert lhs <= rhs * (1 + 1e-12) + 1e-12


class TestEmpiricalError:
    def test_examples(self):
        assert kd.empirical_error(np.array([0.0, 2.0]), np.array([[1.0]])) == 1.0
        assert kd.empirical_error(np.array([0.0, 2.0]), np.array([[0.0], [2.0]])) == 0.0
        assert kd.empirical_error(np.array([0.0, 0.0, 1.0, 1.0]), np.array([[1.0]])) == 0.5

    @given(
        lam=st.sampled_from([1e-3, 1.0, 1e3]),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_scale_equivariance(self, lam, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        X = rng.normal(size=(50, 2)) * 3
        Q = rng.normal(size=(3, 2)) * 2
        base = kd.empirical_error(X, Q)
        scaled = kd.empirical_error(lam * X, lam * Q)
        assert scaled == pytest.approx(lam**2 * base, rel=1e-9)

    @given(seed=st.integers(0, 2**32 - 1), c=st.floats(-100, 100))
    def test_translation_equivariance(self, seed, c):
        rng = np.random.Generator(np.random.Philox(seed))
        X = rng.normal(size=(30, 2))
        Q = rng.normal(size=(2, 2))
        base = kd.empirical_error(X, Q)
        shifted = kd.empirical_error(X + c, Q + c)
        assert abs(shifted - base) <= 1e-12 * max(1.0, base) + 1e-10


class TestExpectedError:
    def test_normal_single_center(self):
        g = kd.gaussian(1)
        assert kd.expected_error(g, np.array([[0.0]])) == pytest.approx(1.0, rel=1e-14)
        assert kd.expected_error(g, np.array([[2.0]])) == pytest.approx(5.0, rel=1e-14)

    def test_normal_single_center_reference_cross_check(self):
        g = kd.gaussian(1)
        ref = kd.sample(g, 10**6, seed=31)
        e_ref = kd.expected_error(ref, np.array([[2.0]]), mode="reference")
        assert e_ref == pytest.approx(5.0, rel=0.01)

    def test_bernoulli_center_one(self):
        for p in (0.2, 0.5, 0.9):
            e = kd.expected_error(kd.bernoulli(p), np.array([[1.0]]))
            assert e == pytest.approx(1 - p, rel=1e-14)

    def test_bernoulli_two_centers_enumeration(self):
        e = kd.expected_error(kd.bernoulli(0.3), np.array([[0.1], [0.8]]))
        oracle = 0.7 * 0.1**2 + 0.3 * 0.2**2
        assert e == pytest.approx(oracle, rel=1e-14)

    @pytest.mark.parametrize(
        "spec",
        [
            kd.gaussian(1, scale=1.4, mean=0.3),
            kd.uniform_ball(2.5, dim=1, center=0.5),
            kd.pareto(5.0, scale=1.2),
            kd.student_t(5.0, scale=0.8),
            kd.gaussian_mixture([0.4, 0.6], [[-1.5], [2.0]], [0.7, 1.1]),
        ],
    )
    def test_one_dim_multi_center_vs_reference(self, spec):
        Q = np.array([[-0.8], [0.9], [2.2]])
        analytic = kd.expected_error(spec, Q, mode="analytic")
        ref = kd.sample(spec, 2 * 10**6, seed=404)
        reference = kd.expected_error(ref, Q, mode="reference")
        assert analytic == pytest.approx(reference, rel=0.02)

    def test_multidim_multicenter_needs_reference(self):
        with pytest.raises(PreconditionError, match="reference mode"):
            kd.expected_error(kd.gaussian(2), np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_empirical_family_exact(self):
        data = np.array([[0.0], [1.0], [4.0]])
        spec = kd.empirical(data)
        Q = np.array([[0.5], [4.0]])
        oracle = np.mean([0.25, 0.25, 0.0])
        assert kd.expected_error(spec, Q) == pytest.approx(oracle, rel=1e-14)

    def test_duplicate_centers_allowed(self):
        # k copies of the mean behave like the single mean
        g = kd.gaussian(1)
        e = kd.expected_error(g, np.zeros((3, 1)))
        assert e == pytest.approx(1.0, rel=1e-12)


class TestNormalizedLoss:
    def test_zero_at_center(self):
        assert kd.normalized_loss(np.array([1.0]), np.array([[1.0]]), 1.0, 1.0) == 0.0

    def test_unit_substitution(self):
        # d^2 = sigma2 and expQ = sigma2 gives exactly 1
        val = kd.normalized_loss(np.array([1.0]), np.array([[0.0]]), 1.0, 1.0)
        assert val == 1.0

    @given(seed=st.integers(0, 2**32 - 1))
    def test_envelope_domination_gaussian(self, seed):
        rng = np.random.Generator(np.random.Philox(seed))
        g = kd.gaussian(1)
        prof = kd.analytic_profile(g)
        Q = rng.normal(size=(3, 1)) * 4
        expQ = kd.expected_error(g, Q)
        x = rng.normal(size=(100, 1)) * 3
        f = kd.normalized_loss(x, Q, prof.sigma2, expQ)
        s = kd.envelope(x, prof.mu, prof.sigma2)
        assert np.all(f <= s * (1 + 1e-9) + 1e-9)


class TestLloyd:
    def test_separable_clusters(self):
        X = np.array([0.0, 0.0, 10.0, 10.0])
        res = kd.lloyd(X, 2, seed=0)
        assert sorted(res.centers.ravel()) == [0.0, 10.0]
        assert kd.empirical_error(X, res) == 0.0

    def test_single_center_is_mean(self):
        res = kd.lloyd(np.array([0.0, 1.0]), 1, seed=5)
        assert res.centers.ravel()[0] == 0.5

    def test_k_equals_m(self):
        X = np.array([[0.0], [1.0], [3.0], [7.0]])
        res = kd.lloyd(X, 4, seed=9)
        assert kd.empirical_error(X, res) == 0.0

    def test_insufficient_points(self):
        with pytest.raises(PreconditionError, match="insufficient points"):
            kd.lloyd(np.array([1.0, 2.0]), 3, seed=0)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_error_history_monotone(self, seed):
        X = kd.sample(kd.gaussian_mixture([0.5, 0.5], [[-3.0, 0.0], [3.0, 0.0]], [1.0, 1.0]), 200, seed=seed)
        _, history = kd.lloyd(X, 5, seed=seed, return_history=True)
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(history, history[1:]))

    def test_deterministic(self):
        X = kd.sample(kd.gaussian(2), 500, seed=123)
        a = kd.lloyd(X, 3, seed=77)
        b = kd.lloyd(X, 3, seed=77)
        assert np.array_equal(a.centers, b.centers)

    def test_kmeans_pp_deterministic_and_valid(self):
        X = kd.sample(kd.gaussian(2), 100, seed=3)
        c1 = qz.kmeans_pp(X, 4, generator_for(9))
        c2 = qz.kmeans_pp(X, 4, generator_for(9))
        assert np.array_equal(c1, c2)
        # every seed is a data point
        for c in c1:
            assert any(np.array_equal(c, row) for row in X)


class TestCenterBound:
    @given(seed=st.integers(0, 2**32 - 1))
    def test_center_distance_bound_gaussian(self, seed):
        # d(mu, Q)^2 <= 2 sigma2 + 2 E[d(x,Q)^2] with the analytic oracle
        rng = np.random.Generator(np.random.Philox(seed))
        g = kd.gaussian(1)
        prof = kd.analytic_profile(g)
        Q = rng.normal(size=(3, 1)) * 6
        expQ = kd.expected_error(g, Q)
        lhs = kd.dist2(prof.mu, Q)
        assert lhs <= 2 * prof.sigma2 + 2 * expQ + 1e-9


class TestCenterSet:
    def test_validation(self):
        with pytest.raises(PreconditionError):
            kd.CenterSet(np.zeros((0, 1)))
        cs = kd.CenterSet(np.array([[0.0, 1.0]]))
        assert cs.k == 1 and cs.dim == 2
