import math

import mpmath as mp
import numpy as np
import pytest
from scipy.optimize import brentq

import kmeans_deviation as kd
from kmeans_deviation import bounds as B
from kmeans_deviation.errors import AssumptionUnavailableError, PreconditionError

mp.mp.dps = 50


def profile(sigma2=1.0, m4hat=None, mphat=None, subgauss=None, diameter=None, d=1):
    return kd.MomentProfile(
        mu=np.zeros(d), sigma2=sigma2, m4hat=m4hat, mphat=mphat,
        subgauss=subgauss, diameter=diameter,
    )


# ---------------------------------------------------------------------------
# Extended-precision oracles (evaluate the same real formulas at 50 digits)
# ---------------------------------------------------------------------------

def mp_log_terms(k, d, delta):
    return 3 + 30 * k * (d + 4) * mp.log(6 * k) + mp.log(1 / mp.mpf(delta))


def mp_kurtosis(eps, delta, k, d, m4):
    val = 12800 * (8 + mp.mpf(m4)) / (mp.mpf(eps) ** 2 * mp.mpf(delta)) * mp_log_terms(k, d, delta)
    return int(mp.ceil(val))


def mp_moment(eps, delta, k, d, p, mp_p):
    m1 = p * (4 + mp.mpf(mp_p) ** (mp.mpf(4) / p)) * mp_log_terms(k, d, delta)
    val = max(3200 * m1 / mp.mpf(eps) ** 2, (8 / mp.mpf(delta)) ** (mp.mpf(8) / p))
    return int(mp.ceil(val))


def mp_subgaussian(eps, delta, k, d, a, b):
    p = 4 * mp.ceil(mp.mpf(5) / 4 + mp.mpf(3) / 4 * mp.log(1 / mp.mpf(delta)))
    m1 = p * (4 + mp.mpf(a) * mp.mpf(b) * p**2 / 4) * mp_log_terms(k, d, delta)
    return int(mp.ceil(3200 * m1 / mp.mpf(eps) ** 2))


def mp_bounded(eps, delta, k, d, ratio):
    val = 12800 * (8 + mp.mpf(ratio)) / mp.mpf(eps) ** 2 * mp_log_terms(k, d, delta)
    return int(mp.ceil(val))


def mp_framework(t, pdim, eps, delta):
    val = 200 * mp.mpf(t) / mp.mpf(eps) ** 2 * (3 + 5 * mp.mpf(pdim) + mp.log(1 / mp.mpf(delta)))
    return int(mp.ceil(val))


# ---------------------------------------------------------------------------
# pdim and framework
# ---------------------------------------------------------------------------

class TestPdimBound:
    def test_k1_d1(self):
        assert B.pdim_bound(1, 1) == pytest.approx(30 * math.log(6), rel=1e-14)
        assert B.pdim_bound(1, 1) == pytest.approx(53.753, abs=5e-4)

    def test_k2_d3(self):
        assert B.pdim_bound(2, 3) == pytest.approx(84 * math.log(12), rel=1e-14)
        assert B.pdim_bound(2, 3) == pytest.approx(208.73, abs=5e-3)

    def test_domain(self):
        with pytest.raises(PreconditionError):
            B.pdim_bound(1, 0)
        with pytest.raises(PreconditionError):
            B.pdim_bound(0, 1)


class TestFramework:
    def test_worked_example(self):
        res = B.sample_size_framework(t=1.0, pdim=10.0, epsilon=0.1, delta=0.01)
        assert res.m_required == 1_152_104
        assert res.m_required == mp_framework(1.0, 10.0, 0.1, 0.01)

    def test_limiting_floor(self):
        res = B.sample_size_framework(t=1.0, pdim=0.0, epsilon=1 - 1e-9, delta=1 - 1e-9)
        assert res.m_real == pytest.approx(600.0, abs=1e-3)

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            B.sample_size_framework(t=0.0, pdim=1.0, epsilon=0.5, delta=0.5)
        with pytest.raises(PreconditionError):
            B.sample_size_framework(t=1.0, pdim=1.0, epsilon=1.0, delta=0.5)


# ---------------------------------------------------------------------------
# Tiered calculators
# ---------------------------------------------------------------------------

class TestKurtosisTier:
    def test_worked_example_exact_integer(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="kurtosis",
                          profile=profile(m4hat=1.0))
        res = B.sample_size_kurtosis(q)
        assert res.m_required == mp_kurtosis(0.5, 0.5, 1, 1, 1.0) == 251_096_434
        assert res.m_real == pytest.approx(921600 * (3 + 150 * math.log(6) + math.log(2)), rel=1e-13)

    def test_t_threshold_rule(self):
        q = kd.BoundQuery(epsilon=0.1, delta=0.1, k=1, d=1, tier="kurtosis",
                          profile=profile(m4hat=3.0))
        res = B.sample_size_kurtosis(q)
        assert res.intermediates["t_threshold"] == pytest.approx(7040.0, rel=1e-14)

    def test_linear_in_kurtosis_factor(self):
        qs = [kd.BoundQuery(epsilon=0.3, delta=0.2, k=2, d=3, tier="kurtosis",
                            profile=profile(m4hat=m4)) for m4 in (8.0, 16.0)]
        r8, r16 = (B.sample_size_kurtosis(q).m_real for q in qs)
        assert r16 / r8 == pytest.approx(1.5, rel=1e-12)

    def test_missing_kurtosis(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="kurtosis", profile=profile())
        with pytest.raises(AssumptionUnavailableError):
            B.sample_size_kurtosis(q)


class TestMomentTier:
    def test_worked_example(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="moment", p=8,
                          profile=profile(mphat={8: 1.0}))
        res = B.sample_size_moment(q)
        log_terms = 3 + 150 * math.log(6) + math.log(2)
        assert res.intermediates["m1"] == pytest.approx(40 * log_terms, rel=1e-13)
        assert res.intermediates["m1"] == pytest.approx(10898.28, abs=0.01)
        assert res.intermediates["second_branch"] == pytest.approx(16.0, rel=1e-14)
        assert res.m_required == mp_moment(0.5, 0.5, 1, 1, 8, 1.0)

    def test_scaled_moment_intermediate(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="moment", p=8,
                          profile=profile(mphat={8: 16.0}))
        res = B.sample_size_moment(q)
        assert res.intermediates["mphat_p_scaled"] == pytest.approx(4.0, rel=1e-14)
        assert res.intermediates["t_threshold"] == pytest.approx(8 * (64 + 16 * 4.0), rel=1e-14)

    @pytest.mark.parametrize("p", [4, 10, 7, 0])
    def test_unsupported_p(self, p):
        with pytest.raises(PreconditionError, match="unsupported p"):
            kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="moment", p=p,
                          profile=profile(mphat={p: 1.0} if p >= 4 else None))

    def test_second_branch_dominates_at_tiny_delta_large_p(self):
        # huge 1/delta with p=8 makes (8/delta)^(8/p) the binding branch
        q = kd.BoundQuery(epsilon=0.9, delta=1e-6, k=1, d=1, tier="moment", p=8,
                          profile=profile(mphat={8: 1.0}))
        res = B.sample_size_moment(q)
        assert res.intermediates["second_branch"] == pytest.approx((8 / 1e-6), rel=1e-12)
        assert res.m_required == mp_moment(0.9, 1e-6, 1, 1, 8, 1.0)


class TestSubgaussianTier:
    def test_p_star_rule(self):
        assert B.choose_p_star(0.99) == 8
        assert B.choose_p_star(0.01) == 20

    def test_p_star_proof_cap(self):
        for delta in (0.9, 0.5, 0.1, 0.01, 1e-4):
            assert B.choose_p_star(delta) <= 9 + 3 * math.log(1 / delta)

    def test_normal_certificate_factor(self):
        # (a=2, b=1) at p*=8: the moment factor 4 + a b p^2/4 evaluates to 36
        q = kd.BoundQuery(epsilon=0.5, delta=0.99, k=1, d=1, tier="subgaussian",
                          profile=profile(subgauss=(2.0, 1.0)))
        res = B.sample_size_subgaussian(q)
        assert res.intermediates["p_star"] == 8.0
        factor = res.intermediates["m1"] / (8 * res.intermediates["log_terms"])
        assert factor == pytest.approx(36.0, rel=1e-12)
        assert res.m_required == mp_subgaussian(0.5, 0.99, 1, 1, 2.0, 1.0)

    def test_invalid_certificate(self):
        with pytest.raises(PreconditionError, match="subgaussian certificate"):
            profile(subgauss=(1.0, 1.0))
        with pytest.raises(PreconditionError, match="subgaussian certificate"):
            profile(subgauss=(2.0, 0.0))

    def test_missing_certificate(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="subgaussian",
                          profile=profile())
        with pytest.raises(AssumptionUnavailableError):
            B.sample_size_subgaussian(q)


class TestBoundedTier:
    def test_uniform_interval_threshold(self):
        # uniform on an interval of length R: sigma2 = R^2/12, so R^4/sigma^4 = 144
        prof = kd.analytic_profile(kd.uniform_ball(1.0, dim=1))
        assert prof.diameter**4 / prof.sigma2**2 == pytest.approx(144.0, rel=1e-12)
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="bounded-support", profile=prof)
        res = B.sample_size_bounded(q)
        assert res.intermediates["t_threshold"] == pytest.approx(128 + 64 * 144, rel=1e-12)
        assert res.intermediates["t_threshold"] == pytest.approx(9344.0)
        assert res.m_required == mp_bounded(0.5, 0.5, 1, 1, 144.0)
        expected = 12800 * 152 / 0.25 * (3 + 150 * math.log(6) + math.log(2))
        assert res.m_real == pytest.approx(expected, rel=1e-12)

    def test_no_delta_in_prefactor(self):
        base = profile(m4hat=None, diameter=2.0, sigma2=1.0)
        r1 = B.sample_size_bounded(
            kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="bounded-support", profile=base)
        )
        r2 = B.sample_size_bounded(
            kd.BoundQuery(epsilon=0.5, delta=0.25, k=1, d=1, tier="bounded-support", profile=base)
        )
        # halving delta only moves the additive log term, not the prefactor
        ratio = r2.m_real / r1.m_real
        lt1 = 3 + 150 * math.log(6) + math.log(2)
        assert ratio == pytest.approx((lt1 + math.log(2)) / lt1, rel=1e-12)

    def test_missing_diameter(self):
        q = kd.BoundQuery(epsilon=0.5, delta=0.5, k=1, d=1, tier="bounded-support",
                          profile=profile(m4hat=3.0))
        with pytest.raises(AssumptionUnavailableError):
            B.sample_size_bounded(q)


# ---------------------------------------------------------------------------
# Cross-cutting properties
# ---------------------------------------------------------------------------

class TestFrameworkReduction:
    def test_specialized_equal_framework_composition(self):
        rng = np.random.Generator(np.random.Philox(1234))
        for _ in range(100):
            eps = float(rng.uniform(0.01, 0.99))
            delta = float(rng.uniform(0.01, 0.99))
            k = int(rng.integers(1, 50))
            d = int(rng.integers(1, 20))
            pdim = B.pdim_bound(k, d)

            m4 = float(rng.uniform(1.0, 1e6))
            rk = B.sample_size_kurtosis(
                kd.BoundQuery(epsilon=eps, delta=delta, k=k, d=d, tier="kurtosis",
                              profile=profile(m4hat=m4)))
            fk = B.sample_size_framework(4 * (128 + 16 * m4) / delta, pdim, eps, delta)
            assert rk.m_required == fk.m_required and rk.m_real == fk.m_real

            p = int(rng.choice([8, 12, 16]))
            mp_p = float(rng.uniform(1.0, 1e8))
            rm = B.sample_size_moment(
                kd.BoundQuery(epsilon=eps, delta=delta, k=k, d=d, tier="moment", p=p,
                              profile=profile(mphat={p: mp_p})))
            fm = B.sample_size_framework(p * (64 + 16 * mp_p ** (4.0 / p)), pdim, eps, delta)
            assert rm.m_real == max(fm.m_real, (8 / delta) ** (8 / p))

            a = float(rng.uniform(1.01, 10.0))
            b = float(rng.uniform(0.1, 10.0))
            rs = B.sample_size_subgaussian(
                kd.BoundQuery(epsilon=eps, delta=delta, k=k, d=d, tier="subgaussian",
                              profile=profile(subgauss=(a, b))))
            ps = B.choose_p_star(delta)
            fs = B.sample_size_framework(ps * (64 + 4 * a * b * ps**2), pdim, eps, delta)
            assert rs.m_required == fs.m_required and rs.m_real == fs.m_real

            R = float(rng.uniform(1.0, 30.0))  # with sigma2 = 1
            rb = B.sample_size_bounded(
                kd.BoundQuery(epsilon=eps, delta=delta, k=k, d=d, tier="bounded-support",
                              profile=profile(diameter=R)))
            ratio = rb.intermediates["r4_over_sigma4"]
            fb = B.sample_size_framework(512 + 64 * ratio, pdim, eps, delta)
            assert rb.m_required == fb.m_required and rb.m_real == fb.m_real
            # the headline constant is looser than the tight envelope cap
            fb_tight = B.sample_size_framework(rb.intermediates["t_threshold"], pdim, eps, delta)
            assert rb.m_real >= fb_tight.m_real

    def test_hoelder_consistency_of_thresholds(self):
        # substituting the 8th-moment surrogate can only raise the kurtosis t
        for spec in (kd.gaussian(1), kd.bernoulli(0.3), kd.uniform_ball(1.0, dim=2)):
            prof = kd.analytic_profile(spec)
            t_m4 = 4 * (128 + 16 * prof.m4hat) / 0.2
            t_sub = 4 * (128 + 16 * prof.mphat[8] ** 0.5) / 0.2
            assert t_m4 <= t_sub * (1 + 1e-12)


class TestMonotonicity:
    def test_m_real_monotone(self):
        base = dict(epsilon=0.3, delta=0.2, k=2, d=3)

        def m_of(**over):
            args = dict(base, **{k: v for k, v in over.items() if k in base})
            m4 = over.get("m4", 5.0)
            q = kd.BoundQuery(args["epsilon"], args["delta"], args["k"], args["d"],
                              tier="kurtosis", profile=profile(m4hat=m4))
            return B.sample_size_kurtosis(q).m_real

        assert m_of(epsilon=0.6) <= m_of()
        assert m_of(delta=0.4) <= m_of()
        assert m_of(k=4) >= m_of()
        assert m_of(d=6) >= m_of()
        assert m_of(m4=10.0) >= m_of()

    def test_double_precision_finite_at_extremes(self):
        q = kd.BoundQuery(epsilon=1e-6, delta=1e-6, k=10**4, d=10**4, tier="kurtosis",
                          profile=profile(m4hat=1e12))
        res = B.sample_size_kurtosis(q)
        assert math.isfinite(res.m_real)
        res2 = B.sample_size_framework(1e12, B.pdim_bound(10**4, 10**4), 1e-6, 1e-6)
        assert math.isfinite(res2.m_real)


# ---------------------------------------------------------------------------
# Auxiliary constants
# ---------------------------------------------------------------------------

class TestAuxConstants:
    def test_series_values(self):
        assert B.sqrt_halving_series(1) == pytest.approx(math.sqrt(0.5), rel=1e-15)
        s200 = B.sqrt_halving_series(200)
        oracle = float(mp.nsum(lambda j: mp.sqrt(j / mp.mpf(2) ** j), [1, 200]))
        assert s200 == pytest.approx(oracle, rel=1e-13)
        assert s200 <= 5.0

    def test_geometric_bound_reaches_limit(self):
        b200 = B.sqrt_halving_series_bound(200)
        assert b200 == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-12)
        assert B.sqrt_halving_series(200) <= b200

    def test_report_all_ok(self):
        rep = B.verify_aux_constants(n_pairs=2000, seed=11)
        assert rep["all_ok"]
        assert rep["violations"] == 0
        assert rep["n_pairs"] == 2000
        assert rep["series_partial_sum"] <= 5.0
        assert rep["log_dominance_min_slack"] > 0

    def test_log_dominance_boundary_root(self):
        # at a = e the premise x <= a ln x is satisfiable only at the tangency
        # point, where a ln x - x is stationary: the root of a/x - 1 = 0
        a = math.e
        root = brentq(lambda x: a / x - 1.0, 1.0, 10.0)
        assert root == pytest.approx(math.e, rel=1e-12)
        assert a * math.log(root) - root == pytest.approx(0.0, abs=1e-12)
        assert root <= B.log_dominance_bound(a)
        assert B.log_dominance_bound(a) == pytest.approx(2 * math.e * math.log(2 * math.e), rel=1e-14)
