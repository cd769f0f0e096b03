import csv
import io
import math

import numpy as np
import pytest

from l1interp import risk_curve as rc
from l1interp.fixed_point import F1, F2, solve_interpolator
from l1interp.prior import ModelParams, Prior
from l1interp.special import Phi, Phi_inv, phi

POINTS = [(1.3, 0.4, 0.8, 0.1, 4.0, 1.0), (0.5, 0.9, 0.2, 0.5, 2.0, 1.5),
          (3.0, 0.05, 2.0, 0.01, 14.0, 0.7)]


def central(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestPartials:
    @pytest.mark.parametrize("nu,delta,alpha,eps,M,sigma", POINTS)
    def test_F1(self, nu, delta, alpha, eps, M, sigma):
        d_nu, d_delta, d_alpha = rc.partials_F1(nu, delta, alpha, eps)
        h = 1e-6
        assert d_nu == pytest.approx(central(lambda v: F1(v, delta, alpha, eps), nu, h), abs=1e-8)
        assert d_delta == pytest.approx(central(lambda v: F1(nu, v, alpha, eps), delta, h * delta),
                                        abs=1e-7)
        assert d_alpha == pytest.approx(central(lambda v: F1(nu, delta, v, eps), alpha, h),
                                        abs=1e-8)

    @pytest.mark.parametrize("nu,delta,alpha,eps,M,sigma", POINTS)
    def test_F2(self, nu, delta, alpha, eps, M, sigma):
        d_nu, d_delta, d_alpha = rc.partials_F2(nu, delta, alpha, eps, M, sigma)
        f = lambda n, d, a: F2(n, d, a, eps, M, sigma)
        h = 1e-6
        assert d_nu == pytest.approx(central(lambda v: f(v, delta, alpha), nu, h), rel=1e-6)
        assert d_delta == pytest.approx(central(lambda v: f(nu, v, alpha), delta, h * delta),
                                        rel=1e-6)
        assert d_alpha == pytest.approx(central(lambda v: f(nu, delta, v), alpha, h), rel=1e-6)


class TestNuPrime:
    @pytest.mark.parametrize("delta,eps,snr", [(0.1, 0.05, 2.0), (0.5, 0.2, 10.0),
                                               (0.85, 0.5, 0.5), (0.3, 0.01, 2.0)])
    def test_against_finite_differences(self, delta, eps, snr):
        m = ModelParams.sparse_model(delta, eps, snr=snr)
        s = solve_interpolator(m)
        assert rc.nu_prime(delta, s, m) == pytest.approx(rc.nu_star_fd(m), rel=1e-4)

    def test_needs_sparse_model(self):
        m = ModelParams(0.5, 1.0, Prior(((1.0, 0.5), (0.0, 0.5))))
        with pytest.raises(ValueError):
            rc.nu_prime(0.5, solve_interpolator(m), m)

    def test_near_one_diverges(self):
        m = ModelParams.sparse_model(0.999, 0.5, M=2.0)
        s = solve_interpolator(m)
        assert s.alpha_star <= 0.05 and s.nu_star <= 0.1
        assert rc.nu_prime(0.999, s, m) <= -10

    def test_small_delta_constants(self):
        row = rc.asymptote_report(ModelParams.sparse_model(0.5, 0.3, snr=10.0), (1e-4,))[0]
        assert 1.8 <= row.delta_alpha_over_phi <= 2.2
        assert -2.6 <= row.numerator_alpha3 <= -1.4
        assert 0.9 <= row.denominator_scaled <= 1.1
        assert row.dF1_alpha_over_phi == pytest.approx(-2.0, rel=0.01)
        assert row.dF1_delta == pytest.approx(-1.0, rel=0.01)


class TestLimits:
    def test_tau0(self):
        assert rc.tau0_sq(ModelParams.sparse_model(0.3, 0.2, M=3.0)) == pytest.approx(2.8)

    def test_H_endpoints(self):
        assert rc.H_fn(1 - 1e-6) <= 0.02
        assert rc.H_fn(0.5) == pytest.approx(0.6343593156815058, rel=1e-12)
        hs = [rc.H_fn(d) for d in np.linspace(0.01, 0.99, 50)]
        assert np.all(np.diff(hs) < 0)

    def test_H_small_delta_rate(self):
        # H(delta) = 1 - 1/alpha0^2 + O(alpha0^-4), so the approach to 1 is slow
        for d in (1e-6, 1e-12):
            a0 = -Phi_inv(d / 2)
            assert abs(rc.H_fn(d) - (1 - 1 / a0**2)) <= 4 / a0**4

    def test_eps_limit_matches_H(self):
        for d in np.linspace(0.02, 0.98, 10):
            a0, ratio = rc.eps_to_zero_limits(d)
            assert a0 == pytest.approx(-Phi_inv(d / 2))
            assert abs(ratio - rc.H_fn(d)) <= 1e-10

    def test_eps_limit_is_small_eps_solution(self):
        d, snr = 0.4, 2.0
        eps = 1e-6
        m = ModelParams.sparse_model(d, eps, snr=snr)
        s = solve_interpolator(m)
        a0, ratio = rc.eps_to_zero_limits(d)
        assert s.alpha_star == pytest.approx(a0, rel=1e-3)
        assert s.nu_star / m.sparse[1] == pytest.approx(ratio, rel=1e-3)

    def test_eps_limit_derivative(self):
        d, eps = 0.5, 1e-5
        m = ModelParams.sparse_model(d, eps, snr=2.0)
        assert rc.nu_star_fd(m) / m.sparse[1] == pytest.approx(
            rc.eps_to_zero_nu_prime_over_M(d), rel=1e-3)

    def test_ols(self):
        assert rc.ols_limit(2.0, 1.0) == 2.0
        assert rc.ols_limit(3.0, 2.0) == pytest.approx(6.0)
        with pytest.raises(ValueError):
            rc.ols_limit(1.0)

    def test_l2_interpolator(self):
        assert rc.l2_interpolator_risk(0.5, 0.1, 2.0) == pytest.approx(0.1 * 4 * 0.5 + 2.0)
        assert rc.l2_interpolator_risk(2.0, 0.1, 2.0) == 2.0
        with pytest.raises(ValueError):
            rc.l2_interpolator_risk(1.0, 0.1, 2.0)

    def test_asymptotic_router(self):
        m = ModelParams.sparse_model(2.0, 0.1, M=2.0)
        assert rc.asymptotic_risk(m) == 2.0
        assert rc.asymptotic_risk(m.with_delta(1.0)) == math.inf

    def test_continuity_small_delta(self):
        # tau*^2 heads to the zero-estimator risk, slowly
        m = ModelParams.sparse_model(0.5, 0.3, snr=10.0)
        gaps = [solve_interpolator(m.with_delta(d)).tau_sq / m.tau0_sq - 1
                for d in (1e-3, 1e-6, 1e-12)]
        assert gaps[0] > gaps[1] > gaps[2] > 0


class TestSweep:
    template = ModelParams.sparse_model(0.5, 0.01, snr=2.0)

    def test_default_grid(self):
        g = rc.default_grid()
        assert len(g) == 400 and np.all(np.diff(g) > 0)
        assert 1 / g[0] == pytest.approx(100.0) and 1 / g[-1] == pytest.approx(1.01)

    def test_multi_descent_shape(self):
        curve = rc.sweep(self.template)
        assert len(curve.points) == 400 and not curve.failures
        maxima, minima = curve.extrema()
        assert maxima and minima
        assert curve.regime_changes() >= 2

    def test_regime_matches_slope(self):
        curve = rc.sweep(self.template, 1 / np.geomspace(1.5, 80, 60))
        inv = 1 / curve.deltas
        slope = np.gradient(curve.tau_sq, inv)
        for p, s in zip(curve.points, slope):
            if abs(s) > 1e-3:
                assert p.regime == ("ascending" if s > 0 else "descending")

    def test_dense_signal_monotone(self):
        curve = rc.sweep(ModelParams.sparse_model(0.5, 0.5, snr=2.0), 1 / np.geomspace(1.05, 50, 40))
        assert {p.regime for p in curve.points} == {"descending"}

    def test_general_prior_regimes(self):
        m = ModelParams(0.5, 1.0, Prior(((1.0, 0.3), (0.0, 0.7))))
        curve = rc.sweep(m, [0.2, 0.4, 0.6])
        assert all(p.nu is None and p.nu_prime is None for p in curve.points)
        assert all(p.regime in ("ascending", "descending") for p in curve.points)

    def test_csv(self):
        curve = rc.sweep(self.template, [0.1, 0.5])
        rows = list(csv.reader(io.StringIO(curve.to_csv())))
        assert tuple(rows[0]) == rc.CSV_HEADER
        assert len(rows) == 3
        assert float(rows[1][0]) == 0.1 and float(rows[1][1]) == pytest.approx(10.0)

    def test_rejects_grid(self):
        with pytest.raises(ValueError):
            rc.sweep(self.template, [0.5, 1.2])

    def test_workers_identical(self):
        grid = 1 / np.geomspace(1.1, 90, 24)
        a = rc.sweep(self.template, grid).to_csv()
        b = rc.sweep(self.template, grid, workers=2).to_csv()
        assert a == b


@pytest.mark.slow
def test_epsilon_threshold_between_examples():
    grid = 1 / np.geomspace(1.01, 100, 120)
    eps_star = rc.epsilon_threshold(2.0, deltas=grid, lo=0.01, hi=0.5, iters=8)
    assert 0.01 < eps_star < 0.5
    assert rc.has_ascending_regime(ModelParams.sparse_model(0.5, eps_star * 0.8, snr=2.0), grid)


class TestSpecificSigns:
    def test_dF1_alpha_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            nu, alpha = rng.uniform(0.01, 20), rng.uniform(0.01, 6)
            delta, eps = rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)
            assert rc.partials_F1(nu, delta, alpha, eps)[2] < 0

    @pytest.mark.parametrize("delta", [1e-3, 0.99])
    def test_nu_prime_negative(self, delta):
        m = ModelParams.sparse_model(delta, 0.3, snr=10.0)
        assert rc.nu_prime(delta, solve_interpolator(m), m) < 0

    def test_ols_decreasing(self):
        vals = [rc.ols_limit(d) for d in np.linspace(1.01, 50, 100)]
        assert np.all(np.diff(vals) < 0)
