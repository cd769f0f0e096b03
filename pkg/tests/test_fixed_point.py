import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from l1interp.fixed_point import (
    F1,
    F2,
    F22,
    F23,
    SolverError,
    alpha_min,
    lambda_of_alpha,
    risk_residual,
    solve_alpha_nu,
    solve_interpolator,
    solve_lasso,
    state_evolution_map,
    support_residual,
    tau_of_alpha,
)
from l1interp.prior import ModelParams, Prior
from l1interp.special import Phi, phi, soft_threshold


def mse_quad(b, alpha):
    """E[(eta(b + Z; alpha) - b)^2] by adaptive quadrature."""
    f = lambda z: (soft_threshold(b + z, alpha) - b) ** 2 * stats.norm.pdf(z)
    pts = [-np.inf, -alpha - b, alpha - b, np.inf]
    return sum(integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12)[0]
               for lo, hi in zip(pts, pts[1:]))


def oracle_interpolator(delta, eps, M, sigma=1.0):
    """Independent solve in (alpha, tau) with scipy root finders and quadrature."""
    b_of = lambda tau: M * math.sqrt(delta) / tau

    def alpha_of(tau):
        b = b_of(tau)
        g = lambda a: (eps * (stats.norm.sf(a - b) + stats.norm.cdf(-a - b))
                       + (1 - eps) * 2 * stats.norm.sf(a) - delta)
        return optimize.brentq(g, 0.0, 50.0, xtol=1e-14, rtol=1e-15)

    def h(tau):
        a = alpha_of(tau)
        b = b_of(tau)
        mse = eps * mse_quad(b, a) + (1 - eps) * mse_quad(0.0, a)
        return sigma**2 / tau**2 - 1 + mse / delta

    tau = optimize.brentq(h, sigma * 1.0000001, 1e6, xtol=1e-13, rtol=1e-14)
    return alpha_of(tau), tau


class TestNuForm:
    def test_F22_against_quadrature(self):
        for nu, d, a in [(1.0, 0.3, 0.7), (3.0, 0.8, 0.1), (0.2, 0.05, 2.5)]:
            assert F22(nu, d, a) == pytest.approx(mse_quad(math.sqrt(d) * nu, a), abs=1e-12)

    def test_F23_closed_form(self):
        for a in (0.0, 0.5, 3.0):
            assert F23(a) == pytest.approx(2 * (-a * phi(a) + (a * a + 1) * Phi(-a)), rel=1e-14)

    def test_solution_zeroes_both(self):
        m = ModelParams.sparse_model(0.4, 0.1, M=3.0)
        s = solve_interpolator(m)
        assert abs(F1(s.nu_star, 0.4, s.alpha_star, 0.1)) <= 1e-12
        assert abs(F2(s.nu_star, 0.4, s.alpha_star, 0.1, 3.0)) <= 1e-10
        assert solve_alpha_nu(s.nu_star, 0.4, 0.1) == pytest.approx(s.alpha_star, abs=1e-12)

    def test_sigma_scaling(self):
        # (sigma, M) -> (c sigma, c M) scales tau by c and leaves alpha alone
        a = solve_interpolator(ModelParams.sparse_model(0.3, 0.2, M=2.0, sigma=1.0))
        b = solve_interpolator(ModelParams.sparse_model(0.3, 0.2, M=6.0, sigma=3.0))
        assert b.alpha_star == pytest.approx(a.alpha_star, rel=1e-10)
        assert b.tau_star == pytest.approx(3 * a.tau_star, rel=1e-10)


class TestInterpolator:
    @pytest.mark.parametrize("delta,eps,M", [(0.2, 0.05, 4.0), (0.5, 0.3, 1.0), (0.9, 0.5, 2.0)])
    def test_matches_oracle(self, delta, eps, M):
        s = solve_interpolator(ModelParams.sparse_model(delta, eps, M=M))
        a, tau = oracle_interpolator(delta, eps, M)
        assert s.alpha_star == pytest.approx(a, abs=1e-8)
        assert s.tau_star == pytest.approx(tau, rel=1e-8)

    def test_general_prior(self):
        pr = Prior(((-2.0, 0.1), (0.0, 0.7), (1.0, 0.2)))
        m = ModelParams(0.4, 0.8, pr)
        s = solve_interpolator(m)
        assert s.nu_star is None
        assert abs(support_residual(s.alpha_star, s.tau_star, m)) <= 1e-12
        mse = sum(p * mse_quad(v / s.tau_star, s.alpha_star) for v, p in pr.atoms)
        assert 0.8**2 / s.tau_sq - 1 + mse / 0.4 == pytest.approx(0.0, abs=1e-9)

    def test_perturbed_bracket_agrees(self):
        m = ModelParams.sparse_model(0.3, 0.05, snr=2.0)
        s = solve_interpolator(m)
        t = solve_interpolator(m, tau_bracket=(0.999, 1e4))
        assert t.tau_star == pytest.approx(s.tau_star, rel=1e-10)

    def test_bad_bracket_raises(self):
        m = ModelParams.sparse_model(0.3, 0.05, snr=2.0)
        s = solve_interpolator(m)
        with pytest.raises(SolverError) as info:
            solve_interpolator(m, tau_bracket=(s.tau_star * 1.1, s.tau_star * 2))
        assert info.value.bracket is not None

    @pytest.mark.parametrize("delta", [1.0, 1.5])
    def test_delta_domain(self, delta):
        with pytest.raises(ValueError):
            solve_interpolator(ModelParams.sparse_model(delta, 0.1, M=1.0))

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError):
            solve_interpolator(ModelParams(0.5, 1.0, Prior(((0.0, 1.0),))))

    def test_risk_above_noise(self):
        for d in (0.05, 0.5, 0.95):
            s = solve_interpolator(ModelParams.sparse_model(d, 0.1, snr=1.0))
            assert s.tau_sq > 1.0

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.02, 0.98), st.floats(0.005, 1.0), st.floats(0.1, 20.0))
    def test_residual_gate_property(self, delta, eps, snr):
        m = ModelParams.sparse_model(delta, eps, snr=snr)
        s = solve_interpolator(m)
        assert max(s.residuals) <= 1e-10
        assert abs(risk_residual(s.alpha_star, s.tau_star, m)) <= 1e-10


class TestStateEvolutionMap:
    def test_fixed_point(self):
        m = ModelParams.sparse_model(0.5, 0.2, M=2.0)
        s = solve_interpolator(m)
        assert state_evolution_map(s.tau_sq, s.zeta_star, m) == pytest.approx(s.tau_sq, rel=1e-11)

    def test_zero_tau(self):
        m = ModelParams.sparse_model(0.5, 0.2, M=2.0)
        v = 2.0 * math.sqrt(0.5)
        assert state_evolution_map(0.0, 0.5, m) == pytest.approx(1 + 0.2 * 0.25 / 0.5)
        assert state_evolution_map(0.0, 5.0, m) == pytest.approx(1 + 0.2 * v * v / 0.5)

    def test_rejects_negative(self):
        m = ModelParams.sparse_model(0.5, 0.2, M=2.0)
        with pytest.raises(ValueError):
            state_evolution_map(-1.0, 1.0, m)


class TestLasso:
    m = ModelParams.sparse_model(0.5, 0.02, M=10.0)

    def test_zero_lambda_is_interpolator(self):
        a = solve_lasso(0.0, self.m)
        b = solve_interpolator(self.m)
        assert a == b

    def test_lambda_of_interpolator_alpha_vanishes(self):
        s = solve_interpolator(self.m)
        assert abs(lambda_of_alpha(s.alpha_star + 1e-9, self.m)) <= 1e-6

    def test_lambda_increasing(self):
        alphas = np.linspace(solve_interpolator(self.m).alpha_star + 0.01, 4.0, 25)
        lams = [lambda_of_alpha(a, self.m) for a in alphas]
        assert np.all(np.diff(lams) > 0)

    def test_round_trip(self):
        for lam in (1e-3, 0.3, 5.0):
            s = solve_lasso(lam, self.m)
            assert lambda_of_alpha(s.alpha_star, self.m) == pytest.approx(lam, rel=1e-8)

    def test_continuity_at_zero(self):
        t0 = solve_interpolator(self.m).tau_star
        assert abs(solve_lasso(1e-5, self.m).tau_star - t0) <= 1e-3

    def test_large_lambda_approaches_zero_estimator(self):
        s = solve_lasso(1e4, self.m)
        assert s.tau_sq == pytest.approx(self.m.tau0_sq, rel=1e-6)

    def test_zero_signal(self):
        m = ModelParams(0.5, 1.0, Prior(((0.0, 1.0),)))
        s = solve_lasso(0.5, m)
        assert s.tau_sq >= 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            solve_lasso(-0.1, self.m)


class TestAlphaMin:
    def test_values(self):
        assert alpha_min(1.0) == 0.0
        a = alpha_min(0.5)
        assert (1 + a * a) * Phi(-a) - a * phi(a) == pytest.approx(0.25, abs=1e-14)

    def test_tau_of_alpha_domain(self):
        m = ModelParams.sparse_model(0.5, 0.1, M=2.0)
        with pytest.raises(ValueError):
            tau_of_alpha(alpha_min(0.5) * 0.99, m)
        tau = tau_of_alpha(1.5, m)
        assert state_evolution_map(tau * tau, 1.5 * tau, m) == pytest.approx(tau * tau, rel=1e-12)
