"""Doubled-phase-space Monte Carlo: noise factorization, reproducibility,
moment convergence against the deterministic engines, and the stationary
two-time structure.

Stochastic assertions run at fixed seeds, sized so the acceptance bands
(3 standard errors unless stated) hold with comfortable z-scores.
"""

import math

import numpy as np
import pytest

from casq import analytic, moments, montecarlo
from casq.errors import InvalidParameterError, NotStableError, TrajectoryBlowupError
from casq.params import Coefficients, SystemParams, coefficients


MODULE_POINT = SystemParams(a=4, kappa=0.8, beta=0.2).with_relative_drive(0.5)


class TestNoiseFactorization:
    def test_no_drive_no_atoms(self):
        noise = montecarlo.factor_noise(coefficients(SystemParams(a=0, kappa=0.8, beta=0)))
        assert noise.amp_plus == 0 and noise.amp_minus == 0

    def test_pure_dpa(self):
        noise = montecarlo.factor_noise(
            coefficients(SystemParams(a=0, kappa=0.8, beta=0, epsilon=0.2))
        )
        assert noise.amp_plus == pytest.approx(math.sqrt(0.1), rel=1e-14)
        assert noise.amp_minus == pytest.approx(math.sqrt(0.1), rel=1e-14)

    def test_laser_with_drive(self):
        noise = montecarlo.factor_noise(
            coefficients(SystemParams(a=100, kappa=0.8, beta=0, epsilon=0.2))
        )
        assert noise.amp_plus == pytest.approx(math.sqrt(50.1), rel=1e-13)
        assert noise.amp_minus == pytest.approx(math.sqrt(0.1), rel=1e-13)
        assert noise.is_real

    def test_eigenvalue_identities_including_imaginary(self):
        cases = [
            coefficients(MODULE_POINT),
            # fabricated set with a negative minus radicand: amp_minus imaginary
            Coefficients(r=1.0, s=2.0, u=0.0, v=0.0, b=1.0, epsilon=0.5,
                         lambda_minus=0.5, lambda_plus=2.5),
        ]
        for c in cases:
            noise = montecarlo.factor_noise(c)
            assert noise.amp_plus**2 + noise.amp_minus**2 == pytest.approx(
                c.epsilon - 2 * c.v, rel=1e-12, abs=1e-12
            )
            assert noise.amp_plus**2 - noise.amp_minus**2 == pytest.approx(
                2 * c.r, rel=1e-12, abs=1e-12
            )
        assert montecarlo.factor_noise(cases[1]).amp_minus.imag > 0


class TestStep:
    def test_deterministic_decay_along_symmetric_direction(self):
        c = coefficients(MODULE_POINT)
        noise = montecarlo.factor_noise(c)
        ens = montecarlo.TrajectoryEnsemble(
            n_traj=3, dt=0.01, seed=0, t=0.0,
            alpha=np.ones(3), alpha_dag=np.ones(3),
        )
        zeros = np.zeros(3)
        out = montecarlo.step(ens, c, noise, zeros, zeros)
        expect = 1.0 - c.lambda_minus * 0.01
        np.testing.assert_allclose(out.alpha, expect, rtol=1e-14)
        np.testing.assert_allclose(out.alpha_dag, expect, rtol=1e-14)
        assert out.t == pytest.approx(0.01)

    def test_step_size_guard(self):
        c = coefficients(MODULE_POINT)
        noise = montecarlo.factor_noise(c)
        ens = montecarlo.TrajectoryEnsemble.vacuum(4, dt=1.0, seed=0)
        with pytest.raises(InvalidParameterError):
            montecarlo.step(ens, c, noise, np.zeros(4), np.zeros(4))


class TestIncrements:
    def test_covariance_matches_diffusion(self):
        # sample covariance of the generated increments reproduces the
        # normally ordered diffusion matrix within 3 standard errors
        c = coefficients(MODULE_POINT)
        noise = montecarlo.factor_noise(c)
        dt = 0.004
        rng = np.random.default_rng(1913)
        n = 400_000
        xi = rng.standard_normal((2, n))
        dw_alpha = math.sqrt(dt) * (noise.amp_plus.real * xi[0] + noise.amp_minus.real * xi[1])
        dw_dag = math.sqrt(dt) * (noise.amp_plus.real * xi[0] - noise.amp_minus.real * xi[1])

        prod_self = dw_alpha * dw_alpha
        prod_cross = dw_alpha * dw_dag
        se_self = prod_self.std(ddof=1) / math.sqrt(n)
        se_cross = prod_cross.std(ddof=1) / math.sqrt(n)
        assert abs(prod_self.mean() - (c.epsilon - 2 * c.v) * dt) < 3 * se_self
        assert abs(prod_cross.mean() - 2 * c.r * dt) < 3 * se_cross
        assert abs(dw_alpha.mean()) < 3 * dw_alpha.std(ddof=1) / math.sqrt(n)


class TestRun:
    def test_silent_vacuum(self):
        series = montecarlo.run(
            SystemParams(a=0, kappa=0.8, beta=0, epsilon=0), 64, 1.0, 0.01, seed=5
        )
        assert np.all(series.alpha_sq == 0)
        assert np.all(series.n_cl == 0)
        assert np.all(series.minus_sq_se == 0)

    def test_bitwise_reproducible(self):
        kw = dict(n_traj=512, t_end=2.0, dt=0.01, seed=97)
        s1 = montecarlo.run(MODULE_POINT, **kw)
        s2 = montecarlo.run(MODULE_POINT, **kw)
        np.testing.assert_array_equal(s1.n_cl, s2.n_cl)
        np.testing.assert_array_equal(s1.plus_sq, s2.plus_sq)
        np.testing.assert_array_equal(s1.minus_sq_se, s2.minus_sq_se)
        s3 = montecarlo.run(MODULE_POINT, n_traj=512, t_end=2.0, dt=0.01, seed=98)
        assert not np.array_equal(s1.n_cl, s3.n_cl)

    def test_moments_track_ode_solution(self):
        series = montecarlo.run(MODULE_POINT, 16384, 30.0, 0.005, seed=3111)
        checked = 0
        for i, t in enumerate(series.times):
            if t == 0.0:
                continue
            ref = moments.propagate(MODULE_POINT, float(t), check_accuracy=False)[-1]
            checked += 1
            assert abs(series.n_cl[i].real - ref.n_cl) <= 3 * series.n_cl_se[i]
            assert abs(series.plus_sq[i].real - ref.var_flow_plus) <= 3 * series.plus_sq_se[i]
            assert abs(series.minus_sq[i].real - ref.var_flow_minus) <= 3 * series.minus_sq_se[i]
            assert abs(series.mean_alpha[i]) <= 4 * max(series.mean_alpha_se[i], 1e-300)
        assert checked >= 20

    def test_pure_dpa_mean_photon(self):
        p = SystemParams(a=0, kappa=0.8, beta=0, epsilon=0.2)
        series = montecarlo.run(p, 20000, 50.0, 0.01, seed=2204, sample_times=[50.0])
        assert abs(series.n_cl[-1].real - 1.0 / 6.0) <= 3 * series.n_cl_se[-1]

    def test_steady_matches_closed_forms(self):
        c = coefficients(MODULE_POINT)
        s_plus, s_minus = analytic.steady_alpha_sq(c)
        series = montecarlo.run(MODULE_POINT, 20000, 32.0, 0.005, seed=630, sample_times=[32.0])
        assert abs(series.plus_sq[-1].real - s_plus) <= 3 * series.plus_sq_se[-1]
        assert abs(series.minus_sq[-1].real - s_minus) <= 3 * series.minus_sq_se[-1]

    def test_se_shrinks_like_sqrt_n(self):
        kw = dict(t_end=4.0, dt=0.01, sample_times=[4.0])
        s1 = montecarlo.run(MODULE_POINT, 4096, seed=11, **kw)
        s2 = montecarlo.run(MODULE_POINT, 8192, seed=11, **kw)
        ratio = s1.plus_sq_se[-1] / s2.plus_sq_se[-1]
        assert ratio == pytest.approx(math.sqrt(2.0), rel=0.2)

    def test_dt_refinement_study(self):
        # the Euler-Maruyama chain for the squeezed combination has the exact
        # stationary variance X_minus/lambda_plus / (1 - lambda_plus dt / 2):
        # each run must match the discrete prediction at its own dt (the
        # first-order bias model), and the model's bias shrinks linearly in dt
        c = coefficients(MODULE_POINT)
        exact = analytic.steady_alpha_sq(c)[1]
        preds = {}
        for dt in (0.03, 0.0075):
            series = montecarlo.run(MODULE_POINT, 60000, 30.0, dt, seed=505,
                                    sample_times=[30.0])
            predicted = exact / (1.0 - 0.5 * c.lambda_plus * dt)
            assert abs(series.minus_sq[-1].real - predicted) <= 3 * series.minus_sq_se[-1]
            preds[dt] = (series.minus_sq[-1].real, series.minus_sq_se[-1], predicted)
        # the coarse run resolves its bias away from the continuum value
        got, se, predicted = preds[0.03]
        assert abs(got - exact) > 2 * se
        assert predicted - exact == pytest.approx(4 * (preds[0.0075][2] - exact), rel=0.02)

    def test_unstable_rejected(self):
        with pytest.raises(NotStableError):
            montecarlo.run(MODULE_POINT.with_relative_drive(1.2), 64, 1.0, 0.005, seed=1)

    def test_oversized_step_rejected(self):
        with pytest.raises(InvalidParameterError):
            montecarlo.run(MODULE_POINT, 64, 1.0, 0.2, seed=1)

    def test_blowup_guard(self, monkeypatch):
        monkeypatch.setattr(montecarlo, "BLOWUP_LIMIT", 1e-12)
        with pytest.raises(TrajectoryBlowupError):
            montecarlo.run(MODULE_POINT, 64, 1.0, 0.01, seed=1)


@pytest.fixture(scope="module")
def estimate():
    tau = np.arange(0.0, 4.0001, 0.05)
    return montecarlo.two_time_correlation(
        MODULE_POINT, tau, n_traj=8192, dt=0.005, seed=1804
    )


class TestTwoTimeCorrelation:
    def test_zero_lag_matches_steady_moments(self, estimate):
        c = coefficients(MODULE_POINT)
        s_plus, s_minus = analytic.steady_alpha_sq(c)
        assert abs(estimate.corr_plus[0].real - s_plus) <= 3 * estimate.corr_plus_se[0]
        assert abs(estimate.corr_minus[0].real - s_minus) <= 3 * estimate.corr_minus_se[0]

    def test_fitted_decay_rates(self, estimate):
        c = coefficients(MODULE_POINT)
        fit = montecarlo.fit_decay_rates(estimate)
        assert abs(fit.rate_plus - c.lambda_minus) <= 3 * fit.rate_plus_se
        assert abs(fit.rate_minus - c.lambda_plus) <= 3 * fit.rate_minus_se

    def test_spectrum_quadrature_matches_closed_form(self, estimate):
        kappa = MODULE_POINT.kappa
        omegas = np.array([0.0, kappa / 2, kappa])
        est = montecarlo.spectrum_from_correlation(estimate, kappa, omegas)
        curve = analytic.spectrum(MODULE_POINT, omegas)
        for i in range(omegas.size):
            assert abs(est.s_plus[i] - curve.s_plus[i]) <= 3 * est.s_plus_se[i]
            assert abs(est.s_minus[i] - curve.s_minus[i]) <= 3 * est.s_minus_se[i]

    def test_tau_grid_validation(self):
        with pytest.raises(InvalidParameterError):
            montecarlo.two_time_correlation(MODULE_POINT, [0.5, 1.0], 100, 0.005, seed=1)
        with pytest.raises(InvalidParameterError):
            montecarlo.two_time_correlation(MODULE_POINT, [0.0, 0.1, 0.5], 100, 0.005, seed=1)
        with pytest.raises(NotStableError):
            montecarlo.two_time_correlation(
                MODULE_POINT.with_relative_drive(1.2), [0.0, 0.1], 100, 0.005, seed=1
            )
