"""Truncated-Fock master-equation oracle: generator identities, propagation,
steady states, and cross-engine agreement with the closed forms.
"""

import math

import numpy as np
import pytest

from casq import analytic, fock
from casq.errors import (
    ConvergenceError,
    NotStableError,
    StepSizeError,
    TruncationError,
)
from casq.params import SystemParams, coefficients


def random_interior_hermitian(rng, dim=32, support=24):
    data = np.zeros((dim, dim), dtype=complex)
    block = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
    data[:support, :support] = 0.5 * (block + block.conj().T)
    data /= np.trace(data).real
    return data


def moments_of(data):
    n = data.shape[0]
    lev = np.arange(n)
    mean_a = np.sum(np.sqrt(lev[1:]) * np.diag(data, k=-1))
    mean_a2 = np.sum(np.sqrt((lev[:-2] + 1.0) * (lev[:-2] + 2.0)) * np.diag(data, k=-2))
    mean_n = np.sum(lev * np.diag(data).real)
    return mean_a, mean_a2, mean_n


class TestGenerator:
    def test_vacuum_fixed_point_of_pure_decay(self):
        c = coefficients(SystemParams(a=0, kappa=0.8, beta=0, epsilon=0))
        rho = fock.vacuum(16).data
        np.testing.assert_allclose(fock.apply_generator(rho, c), 0.0, atol=1e-15)

    def test_trace_preserved(self, rng):
        c = coefficients(SystemParams(a=25, kappa=0.8, beta=0.4, epsilon=0.7))
        for _ in range(5):
            rho = random_interior_hermitian(rng)
            deriv = fock.apply_generator(rho, c)
            assert abs(np.trace(deriv)) < 1e-12 * np.abs(rho).sum()

    def test_moment_equations(self, rng):
        # the generator must reproduce the closed first/second moment flow
        p = SystemParams(a=25, kappa=0.8, beta=0.3, epsilon=0.5)
        c = coefficients(p)
        x = c.coupling
        for _ in range(5):
            rho = random_interior_hermitian(rng)
            deriv = fock.apply_generator(rho, c)
            a1, a2, nn = moments_of(rho)
            da1, da2, dnn = moments_of(deriv)
            assert da1 == pytest.approx(
                (c.r - c.s) * a1 + x * np.conj(a1), rel=1e-10, abs=1e-10
            )
            assert da2 == pytest.approx(
                2 * (c.r - c.s) * a2 + 2 * x * nn + (p.epsilon - 2 * c.v),
                rel=1e-10, abs=1e-10,
            )
            assert dnn == pytest.approx(
                2 * (c.r - c.s) * nn + x * (np.conj(a2) + a2).real + 2 * c.r,
                rel=1e-10, abs=1e-10,
            )

    def test_sparse_matches_dense(self, rng):
        c = coefficients(SystemParams(a=12, kappa=1.1, beta=0.6, epsilon=0.4))
        gen = fock._sparse_generator(20, c)
        rho = random_interior_hermitian(rng, dim=20, support=16)
        dense = fock.apply_generator(rho, c)
        sparse = (gen @ rho.reshape(-1)).reshape(20, 20)
        np.testing.assert_allclose(sparse, dense, atol=1e-12)


class TestEvolve:
    def test_vacuum_invariant_without_drive(self):
        rho = fock.evolve(fock.vacuum(12), SystemParams(a=0, kappa=0.8, beta=0), 5.0)
        expect = np.zeros((12, 12), dtype=complex)
        expect[0, 0] = 1.0
        np.testing.assert_allclose(rho.data, expect, atol=1e-14)
        assert rho.trace_err < 1e-14

    def test_pure_dpa_mean_photon(self):
        p = SystemParams(a=0, kappa=0.8, beta=0, epsilon=0.2)
        rho = fock.evolve(fock.vacuum(40), p, 50.0 / 0.8)
        obs = fock.observables(rho)
        assert obs.mean_n == pytest.approx(1.0 / 6.0, abs=1e-4)
        # trace drift stays well below 1e-8 per unit kappa*t
        assert rho.trace_err < 1e-8 * (0.8 * 50.0 / 0.8)
        np.testing.assert_allclose(rho.data, rho.data.conj().T, atol=0)

    def test_moment_closure_along_trajectory(self):
        # dim must be generous here: the truncated generator's moment flow
        # differs from the closed equations by boundary corrections, which
        # sit near 3e-5 at dim 80 for this state and fall off as the tail
        p = SystemParams(a=8, kappa=0.8, beta=0.2, epsilon=0.4)
        c = coefficients(p)
        dt = 0.0006  # inside the RK4 stability region for dim 112
        rho1 = fock.evolve(fock.vacuum(112), p, 1.0, dt=dt)
        rho2 = fock.evolve(rho1, p, dt, dt=dt)
        rho3 = fock.evolve(rho2, p, dt, dt=dt)
        _, a2_1, n_1 = moments_of(rho1.data)
        _, a2_2, n_2 = moments_of(rho2.data)
        _, a2_3, n_3 = moments_of(rho3.data)
        fd_n = (n_3 - n_1) / (2 * dt)
        rhs_n = 2 * (c.r - c.s) * n_2 + c.coupling * (np.conj(a2_2) + a2_2).real + 2 * c.r
        assert fd_n == pytest.approx(rhs_n, rel=1e-4, abs=1e-5)
        fd_a2 = (a2_3 - a2_1) / (2 * dt)
        rhs_a2 = 2 * (c.r - c.s) * a2_2 + 2 * c.coupling * n_2 + (p.epsilon - 2 * c.v)
        assert fd_a2 == pytest.approx(rhs_a2, rel=1e-4, abs=1e-5)

    def test_oversized_step_detected(self):
        p = SystemParams(a=25, kappa=0.8, beta=0.1, epsilon=0.5)
        with pytest.raises(StepSizeError):
            fock.evolve(fock.vacuum(64), p, 2.0, dt=0.2)

    def test_truncation_guard(self):
        p = SystemParams(a=0, kappa=0.8, beta=0, epsilon=0.35)
        with pytest.raises(TruncationError) as err:
            fock.evolve(fock.vacuum(6), p, 20.0)
        assert err.value.suggested_dim == 12


class TestSteadyState:
    def test_vacuum_projector_without_drive(self):
        rho = fock.steady_state(SystemParams(a=0, kappa=0.8, beta=0, epsilon=0), 16)
        assert rho.data[0, 0].real == pytest.approx(1.0, abs=1e-12)
        assert np.abs(rho.data).sum() == pytest.approx(1.0, abs=1e-10)

    def test_pure_dpa_parity_structure(self):
        # photons are created in pairs, so coherences with odd m - n never
        # appear; the diagonal still reaches odd n through single-photon
        # escape out of the port mirror (P(1) = sqrt(c^2-d^2)(1-c) exactly),
        # with every even population beating its odd neighbors
        p = SystemParams(a=0, kappa=0.8, beta=0, epsilon=0.3)
        rho = fock.steady_state(p, 64)
        for off in (1, 3, 5):
            assert np.abs(np.diag(rho.data, k=off)).max() < 1e-12
        diag = np.diag(rho.data).real
        pnd = analytic.photon_distribution(analytic.steady_record(p), 40).probs
        np.testing.assert_allclose(diag[:41], pnd, atol=1e-9)
        assert diag[1] > 0.1  # odd populations are real, not round-off
        for even in range(0, 12, 2):
            assert diag[even] > diag[even + 1]

    def test_matches_closed_forms_at_convergent_drive(self):
        # same physics point as the near-threshold acceptance check, at a
        # drive where the truncation is fully converged
        # var_minus is a small difference of n-weighted moments, the most
        # truncation-hungry observable: dim must push the n-weighted tail
        # well under the relative budget
        p = SystemParams(a=25, kappa=0.8, beta=0.1).with_relative_drive(0.5)
        rho = fock.steady_state(p, 256, tol=1e-12)
        obs = fock.observables(rho)
        var = analytic.variance_steady(p)
        rec = analytic.steady_record(p)
        assert obs.mean_n == pytest.approx(rec.n_cl, rel=1e-3)
        assert obs.var_plus == pytest.approx(var.plus, rel=1e-3)
        assert obs.var_minus == pytest.approx(var.minus, rel=1e-3)
        pnd = analytic.photon_distribution(rec, 150).probs
        assert np.abs(obs.pnd[:151] - pnd).max() < 1e-4

    def test_second_moments_track_toward_threshold(self):
        # deeper drive, bigger basis: the oracle's second moments keep
        # matching the closed forms once the tail fits
        p = SystemParams(a=25, kappa=0.8, beta=0.1).with_relative_drive(0.7)
        rho = fock.steady_state(p, 400, tol=1e-12)
        obs = fock.observables(rho)
        s_plus, s_minus = analytic.steady_alpha_sq(coefficients(p))
        assert obs.var_plus - 1.0 == pytest.approx(s_plus, rel=1e-3)
        assert 1.0 - obs.var_minus == pytest.approx(s_minus, rel=1e-3)

    def test_fig6_point_distribution_and_doubling(self):
        p = SystemParams(a=100, kappa=0.8, beta=0.067, epsilon=0.3)
        rho1 = fock.steady_state(p, 256, tol=1e-12)
        obs1 = fock.observables(rho1)
        rec = analytic.steady_record(p)
        pnd = analytic.photon_distribution(rec, 255).probs
        assert np.abs(obs1.pnd - pnd).max() < 1e-4
        # 1e-6 doubling stability needs the smaller basis's n-weighted tail
        # below 1e-6 (dim 256 leaves ~3e-6 in n-weighted tail mass)
        rho2 = fock.steady_state(p, 320, tol=1e-12)
        obs2 = fock.observables(rho2)
        rho3 = fock.steady_state(p, 640, tol=1e-12)
        obs3 = fock.observables(rho3)
        assert abs(obs3.mean_n - obs2.mean_n) < 1e-6
        assert abs(obs3.var_minus - obs2.var_minus) < 1e-6
        assert abs(obs3.var_plus - obs2.var_plus) < 1e-6

    def test_near_threshold_truncation_guard_trips(self):
        # at 0.9 of threshold the state needs far more than 150 levels;
        # the guard must refuse rather than return a distorted state
        p = SystemParams(a=25, kappa=0.8, beta=0.1).with_relative_drive(0.9)
        with pytest.raises(TruncationError):
            fock.steady_state(p, 150)

    def test_threshold_margin_refused(self):
        p = SystemParams(a=25, kappa=0.8, beta=0.1).with_relative_drive(0.9995)
        with pytest.raises(NotStableError):
            fock.steady_state(p, 64)

    def test_convergence_error_when_starved(self):
        p = SystemParams(a=25, kappa=0.8, beta=0.1).with_relative_drive(0.5)
        with pytest.raises(ConvergenceError):
            fock.steady_state(p, 64, max_steps=1)


class TestObservables:
    def test_vacuum(self):
        obs = fock.observables(fock.vacuum(8))
        assert obs.mean_n == 0.0
        assert obs.var_plus == 1.0 and obs.var_minus == 1.0
        assert obs.mean_a == 0

    def test_phase_symmetric_state(self, rng):
        # any diagonal state has var_plus = var_minus = 1 + 2<n>
        weights = rng.uniform(size=10)
        weights /= weights.sum()
        data = np.zeros((16, 16), dtype=complex)
        data[:10, :10] = np.diag(weights)
        obs = fock.observables(fock.DensityMatrix(dim=16, data=data))
        assert obs.var_plus == pytest.approx(1 + 2 * obs.mean_n, rel=1e-12)
        assert obs.var_minus == pytest.approx(1 + 2 * obs.mean_n, rel=1e-12)

    def test_min_eig_on_demand(self):
        p = SystemParams(a=100, kappa=0.8, beta=0.067, epsilon=0.3)
        rho = fock.steady_state(p, 256)
        obs = fock.observables(rho, compute_min_eig=True)
        assert obs.min_eig is not None
        assert obs.min_eig > -1e-9
        assert fock.observables(rho).min_eig is None


class TestHusimi:
    def test_vacuum_center(self):
        assert fock.husimi(fock.vacuum(8), 0j) == pytest.approx(1 / math.pi, rel=1e-14)

    def test_vacuum_coherent_overlap(self):
        assert fock.husimi(fock.vacuum(32), 1.0 + 0j) == pytest.approx(
            math.exp(-1.0) / math.pi, rel=1e-12
        )
        alpha = 0.6 - 0.8j
        assert fock.husimi(fock.vacuum(32), alpha) == pytest.approx(
            math.exp(-abs(alpha) ** 2) / math.pi, rel=1e-12
        )

    def test_matches_analytic_q_function(self):
        p = SystemParams(a=100, kappa=0.8, beta=0.067, epsilon=0.3)
        rho = fock.steady_state(p, 256)
        rec = analytic.steady_record(p)
        for alpha in (0j, 0.5 + 0j, -0.3 + 0.4j, 1.5j, 2.0 - 1.0j):
            q_closed = analytic.q_function(rec, alpha.real, alpha.imag)
            assert fock.husimi(rho, alpha) == pytest.approx(q_closed, abs=1e-4)
