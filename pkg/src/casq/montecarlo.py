"""Stochastic verification engine in a doubled phase space.

The c-number Langevin equation for the cavity amplitude has noise
correlations <f f> = (epsilon - 2V) delta and <f f*> = 2R delta.  In the
squeezed regime the implied distribution of Im f has negative variance, so
no classical complex noise realizes it.  The standard resolution is to
promote alpha* to an independent variable alpha_dag and simulate the pair

    d alpha     = [-(S-R) alpha     + X alpha_dag] dt + (A+ xi1 + A- xi2) sqrt(dt)
    d alpha_dag = [-(S-R) alpha_dag + X alpha    ] dt + (A+ xi1 - A- xi2) sqrt(dt)

with X = U - V + epsilon, xi1/xi2 independent standard real Gaussians per
trajectory per step, and amplitudes A+- = sqrt((epsilon - 2V +- 2R)/2)
(imaginary when a radicand is negative).  Ensemble averages of analytic
functions of (alpha, alpha_dag) then reproduce every normally ordered
moment: the sample covariance of the increments is (epsilon - 2V) dt on
each variable and 2R dt across them, and the quadrature combinations
alpha_dag +- alpha relax at lambda_minus/lambda_plus exactly as the moment
equations demand.

Reproducibility: every trajectory owns a counter-based Philox stream
spawned from (seed, trajectory index), and reductions run over fixed-size
trajectory chunks in index order (numpy pairwise summation within a
chunk), so identical (seed, n_traj, dt, t_end) give bitwise-identical
moment series regardless of how work is partitioned.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NotStableError, TrajectoryBlowupError
from .params import Coefficients, SystemParams, coefficients

__all__ = [
    "NoiseFactorization",
    "TrajectoryEnsemble",
    "MomentSeries",
    "CorrelationEstimate",
    "DecayFit",
    "SpectrumEstimate",
    "factor_noise",
    "step",
    "run",
    "two_time_correlation",
    "fit_decay_rates",
    "spectrum_from_correlation",
]

BLOWUP_LIMIT = 1e6
_CHUNK = 4096
_BLOCK = 512


@dataclass(frozen=True)
class NoiseFactorization:
    """Eigen-amplitudes of the 2x2 symmetric diffusion matrix on (alpha, alpha_dag).

    The matrix [[eps-2V, 2R], [2R, eps-2V]] has eigenvectors (1, +-1)/sqrt(2);
    amp_plus drives the symmetric combination, amp_minus the antisymmetric one.
    amp_plus^2 + amp_minus^2 = eps - 2V and amp_plus^2 - amp_minus^2 = 2R.
    """

    amp_plus: complex
    amp_minus: complex

    @property
    def is_real(self) -> bool:
        return self.amp_plus.imag == 0.0 and self.amp_minus.imag == 0.0


def factor_noise(coeffs: Coefficients) -> NoiseFactorization:
    return NoiseFactorization(
        amp_plus=cmath.sqrt(0.5 * coeffs.diffusion_plus),
        amp_minus=cmath.sqrt(0.5 * coeffs.diffusion_minus),
    )


@dataclass
class TrajectoryEnsemble:
    """Per-trajectory doubled-phase-space state (alpha, alpha_dag) at time t."""

    n_traj: int
    dt: float
    seed: int
    t: float
    alpha: np.ndarray
    alpha_dag: np.ndarray

    @classmethod
    def vacuum(cls, n_traj: int, dt: float, seed: int, dtype=float) -> "TrajectoryEnsemble":
        return cls(
            n_traj=n_traj,
            dt=dt,
            seed=seed,
            t=0.0,
            alpha=np.zeros(n_traj, dtype=dtype),
            alpha_dag=np.zeros(n_traj, dtype=dtype),
        )


def _em_update(alpha, alpha_dag, decay, coupling, amp_plus, amp_minus, xi1, xi2, dt, sdt):
    """One Euler-Maruyama step; returns the new (alpha, alpha_dag)."""
    new_alpha = alpha + dt * (-decay * alpha + coupling * alpha_dag) + sdt * (
        amp_plus * xi1 + amp_minus * xi2
    )
    new_dag = alpha_dag + dt * (-decay * alpha_dag + coupling * alpha) + sdt * (
        amp_plus * xi1 - amp_minus * xi2
    )
    return new_alpha, new_dag


def step(
    ens: TrajectoryEnsemble,
    coeffs: Coefficients,
    noise: NoiseFactorization,
    xi1: np.ndarray,
    xi2: np.ndarray,
) -> TrajectoryEnsemble:
    """Advance the ensemble one step with caller-supplied unit normals.

    Passing zeros for xi1/xi2 gives the deterministic drift alone.
    """
    if ens.dt * max(coeffs.lambda_plus, abs(coeffs.lambda_minus)) >= 0.05:
        raise InvalidParameterError(
            f"dt = {ens.dt:.3e} too large: need dt * max(lambda) < 0.05"
        )
    amp_p, amp_m = noise.amp_plus, noise.amp_minus
    if noise.is_real and not np.iscomplexobj(ens.alpha):
        amp_p, amp_m = amp_p.real, amp_m.real
    alpha, alpha_dag = _em_update(
        ens.alpha,
        ens.alpha_dag,
        coeffs.decay,
        coeffs.coupling,
        amp_p,
        amp_m,
        xi1,
        xi2,
        ens.dt,
        math.sqrt(ens.dt),
    )
    return TrajectoryEnsemble(
        n_traj=ens.n_traj,
        dt=ens.dt,
        seed=ens.seed,
        t=ens.t + ens.dt,
        alpha=alpha,
        alpha_dag=alpha_dag,
    )


@dataclass(frozen=True)
class MomentSeries:
    """Ensemble moments (with standard errors) at the sampled times."""

    times: np.ndarray
    mean_alpha: np.ndarray
    mean_alpha_se: np.ndarray
    mean_alpha_dag: np.ndarray
    mean_alpha_dag_se: np.ndarray
    alpha_sq: np.ndarray
    alpha_sq_se: np.ndarray
    n_cl: np.ndarray
    n_cl_se: np.ndarray
    plus_sq: np.ndarray
    plus_sq_se: np.ndarray
    minus_sq: np.ndarray
    minus_sq_se: np.ndarray
    n_traj: int
    dt: float
    seed: int


def _make_generators(children) -> list:
    return [np.random.Generator(np.random.Philox(c)) for c in children]


_STATS = 6  # alpha, alpha_dag, alpha^2, alpha_dag*alpha, (dag+a)^2, (dag-a)^2


def _stat_rows(alpha, alpha_dag):
    plus = alpha_dag + alpha
    minus = alpha_dag - alpha
    return (alpha, alpha_dag, alpha * alpha, alpha_dag * alpha, plus * plus, minus * minus)


def _noise_setup(c: Coefficients):
    noise = factor_noise(c)
    if noise.is_real:
        return float, noise.amp_plus.real, noise.amp_minus.real
    return complex, noise.amp_plus, noise.amp_minus


def run(
    p: SystemParams,
    n_traj: int,
    t_end: float,
    dt: float,
    seed: int,
    sample_times=None,
    chunk_size: int = _CHUNK,
    block_steps: int = _BLOCK,
) -> MomentSeries:
    """Integrate n_traj vacuum-start trajectories and record ensemble moments.

    Moments are recorded at `sample_times` (default: 25 evenly spaced
    points plus t = 0), each snapped to the step grid.  Trajectory
    magnitudes above 1e6 abort with TrajectoryBlowupError.
    """
    c = coefficients(p)
    if c.lambda_minus <= 0:
        raise NotStableError(
            f"stochastic run requires lambda_minus > 0, got {c.lambda_minus:.6g}",
            lambda_minus=c.lambda_minus,
        )
    if dt <= 0 or t_end <= 0 or n_traj < 2:
        raise InvalidParameterError("need dt > 0, t_end > 0, n_traj >= 2")
    if dt * max(c.lambda_plus, abs(c.lambda_minus)) >= 0.05:
        raise InvalidParameterError(
            f"dt = {dt:.3e} too large: need dt * max(lambda) < 0.05"
        )

    n_steps = max(int(round(t_end / dt)), 1)
    if sample_times is None:
        sample_times = np.linspace(0.0, t_end, 26)
    sample_steps = sorted({min(int(round(t / dt)), n_steps) for t in np.atleast_1d(sample_times)})
    sample_index = {s: i for i, s in enumerate(sample_steps)}
    n_samples = len(sample_steps)

    dtype, amp_p, amp_m = _noise_setup(c)
    decay, coupling = c.decay, c.coupling
    sdt = math.sqrt(dt)

    sums = np.zeros((n_samples, _STATS), dtype=complex)
    sums_abs2 = np.zeros((n_samples, _STATS))
    children = np.random.SeedSequence(seed).spawn(n_traj)

    for lo in range(0, n_traj, chunk_size):
        hi = min(lo + chunk_size, n_traj)
        gens = _make_generators(children[lo:hi])
        width = hi - lo
        alpha = np.zeros(width, dtype=dtype)
        alpha_dag = np.zeros(width, dtype=dtype)

        def record(state_step):
            i = sample_index[state_step]
            for j, row in enumerate(_stat_rows(alpha, alpha_dag)):
                sums[i, j] += row.sum()
                mags = np.abs(row)
                sums_abs2[i, j] += float(mags @ mags)

        if 0 in sample_index:
            record(0)

        done = 0
        buf = np.empty((width, block_steps, 2))
        while done < n_steps:
            todo = min(block_steps, n_steps - done)
            for k, g in enumerate(gens):
                buf[k, :todo] = g.standard_normal((todo, 2))
            for j in range(todo):
                alpha, alpha_dag = _em_update(
                    alpha, alpha_dag, decay, coupling, amp_p, amp_m,
                    buf[:, j, 0], buf[:, j, 1], dt, sdt,
                )
                s = done + j + 1
                if s in sample_index:
                    record(s)
            done += todo
            peak = max(
                float(np.abs(alpha).max(initial=0.0)),
                float(np.abs(alpha_dag).max(initial=0.0)),
            )
            if peak > BLOWUP_LIMIT:
                raise TrajectoryBlowupError(
                    f"trajectory magnitude {peak:.3e} exceeded {BLOWUP_LIMIT:.1e} "
                    f"at step {done} (params {p})"
                )

    means = sums / n_traj
    var = np.maximum(sums_abs2 / n_traj - np.abs(means) ** 2, 0.0)
    se = np.sqrt(var / (n_traj - 1))
    times = np.array([s * dt for s in sample_steps])
    return MomentSeries(
        times=times,
        mean_alpha=means[:, 0], mean_alpha_se=se[:, 0],
        mean_alpha_dag=means[:, 1], mean_alpha_dag_se=se[:, 1],
        alpha_sq=means[:, 2], alpha_sq_se=se[:, 2],
        n_cl=means[:, 3], n_cl_se=se[:, 3],
        plus_sq=means[:, 4], plus_sq_se=se[:, 4],
        minus_sq=means[:, 5], minus_sq_se=se[:, 5],
        n_traj=n_traj, dt=dt, seed=seed,
    )


# ---------------------------------------------------------------------------
# stationary two-time correlations and the spectrum quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationEstimate:
    """Stationary <alpha_+-(t) alpha_+-(t+tau)> estimates with standard errors.

    group_plus/group_minus hold the per-group means (groups x lags) used
    for error propagation into derived fits and quadratures.
    """

    tau: np.ndarray
    corr_plus: np.ndarray
    corr_plus_se: np.ndarray
    corr_minus: np.ndarray
    corr_minus_se: np.ndarray
    n_traj: int
    group_plus: np.ndarray
    group_minus: np.ndarray


@dataclass(frozen=True)
class DecayFit:
    rate_plus: float
    rate_plus_se: float
    rate_minus: float
    rate_minus_se: float


@dataclass(frozen=True)
class SpectrumEstimate:
    omega: np.ndarray
    s_plus: np.ndarray
    s_plus_se: np.ndarray
    s_minus: np.ndarray
    s_minus_se: np.ndarray


def two_time_correlation(
    p: SystemParams,
    tau_grid,
    n_traj: int,
    dt: float,
    seed: int,
    t_burn: float | None = None,
    t_avg: float | None = None,
    chunk_size: int = 2048,
    groups: int = 10,
) -> CorrelationEstimate:
    """Estimate the stationary lag products of alpha_+- = alpha_dag +- alpha.

    Trajectories are burnt in for t_burn (default 10 / lambda_minus), then
    sampled on the uniform tau grid; products are averaged over time
    origins spanning t_avg (default 5 * tau_max) and over trajectories.
    Standard errors come from `groups` independent trajectory groups.
    """
    c = coefficients(p)
    if c.lambda_minus <= 0:
        raise NotStableError(
            f"stationary correlation requires lambda_minus > 0, got {c.lambda_minus:.6g}",
            lambda_minus=c.lambda_minus,
        )
    tau = np.atleast_1d(np.asarray(tau_grid, dtype=float))
    if tau.size < 2 or tau[0] != 0.0:
        raise InvalidParameterError("tau_grid must start at 0 and hold >= 2 points")
    spacing = np.diff(tau)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise InvalidParameterError("tau_grid must be uniform")
    if n_traj < 2 * groups:
        raise InvalidParameterError(f"need n_traj >= {2 * groups} for {groups} error groups")
    stride = max(int(round(spacing[0] / dt)), 1)
    d_tau = stride * dt
    n_lags = tau.size
    tau = np.arange(n_lags) * d_tau

    if t_burn is None:
        t_burn = 10.0 / c.lambda_minus
    if t_avg is None:
        t_avg = 5.0 * tau[-1]
    burn_steps = max(int(round(t_burn / dt)), 1)
    n_origins = max(int(round(t_avg / d_tau)), 1)
    n_records = n_lags + n_origins - 1
    record_steps = (n_records - 1) * stride

    dtype, amp_p, amp_m = _noise_setup(c)
    decay, coupling = c.decay, c.coupling
    sdt = math.sqrt(dt)

    group_sum_p = np.zeros((groups, n_lags), dtype=dtype)
    group_sum_m = np.zeros((groups, n_lags), dtype=dtype)
    group_count = np.zeros(groups, dtype=int)
    children = np.random.SeedSequence(seed).spawn(n_traj)

    for lo in range(0, n_traj, chunk_size):
        hi = min(lo + chunk_size, n_traj)
        gens = _make_generators(children[lo:hi])
        width = hi - lo
        alpha = np.zeros(width, dtype=dtype)
        alpha_dag = np.zeros(width, dtype=dtype)
        rec_p = np.empty((width, n_records), dtype=dtype)
        rec_m = np.empty((width, n_records), dtype=dtype)
        rec_p[:, 0] = 0.0
        rec_m[:, 0] = 0.0

        buf = np.empty((width, _BLOCK, 2))
        done = 0
        total = burn_steps + record_steps
        while done < total:
            todo = min(_BLOCK, total - done)
            for k, g in enumerate(gens):
                buf[k, :todo] = g.standard_normal((todo, 2))
            for j in range(todo):
                alpha, alpha_dag = _em_update(
                    alpha, alpha_dag, decay, coupling, amp_p, amp_m,
                    buf[:, j, 0], buf[:, j, 1], dt, sdt,
                )
                s = done + j + 1
                if s >= burn_steps and (s - burn_steps) % stride == 0:
                    r = (s - burn_steps) // stride
                    rec_p[:, r] = alpha_dag + alpha
                    rec_m[:, r] = alpha_dag - alpha
            done += todo
            peak = max(
                float(np.abs(alpha).max(initial=0.0)),
                float(np.abs(alpha_dag).max(initial=0.0)),
            )
            if peak > BLOWUP_LIMIT:
                raise TrajectoryBlowupError(
                    f"trajectory magnitude {peak:.3e} exceeded {BLOWUP_LIMIT:.1e} at step {done}"
                )

        corr_p = np.empty((width, n_lags), dtype=dtype)
        corr_m = np.empty((width, n_lags), dtype=dtype)
        base_p = rec_p[:, :n_origins]
        base_m = rec_m[:, :n_origins]
        for k in range(n_lags):
            corr_p[:, k] = (base_p * rec_p[:, k : k + n_origins]).mean(axis=1)
            corr_m[:, k] = (base_m * rec_m[:, k : k + n_origins]).mean(axis=1)

        gid = np.arange(lo, hi) % groups
        for g in range(groups):
            mask = gid == g
            if mask.any():
                group_sum_p[g] += corr_p[mask].sum(axis=0)
                group_sum_m[g] += corr_m[mask].sum(axis=0)
                group_count[g] += int(mask.sum())

    group_p = group_sum_p / group_count[:, None]
    group_m = group_sum_m / group_count[:, None]
    corr_plus = (group_sum_p.sum(axis=0) / n_traj).astype(complex)
    corr_minus = (group_sum_m.sum(axis=0) / n_traj).astype(complex)
    se_p = np.real(np.std(group_p, axis=0, ddof=1)) / math.sqrt(groups)
    se_m = np.real(np.std(group_m, axis=0, ddof=1)) / math.sqrt(groups)
    return CorrelationEstimate(
        tau=tau,
        corr_plus=corr_plus,
        corr_plus_se=se_p,
        corr_minus=corr_minus,
        corr_minus_se=se_m,
        n_traj=n_traj,
        group_plus=np.asarray(group_p),
        group_minus=np.asarray(group_m),
    )


def _snr_mask(mean: np.ndarray, se: np.ndarray) -> np.ndarray:
    """Leading contiguous run of lags where the signal clears 4 standard errors."""
    clear = np.real(mean) > 4.0 * se
    limit = int(np.argmin(clear)) if not clear.all() else clear.size
    mask = np.zeros(clear.size, dtype=bool)
    mask[:limit] = True
    return mask


def _group_slopes(tau: np.ndarray, group_means: np.ndarray, mean: np.ndarray, se: np.ndarray):
    """Per-group exponential decay rates from log-linear fits."""
    usable = _snr_mask(mean, se)
    if usable.sum() < 3:
        raise InvalidParameterError(
            "correlation too noisy for a decay fit; increase n_traj or t_avg"
        )
    slopes = []
    for row in np.real(group_means):
        vals = row[usable]
        pts = vals > 0
        if pts.sum() < 3:
            raise InvalidParameterError("group correlation nonpositive; increase statistics")
        slopes.append(np.polyfit(tau[usable][pts], np.log(vals[pts]), 1)[0])
    return np.array(slopes), usable


def fit_decay_rates(est: CorrelationEstimate) -> DecayFit:
    """Fitted decay rates of corr_plus (-> lambda_minus) and corr_minus (-> lambda_plus)."""
    slopes_p, _ = _group_slopes(est.tau, est.group_plus, np.real(est.corr_plus), est.corr_plus_se)
    slopes_m, _ = _group_slopes(est.tau, est.group_minus, np.real(est.corr_minus), est.corr_minus_se)
    j = slopes_p.size
    return DecayFit(
        rate_plus=float(-slopes_p.mean()),
        rate_plus_se=float(slopes_p.std(ddof=1) / math.sqrt(j)),
        rate_minus=float(-slopes_m.mean()),
        rate_minus_se=float(slopes_m.std(ddof=1) / math.sqrt(j)),
    )


def spectrum_from_correlation(
    est: CorrelationEstimate, kappa: float, omega_grid
) -> SpectrumEstimate:
    """Numerically integrated spectra 1 +- 2 kappa Re int C(tau) e^{i omega tau} dtau.

    The measured correlation is integrated by the trapezoid rule on its tau
    grid and completed beyond tau_max with the fitted exponential tail.
    Means and standard errors come from the per-group estimates.
    """
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    slopes_p, _ = _group_slopes(est.tau, est.group_plus, np.real(est.corr_plus), est.corr_plus_se)
    slopes_m, _ = _group_slopes(est.tau, est.group_minus, np.real(est.corr_minus), est.corr_minus_se)
    tau = est.tau
    t_max = tau[-1]

    def one_branch(group_means, slopes, sign):
        vals = np.empty((group_means.shape[0], omega.size))
        for j, row in enumerate(np.real(group_means)):
            lam = max(-slopes[j], 1e-12)
            tail = row[-1] * (
                lam * np.cos(omega * t_max) - omega * np.sin(omega * t_max)
            ) / (lam**2 + omega**2)
            core = np.trapezoid(row[None, :] * np.cos(omega[:, None] * tau[None, :]), tau, axis=1)
            vals[j] = 1.0 + sign * 2.0 * kappa * (core + tail)
        return vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])

    s_plus, se_plus = one_branch(est.group_plus, slopes_p, +1.0)
    s_minus, se_minus = one_branch(est.group_minus, slopes_m, -1.0)
    return SpectrumEstimate(
        omega=omega, s_plus=s_plus, s_plus_se=se_plus, s_minus=s_minus, s_minus_se=se_minus
    )
