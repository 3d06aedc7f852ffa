"""Closed-form results: quadrature variances, squeezing spectra, transients,
Gaussian Q-function coefficients and the photon-number distribution.

Everything here follows from the linear quadrature dynamics

    d<alpha_+-^2>/dt = -2 lambda_-+ <alpha_+-^2> + 2 (epsilon - 2V +- 2R)

started from vacuum, so the cavity state is a zero-mean Gaussian at all
times.  The second moments <alpha^2> and <alpha* alpha> determine the
characteristic-function coefficients a = 1 + <alpha* alpha>, b = <alpha^2>
and hence the Q function

    Q(alpha) = sqrt(c^2 - d^2)/pi * exp(-c |alpha|^2 + d Re alpha^2),
    c = a / (a^2 - b^2),   d = b / (a^2 - b^2),

from which the photon-number distribution has an exact finite-sum form.
<alpha^2> is real throughout (real couplings, vacuum start), so b and d
are treated as real numbers everywhere.

Vacuum convention: quadrature variances equal 1 in vacuum,
Delta a_+-^2 = 1 +- <alpha_+-^2>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError, NotStableError, QFunctionUndefinedError
from .params import Coefficients, SystemParams, coefficients, threshold_tolerance

__all__ = [
    "QuadratureVariances",
    "GaussianRecord",
    "SpectrumCurve",
    "PhotonDistribution",
    "threshold_minus_curve",
    "no_crystal_minus_curve",
    "steady_alpha_sq",
    "variance_steady",
    "variance_threshold",
    "variance_no_crystal",
    "minimize_minus_variance",
    "spectrum",
    "transient_moments",
    "steady_record",
    "mean_photon_number",
    "q_function",
    "photon_distribution",
]


@dataclass(frozen=True)
class QuadratureVariances:
    """Variances of a_+ = a^dag + a and a_- = i(a^dag - a); vacuum = 1.

    `plus` is math.inf exactly at threshold (the antisqueezed quadrature
    stops relaxing); `minus` is strictly positive everywhere.
    """

    plus: float
    minus: float


@dataclass(frozen=True)
class GaussianRecord:
    """Second moments and Q-function coefficients of the cavity Gaussian at time t.

    alpha_sq = <alpha^2> (real), n_cl = <alpha* alpha>,
    a = 1 + n_cl and b = alpha_sq are the characteristic-function
    coefficients, c and d the Q-function coefficients.
    """

    t: float
    alpha_sq: float
    n_cl: float
    a: float
    b: float
    c: float
    d: float


@dataclass(frozen=True)
class SpectrumCurve:
    """Output squeezing spectra on a frequency grid; vacuum level = 1."""

    omega: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray


@dataclass(frozen=True)
class PhotonDistribution:
    """P(0..n_max); tiny negative round-off (> -1e-12) clipped to zero."""

    probs: np.ndarray
    n_max: int

    def total(self) -> float:
        return float(self.probs.sum())

    def mean(self) -> float:
        return float(np.arange(self.n_max + 1) @ self.probs)


# ---------------------------------------------------------------------------
# steady-state quadrature moments and variances
# ---------------------------------------------------------------------------

def steady_alpha_sq(coeffs: Coefficients) -> tuple[float, float]:
    """Steady-state <alpha_+^2> and <alpha_-^2>: (epsilon - 2V +- 2R) / lambda_-+.

    Requires lambda_minus > 0 (lambda_plus is then positive as well).
    """
    if coeffs.lambda_minus <= 0:
        raise NotStableError(
            f"no steady state: lambda_minus = {coeffs.lambda_minus:.6g} <= 0",
            lambda_minus=coeffs.lambda_minus,
        )
    return (
        coeffs.diffusion_plus / coeffs.lambda_minus,
        coeffs.diffusion_minus / coeffs.lambda_plus,
    )


def variance_steady(p: SystemParams) -> QuadratureVariances:
    """Steady-state quadrature variances, 1 +- <alpha_+-^2>.

    Exactly at threshold the plus variance is reported as math.inf and the
    minus variance by its finite threshold form.  Above threshold there is
    no steady state and NotStableError is raised.
    """
    c = coefficients(p)
    tol = threshold_tolerance(p)
    if c.lambda_minus < -tol:
        raise NotStableError(
            f"above threshold: lambda_minus = {c.lambda_minus:.6g} < 0",
            lambda_minus=c.lambda_minus,
        )
    if c.lambda_minus <= tol:
        return QuadratureVariances(plus=math.inf, minus=variance_threshold(p).minus)
    s_plus, s_minus = steady_alpha_sq(c)
    return QuadratureVariances(plus=1.0 + s_plus, minus=1.0 - s_minus)


def variance_threshold(p: SystemParams) -> QuadratureVariances:
    """Variances with the drive pinned at threshold (epsilon field ignored).

    plus diverges; minus = (2 kappa B + 3 A beta^2) / (4 kappa B + 6 A beta).
    """
    beta = p.beta
    b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
    minus = (2.0 * p.kappa * b + 3.0 * p.a * beta**2) / (
        4.0 * p.kappa * b + 6.0 * p.a * beta
    )
    return QuadratureVariances(plus=math.inf, minus=minus)


def variance_no_crystal(p: SystemParams) -> QuadratureVariances:
    """Variances of the coherently driven laser alone (epsilon = 0).

    For beta >~ sqrt(2) and large gain the plus-quadrature denominator
    2 kappa B + A (2 beta - beta^3) can reach zero: the undriven system is
    itself unstable there and NotStableError is raised.
    """
    beta = p.beta
    b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
    two_kb = 2.0 * p.kappa * b
    den_plus = two_kb + p.a * (2.0 * beta - beta**3)
    if den_plus <= 0:
        raise NotStableError(
            f"unstable without the crystal: 2 kappa B + A(2 beta - beta^3) = {den_plus:.6g} <= 0",
            lambda_minus=den_plus / (4.0 * b),
        )
    plus = (two_kb + p.a * (4.0 + beta**2)) / den_plus
    minus = (two_kb + 3.0 * p.a * beta**2) / (two_kb + p.a * (4.0 * beta + beta**3))
    return QuadratureVariances(plus=plus, minus=minus)


def threshold_minus_curve(a: float, kappa: float, betas) -> np.ndarray:
    """Vectorized at-threshold squeezed variance over a beta grid."""
    beta = np.asarray(betas, dtype=float)
    b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
    return (2.0 * kappa * b + 3.0 * a * beta**2) / (4.0 * kappa * b + 6.0 * a * beta)


def no_crystal_minus_curve(a: float, kappa: float, betas) -> np.ndarray:
    """Vectorized epsilon = 0 squeezed variance over a beta grid."""
    beta = np.asarray(betas, dtype=float)
    b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
    two_kb = 2.0 * kappa * b
    return (two_kb + 3.0 * a * beta**2) / (two_kb + a * (4.0 * beta + beta**3))


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_minus_variance(
    a: float, kappa: float, mode: str = "threshold"
) -> tuple[float, float]:
    """Minimize the squeezed-quadrature variance over beta in [0, 2].

    mode "threshold" minimizes the at-threshold form, "no_crystal" the
    epsilon = 0 form.  Grid scan at step 1e-4 followed by golden-section
    refinement to |d beta| <= 1e-6; on plateaus the smallest beta wins.
    """
    if a < 0 or kappa <= 0:
        raise InvalidParameterError(f"need a >= 0 and kappa > 0, got a={a}, kappa={kappa}")
    if mode == "threshold":
        def f(beta):
            b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
            return (2.0 * kappa * b + 3.0 * a * beta**2) / (4.0 * kappa * b + 6.0 * a * beta)
    elif mode == "no_crystal":
        def f(beta):
            b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
            two_kb = 2.0 * kappa * b
            return (two_kb + 3.0 * a * beta**2) / (two_kb + a * (4.0 * beta + beta**3))
    else:
        raise InvalidParameterError(f"mode must be 'threshold' or 'no_crystal', got {mode!r}")

    grid = np.arange(0.0, 2.0 + 5e-5, 1e-4)
    vals = f(grid)
    i = int(np.argmin(vals))  # first hit -> smallest beta on plateaus

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if f(lo) == vals[i] == f(hi):
        return float(grid[i]), float(vals[i])

    # golden-section refinement of the bracketing interval
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > 1e-6:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    beta_star = lo if f(lo) <= f(hi) else hi
    return float(beta_star), float(f(beta_star))


# ---------------------------------------------------------------------------
# squeezing spectrum
# ---------------------------------------------------------------------------

def spectrum(p: SystemParams, omega_grid) -> SpectrumCurve:
    """Output squeezing spectra S_+-(omega); input-output scaling sqrt(kappa).

    Below threshold both are Lorentzian corrections to the vacuum level:
    S_+- = 1 +- 2 kappa (epsilon - 2V +- 2R) / (lambda_-+^2 + omega^2).
    Exactly at threshold lambda_minus = 0 and the dedicated threshold forms
    are used (S_plus diverges as 1/omega^2).  Above threshold the plus
    spectrum does not exist and NotStableError is raised.
    """
    omega = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    c = coefficients(p)
    tol = threshold_tolerance(p)
    if c.lambda_minus < -tol:
        raise NotStableError(
            f"above threshold: lambda_minus = {c.lambda_minus:.6g} < 0",
            lambda_minus=c.lambda_minus,
        )
    if c.lambda_minus <= tol:
        return _spectrum_threshold(p, omega)
    s_plus = 1.0 + 2.0 * p.kappa * c.diffusion_plus / (c.lambda_minus**2 + omega**2)
    s_minus = 1.0 - 2.0 * p.kappa * c.diffusion_minus / (c.lambda_plus**2 + omega**2)
    return SpectrumCurve(omega=omega, s_plus=s_plus, s_minus=s_minus)


def _spectrum_threshold(p: SystemParams, omega: np.ndarray) -> SpectrumCurve:
    beta, a, kappa = p.beta, p.a, p.kappa
    b = (1.0 + beta**2) * (1.0 + beta**2 / 4.0)
    two_b = 2.0 * b
    with np.errstate(divide="ignore"):
        s_plus = 1.0 + kappa * (kappa + a * (4.0 + beta**2) / two_b) / omega**2
    s_minus = 1.0 - kappa * (kappa + a * beta * (3.0 - 1.5 * beta) / b) / (
        (kappa + 3.0 * a * beta / two_b) ** 2 + omega**2
    )
    return SpectrumCurve(omega=omega, s_plus=s_plus, s_minus=s_minus)


# ---------------------------------------------------------------------------
# transient Gaussian moments, Q function, photon statistics
# ---------------------------------------------------------------------------

def _relax_integral(lam: float, t: float) -> float:
    """(1 - exp(-2 lam t)) / (4 lam), with the t/2 limiting form near lam = 0."""
    x = lam * t
    if abs(x) < 1e-6:
        return 0.5 * t * (1.0 - x)  # series of the exact expression
    return -math.expm1(-2.0 * x) / (4.0 * lam)


def _moment_pair(c: Coefficients, t: float) -> tuple[float, float]:
    """(<alpha^2>, <alpha* alpha>) at time t from a vacuum start."""
    w_minus = c.diffusion_plus * _relax_integral(c.lambda_minus, t)
    w_plus = c.diffusion_minus * _relax_integral(c.lambda_plus, t)
    return w_minus + w_plus, w_minus - w_plus


def _record_from_moments(t: float, alpha_sq: float, n_cl: float) -> GaussianRecord:
    a = 1.0 + n_cl
    b = alpha_sq
    disc = a * a - b * b
    if disc <= 0 or a <= abs(b):
        raise QFunctionUndefinedError(
            f"Q function undefined: a = {a:.6g}, b = {b:.6g} violate a > |b|"
        )
    return GaussianRecord(
        t=t, alpha_sq=alpha_sq, n_cl=n_cl, a=a, b=b, c=a / disc, d=b / disc
    )


def transient_moments(p: SystemParams, t: float) -> GaussianRecord:
    """Gaussian moment record after evolving vacuum for time t >= 0.

    Valid on both sides of threshold (for finite t); at threshold the
    lambda_minus relaxation integral smoothly becomes t/2.
    """
    if t < 0:
        raise InvalidParameterError(f"t must be >= 0, got {t}")
    alpha_sq, n_cl = _moment_pair(coefficients(p), t)
    return _record_from_moments(t, alpha_sq, n_cl)


def steady_record(p: SystemParams) -> GaussianRecord:
    """The t -> infinity moment record; requires the stable regime."""
    c = coefficients(p)
    if c.lambda_minus <= threshold_tolerance(p):
        raise NotStableError(
            f"no steady state: lambda_minus = {c.lambda_minus:.6g}",
            lambda_minus=c.lambda_minus,
        )
    w_minus = c.diffusion_plus / (4.0 * c.lambda_minus)
    w_plus = c.diffusion_minus / (4.0 * c.lambda_plus)
    return _record_from_moments(math.inf, w_minus + w_plus, w_minus - w_plus)


def mean_photon_number(p: SystemParams, t: float) -> float:
    """Mean photon number <alpha* alpha>(t); identical to transient_moments(p, t).n_cl."""
    if t < 0:
        raise InvalidParameterError(f"t must be >= 0, got {t}")
    return _moment_pair(coefficients(p), t)[1]


def q_function(record: GaussianRecord, alpha_re, alpha_im):
    """Husimi Q density at alpha = alpha_re + i alpha_im (scalar or array).

    Q = sqrt(c^2 - d^2)/pi * exp(-c |alpha|^2 + d Re alpha^2): for d > 0 the
    distribution is broad along the real axis, which carries the
    antisqueezed quadrature.  (Tracking the quadratic term of the
    antinormally ordered characteristic function through the Fourier
    transform gives +d; the truncated-Fock Husimi <alpha|rho|alpha>/pi
    confirms the orientation.  Only even powers of d enter the photon
    distribution, which is insensitive to this sign.)
    """
    c, d = record.c, record.d
    if c <= abs(d):
        raise QFunctionUndefinedError(
            f"Q function undefined: c = {c:.6g} does not exceed |d| = {abs(d):.6g}"
        )
    x = np.asarray(alpha_re, dtype=float)
    y = np.asarray(alpha_im, dtype=float)
    val = math.sqrt(c * c - d * d) / math.pi * np.exp(
        -(c - d) * x**2 - (c + d) * y**2
    )
    return val if val.ndim else float(val)


def photon_distribution(record: GaussianRecord, n_max: int) -> PhotonDistribution:
    """Photon-number distribution of the Gaussian state, exact finite sum.

    P(n) = sqrt(c^2 - d^2) * sum_{l=0}^{floor(n/2)}
           n! (1-c)^{n-2l} d^{2l} / (2^{2l} (l!)^2 (n-2l)!)

    evaluated in log-factorial form with explicit sign bookkeeping for
    (1-c)^{n-2l} (c may exceed 1 for hand-built records), so n in the
    hundreds does not overflow.
    """
    c, d = record.c, record.d
    if c <= abs(d):
        raise QFunctionUndefinedError(
            f"photon distribution undefined: c = {c:.6g} does not exceed |d| = {abs(d):.6g}"
        )
    if n_max < 0:
        raise InvalidParameterError(f"n_max must be >= 0, got {n_max}")

    one_m_c = 1.0 - c
    log_omc = math.log(abs(one_m_c)) if one_m_c != 0.0 else -math.inf
    log_d = math.log(abs(d)) if d != 0.0 else -math.inf
    neg_omc = one_m_c < 0.0
    pref = math.sqrt(c * c - d * d)
    log2 = math.log(2.0)

    probs = np.empty(n_max + 1)
    for n in range(n_max + 1):
        ell = np.arange(n // 2 + 1)
        k = n - 2 * ell
        logt = gammaln(n + 1) - 2.0 * ell * log2 - 2.0 * gammaln(ell + 1) - gammaln(k + 1)
        with np.errstate(invalid="ignore"):
            # 0 * (-inf) from the k = 0 / ell = 0 entries is masked to 0
            logt = logt + np.where(k > 0, k * log_omc, 0.0)
            logt = logt + np.where(ell > 0, 2.0 * ell * log_d, 0.0)
        top = logt.max()
        if top == -math.inf:
            probs[n] = 0.0
            continue
        signs = np.where(neg_omc & (k % 2 == 1), -1.0, 1.0)
        probs[n] = pref * math.exp(top) * float(np.sum(signs * np.exp(logt - top)))

    low = probs.min()
    if low < -1e-12:
        raise InvalidParameterError(
            f"photon distribution came out negative (min {low:.3e}); record is not a valid state"
        )
    np.clip(probs, 0.0, None, out=probs)
    return PhotonDistribution(probs=probs, n_max=n_max)
