"""Deterministic propagation of the closed linear moment system.

The first and second moments of the cavity mode form a closed linear ODE
system (X = U - V + epsilon):

    d<alpha>/dt        = -(S-R) <alpha> + X <alpha>*
    d<alpha^2>/dt      = -2(S-R) <alpha^2> + 2 X <alpha* alpha> + (epsilon - 2V)
    d<alpha* alpha>/dt = -2(S-R) <alpha* alpha> + X (<alpha*^2> + <alpha^2>) + 2R

The quadrature combinations <alpha_+-^2> = 2 Re<alpha^2> +- 2 <alpha* alpha>
obey their own decoupled equations

    d<alpha_+-^2>/dt = -2 lambda_-+ <alpha_+-^2> + 2 (epsilon - 2V +- 2R)

which are integrated redundantly here and checked against the combination
of the primary channels at every record point: a cheap, independent
transient oracle for the closed-form module and the Monte Carlo engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NotStableError, StepSizeError
from .params import SystemParams, coefficients, threshold_tolerance

__all__ = ["MomentState", "propagate", "steady_from_linear_solve"]


@dataclass(frozen=True)
class MomentState:
    """Moments at one instant; var_flow_plus/minus are the redundant channel."""

    t: float
    mean_alpha: complex
    alpha_sq: complex
    n_cl: float
    var_flow_plus: float
    var_flow_minus: float


def _rhs(y: np.ndarray, c) -> np.ndarray:
    decay, x = c.decay, c.coupling
    mean, asq, ncl, vp, vm = y
    return np.array(
        [
            -decay * mean + x * np.conj(mean),
            -2.0 * decay * asq + 2.0 * x * ncl + (c.epsilon - 2.0 * c.v),
            -2.0 * decay * ncl + x * (np.conj(asq) + asq) + 2.0 * c.r,
            -2.0 * c.lambda_minus * vp + 2.0 * c.diffusion_plus,
            -2.0 * c.lambda_plus * vm + 2.0 * c.diffusion_minus,
        ],
        dtype=complex,
    )


def _integrate(y0: np.ndarray, c, t_end: float, dt: float, record_every: int):
    states = []
    y = y0.copy()
    n_steps = max(int(round(t_end / dt)), 1)
    dt = t_end / n_steps
    t = 0.0
    for step in range(n_steps + 1):
        if step % record_every == 0 or step == n_steps:
            states.append((t, y.copy()))
        if step == n_steps:
            break
        k1 = _rhs(y, c)
        k2 = _rhs(y + 0.5 * dt * k1, c)
        k3 = _rhs(y + 0.5 * dt * k2, c)
        k4 = _rhs(y + dt * k3, c)
        y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        t = (step + 1) * dt
    return states


def propagate(
    p: SystemParams,
    t_end: float,
    dt: float | None = None,
    initial: MomentState | None = None,
    n_records: int = 200,
    check_accuracy: bool = True,
) -> list[MomentState]:
    """RK4 integration of the moment system from vacuum (or `initial`).

    The redundant quadrature channel is cross-checked against
    2 n_cl +- 2 Re<alpha^2> at every record point; `check_accuracy`
    additionally re-integrates the final point at dt/2 and raises
    StepSizeError if the two disagree beyond the RK4 error budget.
    """
    if t_end < 0:
        raise InvalidParameterError(f"t_end must be >= 0, got {t_end}")
    c = coefficients(p)
    if dt is None:
        dt = 0.01 / max(c.lambda_plus, abs(c.lambda_minus), 1.0)
    if dt <= 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")

    if initial is None:
        y0 = np.zeros(5, dtype=complex)
    else:
        y0 = np.array(
            [
                initial.mean_alpha,
                initial.alpha_sq,
                initial.n_cl,
                initial.var_flow_plus,
                initial.var_flow_minus,
            ],
            dtype=complex,
        )

    if t_end == 0:
        raw = [(0.0, y0)]
    else:
        record_every = max(int(round(t_end / dt)) // max(n_records, 1), 1)
        raw = _integrate(y0, c, t_end, dt, record_every)

    states = []
    for t, y in raw:
        mean, asq, ncl, vp, vm = y
        if not np.all(np.isfinite([mean, asq, ncl, vp, vm])):
            raise StepSizeError(f"integration diverged by t = {t:.6g}; reduce dt")
        scale = 1.0 + abs(vp) + abs(vm)
        # redundant channel must reconstruct from the primary moments
        if abs(vp - (2.0 * asq.real + 2.0 * ncl)) > 1e-7 * scale or abs(
            vm - (2.0 * asq.real - 2.0 * ncl)
        ) > 1e-7 * scale:
            raise StepSizeError(
                f"redundant quadrature channel deviates at t = {t:.6g}; reduce dt"
            )
        states.append(
            MomentState(
                t=t,
                mean_alpha=complex(mean),
                alpha_sq=complex(asq),
                n_cl=float(ncl.real),
                var_flow_plus=float(vp.real),
                var_flow_minus=float(vm.real),
            )
        )

    if check_accuracy and t_end > 0:
        fine = _integrate(y0, c, t_end, dt / 2.0, 10**9)[-1][1]
        coarse = np.array(
            [
                states[-1].mean_alpha,
                states[-1].alpha_sq,
                states[-1].n_cl,
                states[-1].var_flow_plus,
                states[-1].var_flow_minus,
            ],
            dtype=complex,
        )
        err = np.abs(fine - coarse).max()
        if err > 1e-6 * (1.0 + np.abs(fine).max()):
            raise StepSizeError(
                f"step-halving estimates integration error {err:.3e}; reduce dt"
            )
    return states


def steady_from_linear_solve(p: SystemParams) -> MomentState:
    """Stationary moments from the zeroed-derivative 3x3 linear system.

    Unknowns (Re<alpha^2>, Im<alpha^2>, <alpha* alpha>); the system is
    singular exactly at threshold, where no steady state exists.
    """
    # var_flow fields hold <alpha_+-^2> = 2 Re<alpha^2> +- 2 <alpha* alpha>
    c = coefficients(p)
    if c.lambda_minus <= threshold_tolerance(p):
        raise NotStableError(
            f"stationary system singular: lambda_minus = {c.lambda_minus:.6g}",
            lambda_minus=c.lambda_minus,
        )
    decay, x = c.decay, c.coupling
    mat = np.array(
        [
            [-2.0 * decay, 0.0, 2.0 * x],
            [0.0, -2.0 * decay, 0.0],
            [2.0 * x, 0.0, -2.0 * decay],
        ]
    )
    rhs = -np.array([c.epsilon - 2.0 * c.v, 0.0, 2.0 * c.r])
    re_asq, im_asq, ncl = np.linalg.solve(mat, rhs)
    return MomentState(
        t=np.inf,
        mean_alpha=0.0 + 0.0j,
        alpha_sq=complex(re_asq, im_asq),
        n_cl=float(ncl),
        var_flow_plus=float(2.0 * re_asq + 2.0 * ncl),
        var_flow_minus=float(2.0 * re_asq - 2.0 * ncl),
    )
