"""Hybrid high-gain observer reconstructing the state from ``y = v0``.

Away from the output threshold (``|y| > delta``) the observer runs in
its embedded linear coordinates: the estimate ``z_hat`` follows

    dz/dt = A z + L4h(Tinv_t(z), t) W - P_l^{-1} C^T (C z - y),

where ``A`` is the 4x4 upper shift, ``C = (1,0,0,0)``, ``W = (0,0,0,1)``
and ``Tinv_t`` is the Lipschitz pseudo-inverse; the state estimate is
``v_hat = Tinv_t(z_hat)``.  Inside the threshold band (``|y| < delta``)
the observability map degenerates, so the observer free-runs an open
loop copy of the plant, ``dv_hat/dt = f(v_hat, t)``.  Mode changes
apply the jump maps ``v_hat := Tinv_t(z_hat)`` (continuous) and
``z_hat := T_t(v_hat)``; under the persistence assumptions the output
crosses the band at most once, so more than two switches in one run
signal a violated assumption.

The gain family ``P_l`` satisfies the algebraic Lyapunov identity
``P_l A + A^T P_l - C^T C = -l P_l``, which yields the high-gain
convergence rate; the correction gain is ``K = P_l^{-1} C^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ringobs.errors import AssumptionViolation
from ringobs.inverse import InverseConfig, pseudo_inverse, pseudo_inverse_state
from ringobs.model import InputSignal, ModelParams, f_cartesian
from ringobs.observability import T_map

__all__ = [
    "GainMatrix",
    "ObserverState",
    "gain_matrix",
    "z_mode_rhs",
    "v_mode_rhs",
    "step_observer",
    "observer_init",
]

#: Upper-shift system matrix of the embedded chain of integrators.
A_SHIFT = np.eye(4, k=1)
#: Output selector.
C_ROW = np.array([1.0, 0.0, 0.0, 0.0])
#: Nonlinearity injection vector (last component only).
W_COL = np.array([0.0, 0.0, 0.0, 1.0])


@dataclass(frozen=True)
class GainMatrix:
    """High-gain correction data for one gain value ``l``.

    ``P`` is the symmetric positive-definite Lyapunov matrix with
    ``P(i, j) = (-1)^(i+j) / l^(i+j-1) * (i+j-2)! / ((i-1)!(j-1)!)``
    (1-indexed), ``P_inv`` its exact inverse, and ``K = P^{-1} C^T``
    the output-injection gain.
    """

    l: float
    P: np.ndarray
    P_inv: np.ndarray
    K: np.ndarray


def gain_matrix(l: float) -> GainMatrix:
    """Build the gain family member for ``l >= 1``.

    Raises:
        ValueError: if ``l < 1``.
    """
    if not l >= 1.0:
        raise ValueError(f"gain l must be >= 1, got {l}")
    P = np.empty((4, 4))
    for i in range(1, 5):
        for j in range(1, 5):
            P[i - 1, j - 1] = (
                (-1.0) ** (i + j)
                / l ** (i + j - 1)
                * math.factorial(i + j - 2)
                / (math.factorial(i - 1) * math.factorial(j - 1))
            )
    P_inv = np.linalg.inv(P)
    K = P_inv @ C_ROW
    return GainMatrix(l=float(l), P=P, P_inv=P_inv, K=K)


@dataclass(frozen=True)
class ObserverState:
    """Observer phase: mode, embedded state, estimate, switch history.

    ``z_hat`` is ``None`` while free-running (the embedded coordinates
    are only meaningful away from the threshold band); ``v_hat`` is
    always available.  ``switch_log`` holds ``(time, direction)`` pairs
    with direction ``"z->v"`` or ``"v->z"``.
    """

    mode: str  # "z" or "v"
    v_hat: np.ndarray
    z_hat: Optional[np.ndarray] = None
    switch_log: tuple = ()


def z_mode_rhs(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    gain: GainMatrix,
    z_hat: np.ndarray,
    y: float,
    t: float,
) -> np.ndarray:
    """Embedded-coordinate observer field
    ``A z + L4h(Sat(Sinv_t(Pi_t(z))), t) W - K (z0 - y)``.

    The drive is evaluated at the saturated *polar* reconstruction, not
    at its Cartesian image: while the angular cut-off is active the
    Cartesian point degenerates to zero modulation and would hold the
    drive a fixed distance from the truth, whereas the polar state keeps
    the radial estimate so the mismatch contracts with the embedded
    error.  On states with an inactive cut-off the two coincide.
    """
    from ringobs.observability import L4h_polar  # local import avoids cycle

    z_hat = np.asarray(z_hat, dtype=float)
    X = pseudo_inverse_state(cfg, params, input_signal, z_hat, y, t)
    drive = L4h_polar(params, input_signal, X, t)
    out = np.empty(4)
    out[:3] = z_hat[1:]
    out[3] = drive
    out -= gain.K * (z_hat[0] - y)
    return out


def v_mode_rhs(
    params: ModelParams, input_signal: InputSignal, v_hat: np.ndarray, t: float
) -> np.ndarray:
    """Open-loop copy of the plant field."""
    return f_cartesian(params, input_signal, v_hat, t)


def observer_init(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    v_hat0,
    y0: float,
    t0: float,
) -> ObserverState:
    """Initial observer state from an initial guess ``v_hat0``.

    Starts in embedded mode with ``z_hat = T_t0(v_hat0)`` when the
    measured output is outside the threshold band (ties count as
    outside), else free-running.
    """
    v_hat0 = np.asarray(v_hat0, dtype=float).reshape(3).copy()
    if abs(y0) >= cfg.delta:
        z0 = T_map(params, input_signal, v_hat0, t0)
        return ObserverState(mode="z", v_hat=v_hat0, z_hat=z0)
    return ObserverState(mode="v", v_hat=v_hat0, z_hat=None)


def _rk4(rhs, x, t, dt):
    k1 = rhs(x, t)
    k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_observer(
    state: ObserverState,
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    gain: GainMatrix,
    y: float,
    t: float,
    dt: float,
) -> ObserverState:
    """Advance the observer by one step with the output sample ``y`` at ``t``.

    If the sample sits on the other side of the threshold band than the
    current mode, the jump map is applied at the step boundary first
    (``v_hat := Tinv_t(z_hat)`` leaving embedded mode — continuous —
    and ``z_hat := T_t(v_hat)`` entering it), the switch is logged, and
    the step proceeds in the new mode.  A sample exactly on the
    threshold keeps the current mode, deferring the classification one
    step.  The output is held constant across the step's internal
    stages.

    Raises:
        AssumptionViolation: a third switch is requested (the output
            band may be crossed at most once under the persistence
            assumptions).
    """
    mode = state.mode
    v_hat = state.v_hat
    z_hat = state.z_hat
    log = state.switch_log
    gap = abs(y) - cfg.delta
    desired = "z" if gap > 0.0 else ("v" if gap < 0.0 else mode)
    if desired != mode:
        if len(log) >= 2:
            raise AssumptionViolation(
                f"third observer switch requested at t={t}; the output "
                "band may be crossed at most once under the stated input "
                "assumptions"
            )
        if mode == "z":
            v_hat = pseudo_inverse(cfg, params, input_signal, z_hat, y, t)
            z_hat = None
            log = log + ((t, "z->v"),)
        else:
            z_hat = T_map(params, input_signal, v_hat, t)
            log = log + ((t, "v->z"),)
        mode = desired
    if mode == "z":
        z_next = _rk4(
            lambda z, s: z_mode_rhs(cfg, params, input_signal, gain, z, y, s),
            np.asarray(z_hat, dtype=float),
            t,
            dt,
        )
        if not np.all(np.isfinite(z_next)):
            raise AssumptionViolation(
                f"observer state diverged at t={t + dt} (non-finite z_hat)"
            )
        v_next = pseudo_inverse(cfg, params, input_signal, z_next, y, t + dt)
        return ObserverState(mode="z", v_hat=v_next, z_hat=z_next, switch_log=log)
    v_next = _rk4(
        lambda v, s: v_mode_rhs(params, input_signal, v, s),
        np.asarray(v_hat, dtype=float),
        t,
        dt,
    )
    if not np.all(np.isfinite(v_next)):
        raise AssumptionViolation(
            f"observer state diverged at t={t + dt} (non-finite v_hat)"
        )
    return ObserverState(mode="v", v_hat=v_next, z_hat=None, switch_log=log)
