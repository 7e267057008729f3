"""Lipschitz pseudo-inverse of the observability map.

The reconstruction ``u = Phi(Sat(S_t^{-1}(Pi_t(z))))`` turns any point
``z`` of the embedded space back into a Cartesian state:

* ``Pi_t`` projects ``z`` onto the necessary conditions satisfied by
  every true image ``S_t(X)`` with ``X`` in the working set
  ``{delta <= |v0| <= R, eta <= rho <= R, |zeta| <= R}``: the output
  component is clamped to the measured output's sign band and the first
  derivative into the reachable band of ``J0 Gamma_0^0(v0, .)``.
* ``S_t^{-1}`` inverts the map layer by layer: a bracketed bisection on
  the strictly monotone ``rho -> J0 Gamma_0^0(v0, rho)`` recovers the
  radius, two divisions by ``J0 Gamma_1^1`` peel off the second- and
  third-derivative layers, and a 2x2 linear solve against
  ``(I_(1:2); dI_(1:2))`` recovers the angular coordinate.
* ``Sat`` scales the angular block by a quintic cut-off of ``|zeta|``
  so the composite stays globally Lipschitz.
* ``Phi(X) = (X0, X1 X2, X1 X3)`` returns to Cartesian coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ringobs.errors import AssumptionViolation, NumericFailure
from ringobs.model import InputSignal, ModelParams, PolarState, gamma_block

__all__ = [
    "InverseConfig",
    "BumpSpec",
    "project_Pi",
    "solve_rho",
    "invert_S",
    "saturate",
    "phi",
    "pseudo_inverse",
    "pseudo_inverse_state",
]


@dataclass(frozen=True)
class InverseConfig:
    """Working-set geometry and root-find tolerances for the inversion.

    ``delta`` is the output floor (the observer never estimates
    ``|v0|`` below it), ``eta`` the radial floor, ``R`` the ball radius;
    the working set is ``{delta <= |v0| <= R, eta <= rho <= R}``.
    """

    delta: float
    eta: float
    R: float
    rho_tol: float = 1e-12
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not 0.0 < self.eta < self.R:
            raise ValueError(f"need 0 < eta < R, got eta={self.eta}, R={self.R}")
        if not 0.0 < self.delta <= self.R:
            raise ValueError(f"need 0 < delta <= R, got delta={self.delta}")
        if not self.rho_tol > 0.0:
            raise ValueError(f"rho_tol must be positive, got {self.rho_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class BumpSpec:
    """Quintic cut-off profile: 1 below ``R - 1``, 0 above ``R``.

    Between the two plateaus the profile descends with the quintic
    smoothstep, so it is C^2 and monotone.
    """

    R: float

    def value(self, x: float) -> float:
        a = abs(x)
        if a <= self.R - 1.0:
            return 1.0
        if a >= self.R:
            return 0.0
        s = a - (self.R - 1.0)  # in (0, 1)
        return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def _band(cfg: InverseConfig, params: ModelParams, v0: float) -> tuple[float, float]:
    """Reachable interval of ``J0 Gamma_0^0(v0, rho)`` for ``rho`` in
    ``[eta, R]``, as (low, high)."""
    lo = gamma_block(params, v0, cfg.eta, pmax=0, jmax=0)[0, 0]
    hi = gamma_block(params, v0, cfg.R, pmax=0, jmax=0)[0, 0]
    a = params.j0 * lo
    b = params.j0 * hi
    return (a, b) if a <= b else (b, a)


def project_Pi(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    z,
    y_sign: float,
    t: float,
) -> np.ndarray:
    """Project ``z`` onto the necessary conditions of the image of the
    working set.

    The output component is clamped into ``[delta, R]`` (or its mirror
    for a negative measured output); the first-derivative component is
    clamped so that ``tau z1 + z0 - I0`` lies in the reachable band of
    ``J0 Gamma_0^0(z0, .)``; the remaining components pass through.
    ``y_sign >= 0`` counts as positive.
    """
    z = np.asarray(z, dtype=float).reshape(4).copy()
    if y_sign >= 0.0:
        z[0] = min(max(z[0], cfg.delta), cfg.R)
    else:
        z[0] = min(max(z[0], -cfg.R), -cfg.delta)
    i0 = float(input_signal.value(t)[0])
    lo, hi = _band(cfg, params, z[0])
    w = params.tau * z[1] + z[0] - i0
    w = min(max(w, lo), hi)
    z[1] = (w - z[0] + i0) / params.tau
    return z


def solve_rho(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    v0: float,
    w: float,
    t: float,
) -> float:
    """Radius with ``J0 Gamma_0^0(v0, rho) = w``, by bisection on
    ``[eta, R]``.

    ``rho -> Gamma_0^0(v0, rho)`` is strictly monotone for ``v0 != 0``,
    so the bracketed bisection converges unconditionally once the
    endpoints straddle ``w`` (which the projection guarantees).

    Raises:
        NumericFailure: endpoints do not bracket ``w`` (the caller
            skipped the projection) or the loop exceeds ``max_iter``.
    """

    def f(rho: float) -> float:
        return params.j0 * gamma_block(params, v0, rho, pmax=0, jmax=0)[0, 0] - w

    a, b = cfg.eta, cfg.R
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        # A target clamped exactly onto a band endpoint can re-emerge a
        # few ulp outside it after the z1 round trip; accept an endpoint
        # whose residual is within the root-find's own guarantee.
        slack = 10.0 * cfg.rho_tol * abs(params.j0) * params.sigmoid.mu
        if min(abs(fa), abs(fb)) <= slack:
            return a if abs(fa) <= abs(fb) else b
        raise NumericFailure(
            f"rho target {w} outside the reachable band at v0={v0} "
            "(projection not applied?)"
        )
    for _ in range(cfg.max_iter):
        if b - a <= cfg.rho_tol:
            return 0.5 * (a + b)
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    raise NumericFailure(
        f"rho bisection did not reach tol {cfg.rho_tol} in {cfg.max_iter} "
        "iterations"
    )


def invert_S(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    z,
    t: float,
) -> PolarState:
    """Layerwise inverse of the observability map at a projected point.

    Peels the derivative stack: ``v0 = z0``; ``rho`` by bisection;
    ``F1`` by dividing the second-derivative layer by ``J0 Gamma_1^1``;
    that gives ``s = I_(1:2) . zeta``; the third-derivative layer gives
    the radial second derivative and from it ``ds/dt``'s angular part
    ``u = dI_(1:2) . zeta``; finally ``zeta`` solves the 2x2 system
    ``(I_(1:2); dI_(1:2)) zeta = (s, u)``.

    The radial sensitivity ``J0 Gamma_1^1`` is strictly nonzero in exact
    arithmetic but underflows where a steep firing-rate function is
    saturated across the whole ring; there the divisions use a
    sign-preserving floor of ``1e-13 |J0| mu`` instead of failing, which
    makes the inverse total — the resulting large angular block is
    cut off by the saturation stage, so downstream values stay bounded.

    Raises:
        AssumptionViolation: the input wedge ``|I ^ dI|`` at ``t`` is
            below half its certified bound (singular angular system).
        NumericFailure: bisection failure in the radial solve.
    """
    z = np.asarray(z, dtype=float).reshape(4)
    tau = params.tau
    j0, j1 = params.j0, params.j1
    jet = input_signal.jet4(t)
    i_now, i_d1, i_d2 = jet[0], jet[1], jet[2]
    v0 = float(z[0])
    w = tau * z[1] + v0 - i_now[0]
    rho = solve_rho(cfg, params, input_signal, v0, w, t)
    G = gamma_block(params, v0, rho, pmax=2, jmax=2)
    g11 = j0 * G[1, 1]
    g11_floor = 1e-13 * abs(j0) * params.sigmoid.mu
    if abs(g11) < g11_floor:
        g11 = math.copysign(g11_floor, g11)
    F0 = z[1]
    # second-derivative layer: tau z2 = (-1 + J0 G10) F0 + J0 G11 F1 + dI0
    F1 = (tau * z[2] - (-1.0 + j0 * G[1, 0]) * F0 - i_d1[0]) / g11
    s = tau * F1 + rho - j1 * G[0, 1]
    # third-derivative layer: tau z3 = (-1 + J0 G10) z2 + J0 G20 F0^2
    #   + 2 J0 G21 F0 F1 + J0 G22 F1^2 + J0 G11 LF1 + d2I0
    LF1 = (
        tau * z[3]
        - (-1.0 + j0 * G[1, 0]) * z[2]
        - j0 * G[2, 0] * F0 * F0
        - 2.0 * j0 * G[2, 1] * F0 * F1
        - j0 * G[2, 2] * F1 * F1
        - i_d2[0]
    ) / g11
    q = float(i_now[1] ** 2 + i_now[2] ** 2)
    sigma_rho = (q - s * s) / (tau * rho)
    u = tau * LF1 - j1 * G[1, 1] * F0 - (-1.0 + j1 * G[1, 2]) * F1 - sigma_rho
    det = float(i_now[1] * i_d1[2] - i_now[2] * i_d1[1])
    if abs(det) < max(0.5 * input_signal.mu_wedge, 1e-300) or det == 0.0:
        raise AssumptionViolation(
            f"input wedge {det} at t={t} below half the certified bound "
            f"{input_signal.mu_wedge}; angular system singular"
        )
    zeta = np.array(
        [
            (s * i_d1[2] - u * i_now[2]) / det,
            (i_now[1] * u - i_d1[1] * s) / det,
        ]
    )
    return PolarState(v0, rho, zeta)


def saturate(bump: BumpSpec, X: PolarState) -> PolarState:
    """Scale the angular block by the cut-off of its own magnitude."""
    p = bump.value(float(np.hypot(X.zeta[0], X.zeta[1])))
    return PolarState(X.v0, X.rho, p * X.zeta)


def phi(X: PolarState) -> np.ndarray:
    """Back to Cartesian: ``(X0, X1 X2, X1 X3)``."""
    return np.array([X.v0, X.rho * X.zeta[0], X.rho * X.zeta[1]])


def pseudo_inverse_state(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    z,
    y_sign: float,
    t: float,
) -> PolarState:
    """Saturated polar reconstruction ``Sat(S_t^{-1}(Pi_t(z)))``.

    This is the reconstruction *before* the return to Cartesian
    coordinates: it retains the radial estimate ``rho`` as a separate
    component even when the angular cut-off has scaled ``zeta`` to zero.
    The high-gain drive is evaluated here rather than on the Cartesian
    output: where the angular solve is ill-conditioned (a transient
    observer error amplified by the 2x2 input system), the Cartesian
    point ``(v0, 0, 0)`` would feed the drive with the zero-modulation
    limit and hold it a fixed distance from the true drive, which can
    trap the observer in a spurious equilibrium; keeping ``rho`` makes
    the drive mismatch shrink with the embedded error and lets the
    cut-off release once the estimate has converged.
    """
    zp = project_Pi(cfg, params, input_signal, z, y_sign, t)
    X = invert_S(cfg, params, input_signal, zp, t)
    return saturate(BumpSpec(cfg.R), X)


def pseudo_inverse(
    cfg: InverseConfig,
    params: ModelParams,
    input_signal: InputSignal,
    z,
    y_sign: float,
    t: float,
) -> np.ndarray:
    """Full reconstruction ``Phi(Sat(S_t^{-1}(Pi_t(z))))``.

    Total on all of R^4 (after projection); exact on images of the
    working set: for ``v`` with ``delta <= |v0| <= R``,
    ``eta <= |v_(1:2)| <= R`` and matching output sign, it returns ``v``;
    for ``|v_(1:2)| < eta`` the first component stays exact and the
    modulation error is at most ``eta``.
    """
    return phi(pseudo_inverse_state(cfg, params, input_signal, z, y_sign, t))
