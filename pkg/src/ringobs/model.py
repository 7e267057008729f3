"""Reduced planar neural-field model: sigmoid, selectivity average, dynamics.

The plant is the three-dimensional voltage model

    tau * dv/dt = -v + Psi(v) + I(t),        y = v0,

where ``v = (v0, v1, v2)`` collects the mean potential and the two
orientation-modulation components.  The nonlinearity averages a sigmoid
over orientation ``theta in [-pi/2, pi/2)`` and selectivity ``r >= 0``
distributed as ``P(r)``:

    Psi_0(v)   = J0 * int sigma(V(r, theta, v)) P(r) dtheta dr / pi,
    Psi_1(v)   = J1 * int r cos(2 theta) sigma(V(r, theta, v)) P(r) dtheta dr / pi,
    Psi_2(v)   = J1 * int r sin(2 theta) sigma(V(r, theta, v)) P(r) dtheta dr / pi,

with the voltage profile ``V(r, theta, v) = v0 + r (v1 cos 2theta + v2 sin 2theta)``.

Writing ``v_(1:2) = rho * zeta`` with ``|zeta| = 1``, every such integral
reduces by rotation equivariance to the two-argument family

    Gamma_p^j(v0, rho) = int r^j cos(2 theta)^j sigma^(p)(v0 + r rho cos 2theta)
                             P(r) dtheta dr / pi,

which this module evaluates with a periodic trapezoidal rule in ``theta``
(the integrand is pi-periodic and smooth, so the rule converges
spectrally) and the distribution's node sum in ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "SigmoidSpec",
    "SelectivityDistribution",
    "ModelParams",
    "InputSignal",
    "PolarState",
    "TransformResult",
    "sigma_eval",
    "gamma",
    "gamma_block",
    "f_cartesian",
    "F_polar",
    "invariant_radius",
    "reduce_model",
    "activity_state_to_voltage",
    "circular_input",
    "constant_input",
]


# ---------------------------------------------------------------------------
# Parameter objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmoidSpec:
    """Sigmoid family ``sigma(x) = s1 tanh(mu x - h0) + s2``.

    ``transform = (s1, s2, h0)`` selects the member: the default
    ``(1, 0, 0)`` is the odd base ``tanh(mu x)``; ``s1, s2`` describe a
    scaled/shifted (e.g. strictly positive) sigmoid and ``h0`` an
    activation threshold *in argument units* (the thresholded
    nonlinearity is ``tanh(mu x - h0)``).  All evaluators apply the
    transform; :func:`reduce_model` converts between equivalent
    models with different transforms.

    Attributes:
        mu: Slope gain of the base map; ``sup sigma' = s1 mu``.  Positive.
        derivative_order_max: Highest derivative order available (>= 4).
        transform: ``(s1, s2, h0)`` with ``s1 > 0``.
    """

    mu: float = 1.0
    derivative_order_max: int = 4
    transform: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"sigmoid gain mu must be positive, got {self.mu}")
        if self.derivative_order_max < 4:
            raise ValueError(
                "derivative_order_max must be at least 4, got "
                f"{self.derivative_order_max}"
            )
        s1 = self.transform[0]
        if not s1 > 0:
            raise ValueError(f"sigmoid scale s1 must be positive, got {s1}")


def sigma_eval(spec: SigmoidSpec, p: int, x):
    """p-th derivative of ``sigma(x) = s1 tanh(mu x - h0) + s2`` at ``x``.

    Closed forms in ``t = tanh(mu x - h0)`` (the affine part ``s2`` only
    survives at order zero):

        sigma     = s1 t + s2
        sigma'    = s1 mu (1 - t^2)
        sigma''   = -2 s1 mu^2 t (1 - t^2)
        sigma'''  = -2 s1 mu^3 (1 - t^2)(1 - 3 t^2)
        sigma'''' =  8 s1 mu^4 t (1 - t^2)(2 - 3 t^2)

    Accepts scalars or arrays; returns the same shape.

    Raises:
        ValueError: if ``p`` is outside ``[0, derivative_order_max]``.
    """
    if not 0 <= p <= spec.derivative_order_max:
        raise ValueError(
            f"derivative order {p} outside [0, {spec.derivative_order_max}]"
        )
    mu = spec.mu
    s1, s2, h0 = spec.transform
    t = np.tanh(mu * np.asarray(x, dtype=float) - h0)
    u = 1.0 - t * t
    if p == 0:
        out = s1 * t + s2
    elif p == 1:
        out = s1 * mu * u
    elif p == 2:
        out = -2.0 * s1 * mu**2 * t * u
    elif p == 3:
        out = -2.0 * s1 * mu**3 * u * (1.0 - 3.0 * t * t)
    else:  # p == 4
        out = 8.0 * s1 * mu**4 * t * u * (2.0 - 3.0 * t * t)
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class SelectivityDistribution:
    """Discrete selectivity distribution: nodes ``r_k`` with weights ``w_k``.

    A Dirac mass is the single-node case.  Continuous densities are
    represented by the caller's own quadrature nodes/weights; no separate
    continuous layer exists.

    Invariants: all nodes nonnegative, all weights positive, weights sum
    to 1 within 1e-12.
    """

    r_nodes: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.r_nodes) != len(self.weights) or not self.r_nodes:
            raise ValueError("r_nodes and weights must be equal-length and nonempty")
        if any(r < 0 for r in self.r_nodes):
            raise ValueError(f"selectivity nodes must be nonnegative: {self.r_nodes}")
        if any(w <= 0 for w in self.weights):
            raise ValueError(f"weights must be positive: {self.weights}")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {total!r})")

    @classmethod
    def dirac(cls, r0: float) -> "SelectivityDistribution":
        """All selectivity mass at a single radius ``r0``."""
        return cls((float(r0),), (1.0,))

    @classmethod
    def from_nodes(cls, r_nodes, weights) -> "SelectivityDistribution":
        return cls(tuple(float(r) for r in r_nodes), tuple(float(w) for w in weights))

    def moment(self, k: int) -> float:
        """k-th moment ``sum_k w_k r_k^k`` of the distribution."""
        return math.fsum(w * r**k for r, w in zip(self.r_nodes, self.weights))

    @property
    def support_max(self) -> float:
        return max(self.r_nodes)


@dataclass(frozen=True)
class ModelParams:
    """Plant parameters: couplings, time constant, sigmoid, selectivity law.

    ``theta_nodes`` is the orientation quadrature count (even, >= 16); the
    nodes come in exact ``cos(2 theta) -> -cos(2 theta)`` pairs so parity
    cancellations hold to rounding.
    """

    j0: float
    j1: float
    tau: float
    sigmoid: SigmoidSpec = SigmoidSpec()
    dist: SelectivityDistribution = SelectivityDistribution.dirac(1.0)
    theta_nodes: int = 128

    def __post_init__(self) -> None:
        if self.j0 == 0:
            raise ValueError("mean coupling j0 must be nonzero")
        if not self.j1 > 0:
            raise ValueError(f"modulation coupling j1 must be positive, got {self.j1}")
        if not self.tau > 0:
            raise ValueError(f"time constant tau must be positive, got {self.tau}")
        if self.theta_nodes < 16 or self.theta_nodes % 2:
            raise ValueError(
                f"theta_nodes must be an even integer >= 16, got {self.theta_nodes}"
            )


@lru_cache(maxsize=64)
def _cos2theta(n: int) -> np.ndarray:
    """Values ``cos(2 theta_k)`` on the n-point periodic grid of [-pi/2, pi/2).

    Built as explicit +/- pairs (second half is the negation of the first)
    so that integrands odd under ``cos 2theta -> -cos 2theta`` cancel
    exactly in the node sum.
    """
    half = -np.cos(2.0 * np.pi * np.arange(n // 2) / n)
    out = np.concatenate([half, -half])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _cos_powers(n: int, jmax: int) -> np.ndarray:
    """Stack ``c^j`` for j = 0..jmax on the n-point grid, shape (jmax+1, n)."""
    c = _cos2theta(n)
    out = np.stack([c**j for j in range(jmax + 1)])
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# The Gamma family
# ---------------------------------------------------------------------------


def gamma(params: ModelParams, p: int, j: int, v0: float, rho: float) -> float:
    """Selectivity-orientation average ``Gamma_p^j(v0, rho)``.

    Args:
        params: model parameters (sigmoid, distribution, quadrature count).
        p: sigmoid derivative order, ``0 <= p <= derivative_order_max``.
        j: moment order, ``0 <= j <= 3``.
        v0: mean-potential argument.
        rho: modulation radius, ``rho >= 0``.

    Returns:
        ``int r^j cos(2 theta)^j sigma^(p)(v0 + r rho cos 2theta) P(r)
        dtheta dr / pi`` evaluated by the node sums.

    Raises:
        ValueError: index out of range or negative ``rho``.
    """
    if not 0 <= j <= 3:
        raise ValueError(f"moment order j={j} outside [0, 3]")
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    block = gamma_block(params, v0, rho, pmax=p, jmax=j)
    return float(block[p, j])


def gamma_block(
    params: ModelParams, v0: float, rho: float, pmax: int = 3, jmax: int = 3
) -> np.ndarray:
    """All ``Gamma_p^j(v0, rho)`` for ``p <= pmax``, ``j <= jmax`` in one pass.

    The sigmoid derivatives share one ``tanh`` evaluation per quadrature
    node, so filling the whole block costs barely more than one entry.
    Entries satisfy the recurrences ``d/dv0 Gamma_p^j = Gamma_(p+1)^j`` and
    ``d/drho Gamma_p^j = Gamma_(p+1)^(j+1)``.

    Returns:
        Array of shape ``(pmax+1, jmax+1)``.
    """
    spec = params.sigmoid
    if not 0 <= pmax <= spec.derivative_order_max:
        raise ValueError(
            f"derivative order {pmax} outside [0, {spec.derivative_order_max}]"
        )
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    n = params.theta_nodes
    cpow = _cos_powers(n, jmax)  # (jmax+1, n)
    mu = spec.mu
    s1, s2, h0 = spec.transform
    out = np.zeros((pmax + 1, jmax + 1))
    for r, w in zip(params.dist.r_nodes, params.dist.weights):
        t = np.tanh(mu * (v0 + r * rho * _cos2theta(n)) - h0)
        u = 1.0 - t * t
        sig = np.empty((pmax + 1, n))
        for p in range(pmax + 1):
            if p == 0:
                sig[p] = s1 * t + s2
            elif p == 1:
                sig[p] = s1 * mu * u
            elif p == 2:
                sig[p] = -2.0 * s1 * mu**2 * t * u
            elif p == 3:
                sig[p] = -2.0 * s1 * mu**3 * u * (1.0 - 3.0 * t * t)
            else:
                sig[p] = 8.0 * s1 * mu**4 * t * u * (2.0 - 3.0 * t * t)
        # theta-average of c^j sigma^(p), weighted by w r^j
        rj = np.array([w * r**j for j in range(jmax + 1)])
        out += rj[None, :] * (sig @ cpow.T) / n
    return out


# ---------------------------------------------------------------------------
# Input signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InputSignal:
    """Analytic input ``t -> I(t)`` with derivatives up to third order.

    ``jet(t)`` returns a ``(4, 3)`` array whose rows are ``I, dI, d2I,
    d3I`` at ``t``.  The certified constants are what downstream
    components rely on: ``c`` is an infimum of ``I_0``, ``mu_wedge`` a
    lower bound on the persistence wedge ``|I_(1:2) ^ dI_(1:2)|``, and
    ``sup_norm`` a supremum of ``|I(t)|``.

    ``kind``/``kernel_params`` tag the built-in families; the compiled
    integration core only accepts tagged kinds (a custom jet falls back
    to the pure-Python path).
    """

    jet: Callable[[float], np.ndarray]
    c: float
    mu_wedge: float
    sup_norm: float
    kind: str = "custom"
    kernel_params: tuple[float, ...] = ()

    def value(self, t: float) -> np.ndarray:
        """``I(t)`` as a length-3 array."""
        return self.jet(t)[0]

    def jet4(self, t: float) -> np.ndarray:
        """``(I, dI, d2I, d3I)(t)`` as a ``(4, 3)`` array."""
        return self.jet(t)


def _circular_raw(i0: float, amp: float, omega: float, phase: float) -> InputSignal:
    """Constant drive ``i0`` plus a rotating modulation of radius ``amp``."""

    def jet(t: float) -> np.ndarray:
        a = omega * t + phase
        ca, sa = math.cos(a), math.sin(a)
        out = np.zeros((4, 3))
        out[0] = (i0, amp * ca, amp * sa)
        out[1, 1:] = (-amp * omega * sa, amp * omega * ca)
        out[2, 1:] = (-amp * omega**2 * ca, -amp * omega**2 * sa)
        out[3, 1:] = (amp * omega**3 * sa, -amp * omega**3 * ca)
        return out

    return InputSignal(
        jet=jet,
        c=i0,
        mu_wedge=amp * amp * abs(omega),
        sup_norm=math.hypot(i0, amp),
        kind="circular",
        kernel_params=(i0, amp, omega, phase),
    )


def circular_input(
    epsilon: float,
    beta: float,
    omega: float,
    i0_offset: float = 0.0,
    phase: float = 0.0,
) -> InputSignal:
    """Rotating input ``I_0 = eps (1 - beta) + i0_offset``,
    ``I_(1:2) = beta eps (cos(omega t + phase), sin(omega t + phase))``.

    The wedge ``I_(1:2) ^ dI_(1:2) = (beta eps)^2 omega`` is constant in
    time, which makes this the canonical persistently exciting input.
    """
    return _circular_raw(epsilon * (1.0 - beta) + i0_offset, beta * epsilon, omega, phase)


def constant_input(i0: float, i12: tuple[float, float] = (0.0, 0.0)) -> InputSignal:
    """Time-constant input; its wedge is identically zero."""
    vec = np.zeros((4, 3))
    vec[0] = (i0, i12[0], i12[1])
    vec.setflags(write=False)

    def jet(t: float) -> np.ndarray:
        return vec

    return InputSignal(
        jet=jet,
        c=i0,
        mu_wedge=0.0,
        sup_norm=float(np.hypot(i0, np.hypot(*i12))),
        kind="constant",
        kernel_params=(i0, float(i12[0]), float(i12[1])),
    )


def _with_i0_offset(signal: InputSignal, d: float) -> InputSignal:
    """New signal with ``I_0`` shifted by the constant ``d``."""
    if d == 0.0:
        return signal
    if signal.kind == "circular":
        i0, amp, omega, phase = signal.kernel_params
        return _circular_raw(i0 + d, amp, omega, phase)
    if signal.kind == "constant":
        i0, ix, iy = signal.kernel_params
        return constant_input(i0 + d, (ix, iy))
    base = signal.jet

    def jet(t: float) -> np.ndarray:
        out = np.array(base(t), dtype=float, copy=True)
        out[0, 0] += d
        return out

    return InputSignal(
        jet=jet,
        c=signal.c + d,
        mu_wedge=signal.mu_wedge,
        sup_norm=signal.sup_norm + abs(d),
        kind="custom",
    )


# ---------------------------------------------------------------------------
# States and dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolarState:
    """Extended polar state ``X = (v0, rho, zeta)`` with ``zeta`` free in R^2.

    ``rho`` is strictly positive by construction; lifting a Cartesian
    state with ``|v_(1:2)| > 0`` gives ``|zeta| = 1``, but the dynamics
    and the inversion machinery treat ``zeta`` as an unconstrained plane
    vector.
    """

    v0: float
    rho: float
    zeta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=float).reshape(2))
        if not self.rho > 0:
            raise ValueError(f"polar radius must be positive, got {self.rho}")
        if not (math.isfinite(self.v0) and math.isfinite(self.rho)):
            raise ValueError("polar state must be finite")

    @classmethod
    def from_cartesian(cls, v) -> "PolarState":
        v = np.asarray(v, dtype=float).reshape(3)
        rho = math.hypot(v[1], v[2])
        if rho == 0.0:
            raise ValueError("zero modulation v_(1:2) has no polar lift")
        return cls(float(v[0]), rho, v[1:] / rho)

    def to_array(self) -> np.ndarray:
        return np.array([self.v0, self.rho, self.zeta[0], self.zeta[1]])


def f_cartesian(params: ModelParams, input_signal: InputSignal, v, t: float) -> np.ndarray:
    """Cartesian vector field ``dv/dt = (-v + Psi(v) + I(t)) / tau``.

    By rotation equivariance the modulation part of ``Psi`` points along
    ``v_(1:2)``: writing ``rho = |v_(1:2)|``, ``Psi_(1:2) = J1
    Gamma_0^1(v0, rho) v_(1:2)/rho``.  At ``v_(1:2) = 0`` that direction
    is undefined but ``Gamma_0^1(v0, 0) = 0``, so the term extends
    continuously by zero.
    """
    v = np.asarray(v, dtype=float).reshape(3)
    i_now = input_signal.value(t)
    rho = math.hypot(v[1], v[2])
    block = gamma_block(params, v[0], rho, pmax=0, jmax=1)
    psi = np.zeros(3)
    psi[0] = params.j0 * block[0, 0]
    if rho > 0.0:
        psi[1:] = params.j1 * block[0, 1] * (v[1:] / rho)
    return (-v + psi + i_now) / params.tau


def F_polar(params: ModelParams, input_signal: InputSignal, X: PolarState, t: float) -> np.ndarray:
    """Extended polar vector field on ``(v0, rho, zeta)``.

    Returns ``(1/tau) * (-v0 + J0 Gamma_0^0 + I_0,
                         -rho + J1 Gamma_0^1 + I_(1:2)^T zeta,
                         (1/rho)(I_(1:2) - (I_(1:2)^T zeta) zeta))``.

    Raises:
        ValueError: if ``X.rho <= 0`` (the angular part divides by rho).
    """
    if not X.rho > 0:
        raise ValueError(f"polar field needs rho > 0, got {X.rho}")
    i_now = input_signal.value(t)
    block = gamma_block(params, X.v0, X.rho, pmax=0, jmax=1)
    s = float(i_now[1:] @ X.zeta)
    out = np.empty(4)
    out[0] = -X.v0 + params.j0 * block[0, 0] + i_now[0]
    out[1] = -X.rho + params.j1 * block[0, 1] + s
    out[2:] = (i_now[1:] - s * X.zeta) / X.rho
    return out / params.tau


def invariant_radius(params: ModelParams, input_signal: InputSignal) -> float:
    """Radius ``R*`` of an invariant attracting ball for the plant.

    ``R* = sup|sigma| sqrt(J0^2 + 2 J1^2) sum_k w_k sqrt(1 + r_k^2)
    + sup_t |I(t)|`` with ``sup|sigma| = s1 + |s2|``: outside this ball
    the radial derivative ``d|v|^2/dt`` is negative, so every ball
    ``B(0, R)`` with ``R >= R*`` is invariant and attracting.
    """
    gain = math.sqrt(params.j0**2 + 2.0 * params.j1**2)
    s1, s2, _ = params.sigmoid.transform
    spread = math.fsum(
        w * math.sqrt(1.0 + r * r)
        for r, w in zip(params.dist.r_nodes, params.dist.weights)
    )
    return (s1 + abs(s2)) * gain * spread + input_signal.sup_norm


# ---------------------------------------------------------------------------
# Model-equivalence transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TransformResult:
    """Equivalent odd-sigmoid model produced by :func:`reduce_model`.

    ``v0_offset`` relates the states: ``v0_original = v0_transformed +
    v0_offset`` (the other components are unchanged).  Iterating yields
    ``(params, input_signal)`` so the result unpacks like a pair.
    """

    params: ModelParams
    input_signal: InputSignal
    v0_offset: float = 0.0
    note: str = ""

    def __iter__(self) -> Iterator:
        return iter((self.params, self.input_signal))


def reduce_model(
    kind: str, params: ModelParams, input_signal: InputSignal
) -> TransformResult:
    """Reduce a model variant to the odd-sigmoid voltage form.

    Supported kinds:

    * ``"positive_sigmoid"`` — the model was stated with ``sigma_plus =
      s1 sigma + s2``.  Since only the mean channel picks up the offset
      (the ``cos``/``sin`` moments of a constant vanish), the equivalent
      odd model has ``J_i -> J_i s1`` and ``I_0 -> I_0 + J0 s2``.
    * ``"threshold"`` — the model used ``tanh(mu x - h0)`` =
      ``sigma(x - h0/mu)``.  Substituting ``u0 = v0 - h0/mu`` gives the
      odd model with ``I_0 -> I_0 - h0/mu`` and ``v0_offset = h0/mu``.
    * ``"activity_to_voltage"`` — the model evolves activity ``a`` with
      ``tau da/dt = -a + S(J a + I)``; the voltage ``v = (J0 a0 + I_0,
      J1 a_(1:2) + I_(1:2))`` solves the voltage model driven by
      ``I + tau dI``.  Parameters are unchanged; the note records the
      output relation ``int V = J0 a0 + I_0``.

    Raises:
        ValueError: unknown kind, non-positive ``s1``, or (for the
            activity transform) an input kind without an analytic
            derivative family.
    """
    s1, s2, h0 = params.sigmoid.transform
    if kind == "positive_sigmoid":
        new_sigmoid = replace(params.sigmoid, transform=(1.0, 0.0, h0))
        new_params = replace(
            params, j0=params.j0 * s1, j1=params.j1 * s1, sigmoid=new_sigmoid
        )
        new_input = _with_i0_offset(input_signal, params.j0 * s2)
        return TransformResult(
            new_params,
            new_input,
            0.0,
            note=f"sigma_plus = {s1}*sigma + {s2} folded into couplings and drive",
        )
    if kind == "threshold":
        shift = h0 / params.sigmoid.mu
        new_sigmoid = replace(params.sigmoid, transform=(s1, s2, 0.0))
        new_params = replace(params, sigmoid=new_sigmoid)
        new_input = _with_i0_offset(input_signal, -shift)
        return TransformResult(
            new_params,
            new_input,
            shift,
            note=(
                "thresholded sigmoid absorbed: mean potential shifted by "
                f"{shift} (threshold in argument units / mu)"
            ),
        )
    if kind == "activity_to_voltage":
        tau = params.tau
        if input_signal.kind == "circular":
            i0, amp, omega, phase = input_signal.kernel_params
            # I_(1:2) + tau dI_(1:2) rotates with the same omega, scaled
            # by sqrt(1 + (tau omega)^2) and advanced in phase.
            new_input = _circular_raw(
                i0,
                amp * math.hypot(1.0, tau * omega),
                omega,
                phase + math.atan2(tau * omega, 1.0),
            )
        elif input_signal.kind == "constant":
            new_input = input_signal
        else:
            raise ValueError(
                "activity_to_voltage needs an input with an analytic "
                f"derivative family, got kind={input_signal.kind!r}"
            )
        return TransformResult(
            params,
            new_input,
            0.0,
            note="integral of V = J0*a0 + I0(t); drive replaced by I + tau*dI",
        )
    raise ValueError(
        f"unknown transform kind {kind!r}; expected positive_sigmoid, "
        "threshold, or activity_to_voltage"
    )


def activity_state_to_voltage(
    params: ModelParams, original_input: InputSignal, a, t: float
) -> np.ndarray:
    """Voltage state corresponding to an activity state ``a`` at time ``t``.

    ``v = (J0 a0 + I_0(t), J1 a1 + I_1(t), J1 a2 + I_2(t))`` where ``I``
    is the *original* activity-model input.
    """
    a = np.asarray(a, dtype=float).reshape(3)
    i_now = original_input.value(t)
    return np.array(
        [
            params.j0 * a[0] + i_now[0],
            params.j1 * a[1] + i_now[1],
            params.j1 * a[2] + i_now[2],
        ]
    )
