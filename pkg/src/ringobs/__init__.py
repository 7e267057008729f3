"""Simulation and online state estimation for a reduced neural-field ring model.

The package simulates the three-dimensional voltage dynamics of a planar
ring model driven by a time-varying input, and reconstructs the full
state online from the scalar readout ``y = v0`` with a hybrid high-gain
observer built on an explicit observability map and a Lipschitz
pseudo-inverse.
"""

from ringobs.errors import AssumptionViolation, NumericFailure
from ringobs.model import (
    InputSignal,
    ModelParams,
    PolarState,
    SelectivityDistribution,
    SigmoidSpec,
    TransformResult,
    activity_state_to_voltage,
    reduce_model,
    circular_input,
    constant_input,
    f_cartesian,
    F_polar,
    gamma,
    gamma_block,
    invariant_radius,
    sigma_eval,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation",
    "NumericFailure",
    "InputSignal",
    "ModelParams",
    "PolarState",
    "SelectivityDistribution",
    "SigmoidSpec",
    "TransformResult",
    "activity_state_to_voltage",
    "reduce_model",
    "circular_input",
    "constant_input",
    "f_cartesian",
    "F_polar",
    "gamma",
    "gamma_block",
    "invariant_radius",
    "sigma_eval",
    "__version__",
]
