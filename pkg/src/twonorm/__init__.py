"""Windowed fixed-point solver for evolution equations with a weak/strong norm pair."""

from .core import (
    AprioriBound,
    NormedPairElement,
    SolveReport,
    SolverConfig,
    StabilityBounds,
    Termination,
    TrajectorySegment,
    WindowPlan,
    continuation_solve,
    estimate_theta_empirical,
    picard_window,
    select_contraction_window,
    select_window,
)
from .grids import GridFunction1D, interpolate, lip_norm, sup_norm
from .instances import (
    OdeSpec,
    ProblemInstance,
    TransportSpec,
    make_advect_instance,
    make_burgers_instance,
    make_decay_instance,
    make_element,
    make_linear_ode_instance,
    make_riccati_instance,
    ode_bounds,
    ode_step,
    transport_step,
)
from .oracles import SmoothProfile, blowup_time, burgers_characteristics, dense_reference

__all__ = [
    "AprioriBound",
    "GridFunction1D",
    "NormedPairElement",
    "OdeSpec",
    "ProblemInstance",
    "SmoothProfile",
    "SolveReport",
    "SolverConfig",
    "StabilityBounds",
    "Termination",
    "TrajectorySegment",
    "TransportSpec",
    "WindowPlan",
    "blowup_time",
    "burgers_characteristics",
    "continuation_solve",
    "dense_reference",
    "estimate_theta_empirical",
    "interpolate",
    "lip_norm",
    "make_advect_instance",
    "make_burgers_instance",
    "make_decay_instance",
    "make_element",
    "make_linear_ode_instance",
    "make_riccati_instance",
    "ode_bounds",
    "ode_step",
    "picard_window",
    "select_contraction_window",
    "select_window",
    "sup_norm",
    "transport_step",
]
