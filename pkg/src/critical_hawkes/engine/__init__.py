"""Exact event-driven simulation of the mean-field order-flow model."""

from .backend import DEFAULT_BACKEND, available_backends, get_kernels
from .records import EventLog, EventRecord, HawkesPathRecord, Sign
from .simulate import simulate_path
from .stepper import (
    AgentStates,
    StepOutcome,
    SufficientState,
    flow,
    initial_state,
    rejection_bound,
    step_thinning,
    variant_intensities,
)

__all__ = [
    "DEFAULT_BACKEND",
    "available_backends",
    "get_kernels",
    "EventLog",
    "EventRecord",
    "HawkesPathRecord",
    "Sign",
    "simulate_path",
    "AgentStates",
    "StepOutcome",
    "SufficientState",
    "flow",
    "initial_state",
    "rejection_bound",
    "step_thinning",
    "variant_intensities",
]
