"""Fixed-point iteration toolkit: set lifts, Markov kernels, spectral
stabilization, projection lattices and a depletion-gap model."""

from .errors import (
    ConvergenceError,
    HypothesisViolated,
    NotConverged,
    ParseError,
    PhiError,
    PreconditionError,
    UniquenessCheckFailed,
)
from .fixpoint import (
    DEFAULT_POLICY,
    EventSchedule,
    IterationReport,
    Mode,
    Stage,
    StabilizationPolicy,
    contraction_fixed_point,
    iterate_to_fixpoint,
    verify_event_contraction,
)
from .kernel import Distribution, Kernel, compose_kernels, push_forward, stationary_distribution, toy_kernel
from .lattice import (
    MonotoneLatticeMap,
    PowersetElement,
    SetValuedMap,
    compose,
    compose_lifts,
    least_fixed_point_from,
    lift,
    pack,
    reachable,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "HypothesisViolated",
    "NotConverged",
    "ParseError",
    "PhiError",
    "PreconditionError",
    "UniquenessCheckFailed",
    "DEFAULT_POLICY",
    "EventSchedule",
    "IterationReport",
    "Mode",
    "Stage",
    "StabilizationPolicy",
    "contraction_fixed_point",
    "iterate_to_fixpoint",
    "verify_event_contraction",
    "Distribution",
    "Kernel",
    "compose_kernels",
    "push_forward",
    "stationary_distribution",
    "toy_kernel",
    "MonotoneLatticeMap",
    "PowersetElement",
    "SetValuedMap",
    "compose",
    "compose_lifts",
    "least_fixed_point_from",
    "lift",
    "pack",
    "reachable",
]
