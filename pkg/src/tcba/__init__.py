"""Exact simulation and closed-form theory for coalescing ballistic annihilation."""

from .core import (
    Configuration,
    Exponential,
    InvalidParams,
    ModelParams,
    Outcome,
    ReactionTape,
    RngContract,
    Uniform,
    Velocity,
    sample_configuration,
    sample_tape,
    sample_two_sided,
    validate_params,
)
from .engine import (
    CollisionLog,
    Lazy,
    QueueExhausted,
    Tape,
    TieError,
    VisitClass,
    classify_first_visit,
    record_tape,
    run,
    run_restricted,
)

from . import harness, stats, theory  # noqa: E402

__version__ = "0.1.0"
