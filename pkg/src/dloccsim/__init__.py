"""Simulator and optimizer for dynamic LOCC protocols."""

from .qmath import CapacityError, DensityState
from .channels import KrausChannel, NoisyStateSpec, make_state
from .circuits import Gate, ParamCircuit, circuit_unitary
from .dlocc import (
    BranchPolicy,
    DiscriminationResult,
    DynamicProtocol,
    ParamTable,
    RoundSpec,
    RunOutcome,
    execute,
    execute_discrimination,
)

__all__ = [
    "BranchPolicy",
    "CapacityError",
    "DensityState",
    "DiscriminationResult",
    "DynamicProtocol",
    "Gate",
    "KrausChannel",
    "NoisyStateSpec",
    "ParamCircuit",
    "ParamTable",
    "RoundSpec",
    "RunOutcome",
    "circuit_unitary",
    "execute",
    "execute_discrimination",
    "make_state",
]

__version__ = "0.1.0"
