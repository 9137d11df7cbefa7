"""Characteristic solver and verification suite for the quadrant Riemann
problem of the pressure-gradient system in self-similar polar coordinates."""
from .boundary import corner_state, lower_arc, rescale, upper_arc
from .errors import PGradError
from .schemas import SolverConfig
from .solver import node_update, solve_interior, trace_characteristic
from .types import CharGrid, StateNode

__all__ = [
    "CharGrid",
    "PGradError",
    "SolverConfig",
    "StateNode",
    "corner_state",
    "lower_arc",
    "node_update",
    "rescale",
    "solve_interior",
    "trace_characteristic",
    "upper_arc",
]
