from __future__ import annotations
from typing import Literal, Optional


class PGradError(Exception):
    """Base class for every error raised by the pgrad library."""


class DomainError(PGradError, ValueError):
    pass


class ArcRangeError(PGradError, ValueError):
    pass


class DegeneracyError(PGradError, ValueError):
    """Coefficient requested outside 0 < p < r² (the hyperbolic range)."""

    def __init__(self, bound: Literal["vacuum", "sonic"], r: float, p: float) -> None:
        self.bound = bound
        self.r = r
        self.p = p
        super().__init__(f"{bound} degeneracy at r={r!r}, p={p!r}")


class NodeError(PGradError):
    """A node update could not produce a valid state."""

    def __init__(
        self,
        message: str,
        index: Optional[tuple[int, int]] = None,
        mismatch: float = float("nan"),
    ) -> None:
        self.index = index
        self.mismatch = mismatch
        where = f" at node {index}" if index is not None else ""
        super().__init__(f"{message}{where}")


class VacuumStop(NodeError):
    pass


class SonicStop(NodeError):
    pass


class DomainStop(NodeError):
    pass


class NoConvergence(NodeError):
    pass


class AnchorMissing(PGradError):
    pass


class EmptyRegion(PGradError):
    pass


class StencilError(PGradError):
    pass


class FitError(PGradError):
    """A least-squares fit produced no finite parameters."""


class ConfigError(PGradError):
    pass


class SchemaError(PGradError):
    pass
