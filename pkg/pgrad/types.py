from __future__ import annotations
import dataclasses
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .schemas import SolverConfig

Family = Literal["plus", "minus"]
ArcName = Literal["lower", "upper"]
NodeStatus = Literal[
    "solved",
    "boundary",
    "stopped_vacuum",
    "stopped_sonic",
    "stopped_domain",
    "unreached",
]

# integer codes used in CharGrid.status; order is part of the grid.csv contract
STATUSES: tuple[NodeStatus, ...] = (
    "solved",
    "boundary",
    "stopped_vacuum",
    "stopped_sonic",
    "stopped_domain",
    "unreached",
)
STATUS_CODE: dict[str, int] = {s: k for k, s in enumerate(STATUSES)}
USABLE: frozenset[str] = frozenset({"solved", "boundary"})


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float


@dataclass(frozen=True)
class Coefficients:
    lam: float
    q: float
    m: float


@dataclass(frozen=True)
class ArcSample:
    which: ArcName
    theta: float
    r: float
    p: float
    tangential_dp: float


@dataclass(frozen=True)
class CornerState:
    r: float
    theta: float
    p: float
    dp_plus: float
    dp_minus: float


@dataclass(frozen=True)
class StateNode:
    r: float
    theta: float
    p: float
    dp_plus: float
    dp_minus: float
    status: NodeStatus = "solved"
    i: int = -1
    j: int = -1

    @property
    def usable(self) -> bool:
        return self.status in USABLE

    @property
    def index(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class NodeDiagnostics:
    iterations: int
    mismatch: float


@dataclass(frozen=True)
class CharGrid:
    """Characteristic net in index space; node (i, j) sits on the minus
    characteristic of lower seed i and the plus characteristic of upper seed j.

    Column j = 0 is the lower arc, row i = 0 the upper arc, (0, 0) the corner.
    Arrays are read-only once the grid is built.
    """

    r: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    dp_plus: np.ndarray
    dp_minus: np.ndarray
    status: np.ndarray
    iterations: np.ndarray
    mismatch: np.ndarray
    seeds_lower: tuple[ArcSample, ...]
    seeds_upper: tuple[ArcSample, ...]
    config: SolverConfig
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("r", "theta", "p", "dp_plus", "dp_minus", "status", "iterations", "mismatch"):
            getattr(self, name).flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    @property
    def usable(self) -> np.ndarray:
        return (self.status == STATUS_CODE["solved"]) | (self.status == STATUS_CODE["boundary"])

    def node(self, i: int, j: int) -> StateNode:
        return StateNode(
            r=float(self.r[i, j]),
            theta=float(self.theta[i, j]),
            p=float(self.p[i, j]),
            dp_plus=float(self.dp_plus[i, j]),
            dp_minus=float(self.dp_minus[i, j]),
            status=STATUSES[int(self.status[i, j])],
            i=i,
            j=j,
        )

    def nodes(self, usable_only: bool = True) -> list[StateNode]:
        n_i, n_j = self.shape
        mask = self.usable
        return [
            self.node(i, j)
            for i in range(n_i)
            for j in range(n_j)
            if mask[i, j] or not usable_only
        ]

    def status_counts(self) -> dict[str, int]:
        codes, counts = np.unique(self.status, return_counts=True)
        out = {s: 0 for s in STATUSES}
        for c, n in zip(codes, counts):
            out[STATUSES[int(c)]] = int(n)
        return out

    def with_fields(self, **changes) -> "CharGrid":
        arrays = {
            k: np.array(v, dtype=getattr(self, k).dtype, copy=True) for k, v in changes.items()
            if isinstance(v, np.ndarray)
        }
        other = {k: v for k, v in changes.items() if not isinstance(v, np.ndarray)}
        return dataclasses.replace(self, **arrays, **other)
