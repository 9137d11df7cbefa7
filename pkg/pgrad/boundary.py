"""Goursat data on the two circular-arc characteristics and the exterior field.

Unit scale (p1 = 1) throughout; `rescale` maps a solved grid to any p1 > 0.
"""
from __future__ import annotations
import dataclasses
import logging
import math
from typing import Union

import numpy as np

from .errors import ArcRangeError, DomainError
from .types import ArcSample, CharGrid, CornerState

logger = logging.getLogger(__name__)

QUARTER = math.pi / 4
HALF = math.pi / 2
INTERACTION = "interaction"
# how the rarefaction fans outside the interaction lens are laid out in plots
EXTERIOR_CONVENTION = "schematic-simple-wave: p = min(xi, eta, sqrt(p1))^2 outside the lens"


def lower_arc(theta: float) -> ArcSample:
    """Lower data arc r = 2 sinθ, a plus characteristic, θ ∈ [0, π/4]."""
    if not 0.0 <= theta <= QUARTER:
        raise ArcRangeError(f"lower arc is defined on [0, pi/4], got {theta!r}")
    s, c = math.sin(theta), math.cos(theta)
    return ArcSample(
        which="lower",
        theta=theta,
        r=2.0 * s,
        p=4.0 * s**4,
        tangential_dp=16.0 * s**3 * c,
    )


def upper_arc(theta: float) -> ArcSample:
    """Upper data arc r = 2 cosθ, a minus characteristic, θ ∈ [π/4, π/2]."""
    if not QUARTER <= theta <= HALF:
        raise ArcRangeError(f"upper arc is defined on [pi/4, pi/2], got {theta!r}")
    s, c = math.sin(theta), math.cos(theta)
    return ArcSample(
        which="upper",
        theta=theta,
        r=2.0 * c,
        p=4.0 * c**4,
        tangential_dp=-16.0 * c**3 * s,
    )


def corner_state() -> CornerState:
    return CornerState(r=math.sqrt(2.0), theta=QUARTER, p=1.0, dp_plus=4.0, dp_minus=-4.0)


def rescale(grid: CharGrid, p1: float) -> CharGrid:
    """Apply (r, θ, p, ∂±p) -> (r·√p1, θ, p·p1, ∂±p·p1), the scaling symmetry."""
    if not p1 > 0:
        raise DomainError(f"scale p1 must be positive, got {p1!r}")
    root = math.sqrt(p1)
    seeds = {
        name: tuple(
            dataclasses.replace(s, r=s.r * root, p=s.p * p1, tangential_dp=s.tangential_dp * p1)
            for s in getattr(grid, name)
        )
        for name in ("seeds_lower", "seeds_upper")
    }
    return grid.with_fields(
        r=grid.r * root,
        p=grid.p * p1,
        dp_plus=grid.dp_plus * p1,
        dp_minus=grid.dp_minus * p1,
        scale=grid.scale * p1,
        **seeds,
    )


def in_interaction(xi, eta, p1: float = 1.0, tol: float = 1e-12):
    """True strictly inside the lens bounded by both data circles."""
    a = math.sqrt(p1)
    inside_upper = (xi - a) ** 2 + eta**2 < a * a * (1.0 - tol)
    inside_lower = xi**2 + (eta - a) ** 2 < a * a * (1.0 - tol)
    return inside_upper & inside_lower


def exterior_field(xi, eta, p1: float = 1.0) -> Union[float, str, np.ndarray]:
    """Pressure of the non-interacting waves and the constant state.

    Outside the lens the two plane rarefactions give p = ξ² and p = η², and the
    far field is the constant state p1, which combine to min(ξ, η, √p1)². Scalars
    inside the lens return INTERACTION; arrays carry NaN there.
    """
    a = math.sqrt(p1)
    if isinstance(xi, np.ndarray) or isinstance(eta, np.ndarray):
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        if (xi < 0).any() or (eta < 0).any():
            raise DomainError("exterior field is defined on the quadrant xi, eta >= 0")
        out = np.minimum(np.minimum(xi, eta), a) ** 2
        return np.where(in_interaction(xi, eta, p1), np.nan, out)
    if xi < 0 or eta < 0:
        raise DomainError(f"point ({xi}, {eta}) is outside the quadrant xi, eta >= 0")
    if in_interaction(xi, eta, p1):
        return INTERACTION
    return min(xi, eta, a) ** 2
