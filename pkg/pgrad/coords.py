"""Polar coordinates and the pointwise coefficients of the characteristic form.

Every coefficient is defined only on the hyperbolic range 0 < p < r²; outside it a
DegeneracyError names the violated bound instead of clamping. Scalars take a
``math`` fast path (the solver calls these per node), numpy arrays are handled
element-wise.
"""
from __future__ import annotations
import math
from typing import Union

import numpy as np

from .errors import DegeneracyError, DomainError
from .types import Coefficients, Family, PolarPoint

Number = Union[float, np.ndarray]

P_FLOOR = 1e-14
S_FLOOR = 1e-12


def cartesian_to_polar(xi: float, eta: float) -> PolarPoint:
    if xi < 0 or eta < 0:
        raise DomainError(f"point ({xi}, {eta}) is outside the quadrant xi, eta >= 0")
    if xi == 0 and eta == 0:
        raise DomainError("angle is undefined at the origin")
    return PolarPoint(r=math.hypot(xi, eta), theta=math.atan2(eta, xi))


def polar_to_cartesian(r: Number, theta: Number) -> tuple[Number, Number]:
    if isinstance(r, np.ndarray) or isinstance(theta, np.ndarray):
        return r * np.cos(theta), r * np.sin(theta)
    return r * math.cos(theta), r * math.sin(theta)


def _guard(r: Number, p: Number, p_floor: float, s_floor: float) -> None:
    if isinstance(r, np.ndarray) or isinstance(p, np.ndarray):
        r_arr, p_arr = np.broadcast_arrays(np.asarray(r, float), np.asarray(p, float))
        vac = ~(p_arr > p_floor)
        if vac.any():
            k = np.flatnonzero(vac)[0]
            raise DegeneracyError("vacuum", float(r_arr.flat[k]), float(p_arr.flat[k]))
        son = ~(r_arr * r_arr - p_arr > s_floor)
        if son.any():
            k = np.flatnonzero(son)[0]
            raise DegeneracyError("sonic", float(r_arr.flat[k]), float(p_arr.flat[k]))
        return
    if not p > p_floor:
        raise DegeneracyError("vacuum", r, p)
    if not r * r - p > s_floor:
        raise DegeneracyError("sonic", r, p)


def lam(r: Number, p: Number, p_floor: float = P_FLOOR, s_floor: float = S_FLOOR) -> Number:
    """λ = sqrt(p / (r²(r² − p))), the slope dθ/dr of the characteristics."""
    _guard(r, p, p_floor, s_floor)
    r2 = r * r
    if isinstance(r2, np.ndarray) or isinstance(p, np.ndarray):
        return np.sqrt(p / (r2 * (r2 - p)))
    return math.sqrt(p / (r2 * (r2 - p)))


def q_coeff(r: Number, p: Number, p_floor: float = P_FLOOR, s_floor: float = S_FLOOR) -> Number:
    _guard(r, p, p_floor, s_floor)
    r2 = r * r
    return r2 / (4.0 * p * (r2 - p))


def m_coeff(r: Number, p: Number, p_floor: float = P_FLOOR, s_floor: float = S_FLOOR) -> Number:
    r4 = (r * r) ** 2
    return lam(r, p, p_floor, s_floor) * r4 / (2.0 * p * p)


def coefficients(r: float, p: float) -> Coefficients:
    return Coefficients(lam=lam(r, p), q=q_coeff(r, p), m=m_coeff(r, p))


def char_slope(
    r: float,
    p: float,
    family: Family,
    p_floor: float = P_FLOOR,
    s_floor: float = S_FLOOR,
) -> tuple[float, float]:
    """Return (dr/dθ, dθ/dr) of the requested characteristic family.

    Both forms are returned: near vacuum dr/dθ blows up while dθ/dr goes to zero.
    """
    if family not in ("plus", "minus"):
        raise ValueError(f"unknown family {family!r}")
    slope = lam(r, p, p_floor, s_floor)
    sign = 1.0 if family == "plus" else -1.0
    return sign / slope, sign * slope


def derived_derivatives(r: Number, p: Number, dp_plus: Number, dp_minus: Number) -> tuple:
    """(p_r, p_θ) from the characteristic derivatives ∂±p = p_θ ± p_r / λ."""
    p_r = lam(r, p) * (dp_plus - dp_minus) / 2.0
    p_theta = (dp_plus + dp_minus) / 2.0
    return p_r, p_theta


def decomposition_rhs(r: Number, p: Number, dp_plus: Number, dp_minus: Number) -> tuple:
    """Right sides of the two decompositions, both lines of each.

    Returns (m-form ∂₊∂₋p, m-form ∂₋∂₊p, q-form ∂₊∂₋p, q-form ∂₋∂₊p).
    """
    m = m_coeff(r, p)
    q = q_coeff(r, p)
    p_r, _ = derived_derivatives(r, p, dp_plus, dp_minus)
    z1_minus = m * p_r * dp_minus
    z1_plus = -m * p_r * dp_plus
    q_minus = q * dp_plus * dp_minus - q * dp_minus * dp_minus
    q_plus = q * dp_plus * dp_minus - q * dp_plus * dp_plus
    return z1_minus, z1_plus, q_minus, q_plus
