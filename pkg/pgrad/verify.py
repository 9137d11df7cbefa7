"""Independent checks of a solved characteristic net.

Nothing here feeds back into the solve: every check reads an immutable
CharGrid (or a raster resampled from one) and reports.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import coords
from .errors import AnchorMissing, DomainError, EmptyRegion, StencilError
from .interp import NetInterpolator, SplineNet
from .types import CharGrid, Family, StateNode

logger = logging.getLogger(__name__)

Method = Literal["linear", "cubic"]


@dataclass(frozen=True)
class PolarRaster:
    """p on a regular (r, θ) raster; p[k, l] sits at (r[k], theta[l]), NaN if empty."""

    r: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    method: str = "linear"

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def dtheta(self) -> float:
        return float(self.theta[1] - self.theta[0])

    @property
    def filled(self) -> int:
        return int(np.isfinite(self.p).sum())


@dataclass(frozen=True)
class ResidualField:
    r: np.ndarray
    theta: np.ndarray
    value: np.ndarray
    width: np.ndarray
    norm_inf: float
    norm_l2: float
    skipped: int = 0
    # largest relative gap between the m-form and q-form right sides
    form_gap: float = 0.0

    @property
    def count(self) -> int:
        return int(self.value.size)


@dataclass(frozen=True)
class IntegralCheck:
    node: StateNode
    family: Family
    lhs: float
    rhs: float
    prefactor: float
    rel_err: float


@dataclass(frozen=True)
class SupRatio:
    value: float
    index: tuple[int, int]
    r: float
    theta: float


@dataclass(frozen=True)
class InvariantReport:
    """Violations of the sign, monotonicity and range invariants, by node index."""

    checked: int
    dp_plus_sign: list[tuple[int, int]] = field(default_factory=list)
    dp_minus_sign: list[tuple[int, int]] = field(default_factory=list)
    radial: list[tuple[int, int]] = field(default_factory=list)
    positivity: list[tuple[int, int]] = field(default_factory=list)
    hyperbolicity: list[tuple[int, int]] = field(default_factory=list)

    @property
    def violating(self) -> list[tuple[int, int]]:
        every = (
            self.dp_plus_sign + self.dp_minus_sign + self.radial
            + self.positivity + self.hyperbolicity
        )
        return sorted(set(every))

    @property
    def violations(self) -> int:
        return len(self.violating)

    def counts(self) -> dict[str, int]:
        return {
            "dp_plus_sign": len(self.dp_plus_sign),
            "dp_minus_sign": len(self.dp_minus_sign),
            "radial": len(self.radial),
            "positivity": len(self.positivity),
            "hyperbolicity": len(self.hyperbolicity),
        }


def _norms(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return 0.0, 0.0
    a = np.abs(values)
    return float(a.max()), float(np.sqrt(np.mean(a * a)))


# --- rasters and the PDE residual -------------------------------------------------


def resample_to_polar(
    grid: CharGrid,
    n_r: int,
    n_theta: int,
    method: Method = "linear",
    box: Optional[tuple[float, float, float, float]] = None,
) -> PolarRaster:
    """Interpolate p from the net onto a regular polar raster.

    box is (r_lo, r_hi, theta_lo, theta_hi); by default the bounding box of the
    usable nodes. Raster cells outside the solved region are NaN.
    """
    if grid.status_counts()["solved"] == 0:
        raise EmptyRegion("grid has no interior nodes to resample")
    if n_r < 2 or n_theta < 2:
        raise DomainError(f"raster needs at least 2 x 2 points, got {n_r} x {n_theta}")
    usable = grid.usable
    if box is None:
        r_u, t_u = grid.r[usable], grid.theta[usable]
        box = (float(r_u.min()), float(r_u.max()), float(t_u.min()), float(t_u.max()))
    r = np.linspace(box[0], box[1], n_r)
    theta = np.linspace(box[2], box[3], n_theta)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    if method == "linear":
        interp = NetInterpolator(grid)
    elif method == "cubic":
        interp = SplineNet(grid)
    else:
        raise ValueError(f"unknown interpolation method {method!r}")
    raster = PolarRaster(r=r, theta=theta, p=interp.polar(rr, tt), method=method)
    logger.debug("resampled %s: %d of %d raster cells filled", method, raster.filled, rr.size)
    return raster


def residual_field_exact(
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    r: np.ndarray,
    theta: np.ndarray,
) -> PolarRaster:
    """Raster of a closed-form p(r, θ), for exercising residual_pde on known fields."""
    rr, tt = np.meshgrid(np.asarray(r, float), np.asarray(theta, float), indexing="ij")
    p = np.broadcast_to(np.asarray(fn(rr, tt), dtype=float), rr.shape).copy()
    return PolarRaster(r=np.asarray(r, float), theta=np.asarray(theta, float), p=p, method="exact")


def residual_pde(
    raster: PolarRaster,
    spacing: Optional[tuple[float, float]] = None,
) -> ResidualField:
    """Residual of the self-similar equation in polar form,

        (r∂r)²p/p − (p_rr + p_r/r + p_θθ/r²) + r·p_r/p − (r·p_r)²/p²,

    with centered second-order differences one raster cell wide. Points whose
    stencil touches an empty cell are skipped and counted.
    """
    dr, dth = spacing if spacing is not None else (raster.dr, raster.dtheta)
    P = raster.p
    if P.shape[0] < 3 or P.shape[1] < 3:
        raise StencilError(f"raster {P.shape} is too small for a centered stencil")
    c = P[1:-1, 1:-1]
    east, west = P[2:, 1:-1], P[:-2, 1:-1]
    north, south = P[1:-1, 2:], P[1:-1, :-2]
    R = raster.r[1:-1, None]
    T = np.broadcast_to(raster.theta[None, 1:-1], c.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_r = (east - west) / (2.0 * dr)
        p_rr = (east - 2.0 * c + west) / (dr * dr)
        p_tt = (north - 2.0 * c + south) / (dth * dth)
        d1 = R * p_r
        d2 = d1 + R * R * p_rr
        value = d2 / c - (p_rr + p_r / R + p_tt / (R * R)) + d1 / c - (d1 / c) ** 2
    ok = np.isfinite(value) & (c > 0) & (R > 0)
    skipped = int((np.isfinite(c) & ~ok).sum())
    if not ok.any():
        raise StencilError("no raster point has a complete stencil inside the solved region")
    rr = np.broadcast_to(R, c.shape)[ok]
    out = value[ok]
    norm_inf, norm_l2 = _norms(out)
    logger.debug("pde residual: %d samples, %d skipped, inf-norm %.3e", out.size, skipped, norm_inf)
    return ResidualField(
        r=rr,
        theta=T[ok],
        value=out,
        width=np.full(out.shape, max(dr, float(R.max()) * dth)),
        norm_inf=norm_inf,
        norm_l2=norm_l2,
        skipped=skipped,
    )


# --- characteristic decomposition -------------------------------------------------


def _in_range(grid: CharGrid) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return (
            grid.usable & (grid.p > coords.P_FLOOR) & (grid.r**2 - grid.p > coords.S_FLOOR)
        )


def _node_rhs(grid: CharGrid, valid: np.ndarray):
    """Both decomposition right sides at every valid node; NaN elsewhere."""
    z1_minus, z1_plus, q_minus, q_plus = (np.full(grid.shape, np.nan) for _ in range(4))
    parts = coords.decomposition_rhs(
        grid.r[valid], grid.p[valid], grid.dp_plus[valid], grid.dp_minus[valid]
    )
    for target, values in zip((z1_minus, z1_plus, q_minus, q_plus), parts):
        target[valid] = values
    return z1_minus, z1_plus, q_minus, q_plus


def _form_gap(z1: np.ndarray, q: np.ndarray) -> float:
    finite = np.isfinite(z1) & np.isfinite(q)
    if not finite.any():
        return 0.0
    scale = np.maximum(np.abs(q[finite]), np.finfo(float).tiny)
    return float(np.max(np.abs(z1[finite] - q[finite]) / scale))


def check_decomposition(grid: CharGrid, p_min: float = 0.0) -> ResidualField:
    """Difference the stored derivatives along grid characteristics against both
    right sides of the decomposition.

    Plus segments run down a column and difference ∂₋p; minus segments run
    along a row and difference ∂₊p. The right side is the average of its values
    at the two segment ends. Only segments with both ends above p_min count.
    """
    valid = _in_range(grid)
    keep = valid & (grid.p > p_min)
    z1_minus, z1_plus, q_minus, q_plus = _node_rhs(grid, valid)
    gap = max(_form_gap(z1_minus, q_minus), _form_gap(z1_plus, q_plus))

    r_mid, t_mid, values, widths = [], [], [], []
    segments = (
        # along a column (plus characteristic) ∂₋p is transported
        ((slice(None, -1), slice(None)), (slice(1, None), slice(None)), grid.dp_minus, q_minus),
        # along a row (minus characteristic) ∂₊p is transported
        ((slice(None), slice(None, -1)), (slice(None), slice(1, None)), grid.dp_plus, q_plus),
    )
    for a, b, transported, rhs in segments:
        both = keep[a] & keep[b]
        dth = (grid.theta[b] - grid.theta[a])[both]
        diff = (transported[b] - transported[a])[both]
        avg = 0.5 * (rhs[a] + rhs[b])[both]
        with np.errstate(divide="ignore", invalid="ignore"):
            res = np.where(dth != 0.0, diff / dth - avg, 0.0)
        r_mid.append(0.5 * (grid.r[a] + grid.r[b])[both])
        t_mid.append(0.5 * (grid.theta[a] + grid.theta[b])[both])
        values.append(res)
        widths.append(np.abs(dth))
    value = np.concatenate(values)
    norm_inf, norm_l2 = _norms(value)
    logger.debug("decomposition residual: %d segments, inf-norm %.3e", value.size, norm_inf)
    return ResidualField(
        r=np.concatenate(r_mid),
        theta=np.concatenate(t_mid),
        value=value,
        width=np.concatenate(widths),
        norm_inf=norm_inf,
        norm_l2=norm_l2,
        skipped=int(valid.sum() - keep.sum()),
        form_gap=gap,
    )


# --- integral formulas ---------------------------------------------------------------


def _path_formula(r, theta, p, d_anchor):
    """Integral formula along one traced characteristic, cumulatively.

    The path starts at its arc anchor and p is the integration variable of the
    inner exponential integral. Returns the formula value of the transported
    derivative and the prefactor at every path node.
    """
    r2 = r * r
    inner = 1.0 / (r2 - p)
    inner_int = np.concatenate([[0.0], np.cumsum(0.5 * (inner[1:] + inner[:-1]) * np.diff(p))])
    growth = np.exp(inner_int / 4.0)
    numerator = 4.0 * p**0.25 * growth
    integrand = r2 * p**-0.75 / (r2 - p) * growth
    steps = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(theta)
    J = np.concatenate([[0.0], np.cumsum(steps)])
    # 1/(2√2 sin²θ_a cosθ_a) on the lower arc at unit scale
    anchor_term = 4.0 * p[0] ** 0.25 / d_anchor
    rhs = numerator / (anchor_term + J)
    prefactor = abs(anchor_term) / growth
    return rhs, prefactor


def _path(grid: CharGrid, node: StateNode, family: Family) -> tuple[np.ndarray, ...]:
    if node.i < 0 or node.j < 0:
        raise DomainError("integral formulas need a node taken from the grid")
    i, j = node.i, node.j
    cells = (i, slice(0, j + 1)) if family == "minus" else (slice(0, i + 1), j)
    if not grid.usable[cells].all():
        arc = "lower" if family == "minus" else "upper"
        raise AnchorMissing(
            f"{family} characteristic through {node.index} never reaches the {arc} arc"
        )
    r, theta, p = grid.r[cells], grid.theta[cells], grid.p[cells]
    if family == "minus":
        return r, theta, p, float(grid.dp_plus[i, 0])
    return r, theta, p, float(grid.dp_minus[0, j])


def integral_formula_plus(grid: CharGrid, node: StateNode) -> IntegralCheck:
    """∂₊p at node from the closed-form Bernoulli solution along its minus line."""
    r, theta, p, anchor = _path(grid, node, "minus")
    rhs, prefactor = _path_formula(r, theta, p, anchor)
    lhs = float(grid.dp_plus[node.i, node.j])
    return IntegralCheck(node, "plus", lhs, float(rhs[-1]), float(prefactor[-1]),
                         abs(lhs - rhs[-1]) / abs(lhs))


def integral_formula_minus(grid: CharGrid, node: StateNode) -> IntegralCheck:
    """∂₋p at node along its plus line, walking from the upper-arc anchor downward in θ."""
    r, theta, p, anchor = _path(grid, node, "plus")
    rhs, prefactor = _path_formula(r, theta, p, anchor)
    lhs = float(grid.dp_minus[node.i, node.j])
    return IntegralCheck(node, "minus", lhs, float(rhs[-1]), float(prefactor[-1]),
                         abs(lhs - rhs[-1]) / abs(lhs))


def integral_checks(grid: CharGrid, p_min: float = 0.0) -> list[IntegralCheck]:
    """Both integral formulas at every usable node above p_min, one pass per grid line."""
    usable = grid.usable
    n_i, n_j = grid.shape
    out: list[IntegralCheck] = []
    for i in range(n_i):
        run = int(np.argmin(usable[i])) if not usable[i].all() else n_j
        if run < 1:
            continue
        cells = (i, slice(0, run))
        rhs, pref = _path_formula(
            grid.r[cells], grid.theta[cells], grid.p[cells], grid.dp_plus[i, 0]
        )
        for j in range(run):
            if grid.p[i, j] > p_min:
                lhs = float(grid.dp_plus[i, j])
                out.append(IntegralCheck(grid.node(i, j), "plus", lhs, float(rhs[j]),
                                         float(pref[j]), abs(lhs - rhs[j]) / abs(lhs)))
    for j in range(n_j):
        run = int(np.argmin(usable[:, j])) if not usable[:, j].all() else n_i
        if run < 1:
            continue
        cells = (slice(0, run), j)
        rhs, pref = _path_formula(
            grid.r[cells], grid.theta[cells], grid.p[cells], grid.dp_minus[0, j]
        )
        for i in range(run):
            if grid.p[i, j] > p_min:
                lhs = float(grid.dp_minus[i, j])
                out.append(IntegralCheck(grid.node(i, j), "minus", lhs, float(rhs[i]),
                                         float(pref[i]), abs(lhs - rhs[i]) / abs(lhs)))
    return out


def prefactors(grid: CharGrid, node: StateNode) -> tuple[float, float]:
    """(A, B) at node: the anchor constants damped by the inner exponential integrals."""
    return (
        integral_formula_plus(grid, node).prefactor,
        integral_formula_minus(grid, node).prefactor,
    )


def m2_analog(grid: CharGrid) -> float:
    """max of 4p_a^(-1/4)/A and 4p_b^(-1/4)/B over the usable nodes."""
    best = 0.0
    for check in integral_checks(grid):
        i, j = check.node.index
        p_anchor = grid.p[i, 0] if check.family == "plus" else grid.p[0, j]
        best = max(best, 4.0 * p_anchor**-0.25 / check.prefactor)
    return float(best)


# --- bounds and invariants ------------------------------------------------------------


def sup_ratio(grid: CharGrid, r_level: float = 0.0) -> SupRatio:
    """sup of max(∂₊p, −∂₋p)/√p over usable nodes with r ≥ r_level."""
    region = grid.usable & (grid.r >= r_level) & (grid.p > 0)
    if not region.any():
        raise EmptyRegion(f"no usable node with r >= {r_level!r}")
    ratio = np.full(grid.shape, -np.inf)
    steepest = np.maximum(grid.dp_plus[region], -grid.dp_minus[region])
    ratio[region] = steepest / np.sqrt(grid.p[region])
    i, j = np.unravel_index(int(np.argmax(ratio)), grid.shape)
    return SupRatio(
        float(ratio[i, j]), (int(i), int(j)), float(grid.r[i, j]), float(grid.theta[i, j])
    )


def _indices(mask: np.ndarray) -> list[tuple[int, int]]:
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(mask))]


def check_signs_and_monotonicity(grid: CharGrid) -> InvariantReport:
    """Count nodes breaking ∂₊p > 0, ∂₋p < 0, p_r > 0 and 0 < p < r².

    By the reflection symmetry the two signs hold on both sides of θ = π/4.
    """
    usable = grid.usable
    p, r2 = grid.p, grid.r**2
    with np.errstate(invalid="ignore"):
        positivity = usable & ~(p > 0)
        hyperbolic = usable & ~(p < r2)
        plus_sign = usable & ~(grid.dp_plus > 0)
        minus_sign = usable & ~(grid.dp_minus < 0)
    in_range = _in_range(grid)
    p_r = np.full(grid.shape, np.nan)
    if in_range.any():
        p_r[in_range], _ = coords.derived_derivatives(
            grid.r[in_range], p[in_range], grid.dp_plus[in_range], grid.dp_minus[in_range]
        )
    with np.errstate(invalid="ignore"):
        radial = in_range & ~(p_r > 0)
    report = InvariantReport(
        checked=int(usable.sum()),
        dp_plus_sign=_indices(plus_sign),
        dp_minus_sign=_indices(minus_sign),
        radial=_indices(radial),
        positivity=_indices(positivity),
        hyperbolicity=_indices(hyperbolic),
    )
    if report.violations:
        logger.warning("%d nodes violate invariants: %s", report.violations, report.counts())
    return report


# --- refinement ---------------------------------------------------------------------


def convergence_order(values: Sequence[float], ratio: float = 2.0) -> float:
    """Observed order from a quantity on three nested grids, coarse to fine."""
    if len(values) != 3:
        raise ValueError(f"need exactly three refinement levels, got {len(values)}")
    v0, v1, v2 = (float(v) for v in values)
    return math.log(abs(v0 - v1) / abs(v1 - v2)) / math.log(ratio)


def norm_orders(norms: Sequence[float], ratio: float = 2.0) -> list[float]:
    """Pairwise observed orders of an error norm that should vanish under refinement."""
    return [math.log(a / b) / math.log(ratio) for a, b in zip(norms[:-1], norms[1:])]
