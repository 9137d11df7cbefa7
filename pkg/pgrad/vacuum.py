"""Near-vacuum analysis: level curves, the exponential decay law and the bubble report.

Rays are sampled from the net with the same barycentric interpolation as the
verification rasters, applied to ln p so that exponential decay is resolved
between nodes.
"""
from __future__ import annotations
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from . import coords
from .errors import DomainError, EmptyRegion, FitError
from .interp import NetInterpolator
from .types import STATUS_CODE, CharGrid, Family

logger = logging.getLogger(__name__)

RAY_SAMPLES = 513
MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class LevelCurve:
    epsilon: float
    theta: np.ndarray
    r: np.ndarray  # NaN on uncovered rays

    @property
    def covered(self) -> np.ndarray:
        return np.isfinite(self.r)

    @property
    def coverage(self) -> tuple[float, float]:
        if not self.covered.any():
            return (math.nan, math.nan)
        t = self.theta[self.covered]
        return (float(t.min()), float(t.max()))


@dataclass(frozen=True)
class DecayFit:
    c: float
    M0: float
    r_range: tuple[float, float]
    r_squared: float
    n_points: int
    theta: float = math.pi / 4


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    prefactor: float
    r_squared: float
    n_points: int


@dataclass(frozen=True)
class MinPressure:
    value: float
    index: tuple[int, int]
    r: float
    theta: float
    # smallest seeded arc datum, NaN when the grid carries no boundary nodes
    arc_value: float = math.nan


@dataclass(frozen=True)
class BubbleReport:
    epsilons: tuple[float, ...]
    sup_r: tuple[float, ...]
    sup_theta: tuple[float, ...]
    c: float
    M0: float
    rel_err: tuple[float, ...]
    decreasing: bool
    consistent: bool
    delta: float


@dataclass(frozen=True)
class AxisSlopeProfile:
    family: Family
    # rows of (theta, r, dtheta/dr) on the data arc and on the first interior line
    arc: np.ndarray
    interior: np.ndarray


class Ray:
    """ln p (and optionally other fields) along rays θ = const of one grid."""

    def __init__(self, grid: CharGrid, interp: Optional[NetInterpolator] = None) -> None:
        self.grid = grid
        self.interp = interp if interp is not None else NetInterpolator(grid)
        with np.errstate(divide="ignore", invalid="ignore"):
            self._log_p = np.where(grid.p > 0, np.log(grid.p), np.nan)
        self.r_max = float(grid.r[grid.usable].max())

    def log_p(self, r, theta) -> np.ndarray:
        return self.interp.polar(r, np.broadcast_to(theta, np.shape(r)), values=self._log_p)

    def log_field(self, r, theta, name: str) -> np.ndarray:
        values = getattr(self.grid, name)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(values != 0, np.log(np.abs(values)), np.nan)
        return self.interp.polar(r, np.broadcast_to(theta, np.shape(r)), values=logs)

    def bracket(self, theta: float, log_level: float) -> Optional[tuple[float, float]]:
        """Adjacent covered samples on the ray straddling ln p = log_level."""
        r = np.linspace(0.0, self.r_max, RAY_SAMPLES)
        lp = self.log_p(r, theta)
        finite = np.flatnonzero(np.isfinite(lp))
        if finite.size < 2 or lp[finite[0]] >= log_level:
            return None
        for a, b in zip(finite[:-1], finite[1:]):
            if b == a + 1 and lp[a] < log_level <= lp[b]:
                return float(r[a]), float(r[b])
        return None

    def radius_at(self, theta: float, log_level: float) -> float:
        """r with ln p(r, θ) = log_level, NaN if the ray does not reach the level."""
        span = self.bracket(theta, log_level)
        if span is None:
            return math.nan
        a, b = span
        if self.log_p(b, theta) == log_level:
            return b
        return optimize.brentq(
            lambda r: float(self.log_p(r, theta)) - log_level, a, b, xtol=1e-13, rtol=1e-13
        )


def level_curve(
    grid: CharGrid,
    epsilon: float,
    thetas: Optional[Sequence[float]] = None,
    ray: Optional[Ray] = None,
) -> LevelCurve:
    """Sample r_ε(θ), the radius where p = ε, ray by ray.

    p_r > 0 makes the crossing unique; the root is bracketed on the ray and
    refined by a bracketing solver. Rays that never reach ε are left NaN.
    """
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"level epsilon must lie in (0, 1), got {epsilon!r}")
    ray = ray if ray is not None else Ray(grid)
    if thetas is None:
        t_u = grid.theta[grid.usable]
        thetas = np.linspace(float(t_u.min()), float(t_u.max()), 129)[1:-1]
    thetas = np.asarray(thetas, dtype=float)
    target = math.log(epsilon * grid.scale)
    radii = np.array([ray.radius_at(float(t), target) for t in thetas])
    curve = LevelCurve(epsilon=epsilon, theta=thetas, r=radii)
    logger.debug("level %.3e covers %d of %d rays", epsilon, curve.covered.sum(), thetas.size)
    return curve


def fit_exponential_decay(r, p, theta: float = math.pi / 4) -> DecayFit:
    """Least-squares line through (1/r, ln p); c = exp(intercept), M0 = −slope."""
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    keep = np.isfinite(r) & np.isfinite(p) & (r > 0) & (p > 0)
    if keep.sum() < MIN_FIT_POINTS:
        raise EmptyRegion(f"decay fit needs {MIN_FIT_POINTS} samples, got {int(keep.sum())}")
    r, p = r[keep], p[keep]
    fit = stats.linregress(1.0 / r, np.log(p))
    return DecayFit(
        c=float(math.exp(fit.intercept)),
        M0=float(-fit.slope),
        r_range=(float(r.min()), float(r.max())),
        r_squared=float(fit.rvalue**2),
        n_points=int(r.size),
        theta=theta,
    )


def deepest_decade(
    grid: CharGrid, theta: float, ray: Ray, decades: float = 1.0
) -> tuple[float, float]:
    """r window on the ray spanning the lowest resolved decades of p."""
    r = np.linspace(0.0, ray.r_max, RAY_SAMPLES)
    lp = ray.log_p(r, theta)
    floor = math.log(10.0 * grid.config.p_floor * grid.scale)
    ok = np.isfinite(lp) & (lp > floor)
    if not ok.any():
        raise EmptyRegion(f"ray theta={theta!r} has no resolved samples")
    low = float(lp[ok].min())
    high = low + decades * math.log(10.0)
    r_lo = float(r[ok][np.argmin(lp[ok])])
    r_hi = ray.radius_at(theta, high)
    if not r_hi > r_lo:
        raise EmptyRegion(f"ray theta={theta!r} does not resolve {decades} decades of p")
    return r_lo, r_hi


def decay_fit(
    grid: CharGrid,
    theta: float = math.pi / 4,
    r_window: Optional[tuple[float, float]] = None,
    n_samples: int = 64,
    ray: Optional[Ray] = None,
) -> DecayFit:
    """Fit p ~ c·exp(−M0/r) on one ray; the default window is the deepest resolved decade."""
    ray = ray if ray is not None else Ray(grid)
    if r_window is None:
        r_window = deepest_decade(grid, theta, ray)
    r = np.linspace(r_window[0], r_window[1], n_samples)
    p = np.exp(ray.log_p(r, theta))
    # stay clear of the vacuum floor the solver stopped at
    p = np.where(p > 10.0 * grid.config.p_floor * grid.scale, p, np.nan)
    fit = fit_exponential_decay(r, p, theta)
    logger.info(
        "decay fit theta=%.4f: c=%.6g M0=%.6g r^2=%.6f (%d samples)",
        theta, fit.c, fit.M0, fit.r_squared, fit.n_points,
    )
    return fit


def min_pressure(grid: CharGrid) -> MinPressure:
    """Lowest p over the nodes the marcher solved; the exact arc data are reported apart."""
    solved = grid.status == STATUS_CODE["solved"]
    if not solved.any():
        raise EmptyRegion("grid has no solved nodes")
    masked = np.where(solved, grid.p, np.inf)
    i, j = np.unravel_index(int(np.argmin(masked)), grid.shape)
    boundary = grid.status == STATUS_CODE["boundary"]
    arc_value = float(grid.p[boundary].min()) if boundary.any() else math.nan
    return MinPressure(
        float(masked[i, j]),
        (int(i), int(j)),
        float(grid.r[i, j]),
        float(grid.theta[i, j]),
        arc_value,
    )


def shrinkage_radius(epsilon, c: float, M0: float):
    """Radius of the level p = ε under p = c·exp(−M0/r): M0 / ln(c/ε)."""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps <= 0) or np.any(eps >= c):
        raise DomainError(f"levels must lie in (0, c={c!r})")
    out = M0 / np.log(c / eps)
    return float(out) if out.ndim == 0 else out


def fit_shrinkage(eps: np.ndarray, radii: np.ndarray) -> tuple[float, float]:
    # 1/r = ln c / M0 − ln ε / M0 is linear in ln ε; that line seeds the direct fit
    line = stats.linregress(np.log(eps), 1.0 / radii)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        M0_guess = float(np.float64(-1.0) / line.slope)
        log_c_guess = float(line.intercept * M0_guess)
    if not (math.isfinite(M0_guess) and abs(log_c_guess) < 700.0):
        raise FitError(f"shrinkage line through {radii.size} radii has slope {line.slope!r}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", optimize.OptimizeWarning)
            (log_c, M0), _ = optimize.curve_fit(
                lambda e, log_c, m0: m0 / (log_c - np.log(e)),
                eps,
                radii,
                p0=(log_c_guess, M0_guess),
            )
    except (RuntimeError, optimize.OptimizeWarning) as exc:
        logger.warning("shrinkage fit fell back to the linear seed: %s", exc)
        return math.exp(log_c_guess), M0_guess
    if not (abs(log_c) < 700.0 and np.isfinite(M0)):
        return math.exp(log_c_guess), M0_guess
    return math.exp(log_c), float(M0)


def bubble_report(
    grid: CharGrid,
    epsilons: Sequence[float],
    delta: float = math.pi / 36,
    n_rays: int = 65,
    tolerance: float = 0.1,
) -> BubbleReport:
    """sup over θ ∈ [δ, π/2 − δ] of r_ε(θ) for descending ε, against r_ε ≈ M0/ln(c/ε)."""
    eps = np.asarray(epsilons, dtype=float)
    if eps.size < 2 or np.any(np.diff(eps) >= 0):
        raise DomainError("bubble report needs at least two strictly descending levels")
    if not 0.0 < delta < math.pi / 4:
        raise DomainError(f"delta must lie in (0, pi/4), got {delta!r}")
    ray = Ray(grid)
    thetas = np.linspace(delta, math.pi / 2 - delta, n_rays)
    sup_r, sup_theta = [], []
    for e in eps:
        curve = level_curve(grid, float(e), thetas, ray)
        if not curve.covered.any():
            sup_r.append(math.nan)
            sup_theta.append(math.nan)
            continue
        k = int(np.nanargmax(curve.r))
        sup_r.append(float(curve.r[k]))
        sup_theta.append(float(curve.theta[k]))
    radii = np.asarray(sup_r)
    finite = np.isfinite(radii)
    decreasing = bool(finite.all() and np.all(np.diff(radii) < 0))
    if finite.sum() >= 2:
        c, M0 = fit_shrinkage(eps[finite], radii[finite])
        model = np.full(radii.shape, np.nan)
        model[finite] = M0 / np.log(c / eps[finite])
        rel_err = np.abs(model - radii) / radii
    else:
        c = M0 = math.nan
        rel_err = np.full(radii.shape, np.nan)
    consistent = bool(finite.all() and np.all(rel_err <= tolerance))
    logger.info(
        "bubble report: %d levels, M0=%.6g c=%.6g, decreasing=%s, consistent=%s",
        eps.size, M0, c, decreasing, consistent,
    )
    return BubbleReport(
        epsilons=tuple(float(e) for e in eps),
        sup_r=tuple(sup_r),
        sup_theta=tuple(sup_theta),
        c=float(c),
        M0=float(M0),
        rel_err=tuple(float(v) for v in rel_err),
        decreasing=decreasing,
        consistent=consistent,
        delta=delta,
    )


def derivative_exponent(
    grid: CharGrid,
    theta: float = math.pi / 4,
    decades: float = 1.0,
    n_samples: int = 64,
) -> ExponentFit:
    """Slope of ln ∂₊p against ln p over the deepest resolved decades on a ray.

    The heuristic balance near a vacuum point gives ∂±p ∼ ±M0·p^(1/2).
    """
    ray = Ray(grid)
    r_lo, r_hi = deepest_decade(grid, theta, ray, decades)
    r = np.linspace(r_lo, r_hi, n_samples)
    lp = ray.log_p(r, theta)
    ld = ray.log_field(r, theta, "dp_plus")
    keep = np.isfinite(lp) & np.isfinite(ld)
    if keep.sum() < MIN_FIT_POINTS:
        raise EmptyRegion(f"exponent fit needs {MIN_FIT_POINTS} samples, got {int(keep.sum())}")
    fit = stats.linregress(lp[keep], ld[keep])
    return ExponentFit(
        exponent=float(fit.slope),
        prefactor=float(math.exp(fit.intercept)),
        r_squared=float(fit.rvalue**2),
        n_points=int(keep.sum()),
    )


def axis_slope_profile(grid: CharGrid, family: Family) -> AxisSlopeProfile:
    """dθ/dr along the data arc of one family and along the neighbouring grid line.

    The lower arc is column 0 (plus family) and the upper arc row 0 (minus
    family); the neighbouring lines are column 1 and row 1.
    """
    if family == "plus":
        cuts = (np.s_[:, 0], np.s_[:, 1])
    elif family == "minus":
        cuts = (np.s_[0, :], np.s_[1, :])
    else:
        raise ValueError(f"unknown family {family!r}")
    sign = 1.0 if family == "plus" else -1.0
    rows = []
    for cut in cuts:
        ok = grid.usable[cut]
        r, theta, p = grid.r[cut][ok], grid.theta[cut][ok], grid.p[cut][ok]
        slope = sign * coords.lam(r, p, 0.0, 0.0) if r.size else np.empty(0)
        rows.append(np.column_stack([theta, r, slope]))
    return AxisSlopeProfile(family=family, arc=rows[0], interior=rows[1])
