"""Massau-type marching of the Goursat problem on the characteristic net.

Node (i, j) is the intersection of the minus characteristic launched from lower
seed i and the plus characteristic launched from upper seed j. The net is filled
diagonal by diagonal from the corner. Each new node comes from a trapezoidal
predictor-corrector on the characteristic ODEs dr/dθ = ±1/λ and on the
decomposition

    ∂₊∂₋p = q∂₊p∂₋p − q(∂₋p)²,    ∂₋∂₊p = q∂₊p∂₋p − q(∂₊p)²,

with the derivatives transported in logarithmic form (d ln|∂₋p| = q(∂₊p − ∂₋p)dθ
along plus, d ln|∂₊p| = q(∂₋p − ∂₊p)dθ along minus), so their signs never flip.
The end of each transport step that sits at the new node is solved in closed form
with the Lambert W function. p itself is integrated as ln p along both lines, so
a cell can lose several decades of p without overshooting to p ≤ 0; a node only
stops at the vacuum floor when that update lands below p_floor.
"""
from __future__ import annotations
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import lambertw

from . import coords
from .boundary import HALF, QUARTER, corner_state, lower_arc, upper_arc
from .errors import (
    ConfigError,
    DegeneracyError,
    DomainError,
    DomainStop,
    NoConvergence,
    PGradError,
    SonicStop,
    VacuumStop,
)
from .schemas import SolverConfig
from .types import STATUS_CODE, ArcSample, CharGrid, Family, NodeDiagnostics, StateNode

logger = logging.getLogger(__name__)


def seed_fraction(k: int, n: int, cluster_ratio: float = 1.0) -> float:
    """Position of seed k of n along the arc, 0 at the corner and 1 at theta_min.

    cluster_ratio is the ratio of the first (corner) spacing to the last
    (axis-side) spacing; the map is evaluated on a uniform parameter so grids
    with n and 2n - 1 seeds nest.
    """
    t = k / (n - 1)
    if cluster_ratio == 1.0:
        return t
    return (1.0 - cluster_ratio ** (-t)) / (1.0 - 1.0 / cluster_ratio)


def seed_boundaries(
    n_seeds: int,
    theta_min: float = math.pi / 128,
    cluster_ratio: float = 1.0,
) -> tuple[list[ArcSample], list[ArcSample]]:
    """Seeds on both arcs; lower θ_a descends from π/4, upper θ_b = π/2 − θ_a."""
    if n_seeds < 2:
        raise ConfigError(f"n_seeds must be at least 2, got {n_seeds}")
    if not 0.0 < theta_min < QUARTER:
        raise ConfigError(f"theta_min must lie in (0, pi/4), got {theta_min!r}")
    span = QUARTER - theta_min
    lower, upper = [], []
    for k in range(n_seeds):
        theta_a = QUARTER - span * seed_fraction(k, n_seeds, cluster_ratio)
        lower.append(lower_arc(theta_a))
        upper.append(upper_arc(HALF - theta_a))
    return lower, upper


@dataclass
class _Local:
    """Coefficients of one end of a characteristic segment."""

    r: float
    theta: float
    p: float
    dp_plus: float
    dp_minus: float
    lam: float
    q: float

    @classmethod
    def at(cls, r: float, theta: float, p: float, dp_plus: float, dp_minus: float) -> "_Local":
        # only p > 0 and r² > p are needed here; the floors apply to accepted nodes
        return cls(
            r, theta, p, dp_plus, dp_minus,
            coords.lam(r, p, 0.0, 0.0), coords.q_coeff(r, p, 0.0, 0.0),
        )

    @classmethod
    def of(cls, node: StateNode) -> "_Local":
        return cls.at(node.r, node.theta, node.p, node.dp_plus, node.dp_minus)


def _use_r(lam_a: float, lam_b: float, switch: float) -> bool:
    return min(lam_a, lam_b) < switch


def _segment(start: _Local, end: _Local, sign: float, use_r: bool, r_c: float, theta_c: float):
    """Parameter increment and end weights of the trapezoid along one segment.

    In θ the weights are 1; in r they are dθ/dr = sign·λ at each end.
    """
    if use_r:
        return r_c - start.r, sign * start.lam, sign * end.lam
    return theta_c - start.theta, 1.0, 1.0


def _lambertw_exp(log_x: float) -> float:
    """W(e^log_x) without forming e^log_x when it would overflow."""
    if log_x < 700.0:
        return float(lambertw(math.exp(log_x)).real)
    w = log_x - math.log(log_x)
    for _ in range(6):
        w -= (w + math.log(w) - log_x) / (1.0 + 1.0 / w)
    return w


def _log_transport(start: float, explicit: float, a: float, other: float) -> float:
    """Implicit trapezoid step of d ln|u| = q(other − u) for u with the sign of start.

    Solves ln|u| = ln|start| + explicit + a·(other − u). Writing k = a·sign(u), the
    root of v + k·e^v = c is v = c − W(k·e^c), so |u| = W(k·e^c) / k.
    """
    sigma = math.copysign(1.0, start)
    c = math.log(abs(start)) + explicit + a * other
    k = a * sigma
    if k == 0.0:
        return sigma * math.exp(c)
    if k < 0.0:
        raise DomainStop("characteristic segment runs against its family")
    return sigma * _lambertw_exp(c + math.log(k)) / k


def _intersect(P: _Local, M: _Local, cp: _Local, cm: _Local, switch: float):
    """Intersection of the plus line through P and the minus line through M.

    Each line is written a·(r − r_X) + b·(θ − θ_X) = 0 with averaged slopes.
    """
    if _use_r(P.lam, cp.lam, switch):
        a1, b1 = -0.5 * (P.lam + cp.lam), 1.0
    else:
        a1, b1 = 1.0, -0.5 * (1.0 / P.lam + 1.0 / cp.lam)
    if _use_r(M.lam, cm.lam, switch):
        a2, b2 = 0.5 * (M.lam + cm.lam), 1.0
    else:
        a2, b2 = 1.0, 0.5 * (1.0 / M.lam + 1.0 / cm.lam)
    c1 = a1 * P.r + b1 * P.theta
    c2 = a2 * M.r + b2 * M.theta
    det = a1 * b2 - a2 * b1
    r = (c1 * b2 - c2 * b1) / det
    theta = (a1 * c2 - a2 * c1) / det
    return r, theta


# r, θ, ln p along plus, ln p along minus, ∂₊p, ∂₋p at the new node
_Sweep = tuple[float, float, float, float, float, float]
_SWEEP_FAILURES = (PGradError, ArithmeticError, ValueError)


def _sweep(P: _Local, M: _Local, cp: _Local, cm: _Local, switch: float) -> _Sweep:
    """One trapezoid pass from the predecessors to the current estimate of C."""
    r_c, theta_c = _intersect(P, M, cp, cm, switch)
    d_p, wp0, wp1 = _segment(P, cp, 1.0, _use_r(P.lam, cp.lam, switch), r_c, theta_c)
    d_m, wm0, wm1 = _segment(M, cm, -1.0, _use_r(M.lam, cm.lam, switch), r_c, theta_c)

    # d ln p = (∂±p / p) dθ keeps p positive on cells where p drops by decades
    lp_plus = math.log(P.p) + 0.5 * (wp0 * P.dp_plus / P.p + wp1 * cp.dp_plus / cp.p) * d_p
    lp_minus = math.log(M.p) + 0.5 * (wm0 * M.dp_minus / M.p + wm1 * cm.dp_minus / cm.p) * d_m

    # the transported derivative is implicit at C, the other one lags a sweep
    rate_p0 = P.q * (P.dp_plus - P.dp_minus)
    dm_c = _log_transport(
        P.dp_minus, 0.5 * wp0 * rate_p0 * d_p, 0.5 * wp1 * cp.q * d_p, cp.dp_plus
    )
    rate_m0 = M.q * (M.dp_minus - M.dp_plus)
    dp_c = _log_transport(
        M.dp_plus, 0.5 * wm0 * rate_m0 * d_m, 0.5 * wm1 * cm.q * d_m, cm.dp_minus
    )
    return r_c, theta_c, lp_plus, lp_minus, dp_c, dm_c


def _mismatch(state: _Sweep) -> float:
    lp_plus, lp_minus = state[2], state[3]
    if max(lp_plus, lp_minus) > 700.0:
        return math.inf
    return abs(math.exp(lp_plus) - math.exp(lp_minus))


def _newton_cell(
    P: _Local, M: _Local, guess: np.ndarray, switch: float, tol: float
) -> Optional[tuple[_Sweep, int]]:
    """Root of the cell's trapezoid system in (r, θ, ln p, ln|∂₊p|, ln|∂₋p|).

    Used when the plain corrector stalls: its contraction factor grows with the
    drop of ln p across the cell.
    """
    sign_plus = math.copysign(1.0, M.dp_plus)
    sign_minus = math.copysign(1.0, P.dp_minus)

    def image(x: np.ndarray) -> _Sweep:
        r, theta, log_p, log_dp, log_dm = (float(v) for v in x)
        c = _Local.at(
            r, theta, math.exp(log_p), sign_plus * math.exp(log_dp), sign_minus * math.exp(log_dm)
        )
        return _sweep(P, M, c, c, switch)

    def residual(x: np.ndarray) -> np.ndarray:
        try:
            r_c, theta_c, lp_plus, lp_minus, dp_c, dm_c = image(x)
            mapped = (r_c, theta_c, 0.5 * (lp_plus + lp_minus), math.log(abs(dp_c)),
                      math.log(abs(dm_c)))
        except _SWEEP_FAILURES:
            return np.full(5, 1e6)
        return x - np.array(mapped)

    sol = optimize.root(residual, guess, method="hybr", options={"xtol": 1e-14})
    if not np.all(np.isfinite(sol.x)) or np.max(np.abs(sol.fun)) > tol:
        return None
    try:
        return image(sol.x), int(sol.nfev)
    except _SWEEP_FAILURES:
        return None


def _guess(P: _Local, M: _Local, predictor: Optional[_Sweep]) -> np.ndarray:
    usable = predictor is not None and all(math.isfinite(v) for v in predictor)
    if usable and predictor[4] != 0.0 and predictor[5] != 0.0:
        r, theta, lp_plus, lp_minus, dp_c, dm_c = predictor
        return np.array([r, theta, 0.5 * (lp_plus + lp_minus),
                         math.log(abs(dp_c)), math.log(abs(dm_c))])
    return np.array([
        0.5 * (P.r + M.r),
        0.5 * (P.theta + M.theta),
        0.5 * (math.log(P.p) + math.log(M.p)),
        math.log(abs(M.dp_plus)),
        math.log(abs(P.dp_minus)),
    ])


def _accept(
    state: _Sweep, iterations: int, cfg: SolverConfig, index: Optional[tuple[int, int]]
) -> tuple[StateNode, NodeDiagnostics]:
    r_c, theta_c, lp_plus, lp_minus, dp_c, dm_c = state
    p_c = math.exp(0.5 * (lp_plus + lp_minus))
    mismatch = _mismatch(state)
    if not 0.0 < theta_c < HALF:
        raise DomainStop(f"theta={theta_c!r} left (0, pi/2)", index, mismatch)
    if not p_c > cfg.p_floor:
        raise VacuumStop(f"p={p_c!r} fell below the vacuum floor", index, mismatch)
    if not r_c * r_c - p_c > cfg.sonic_margin:
        gap = r_c * r_c - p_c
        raise SonicStop(f"r^2 - p = {gap!r} under the sonic margin", index, mismatch)
    i, j = index if index is not None else (-1, -1)
    node = StateNode(r_c, theta_c, p_c, dp_c, dm_c, "solved", i, j)
    return node, NodeDiagnostics(iterations=iterations, mismatch=mismatch)


def update_cell(
    pred_plus: StateNode,
    pred_minus: StateNode,
    cfg: SolverConfig,
    index: Optional[tuple[int, int]] = None,
) -> tuple[StateNode, NodeDiagnostics]:
    """New node from its plus-side and minus-side predecessors, with diagnostics.

    p is the geometric mean of the two characteristic integrals of ln p, and the
    p-mismatch is the gap between them. The corrector stops once ln p moves by
    less than corrector_tol, which bounds the absolute change of p for p ≤ 1.
    """
    if pred_plus.r == pred_minus.r and pred_plus.theta == pred_minus.theta:
        return pred_plus, NodeDiagnostics(iterations=0, mismatch=0.0)
    P = _Local.of(pred_plus)
    M = _Local.of(pred_minus)
    switch = cfg.param_switch_lambda
    # first sweep is the Euler predictor: each segment sees its own start values
    cp, cm = P, M
    log_prev = math.nan
    sweeps = 0
    predictor: Optional[_Sweep] = None
    state: Optional[_Sweep] = None
    converged: Optional[_Sweep] = None
    failure: Optional[Exception] = None
    try:
        for sweeps in range(1, cfg.max_corrector_iters + 1):
            state = _sweep(P, M, cp, cm, switch)
            if predictor is None:
                predictor = state
            r_c, theta_c, lp_plus, lp_minus, dp_c, dm_c = state
            log_p = 0.5 * (lp_plus + lp_minus)
            if abs(log_p - log_prev) < cfg.corrector_tol:
                converged = state
                break
            log_prev = log_p
            cp = cm = _Local.at(r_c, theta_c, math.exp(log_p), dp_c, dm_c)
    except _SWEEP_FAILURES as exc:
        failure = exc
    if converged is not None:
        return _accept(converged, sweeps, cfg, index)

    logger.debug("corrector stalled at %s (%s), solving the cell system", index, failure)
    solved = _newton_cell(P, M, _guess(P, M, predictor), switch, 100.0 * cfg.corrector_tol)
    if solved is not None:
        state, evaluations = solved
        return _accept(state, sweeps + evaluations, cfg, index)
    mismatch = _mismatch(state) if state is not None else math.nan
    if isinstance(failure, DomainStop):
        raise DomainStop(str(failure), index, mismatch) from failure
    if isinstance(failure, DegeneracyError):
        stop = SonicStop if failure.bound == "sonic" else VacuumStop
        raise stop(str(failure), index, mismatch) from failure
    raise NoConvergence(
        f"corrector did not reach {cfg.corrector_tol:g} in {cfg.max_corrector_iters} sweeps",
        index,
        mismatch,
    )


def node_update(pred_plus: StateNode, pred_minus: StateNode, cfg: SolverConfig) -> StateNode:
    node, _ = update_cell(pred_plus, pred_minus, cfg)
    return node


def _arc_transverse(prev: StateNode, seed: ArcSample, index: tuple[int, int]) -> StateNode:
    """Boundary node on a data arc; its transverse derivative is integrated along the arc.

    The lower arc is a plus characteristic, so ∂₋p follows the first line of the
    decomposition along it; the upper arc carries ∂₊p by the second line. In both
    cases d ln|transverse| / dθ = q·(tangential − transverse). λ on either arc is
    at least 1/2, so this always integrates in θ.
    """
    if seed.which == "lower":
        prev_known, prev_unknown = prev.dp_plus, prev.dp_minus
    else:
        prev_known, prev_unknown = prev.dp_minus, prev.dp_plus
    known = seed.tangential_dp
    d = seed.theta - prev.theta
    rate0 = coords.q_coeff(prev.r, prev.p) * (prev_known - prev_unknown)
    q1 = coords.q_coeff(seed.r, seed.p)
    unknown = _log_transport(prev_unknown, 0.5 * rate0 * d, 0.5 * q1 * d, known)
    if seed.which == "lower":
        return StateNode(seed.r, seed.theta, seed.p, known, unknown, "boundary", *index)
    return StateNode(seed.r, seed.theta, seed.p, unknown, known, "boundary", *index)


_STOP_STATUS = {
    VacuumStop: "stopped_vacuum",
    SonicStop: "stopped_sonic",
    DomainStop: "stopped_domain",
}


def solve_interior(cfg: SolverConfig, workers: Optional[int] = None) -> CharGrid:
    """Fill the whole characteristic net for the unit-scale quadrant data."""
    n = cfg.n_seeds
    lower, upper = seed_boundaries(n, cfg.theta_min, cfg.cluster_ratio)
    shape = (n, n)
    arrays = {k: np.full(shape, np.nan) for k in ("r", "theta", "p", "dp_plus", "dp_minus")}
    status = np.full(shape, STATUS_CODE["unreached"], dtype=np.int8)
    iterations = np.zeros(shape, dtype=np.int32)
    mismatch = np.zeros(shape)
    solved: dict[tuple[int, int], StateNode] = {}

    def store(node: StateNode, diag: Optional[NodeDiagnostics] = None) -> None:
        k = (node.i, node.j)
        solved[k] = node
        for name in arrays:
            arrays[name][k] = getattr(node, name)
        status[k] = STATUS_CODE[node.status]
        if diag is not None:
            iterations[k] = diag.iterations
            mismatch[k] = diag.mismatch

    c = corner_state()
    store(StateNode(c.r, c.theta, c.p, c.dp_plus, c.dp_minus, "boundary", 0, 0))
    for k in range(1, n):
        store(_arc_transverse(solved[(k - 1, 0)], lower[k], (k, 0)))
        store(_arc_transverse(solved[(0, k - 1)], upper[k], (0, k)))

    def advance(ij: tuple[int, int]):
        i, j = ij
        pp, pm = solved.get((i - 1, j)), solved.get((i, j - 1))
        if pp is None or pm is None:
            return ij, None, None
        try:
            return ij, *update_cell(pp, pm, cfg, ij)
        except (VacuumStop, SonicStop, DomainStop) as stop:
            logger.debug("marching stopped at %s: %s", ij, stop)
            return ij, _STOP_STATUS[type(stop)], stop

    n_workers = workers if workers is not None else cfg.workers
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for d in range(2, 2 * n - 1):
            cells = [(i, d - i) for i in range(max(1, d - n + 1), min(d - 1, n - 1) + 1)]
            results = list(pool.map(advance, cells) if pool else map(advance, cells))
            for ij, first, second in results:
                if isinstance(first, StateNode):
                    store(first, second)
                elif first is not None:
                    status[ij] = STATUS_CODE[first]
                    mismatch[ij] = second.mismatch
    finally:
        if pool is not None:
            pool.shutdown()

    grid = CharGrid(
        **arrays,
        status=status,
        iterations=iterations,
        mismatch=mismatch,
        seeds_lower=tuple(lower),
        seeds_upper=tuple(upper),
        config=cfg,
    )
    counts = grid.status_counts()
    usable = grid.usable
    grid.meta.update(
        counts=counts,
        max_iterations=int(iterations.max()),
        max_mismatch=float(np.nanmax(np.where(usable, mismatch, np.nan))),
    )
    logger.info(
        "solved n_seeds=%d: %s, max sweeps %d, max p-mismatch %.3e",
        n, counts, grid.meta["max_iterations"], grid.meta["max_mismatch"],
    )
    return grid


def trace_characteristic(grid: CharGrid, start: StateNode, family: Family) -> list[StateNode]:
    """Grid line of the given family through start, ascending in θ.

    The minus line of (i, j) is row i, beginning at lower seed i; the plus line
    is column j, ending at upper seed j (for j = 0 that column is the lower arc).
    """
    if start.i < 0 or start.j < 0 or not start.usable:
        raise DomainError("trace_characteristic needs a solved node taken from the grid")
    n_i, n_j = grid.shape
    usable = grid.usable
    if family == "minus":
        line = [grid.node(start.i, j) for j in range(n_j) if usable[start.i, j]]
    elif family == "plus":
        line = [grid.node(i, start.j) for i in range(n_i) if usable[i, start.j]]
    else:
        raise ValueError(f"unknown family {family!r}")
    return sorted(line, key=lambda node: node.theta)
