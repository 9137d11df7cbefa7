"""Static SVG figures in Cartesian (ξ, η) = (r cosθ, r sinθ) coordinates."""
from __future__ import annotations
import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..boundary import EXTERIOR_CONVENTION, exterior_field  # noqa: E402
from ..coords import polar_to_cartesian  # noqa: E402
from ..interp import NetInterpolator  # noqa: E402
from ..types import CharGrid  # noqa: E402
from ..vacuum import DecayFit, LevelCurve  # noqa: E402

logger = logging.getLogger(__name__)

# byte-stable output: fixed hash salt, no timestamp, text kept as <text>
matplotlib.rcParams["svg.hashsalt"] = "pgrad"
matplotlib.rcParams["svg.fonttype"] = "none"


def _figure(size: float):
    fig, ax = plt.subplots(figsize=(size, size))
    return fig, ax


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def _arcs(ax, scale: float) -> None:
    a = math.sqrt(scale)
    lower = np.linspace(0.0, math.pi / 4, 129)
    upper = np.linspace(math.pi / 4, math.pi / 2, 129)
    xl, yl = polar_to_cartesian(2.0 * a * np.sin(lower), lower)
    xu, yu = polar_to_cartesian(2.0 * a * np.cos(upper), upper)
    (line,) = ax.plot(xl, yl, color="tab:red", lw=1.6, label="lower arc r = 2 sin θ")
    line.set_gid("lower-arc")
    (line,) = ax.plot(xu, yu, color="tab:blue", lw=1.6, label="upper arc r = 2 cos θ")
    line.set_gid("upper-arc")


def characteristics_svg(grid: CharGrid, path: Path, size: float = 6.0) -> Path:
    """The characteristic net with both data arcs."""
    fig, ax = _figure(size)
    xi, eta = polar_to_cartesian(grid.r, grid.theta)
    usable = grid.usable
    n_i, n_j = grid.shape
    for i in range(n_i):
        ok = usable[i]
        ax.plot(xi[i][ok], eta[i][ok], color="0.55", lw=0.4)
    for j in range(n_j):
        ok = usable[:, j]
        ax.plot(xi[:, j][ok], eta[:, j][ok], color="0.3", lw=0.4)
    _arcs(ax, grid.scale)
    ax.set_aspect("equal")
    ax.set_xlabel("ξ")
    ax.set_ylabel("η")
    ax.set_title(f"characteristic net, {n_i} x {n_j} seeds")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def levels_svg(curves: Sequence[LevelCurve], grid: CharGrid, path: Path, size: float = 6.0):
    """Nested level curves r_ε(θ)."""
    fig, ax = _figure(size)
    for curve in curves:
        ok = curve.covered
        xi, eta = polar_to_cartesian(curve.r[ok], curve.theta[ok])
        ax.plot(xi, eta, lw=1.0, label=f"ε = {curve.epsilon:g}")
    _arcs(ax, grid.scale)
    ax.set_aspect("equal")
    ax.set_xlabel("ξ")
    ax.set_ylabel("η")
    ax.set_title("level curves p = ε")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def decay_svg(r: np.ndarray, p: np.ndarray, fit: DecayFit, path: Path, size: float = 6.0):
    """ln p against 1/r on the decay ray with the fitted line."""
    fig, ax = _figure(size)
    x = 1.0 / np.asarray(r)
    ax.plot(x, np.log(p), "o", ms=3, color="tab:blue", label="interpolated samples")
    xs = np.array([x.min(), x.max()])
    (line,) = ax.plot(
        xs, math.log(fit.c) - fit.M0 * xs, color="tab:red",
        label=f"c={fit.c!r} M0={fit.M0!r}",
    )
    line.set_gid("fit-line")
    ax.set_xlabel("1/r")
    ax.set_ylabel("ln p")
    ax.set_title(f"decay along θ = {fit.theta:.6f}, r² = {fit.r_squared:.6f}")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def field_svg(
    grid: CharGrid,
    path: Path,
    size: float = 6.0,
    n: int = 161,
    interp: Optional[NetInterpolator] = None,
) -> Path:
    """Composite p over the quadrant: the solved net inside the lens, the
    simple waves and the constant state outside it."""
    a = math.sqrt(grid.scale)
    axis = np.linspace(0.0, 2.0 * a, n)
    xi, eta = np.meshgrid(axis, axis, indexing="xy")
    outside = exterior_field(xi, eta, grid.scale)
    interp = interp if interp is not None else NetInterpolator(grid)
    inside = interp(xi, eta)
    composite = np.where(np.isnan(outside), inside, outside)
    fig, ax = _figure(size)
    filled = ax.contourf(xi, eta, np.ma.masked_invalid(composite), levels=24, cmap="viridis")
    fig.colorbar(filled, ax=ax, shrink=0.8, label="p")
    _arcs(ax, grid.scale)
    ax.set_aspect("equal")
    ax.set_xlabel("ξ")
    ax.set_ylabel("η")
    ax.set_title("pressure, interaction region and exterior waves")
    fig.text(0.01, 0.01, f"exterior: {EXTERIOR_CONVENTION}", fontsize="x-small")
    return _save(fig, path)
