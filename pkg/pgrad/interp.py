"""Interpolation off the characteristic net.

The net is stored in index space, so every raster, ray or level-curve sample
goes through one of two pathways here:

- NetInterpolator: piecewise linear on the net's own triangles in (ξ, η).
- SplineNet: bicubic in index coordinates, inverted by Newton iteration, for
  consumers that difference the interpolant twice.
"""
from __future__ import annotations
import logging
from typing import Optional

import numpy as np
from matplotlib.tri import LinearTriInterpolator, TrapezoidMapTriFinder, Triangulation
from scipy.interpolate import RectBivariateSpline

from .coords import polar_to_cartesian
from .errors import EmptyRegion
from .types import CharGrid

logger = logging.getLogger(__name__)

FIELDS = ("p", "dp_plus", "dp_minus")


def net_triangles(usable: np.ndarray) -> np.ndarray:
    """Triangles of the net as flat (i, j) indices, two per fully usable quad.

    Quad (i, j)..(i+1, j+1) is cut along the diagonal (i, j)-(i+1, j+1), which
    runs from its largest to its smallest p. A quad missing only its far corner
    keeps the triangle on the three corners that are left.
    """
    n_i, n_j = usable.shape
    flat = np.arange(n_i * n_j).reshape(n_i, n_j)
    a, b = flat[:-1, :-1], flat[1:, :-1]
    c, d = flat[:-1, 1:], flat[1:, 1:]
    ua, ub = usable[:-1, :-1], usable[1:, :-1]
    uc, ud = usable[:-1, 1:], usable[1:, 1:]
    full = ua & ub & uc & ud
    partial = ua & ub & uc & ~ud
    tris = [
        np.stack([a[full], b[full], d[full]], axis=1),
        np.stack([a[full], d[full], c[full]], axis=1),
        np.stack([a[partial], b[partial], c[partial]], axis=1),
    ]
    return np.concatenate(tris, axis=0)


class NetInterpolator:
    """Barycentric interpolation on the triangulated characteristic net.

    Points that fall in no triangle evaluate to NaN.
    """

    def __init__(self, grid: CharGrid) -> None:
        usable = grid.usable
        tris = net_triangles(usable)
        if len(tris) == 0:
            raise EmptyRegion("characteristic net has no complete cell to triangulate")
        self.grid = grid
        self._usable = usable
        # compress to usable nodes so the triangulation carries no NaN vertices
        compact = np.full(usable.size, -1, dtype=np.int64)
        compact[usable.ravel()] = np.arange(int(usable.sum()))
        xi, eta = polar_to_cartesian(grid.r[usable], grid.theta[usable])
        self.triangulation = Triangulation(xi, eta, compact[tris])
        self.finder = TrapezoidMapTriFinder(self.triangulation)
        self._cache: dict[str, LinearTriInterpolator] = {}
        logger.debug("net triangulated: %d nodes, %d triangles", usable.sum(), len(tris))

    def _interpolator(self, name: str, values: Optional[np.ndarray]) -> LinearTriInterpolator:
        if values is not None:
            return LinearTriInterpolator(self.triangulation, values[self._usable], self.finder)
        if name not in self._cache:
            z = getattr(self.grid, name)[self._usable]
            self._cache[name] = LinearTriInterpolator(self.triangulation, z, self.finder)
        return self._cache[name]

    def __call__(self, xi, eta, field: str = "p", values: Optional[np.ndarray] = None):
        """Interpolate a grid field (or any grid-shaped array) at Cartesian points."""
        if values is None and field not in FIELDS:
            raise ValueError(f"unknown field {field!r}; expected one of {FIELDS}")
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        out = self._interpolator(field, values)(xi, eta)
        return np.ma.filled(np.ma.asarray(out, dtype=float), np.nan)

    def polar(self, r, theta, field: str = "p", values: Optional[np.ndarray] = None):
        xi, eta = polar_to_cartesian(np.asarray(r, float), np.asarray(theta, float))
        return self(xi, eta, field, values)

    def covers(self, xi, eta) -> np.ndarray:
        return self.finder(np.asarray(xi, float), np.asarray(eta, float)) >= 0


def solved_square(usable: np.ndarray) -> int:
    """Largest K with nodes [0..K] x [0..K] all usable (-1 if the corner is not)."""
    k = -1
    n = min(usable.shape)
    while k + 1 < n and usable[: k + 2, : k + 2].all():
        k += 1
    return k


class SplineNet:
    """Bicubic spline of the net in index coordinates (s, t) = (i, j).

    Only the largest fully solved index square is used, so the spline sees a
    rectangular tensor grid. Cartesian points are mapped back to (s, t) by
    Newton iteration started from the linear pathway.
    """

    def __init__(self, grid: CharGrid, newton_tol: float = 1e-13, max_newton: int = 30) -> None:
        k = solved_square(grid.usable)
        if k < 3:
            raise EmptyRegion(f"fully solved index square has side {k + 1}, need at least 4")
        self.grid = grid
        self.side = k
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        s = np.arange(k + 1, dtype=float)
        block = (slice(0, k + 1), slice(0, k + 1))
        xi, eta = polar_to_cartesian(grid.r[block], grid.theta[block])
        self._x = RectBivariateSpline(s, s, xi)
        self._y = RectBivariateSpline(s, s, eta)
        self._fields = {
            name: RectBivariateSpline(s, s, getattr(grid, name)[block]) for name in FIELDS
        }
        self._linear = NetInterpolator(grid)
        self._index_i, self._index_j = np.indices(grid.shape, dtype=float)

    def locate(self, xi, eta) -> tuple[np.ndarray, np.ndarray]:
        """Flat index coordinates of Cartesian points; NaN outside the spline square."""
        xi = np.asarray(xi, dtype=float).ravel()
        eta = np.asarray(eta, dtype=float).ravel()
        s = self._linear(xi, eta, values=self._index_i)
        t = self._linear(xi, eta, values=self._index_j)
        live = np.isfinite(s) & np.isfinite(t)
        s, t = s[live], t[live]
        x0, y0 = xi[live], eta[live]
        for _ in range(self.max_newton if s.size else 0):
            fx = self._x.ev(s, t) - x0
            fy = self._y.ev(s, t) - y0
            xs, xt = self._x.ev(s, t, dx=1), self._x.ev(s, t, dy=1)
            ys, yt = self._y.ev(s, t, dx=1), self._y.ev(s, t, dy=1)
            det = xs * yt - xt * ys
            with np.errstate(divide="ignore", invalid="ignore"):
                ds = (yt * fx - xt * fy) / det
                dt = (xs * fy - ys * fx) / det
            # diverging points are parked off the square and dropped below
            s = np.clip(np.nan_to_num(s - ds, nan=-1.0), -1.0, self.side + 1.0)
            t = np.clip(np.nan_to_num(t - dt, nan=-1.0), -1.0, self.side + 1.0)
            if np.all(np.abs(ds) + np.abs(dt) < self.newton_tol):
                break
        out_s = np.full(xi.shape, np.nan)
        out_t = np.full(xi.shape, np.nan)
        lo, hi = -1e-9, self.side + 1e-9
        inside = (s >= lo) & (s <= hi) & (t >= lo) & (t <= hi)
        out_s[np.flatnonzero(live)[inside]] = s[inside]
        out_t[np.flatnonzero(live)[inside]] = t[inside]
        return out_s, out_t

    def __call__(self, xi, eta, field: str = "p") -> np.ndarray:
        shape = np.shape(xi)
        s, t = self.locate(xi, eta)
        out = np.full(s.shape, np.nan)
        ok = np.isfinite(s)
        out[ok] = self._fields[field].ev(s[ok], t[ok])
        return out.reshape(shape)

    def polar(self, r, theta, field: str = "p") -> np.ndarray:
        xi, eta = polar_to_cartesian(np.asarray(r, float), np.asarray(theta, float))
        return self(xi, eta, field)
