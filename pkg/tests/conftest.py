import dataclasses
import math

import numpy as np
import pytest

from pgrad.schemas import SolverConfig
from pgrad.solver import solve_interior
from pgrad.types import STATUS_CODE, CharGrid


@pytest.fixture
def solver_config():
    """Small net that solves in well under a second"""
    return SolverConfig(n_seeds=9)


@pytest.fixture(scope="session")
def grid9():
    """Solved 9 x 9 net at unit scale"""
    return solve_interior(SolverConfig(n_seeds=9))


@pytest.fixture(scope="session")
def grid17():
    """Solved 17 x 17 net at unit scale"""
    return solve_interior(SolverConfig(n_seeds=17))


@pytest.fixture(scope="session")
def grid33():
    """Solved 33 x 33 net at unit scale"""
    return solve_interior(SolverConfig(n_seeds=33))


@pytest.fixture(scope="session")
def grid65():
    """Solved 65 x 65 net at unit scale"""
    return solve_interior(SolverConfig(n_seeds=65))


@pytest.fixture(scope="session")
def grid129():
    """Solved 129 x 129 net at unit scale"""
    return solve_interior(SolverConfig(n_seeds=129))


@pytest.fixture(scope="session")
def grid257():
    """Solved 257 x 257 net at unit scale, the finest refinement level"""
    return solve_interior(SolverConfig(n_seeds=257))


def polar_grid(p_fn, r, theta, dp_plus=None, dp_minus=None, scale=1.0):
    """CharGrid on a tensor polar mesh, node (i, j) at (r[i], theta[j]).

    Every node is marked solved, so the interpolators see one rectangular net.
    """
    R, T = np.meshgrid(np.asarray(r, float), np.asarray(theta, float), indexing="ij")
    P = np.asarray(p_fn(R, T), dtype=float)
    return CharGrid(
        r=R,
        theta=T,
        p=P,
        dp_plus=np.array(dp_plus(R, T) if dp_plus else np.ones_like(P), dtype=float),
        dp_minus=np.array(dp_minus(R, T) if dp_minus else -np.ones_like(P), dtype=float),
        status=np.full(P.shape, STATUS_CODE["solved"], dtype=np.int8),
        iterations=np.zeros(P.shape, dtype=np.int32),
        mismatch=np.zeros(P.shape),
        seeds_lower=(),
        seeds_upper=(),
        config=SolverConfig(n_seeds=max(P.shape[0], 2)),
        scale=scale,
    )


@pytest.fixture
def make_polar_grid():
    """Factory for synthetic nets with a closed-form pressure"""
    return polar_grid


@pytest.fixture(scope="session")
def exp_grid():
    """p = exp(-0.2 / r) on a mesh that reaches p ~ 1e-6 near the origin"""
    r = np.geomspace(0.015, 1.0, 97)
    theta = np.linspace(0.05, math.pi / 2 - 0.05, 49)
    return polar_grid(
        lambda R, T: np.exp(-0.2 / R),
        r,
        theta,
        dp_plus=lambda R, T: 0.2 * np.sqrt(np.exp(-0.2 / R)),
        dp_minus=lambda R, T: -0.2 * np.sqrt(np.exp(-0.2 / R)),
    )


def mirror_node(node):
    """Reflection of a node across θ = π/4: ∂₊p and −∂₋p trade places"""
    return dataclasses.replace(
        node,
        theta=math.pi / 2 - node.theta,
        dp_plus=-node.dp_minus,
        dp_minus=-node.dp_plus,
        i=node.j,
        j=node.i,
    )


def assert_close(actual, expected, rel=1e-12, abs_=0.0):
    """Element-wise closeness with NaN treated as equal to NaN"""
    np.testing.assert_allclose(actual, expected, rtol=rel, atol=abs_, equal_nan=True)


def assert_net_invariants(grid):
    """Signs, positivity and hyperbolicity on every usable node"""
    usable = grid.usable
    p, r2 = grid.p[usable], grid.r[usable] ** 2
    assert np.all(p > 0)
    assert np.all(p < r2)
    assert np.all(grid.dp_plus[usable] > 0)
    assert np.all(grid.dp_minus[usable] < 0)


def assert_svg(path, size_in=6.0):
    """Deterministic SVG with the expected view box"""
    text = path.read_text(encoding="utf-8")
    side = int(round(size_in * 72))
    assert text.lstrip().startswith("<?xml")
    assert f'viewBox="0 0 {side} {side}"' in text
    return text
