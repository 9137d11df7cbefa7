"""
Tests for the two interpolation pathways off the characteristic net
"""

import math

import numpy as np
import pytest
from conftest import polar_grid

from pgrad.coords import polar_to_cartesian
from pgrad.errors import EmptyRegion
from pgrad.interp import NetInterpolator, SplineNet, net_triangles, solved_square

R_MESH = np.linspace(0.5, 1.0, 17)
T_MESH = np.linspace(0.4, 1.2, 17)

pytestmark = pytest.mark.unit


def xi_squared(R, T):
    return (R * np.cos(T)) ** 2


@pytest.fixture(scope="module")
def mesh_grid():
    """p = ξ² on a 17 x 17 polar mesh"""
    return polar_grid(xi_squared, R_MESH, T_MESH)


@pytest.fixture
def inner_points():
    """Points strictly inside the mesh, away from the nodes"""
    rng = np.random.default_rng(7)
    r = rng.uniform(0.55, 0.95, 40)
    theta = rng.uniform(0.45, 1.15, 40)
    return r, theta


class TestTriangles:
    """Test triangulation of the index net"""

    def test_full_net(self):
        """Test two triangles per quad on a fully usable net"""
        usable = np.ones((3, 3), dtype=bool)
        assert net_triangles(usable).shape == (8, 3)

    def test_missing_far_corner(self):
        """Test a quad without its far corner keeps one triangle"""
        usable = np.ones((3, 3), dtype=bool)
        usable[2, 2] = False
        tris = net_triangles(usable)
        assert tris.shape == (7, 3)
        assert 8 not in tris

    def test_solved_square(self):
        """Test the largest usable index square"""
        usable = np.ones((5, 5), dtype=bool)
        assert solved_square(usable) == 4
        usable[3, 1] = False
        assert solved_square(usable) == 2
        usable[0, 0] = False
        assert solved_square(usable) == -1


class TestNetInterpolator:
    """Test barycentric interpolation on the net"""

    def test_nodes_reproduced(self, mesh_grid):
        """Test interpolating at a node returns the node value"""
        interp = NetInterpolator(mesh_grid)
        got = interp.polar(mesh_grid.r[5:8, 5:8], mesh_grid.theta[5:8, 5:8])
        np.testing.assert_allclose(got, mesh_grid.p[5:8, 5:8], rtol=1e-12)

    def test_linear_fields_are_exact(self, mesh_grid, inner_points):
        """Test a field linear in (ξ, η) is reproduced anywhere inside"""
        xi_n, eta_n = polar_to_cartesian(mesh_grid.r, mesh_grid.theta)
        values = 2.0 + 3.0 * xi_n - eta_n
        interp = NetInterpolator(mesh_grid)
        xi, eta = polar_to_cartesian(*inner_points)
        np.testing.assert_allclose(interp(xi, eta, values=values), 2.0 + 3.0 * xi - eta,
                                   rtol=1e-12)

    def test_outside_is_nan(self, mesh_grid):
        """Test points off the net evaluate to NaN"""
        interp = NetInterpolator(mesh_grid)
        out = interp(np.array([5.0, 0.01]), np.array([5.0, 0.01]))
        assert np.all(np.isnan(out))
        assert not interp.covers(np.array([5.0]), np.array([5.0]))[0]

    def test_shape_is_kept(self, mesh_grid):
        """Test 2-D inputs come back 2-D"""
        r, theta = np.meshgrid(np.linspace(0.6, 0.9, 4), np.linspace(0.5, 1.0, 3))
        assert NetInterpolator(mesh_grid).polar(r, theta).shape == (3, 4)

    def test_solved_net(self, grid17):
        """Test the interpolant of a solved net stays between its node values"""
        interp = NetInterpolator(grid17)
        usable = grid17.usable
        r = 0.5 * (grid17.r[4, 4] + grid17.r[5, 5])
        theta = 0.5 * (grid17.theta[4, 4] + grid17.theta[5, 5])
        value = float(interp.polar(np.array([r]), np.array([theta]))[0])
        assert usable[4, 4] and usable[5, 5]
        assert grid17.p[5, 5] <= value <= grid17.p[4, 4]


class TestSplineNet:
    """Test the bicubic index-space pathway"""

    def test_nodes_reproduced(self, mesh_grid):
        """Test the spline returns node values at nodes"""
        spline = SplineNet(mesh_grid)
        got = spline.polar(mesh_grid.r[3:6, 3:6], mesh_grid.theta[3:6, 3:6])
        np.testing.assert_allclose(got, mesh_grid.p[3:6, 3:6], rtol=1e-9)

    def test_locate_inverts_the_map(self, mesh_grid):
        """Test Newton inversion recovers index coordinates of cell centres"""
        spline = SplineNet(mesh_grid)
        s = np.array([2.5, 7.5, 10.25])
        t = np.array([3.5, 8.5, 12.75])
        xi = spline._x.ev(s, t)
        eta = spline._y.ev(s, t)
        got_s, got_t = spline.locate(xi, eta)
        np.testing.assert_allclose(got_s, s, atol=1e-9)
        np.testing.assert_allclose(got_t, t, atol=1e-9)

    def test_more_accurate_than_linear(self, mesh_grid, inner_points):
        """Test the cubic pathway beats the linear one on a smooth field"""
        r, theta = inner_points
        exact = xi_squared(r, theta)
        cubic = np.abs(SplineNet(mesh_grid).polar(r, theta) - exact)
        linear = np.abs(NetInterpolator(mesh_grid).polar(r, theta) - exact)
        assert cubic.max() < 1e-5
        assert cubic.max() < linear.max()

    def test_outside_is_nan(self, mesh_grid):
        """Test points off the spline square evaluate to NaN"""
        assert math.isnan(SplineNet(mesh_grid).polar(np.array([3.0]), np.array([0.7]))[0])

    def test_too_small(self):
        """Test a net without a 4 x 4 solved square is refused"""
        grid = polar_grid(xi_squared, R_MESH[:3], T_MESH[:3])
        with pytest.raises(EmptyRegion):
            SplineNet(grid)
