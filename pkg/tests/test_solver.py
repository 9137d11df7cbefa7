"""
Tests for seeding, the single-cell update and the marching solver
"""

import math

import numpy as np
import pytest
from conftest import assert_close, assert_net_invariants, mirror_node
from pydantic import ValidationError

from pgrad.boundary import lower_arc, upper_arc
from pgrad.coords import char_slope
from pgrad.errors import ConfigError, DomainError
from pgrad.schemas import SolverConfig
from pgrad.solver import (
    node_update,
    seed_boundaries,
    seed_fraction,
    solve_interior,
    trace_characteristic,
    update_cell,
)
from pgrad.types import STATUS_CODE
from pgrad.verify import convergence_order


def segment_slope_gap(a, b, family, switch):
    """Relative gap between the slope of segment a-b and the mean slope at its ends"""
    dr_a, dt_a = char_slope(a.r, a.p, family, 0.0, 0.0)
    dr_b, dt_b = char_slope(b.r, b.p, family, 0.0, 0.0)
    if min(abs(dt_a), abs(dt_b)) < switch:
        actual, expected = (b.theta - a.theta) / (b.r - a.r), 0.5 * (dt_a + dt_b)
    else:
        actual, expected = (b.r - a.r) / (b.theta - a.theta), 0.5 * (dr_a + dr_b)
    return abs(actual - expected) / abs(expected)


class TestSeeding:
    """Test seed placement on the two arcs"""

    def test_counts_and_order(self):
        """Test lower seeds descend from π/4 and upper seeds mirror them"""
        lower, upper = seed_boundaries(9, theta_min=math.pi / 64)
        assert len(lower) == len(upper) == 9
        thetas = [s.theta for s in lower]
        assert thetas[0] == math.pi / 4
        assert thetas[-1] == pytest.approx(math.pi / 64)
        assert all(a > b for a, b in zip(thetas, thetas[1:]))
        for lo, up in zip(lower, upper):
            assert up.theta == pytest.approx(math.pi / 2 - lo.theta)
            assert up.p == pytest.approx(lo.p, rel=1e-12)

    def test_seed_data_is_exact_arc_data(self):
        """Test seeds carry the arc values untouched"""
        lower, upper = seed_boundaries(5)
        for s in lower:
            assert s == lower_arc(s.theta)
        for s in upper:
            assert s == upper_arc(s.theta)

    @pytest.mark.parametrize("ratio", [1.0, 4.0])
    def test_refinement_nests(self, ratio):
        """Test seed k of n sits at seed 2k of 2n − 1"""
        for k in range(9):
            assert seed_fraction(2 * k, 17, ratio) == pytest.approx(
                seed_fraction(k, 9, ratio), abs=1e-15
            )

    def test_clustering_ratio(self):
        """Test the first spacing is cluster_ratio times the last"""
        n = 33
        f = [seed_fraction(k, n, 8.0) for k in range(n)]
        assert (f[1] - f[0]) / (f[-1] - f[-2]) == pytest.approx(8.0, rel=0.1)

    def test_too_few_seeds(self):
        """Test fewer than two seeds is a config error"""
        with pytest.raises(ConfigError):
            seed_boundaries(1)
        with pytest.raises(ValidationError):
            SolverConfig(n_seeds=1)


class TestNodeUpdate:
    """Test the single-cell predictor-corrector"""

    def test_first_cell(self, grid9, solver_config):
        """Test the cell next to the corner lies inside both predecessors"""
        pred_plus, pred_minus = grid9.node(0, 1), grid9.node(1, 0)
        node, diag = update_cell(pred_plus, pred_minus, solver_config, (1, 1))
        assert node.status == "solved"
        assert node.index == (1, 1)
        assert 0.0 < node.p < min(pred_plus.p, pred_minus.p)
        assert node.p < node.r**2
        assert node.dp_plus > 0 > node.dp_minus
        assert diag.iterations >= 2
        assert node.p == grid9.p[1, 1]

    def test_first_cell_is_symmetric(self, grid9, solver_config):
        """Test the first cell lands on the bisector θ = π/4"""
        node = node_update(grid9.node(0, 1), grid9.node(1, 0), solver_config)
        assert node.theta == pytest.approx(math.pi / 4, abs=1e-13)
        assert node.dp_plus == pytest.approx(-node.dp_minus, rel=1e-12)

    def test_identical_predecessors(self, grid9, solver_config):
        """Test a degenerate cell returns its predecessor"""
        corner = grid9.node(0, 0)
        node, diag = update_cell(corner, corner, solver_config)
        assert node == corner
        assert diag.iterations == 0

    @pytest.mark.parametrize("index", [(2, 5), (6, 3), (9, 11)])
    def test_mirrored_predecessors(self, grid17, index):
        """Test reflected and swapped predecessors give the reflected node"""
        i, j = index
        pred_plus, pred_minus = grid17.node(i - 1, j), grid17.node(i, j - 1)
        node = node_update(pred_plus, pred_minus, grid17.config)
        mirrored = node_update(mirror_node(pred_minus), mirror_node(pred_plus), grid17.config)
        assert mirrored.p == pytest.approx(node.p, rel=1e-9)
        assert mirrored.r == pytest.approx(node.r, rel=1e-9)
        assert mirrored.theta == pytest.approx(math.pi / 2 - node.theta, rel=1e-9)
        assert mirrored.dp_plus == pytest.approx(-node.dp_minus, rel=1e-9)
        assert mirrored.dp_minus == pytest.approx(-node.dp_plus, rel=1e-9)

    def test_steep_cell_stays_positive(self, grid33):
        """Test a cell next to the upper arc that loses decades of p"""
        cfg = SolverConfig(n_seeds=33, p_floor=1e-300)
        pred_plus, pred_minus = grid33.node(0, 27), grid33.node(1, 26)
        node, _ = update_cell(pred_plus, pred_minus, cfg, (1, 27))
        assert node.status == "solved"
        assert 0.0 < node.p < min(pred_plus.p, pred_minus.p)
        assert node.p < node.r**2

    def test_no_vacuum_frontier_above_the_floor(self, grid33):
        """Test the first row and column next to the arcs are marched through"""
        solved = STATUS_CODE["solved"]
        assert np.all(grid33.status[1, 1:] == solved)
        assert np.all(grid33.status[1:, 1] == solved)
        assert np.all(grid33.p[1, 1:] > grid33.config.p_floor)

    @pytest.mark.convergence
    def test_first_cell_local_error_is_third_order(self):
        """Test the first cell against a nested fine solve of the same cell"""
        errors = []
        for h in (math.pi / 64, math.pi / 128):
            theta_min = math.pi / 4 - h
            coarse = solve_interior(SolverConfig(n_seeds=2, theta_min=theta_min))
            fine = solve_interior(SolverConfig(n_seeds=65, theta_min=theta_min))
            errors.append(abs(coarse.p[1, 1] - fine.p[64, 64]))
        assert math.log2(errors[0] / errors[1]) > 2.5


class TestSolveInterior:
    """Test the marching over the whole net"""

    def test_shape_and_statuses(self, grid9):
        """Test every node has a status and the arcs are boundary nodes"""
        assert grid9.shape == (9, 9)
        assert sum(grid9.status_counts().values()) == 81
        boundary = STATUS_CODE["boundary"]
        assert np.all(grid9.status[:, 0] == boundary)
        assert np.all(grid9.status[0, :] == boundary)
        assert grid9.status[1, 1] == STATUS_CODE["solved"]

    def test_corner_state(self, grid9):
        """Test node (0, 0) carries the corner data"""
        c = grid9.node(0, 0)
        assert (c.r, c.theta, c.p, c.dp_plus, c.dp_minus) == (
            math.sqrt(2.0), math.pi / 4, 1.0, 4.0, -4.0
        )

    def test_arc_nodes_keep_exact_data(self, grid9):
        """Test arc nodes reproduce the arc positions, p and tangential derivative"""
        for i, seed in enumerate(grid9.seeds_lower[1:], start=1):
            assert grid9.r[i, 0] == seed.r
            assert grid9.p[i, 0] == seed.p
            assert grid9.dp_plus[i, 0] == seed.tangential_dp
        for j, seed in enumerate(grid9.seeds_upper[1:], start=1):
            assert grid9.p[0, j] == seed.p
            assert grid9.dp_minus[0, j] == seed.tangential_dp

    def test_invariants(self, grid17):
        """Test signs, positivity and hyperbolicity hold on every usable node"""
        assert_net_invariants(grid17)

    def test_pressure_decreases_into_the_net(self, grid17):
        """Test p falls along rows and columns between usable neighbours"""
        usable = grid17.usable
        down = usable[1:, :] & usable[:-1, :]
        across = usable[:, 1:] & usable[:, :-1]
        assert np.all(grid17.p[1:, :][down] < grid17.p[:-1, :][down])
        assert np.all(grid17.p[:, 1:][across] < grid17.p[:, :-1][across])

    def test_reflection_symmetry(self, grid17):
        """Test node (i, j) mirrors node (j, i) across θ = π/4"""
        assert_close(grid17.p, grid17.p.T, rel=1e-8, abs_=1e-14)
        assert_close(grid17.r, grid17.r.T, rel=1e-8, abs_=1e-14)
        assert_close(grid17.theta, math.pi / 2 - grid17.theta.T, rel=1e-8, abs_=1e-12)
        assert_close(grid17.dp_plus, -grid17.dp_minus.T, rel=1e-8, abs_=1e-14)

    def test_threaded_run_is_identical(self, grid17):
        """Test a worker pool reproduces the serial grid exactly"""
        threaded = solve_interior(SolverConfig(n_seeds=17), workers=3)
        for name in ("r", "theta", "p", "dp_plus", "dp_minus", "status"):
            np.testing.assert_array_equal(getattr(threaded, name), getattr(grid17, name))

    def test_vacuum_floor_stops_marching(self):
        """Test a high floor marks nodes stopped_vacuum instead of raising"""
        grid = solve_interior(SolverConfig(n_seeds=9, p_floor=0.5))
        counts = grid.status_counts()
        assert counts["stopped_vacuum"] > 0
        solved = grid.status == STATUS_CODE["solved"]
        assert np.all(grid.p[solved] > 0.5)
        stopped = grid.status == STATUS_CODE["stopped_vacuum"]
        assert np.all(np.isnan(grid.p[stopped]))

    def test_meta_diagnostics(self, grid9):
        """Test the solve records counts and corrector diagnostics"""
        assert grid9.meta["counts"] == grid9.status_counts()
        assert grid9.meta["max_iterations"] >= 2
        assert grid9.meta["max_mismatch"] >= 0.0

    def test_two_seeds(self):
        """Test the smallest net is the corner, two arc nodes and one cell"""
        cfg = SolverConfig(n_seeds=2, theta_min=math.pi / 4 - math.pi / 64)
        grid = solve_interior(cfg)
        assert grid.shape == (2, 2)
        assert grid.status[1, 1] == STATUS_CODE["solved"]
        direct = node_update(grid.node(0, 1), grid.node(1, 0), cfg)
        assert direct.p == grid.p[1, 1]
        assert direct.r == grid.r[1, 1]

    @pytest.mark.convergence
    def test_reference_point_converges_at_second_order(self):
        """Test p at a fixed interior node across three nested refinements"""
        values = []
        for n, k in ((33, 8), (65, 16), (129, 32)):
            grid = solve_interior(SolverConfig(n_seeds=n))
            values.append(grid.p[k, k])
        assert convergence_order(values) >= 1.8


class TestTraceCharacteristic:
    """Test grid lines through a node"""

    def test_minus_line_is_row(self, grid9):
        """Test the minus line through (3, 2) is row 3, ascending in θ"""
        line = trace_characteristic(grid9, grid9.node(3, 2), "minus")
        assert [n.i for n in line] == [3] * len(line)
        thetas = [n.theta for n in line]
        assert thetas == sorted(thetas)
        assert line[0].index == (3, 0)

    def test_plus_line_is_column(self, grid9):
        """Test the plus line through (3, 2) is column 2, ending on the upper arc"""
        line = trace_characteristic(grid9, grid9.node(3, 2), "plus")
        assert {n.j for n in line} == {2}
        assert line[-1].index == (0, 2)

    @pytest.mark.parametrize("family", ["plus", "minus"])
    def test_segments_follow_characteristic_slopes(self, grid17, family):
        """Test every marched segment carries the mean slope of its two ends"""
        switch = grid17.config.param_switch_lambda
        checked = 0
        for k in range(1, 17):
            start = grid17.node(k, 0) if family == "minus" else grid17.node(0, k)
            line = trace_characteristic(grid17, start, family)
            for a, b in zip(line[:-1], line[1:]):
                later = max(a, b, key=lambda n: n.i + n.j)
                if abs(a.i + a.j - b.i - b.j) != 1 or later.status != "solved":
                    continue
                assert segment_slope_gap(a, b, family, switch) < 1e-7
                checked += 1
        assert checked > 100

    def test_requires_grid_node(self, grid9):
        """Test a node without indices is refused"""
        node = node_update(grid9.node(0, 1), grid9.node(1, 0), SolverConfig(n_seeds=9))
        with pytest.raises(DomainError):
            trace_characteristic(grid9, node, "plus")
