import numpy as np
import pytest

from reachkit.dynamics import Bounds, Costate, Disturbance, State, integrate, \
    optimal_control, worst_disturbance
from reachkit.grid import Grid3
from reachkit.levelset import Disk, cfl_step, sdf_obstacles, sdf_target, solve_hji_vi


class TestSdf:
    def test_target_values_exact_on_nodes(self):
        grid = Grid3(dims=(21, 21, 8))  # nodes at integer coordinates
        ell = sdf_target(grid, 1.0)
        assert ell(0.0, 0.0, 0.0) == -1.0
        assert ell(1.0, 0.0, 0.0) == 0.0
        assert ell(3.0, 4.0, 0.0) == 4.0

    def test_obstacle_union(self):
        grid = Grid3(dims=(21, 21, 8))
        g1 = sdf_obstacles(grid, [Disk((0.0, 0.0), 2.0)])
        assert g1(0.0, 0.0, 0.0) == 2.0
        assert g1(5.0, 0.0, 0.0) == -3.0
        g2 = sdf_obstacles(grid, [Disk((0.0, 0.0), 1.0), Disk((4.0, 0.0), 1.0)])
        assert g2(2.0, 0.0, 0.0) == -1.0

    def test_empty_sentinel(self, paper_grid):
        g = sdf_obstacles(paper_grid, [])
        assert np.all(g.data == -paper_grid.diagonal())


class TestSolver:
    def test_terminal_slice_bit_exact(self, free_solve, target_field, free_g):
        assert np.array_equal(free_solve.values[0],
                              np.maximum(target_field.data, free_g.data))

    def test_t_to_zero_limit(self, paper_grid, target_field, free_g, paper_bounds):
        vf = solve_hji_vi(paper_grid, target_field, free_g, paper_bounds,
                          T=0.25, dt_out=0.25)
        assert vf.values.shape[0] == 2
        assert np.array_equal(vf.values[0],
                              np.maximum(target_field.data, free_g.data))

    def test_vi_lower_bound(self, free_solve, free_g):
        assert np.all(free_solve.values >= free_g.data[None] - 1e-12)

    def test_monotone_in_horizon(self, free_solve):
        assert np.all(np.diff(free_solve.values, axis=0) <= 1e-12)

    def test_obstacle_covering_target_empty_set(self, paper_grid, paper_bounds):
        ell = sdf_target(paper_grid, 1.0)
        g = sdf_obstacles(paper_grid, [Disk((0.0, 0.0), 2.0)])
        vf = solve_hji_vi(paper_grid, ell, g, paper_bounds, T=2.0, dt_out=0.5)
        assert np.all(vf.values >= 0.0)

    def test_cfl_pinned_step_errors(self, paper_grid, target_field, free_g,
                                    paper_bounds):
        limit = cfl_step(paper_grid, paper_bounds)
        with pytest.raises(ValueError, match="CFL"):
            solve_hji_vi(paper_grid, target_field, free_g, paper_bounds,
                         T=1.0, dt_out=0.25, dt_internal=2 * limit)
        with pytest.raises(ValueError, match="internal step"):
            solve_hji_vi(paper_grid, target_field, free_g, paper_bounds,
                         T=1.0, dt_out=0.01, dt_internal=0.05)

    def test_grid_refinement_consistency(self, paper_bounds):
        # doubling resolution moves shared-node values by < h * (M_f + d_bar)
        coarse = Grid3(dims=(26, 26, 12))
        fine = Grid3(dims=(51, 51, 24))
        out = {}
        for grid in (coarse, fine):
            ell = sdf_target(grid, 1.0)
            g = sdf_obstacles(grid, [Disk((3.0, 0.0), 1.5)])
            out[grid.dims] = solve_hji_vi(grid, ell, g, paper_bounds,
                                          T=2.0, dt_out=0.5)
        vc = out[coarse.dims].values
        vf_ = out[fine.dims].values[:, ::2, ::2, ::2]
        tol = coarse.spacing[0] * (paper_bounds.m_f + paper_bounds.d_bar)
        assert np.max(np.abs(vc - vf_)) < tol

    def test_translation_equivariance(self, paper_bounds):
        # both scenes shifted by whole grid cells; compare away from walls
        grid = Grid3(dims=(50, 50, 25))
        h = grid.spacing[0]
        shift = (5 * h, 3 * h)
        obs_a = [Disk((2.0, 1.0), 1.0)]
        obs_b = [Disk((2.0 + shift[0], 1.0 + shift[1]), 1.0)]

        def solve(obs, cx, cy):
            X, Y, _ = grid.meshes()
            from reachkit.grid import ScalarField
            ell = ScalarField(grid, np.hypot(X - cx, Y - cy) - 1.0)
            g = sdf_obstacles(grid, obs)
            return solve_hji_vi(grid, ell, g, paper_bounds, T=2.0, dt_out=0.5)

        vf_a = solve(obs_a, 0.0, 0.0)
        vf_b = solve(obs_b, *shift)
        qs = [(-1.5, 0.5), (2.0, 2.0), (0.5, -2.0), (3.5, 1.0)]
        for (qx, qy) in qs:
            for th in (-2.0, 0.0, 1.0):
                for t in (1.0, 2.0):
                    va = vf_a.interpolate(qx, qy, th, t)
                    vb = vf_b.interpolate(qx + shift[0], qy + shift[1], th, t)
                    assert va == pytest.approx(vb, abs=1e-6)


class TestPolicyValueConsistency:
    def test_closed_loop_reaches_target(self, free_solve, paper_bounds, rng):
        """Grid states with V(x, T) <= 0 reach ell <= 0.2 under worst-case play."""
        vf = free_solve
        b = paper_bounds
            # sample reachable grid states away from the walls
        xs, ys, ths = vf.grid.axis(0), vf.grid.axis(1), vf.grid.axis(2)
        VT = vf.values[-1]
        idx = np.argwhere(VT <= -0.1)
        idx = idx[(np.abs(xs[idx[:, 0]]) < 7) & (np.abs(ys[idx[:, 1]]) < 7)]
        sel = idx[rng.choice(len(idx), size=40, replace=False)]
        dt = 0.05
        fails = 0
        for i, j, k in sel:
            s = State(xs[i], ys[j], ths[k])
            t_sel = vf.horizon
            reached = False
            for step in range(int(t_sel / dt)):
                tau = t_sel - step * dt
                if np.hypot(s.x, s.y) <= 1.0:
                    reached = True
                    break
                p = vf.gradient(s.x, s.y, s.theta, tau)
                cost = Costate(*p)
                u = optimal_control(s, cost, b)
                d = worst_disturbance(s, cost, b)
                traj = integrate(s, lambda t, _s: u, lambda t, _s: d,
                                 dt=dt, horizon=dt)
                s = traj.final_state
            final_ell = np.hypot(s.x, s.y) - 1.0
            if not (reached or final_ell <= 0.2):
                fails += 1
        assert fails == 0
