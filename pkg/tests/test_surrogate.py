import numpy as np
import pytest

from reachkit.fno import (
    SpectralWeights,
    fno_forward,
    load_weights,
    random_weights,
    save_weights,
)
from reachkit.grid import FormatError, Grid3
from reachkit.levelset import Disk, sdf_obstacles, solve_hji_vi
from reachkit.surrogate import (
    PerturbedOracle,
    TrainedOperator,
    certify,
    evaluate_backend,
    smooth_noise,
)


def disk_sdf_2d(n, center, radius, lo=-10.0, hi=10.0):
    xs = np.linspace(lo, hi, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    return radius - np.hypot(X - center[0], Y - center[1])


class TestFnoForward:
    def test_all_zero_weights(self):
        rng = np.random.default_rng(0)
        w = random_weights(rng, n_layers=2, d_v=4, modes=(4, 4))
        zero = SpectralWeights(
            lift_w=np.zeros_like(w.lift_w), lift_b=np.zeros_like(w.lift_b),
            layers_w=[np.zeros_like(a) for a in w.layers_w],
            layers_b=[np.zeros_like(a) for a in w.layers_b],
            layers_r=[np.zeros_like(a) for a in w.layers_r],
            proj_w=np.zeros_like(w.proj_w), proj_b=np.zeros_like(w.proj_b))
        out = fno_forward(zero, disk_sdf_2d(32, (0, 0), 1.0), 0.0, 1.0, 8.0)
        assert np.all(out == 0.0)

    def test_identity_passthrough(self):
        # lift injects channel 0, W identity, R = 0, projection extracts
        d_v = 3
        lift = np.zeros((d_v, 5))
        lift[0, 0] = 1.0
        w = SpectralWeights(
            lift_w=lift, lift_b=np.zeros(d_v),
            layers_w=[np.eye(d_v)], layers_b=[np.zeros(d_v)],
            layers_r=[np.zeros((4, 4, d_v, d_v), dtype=complex)],
            proj_w=np.eye(1, d_v), proj_b=np.zeros(1))
        g = disk_sdf_2d(32, (2.0, -1.0), 1.5)
        out = fno_forward(w, g, 0.3, 2.0, 8.0)
        assert np.allclose(out, g, atol=1e-12)

    def test_negative_outputs_possible(self):
        rng = np.random.default_rng(3)
        w = random_weights(rng, n_layers=3, d_v=8, modes=(6, 6))
        out = fno_forward(w, disk_sdf_2d(48, (0, 0), 1.0), 0.0, 4.0, 8.0)
        assert out.min() < 0  # final block carries no rectifier

    def test_resolution_transfer(self):
        """Zero-shot super-resolution: same weights, finer grid, same field."""
        rng = np.random.default_rng(7)
        w = random_weights(rng, n_layers=4, d_v=8, modes=(8, 8))
        coarse = fno_forward(w, disk_sdf_2d(64, (1.0, 2.0), 1.5), 0.5, 4.0, 8.0)
        fine = fno_forward(w, disk_sdf_2d(100, (1.0, 2.0), 1.5), 0.5, 4.0, 8.0)
        xs64 = np.linspace(-10, 10, 64)
        xs100 = np.linspace(-10, 10, 100)
        # bilinear resample of the fine output onto the coarse nodes
        fi = np.interp(xs64, xs100, np.arange(100.0))
        i0 = np.clip(fi.astype(int), 0, 98)
        wgt = fi - i0
        tmp = fine[i0] * (1 - wgt)[:, None] + fine[i0 + 1] * wgt[:, None]
        resampled = (tmp[:, i0] * (1 - wgt)[None, :]
                     + tmp[:, i0 + 1] * wgt[None, :])
        rel = np.linalg.norm(resampled - coarse) / np.linalg.norm(coarse)
        assert rel < 0.05

    def test_too_coarse_grid_rejected(self):
        rng = np.random.default_rng(0)
        w = random_weights(rng, n_layers=1, d_v=4, modes=(12, 12))
        with pytest.raises(ValueError, match="too coarse"):
            fno_forward(w, disk_sdf_2d(16, (0, 0), 1.0), 0.0, 1.0, 8.0)


class TestWeightsIO:
    def test_round_trip_byte_identical(self, tmp_path, rng):
        w = random_weights(rng, n_layers=3, d_v=6, modes=(5, 4))
        p1, p2 = tmp_path / "w1.fnow", tmp_path / "w2.fnow"
        save_weights(w, p1)
        w2 = load_weights(p1)
        save_weights(w2, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(w.lift_w.astype(np.float32),
                              w2.lift_w.astype(np.float32))

    def test_truncated_names_section(self, tmp_path, rng):
        w = random_weights(rng, n_layers=2, d_v=4, modes=(3, 3))
        p = tmp_path / "w.fnow"
        save_weights(w, p)
        data = p.read_bytes()
        p.write_bytes(data[:60])
        with pytest.raises(FormatError, match="truncated"):
            load_weights(p)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "w.fnow"
        p.write_bytes(b"WXYZ" + b"\0" * 100)
        with pytest.raises(FormatError, match="magic"):
            load_weights(p)


@pytest.fixture(scope="module")
def small_setup(paper_bounds):
    grid = Grid3(dims=(30, 30, 13))
    from reachkit.levelset import sdf_target
    ell = sdf_target(grid, 1.0)

    def solver(obstacles):
        return solve_hji_vi(grid, ell, sdf_obstacles(grid, obstacles),
                            paper_bounds, T=2.0, dt_out=0.5)

    return grid, solver


class TestPerturbedOracle:
    def test_zero_injection_is_oracle(self, small_setup):
        _, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.0, seed=4)
        obs = [Disk((3.0, 0.0), 1.0)]
        assert np.array_equal(b.value_field(obs).values,
                              b.oracle_field(obs).values)

    def test_sup_deviation_exact(self, small_setup):
        _, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.3, seed=4)
        obs = [Disk((3.0, 0.0), 1.0)]
        dev = np.abs(b.value_field(obs).values - b.oracle_field(obs).values)
        assert dev.max() == pytest.approx(0.3, abs=1e-9)
        assert np.all(dev <= 0.3 + 1e-15)

    def test_same_seed_deterministic(self, small_setup):
        _, solver = small_setup
        obs = [Disk((-2.0, 1.0), 0.8)]
        b1 = PerturbedOracle(solver=solver, eps_inj=0.2, seed=11)
        b2 = PerturbedOracle(solver=solver, eps_inj=0.2, seed=11)
        assert np.array_equal(b1.value_field(obs).values,
                              b2.value_field(obs).values)

    def test_evaluate_backend_slice(self, small_setup):
        grid, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.0, seed=0)
        sl = evaluate_backend(b, [], grid.axis(2)[3], 2.0)
        assert np.array_equal(sl, b.value_field([]).values[-1][:, :, 3])


@pytest.fixture(scope="module")
def scenarios(small_setup):
    _, solver = small_setup
    rng = np.random.default_rng(424242)
    out = []
    for _ in range(4):
        obs = [Disk((rng.uniform(-5, 5), rng.uniform(-5, 5)),
                    rng.uniform(0.5, 2.0))]
        out.append((obs, solver(obs)))
    return out


class TestCertify:
    def test_oracle_backend_all_zero(self, small_setup, scenarios, paper_bounds):
        _, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.0, seed=0)
        for obs, vf in scenarios:
            b.seed_oracle(obs, vf)
        rep = certify(b, scenarios, paper_bounds)
        assert rep.epsilon == 0.0
        assert rep.epsilon0 == 0.0
        assert rep.violation_bound == 0.0
        assert rep.eta_include_eps == 1.0
        assert rep.passed

    def test_perturbed_certification_passes(self, small_setup, scenarios,
                                            paper_bounds):
        _, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.3, seed=9)
        for obs, vf in scenarios:
            b.seed_oracle(obs, vf)
        rep = certify(b, scenarios, paper_bounds, epsilon_for_eta=0.3)
        assert rep.epsilon == pytest.approx(0.3, abs=1e-6)
        assert rep.eta_include_eps == 1.0
        assert rep.passed
        assert rep.rho >= 0.0
        assert rep.violation_bound > 0.0

    def test_bound_monotonicity(self, paper_bounds):
        # direct algebraic assertions on the violation-bound formula
        def bound(eps0, rho, alpha0):
            return ((1 + rho) ** 2 * paper_bounds.m_f**2 * eps0**2
                    / (alpha0**2 * 800 * np.pi))

        assert bound(0.2, 0.4, 0.03) > bound(0.1, 0.4, 0.03)
        assert bound(0.1, 0.5, 0.03) > bound(0.1, 0.4, 0.03)
        assert bound(0.1, 0.4, 0.05) < bound(0.1, 0.4, 0.03)

    def test_report_json_round_trip(self, small_setup, scenarios, paper_bounds,
                                    tmp_path):
        import json
        _, solver = small_setup
        b = PerturbedOracle(solver=solver, eps_inj=0.1, seed=2)
        for obs, vf in scenarios:
            b.seed_oracle(obs, vf)
        rep = certify(b, scenarios, paper_bounds)
        path = tmp_path / "report.json"
        rep.to_json(path)
        blob = json.loads(path.read_text())
        assert blob["passed"] is True
        assert blob["n_scenarios"] == 4


class TestTrainedOperatorBackend:
    def test_value_field_shapes_and_determinism(self, rng):
        grid = Grid3(dims=(24, 24, 5))
        w = random_weights(rng, n_layers=2, d_v=4, modes=(6, 6))
        op = TrainedOperator(weights=w, grid=grid, times=np.array([0.0, 1.0]))
        vf1 = op.value_field([Disk((2.0, 2.0), 1.0)])
        vf2 = op.value_field([Disk((2.0, 2.0), 1.0)])
        assert vf1.values.shape == (2, 24, 24, 5)
        assert np.array_equal(vf1.values, vf2.values)


class TestSmoothNoise:
    def test_rescaled_sup(self, paper_grid):
        noise = smooth_noise(paper_grid, np.arange(5) * 0.25, 0.5, seed=3)
        assert np.abs(noise).max() == pytest.approx(0.5, abs=1e-12)

    def test_theta_periodic(self, paper_grid):
        # wave numbers in theta are integers: value continuity across the seam
        noise = smooth_noise(paper_grid, [0.0], 1.0, seed=5)[0]
        seam_gap = np.abs(noise[:, :, 0] - noise[:, :, -1])
        hth = paper_grid.spacing[2]
        assert seam_gap.max() < 3.0 * hth  # bounded by the max wave slope
