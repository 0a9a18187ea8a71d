import numpy as np
import pytest

from reachkit.grid import Grid3, ValueField
from reachkit.reachsets import (
    FeasibleRegion,
    Grid2,
    OutOfLocalFrame,
    ReachMask2,
    SafeSetAnchor,
    epsilon_sublevel,
    heading_agnostic,
    inclusion_volume,
    mask_from_rle,
    mask_rle,
    mask_to_pgm,
    overlap_check,
    translate_query,
)


def disk_mask(grid2: Grid2, center, radius):
    X, Y = np.meshgrid(grid2.axis(0), grid2.axis(1), indexing="ij")
    return ReachMask2(grid=grid2, t=0.0, epsilon=0.0,
                      mask=np.hypot(X - center[0], Y - center[1]) <= radius)


class TestEpsilonSublevel:
    def test_zero_margin_identity(self, free_solve):
        m = epsilon_sublevel(free_solve, free_solve.horizon, 0.0)
        assert np.array_equal(m.mask, free_solve.values[-1] <= 0.0)

    def test_huge_margin_empty(self, free_solve):
        eps = float(np.abs(free_solve.values).max()) + 1.0
        assert epsilon_sublevel(free_solve, 8.0, eps).volume() == 0

    def test_underapproximation_mechanized(self, free_solve, rng):
        """Seeded smooth noise with sup norm <= 0.3: the 0.3-sublevel of the
        perturbed field sits inside the truth zero-sublevel, node for node."""
        truth = free_solve
        X, Y, TH = truth.grid.meshes()
        noise = np.zeros_like(truth.values)
        for t_idx, t in enumerate(truth.times):
            acc = np.zeros_like(X)
            for _ in range(6):
                kx, ky = rng.uniform(-0.4, 0.4, 2)
                kth = rng.integers(0, 3)
                kt = rng.uniform(-0.5, 0.5)
                phase = rng.uniform(0, 2 * np.pi)
                acc = acc + np.sin(kx * X + ky * Y + kth * TH + kt * t + phase)
            noise[t_idx] = acc
        noise *= 0.3 / np.abs(noise).max()
        perturbed = ValueField(grid=truth.grid, times=truth.times,
                               values=truth.values + noise)
        for t in truth.times:
            lm = epsilon_sublevel(perturbed, t, 0.3)
            tm = epsilon_sublevel(truth, t, 0.0)
            assert not np.any(lm.mask & ~tm.mask)

    def test_monotone_in_epsilon(self, free_solve):
        m1 = epsilon_sublevel(free_solve, 8.0, 0.1)
        m2 = epsilon_sublevel(free_solve, 8.0, 0.4)
        assert not np.any(m2.mask & ~m1.mask)

    def test_out_of_range(self, free_solve):
        with pytest.raises(Exception):
            epsilon_sublevel(free_solve, 9.0, 0.0)


class TestHeadingAgnostic:
    def test_heading_independent_field_matches_any_slice(self, free_solve):
        # terminal slice is the heading-independent max(ell, g)
        m2 = heading_agnostic(free_solve, 0.0, 0.0)
        m3 = epsilon_sublevel(free_solve, 0.0, 0.0)
        assert np.array_equal(m2.mask, m3.mask[:, :, 0])

    def test_min_semantics_single_column(self):
        grid = Grid3(dims=(5, 5, 4))
        vals = np.ones((1, 5, 5, 4))
        vals[0, 2, 3, 1] = -1.0  # negative at one heading only
        vf = ValueField(grid=grid, times=np.array([0.0]), values=vals)
        m2 = heading_agnostic(vf, 0.0, 0.0)
        assert m2.mask[2, 3] and m2.mask.sum() == 1

    def test_projection_equality(self, free_solve):
        m3 = epsilon_sublevel(free_solve, 8.0, 0.0)
        m2 = heading_agnostic(free_solve, 8.0, 0.0)
        assert np.array_equal(m2.mask, m3.mask.any(axis=2))

    def test_restricted_heading_subset(self, free_solve):
        full = heading_agnostic(free_solve, 8.0, 0.0)
        part = heading_agnostic(free_solve, 8.0, 0.0, theta_indices=range(3))
        assert not np.any(part.mask & ~full.mask)


class TestTranslateQuery:
    def test_zero_shift_identity(self, free_solve):
        anchor = SafeSetAnchor(center=(0.0, 0.0), radius=1.0, half_width=10.0)
        v = translate_query((2.0, 1.0), 0.5, 8.0, anchor, free_solve)
        assert v == free_solve.interpolate(2.0, 1.0, 0.5, 8.0)

    def test_center_maps_to_origin(self, free_solve):
        anchor = SafeSetAnchor(center=(7.0, -3.0), radius=1.0, half_width=10.0)
        v = translate_query((7.0, -3.0), 0.0, 8.0, anchor, free_solve)
        assert v == free_solve.interpolate(0.0, 0.0, 0.0, 8.0)

    def test_two_anchors_bit_equal(self, free_solve):
        a1 = SafeSetAnchor(center=(5.0, 5.0), radius=1.0, half_width=10.0)
        a2 = SafeSetAnchor(center=(-4.0, 2.0), radius=1.0, half_width=10.0)
        offset = (1.7, -2.2)
        v1 = translate_query((5.0 + offset[0], 5.0 + offset[1]), 1.0, 8.0,
                             a1, free_solve)
        v2 = translate_query((-4.0 + offset[0], 2.0 + offset[1]), 1.0, 8.0,
                             a2, free_solve)
        assert v1 == v2

    def test_out_of_local_frame(self, free_solve):
        anchor = SafeSetAnchor(center=(0.0, 0.0), radius=1.0, half_width=10.0)
        with pytest.raises(OutOfLocalFrame):
            translate_query((11.0, 0.0), 0.0, 8.0, anchor, free_solve)


class TestOverlap:
    GRID = Grid2(((-3.0, 3.0), (-3.0, 3.0)), (301, 301))

    def test_identical_masks(self):
        m = disk_mask(self.GRID, (0.0, 0.0), 2.0)
        assert overlap_check(m, m, 0.5) is not None

    def test_disjoint_masks(self):
        a = disk_mask(self.GRID, (-2.0, 0.0), 0.5)
        b = disk_mask(self.GRID, (2.0, 0.0), 0.5)
        assert overlap_check(a, b, 0.1) is None

    def test_lens_geometry(self):
        # two unit disks 1.5 apart: the largest inscribed ball of the lens
        # has radius 0.25 at the midpoint
        a = disk_mask(self.GRID, (-0.75, 0.0), 1.0)
        b = disk_mask(self.GRID, (0.75, 0.0), 1.0)
        w = overlap_check(a, b, 0.2)
        assert w is not None
        assert np.hypot(*w) < 0.3  # near the midpoint
        assert overlap_check(a, b, 0.8) is None

    def test_witness_reassertion(self):
        a = disk_mask(self.GRID, (-0.75, 0.0), 1.0)
        b = disk_mask(self.GRID, (0.75, 0.0), 1.0)
        delta = 0.2
        w = overlap_check(a, b, delta)
        for m in (a, b):
            X, Y = np.meshgrid(m.grid.axis(0), m.grid.axis(1), indexing="ij")
            near = np.hypot(X - w[0], Y - w[1]) <= delta
            assert np.all(m.mask[near])

    def test_mixed_resolution_conservative(self):
        coarse = Grid2(((-3.0, 3.0), (-3.0, 3.0)), (61, 61))
        a = disk_mask(self.GRID, (-0.75, 0.0), 1.0)
        b = disk_mask(coarse, (0.75, 0.0), 1.0)
        assert overlap_check(a, b, 0.15) is not None
        assert overlap_check(a, b, 0.8) is None


class TestInclusionVolume:
    def mask_of(self, arr):
        grid = Grid3(dims=(4, 4, 4))
        full = np.zeros((4, 4, 4), dtype=bool)
        full.flat[:arr.size] = arr.ravel()
        from reachkit.reachsets import ReachMask3
        return ReachMask3(grid=grid, t=0.0, epsilon=0.0, mask=full)

    def test_identity(self, rng):
        m = self.mask_of(rng.random(40) < 0.5)
        assert inclusion_volume(m, m) == (1.0, False)

    def test_subset(self, rng):
        truth = rng.random(64).reshape(4, 4, 4) < 0.6
        learned = truth.copy()
        learned[np.argwhere(learned)[0][0]] = False  # drop one plane -> subset
        eta, vac = inclusion_volume(self.mask_of(learned), self.mask_of(truth))
        assert eta == 1.0 and not vac

    def test_one_extra_node(self):
        truth = np.zeros(64, dtype=bool)
        truth[:10] = True
        learned = truth.copy()
        learned[20] = True  # one node outside truth
        eta, _ = inclusion_volume(self.mask_of(learned), self.mask_of(truth))
        assert eta == pytest.approx(10 / 11)

    def test_vacuous_empty(self):
        truth = np.ones(64, dtype=bool)
        eta, vac = inclusion_volume(self.mask_of(np.zeros(64, bool)),
                                    self.mask_of(truth))
        assert eta == 1.0 and vac


class TestFeasibleRegion:
    def build(self, free_solve, centers, eps=0.3):
        anchors = [SafeSetAnchor(center=c, radius=1.0, half_width=10.0)
                   for c in centers]
        return FeasibleRegion.from_fields(anchors, [free_solve] * len(anchors),
                                          free_solve.horizon, eps)

    def test_single_anchor_matches_mask(self, free_solve):
        region = self.build(free_solve, [(0.0, 0.0)])
        m2 = heading_agnostic(free_solve, free_solve.horizon, 0.3)
        xs = free_solve.grid.axis(0)
        ys = free_solve.grid.axis(1)
        for i in range(0, 50, 7):
            for j in range(0, 50, 7):
                assert region.contains(xs[i], ys[j]) == bool(m2.mask[i, j])

    def test_union_membership(self, free_solve):
        region = self.build(free_solve, [(-15.0, 0.0), (15.0, 0.0)])
        assert region.contains(15.0, 0.0)      # inside second anchor only
        assert region.contains(-15.0, 0.0)
        assert not region.contains(0.0, 14.0)  # inside neither reach set

    def test_outside_every_local_domain(self, free_solve):
        region = self.build(free_solve, [(0.0, 0.0)])
        assert not region.contains(50.0, 50.0)

    def test_monotone_under_added_anchors(self, free_solve, rng):
        r1 = self.build(free_solve, [(0.0, 0.0)])
        r2 = self.build(free_solve, [(0.0, 0.0), (8.0, 0.0)])
        pts = rng.uniform(-12, 12, (100, 2))
        for x, y in pts:
            assert r2.contains(x, y) >= r1.contains(x, y)


class TestMaskExport:
    def test_rle_round_trip(self, rng):
        mask = rng.random((17, 23)) < 0.4
        assert np.array_equal(mask_from_rle(mask_rle(mask)), mask)

    def test_rle_all_false(self):
        mask = np.zeros((4, 4), dtype=bool)
        blob = mask_rle(mask)
        assert blob["first"] is False and sum(blob["runs"]) == 16

    def test_pgm_header(self):
        mask = np.zeros((8, 6), dtype=bool)
        mask[2, 3] = True
        data = mask_to_pgm(mask)
        assert data.startswith(b"P5\n8 6\n255\n")
        assert len(data) == len(b"P5\n8 6\n255\n") + 48
