"""Tests for voxel counting, augmentation, and grid serialization."""

from __future__ import annotations

import numpy as np
import pytest

from frustumkit.cropbox import ScaleSpec
from frustumkit.errors import GeometryError
from frustumkit.geometry import Aabb3
from frustumkit.voxelizer import (
    VoxelGrid,
    augment,
    read_sparse_csv,
    read_voxel_grid,
    rotate_about_vertical,
    voxelize,
    write_sparse_csv,
    write_voxel_grid,
)

SPEC = ScaleSpec("unit2", crop_side=2.0, crop_height=1.5, grid=(8, 8, 6))
CROP = Aabb3(center=(0.0, 0.0, 0.75), side=2.0, height=1.5)


class TestVoxelize:
    def test_count_conservation_against_per_point_oracle(self):
        rng = np.random.default_rng(31)
        cloud = rng.uniform([-2, -2, -1], [3, 3, 3], size=(5000, 3))
        grid = voxelize(cloud, CROP, SPEC)
        lo = CROP.min_corner
        hi = CROP.max_corner
        expected = 0
        for p in cloud:
            if lo[0] <= p[0] <= hi[0] and lo[1] <= p[1] <= hi[1] and lo[2] <= p[2] <= hi[2]:
                expected += 1
        assert grid.total_points == expected

    def test_single_point_lands_in_its_cell(self):
        spec = ScaleSpec("d", crop_side=2.0, crop_height=2.0, grid=(2, 2, 2))
        crop = Aabb3(center=(1.0, 1.0, 1.0), side=2.0, height=2.0)  # spans [0,2]^3
        grid = voxelize(np.array([[0.5, 1.5, 0.25]]), crop, spec)
        assert grid.data[0, 1, 0] == 1
        assert grid.total_points == 1

    def test_interior_face_goes_to_higher_cell(self):
        spec = ScaleSpec("d", crop_side=2.0, crop_height=2.0, grid=(2, 2, 2))
        crop = Aabb3(center=(1.0, 1.0, 1.0), side=2.0, height=2.0)
        grid = voxelize(np.array([[1.0, 0.5, 0.5]]), crop, spec)  # exactly on x face
        assert grid.data[1, 0, 0] == 1

    def test_crop_extremes(self):
        spec = ScaleSpec("d", crop_side=2.0, crop_height=2.0, grid=(2, 2, 2))
        crop = Aabb3(center=(1.0, 1.0, 1.0), side=2.0, height=2.0)
        grid = voxelize(np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]]), crop, spec)
        assert grid.data[0, 0, 0] == 1  # min corner in first cell
        assert grid.data[1, 1, 1] == 1  # max corner folds into last cell
        assert grid.total_points == 2

    def test_points_outside_are_ignored(self):
        cloud = np.array([[5.0, 0.0, 0.5], [0.0, 0.0, 9.0], [-3.0, 0.0, 0.5]])
        grid = voxelize(cloud, CROP, SPEC)
        assert grid.total_points == 0

    def test_translation_equivariance(self):
        rng = np.random.default_rng(7)
        cloud = rng.uniform([-1, -1, 0], [1, 1, 1.5], size=(800, 3))
        shift = np.array([4.0, -2.0, 8.0])  # dyadic, exact in floats
        moved_crop = Aabb3(center=CROP.center + shift, side=CROP.side, height=CROP.height)
        a = voxelize(cloud, CROP, SPEC)
        b = voxelize(cloud + shift, moved_crop, SPEC)
        np.testing.assert_array_equal(a.data, b.data)

    def test_crop_extent_must_match_spec(self):
        with pytest.raises(GeometryError):
            voxelize(np.zeros((1, 3)), Aabb3(center=(0, 0, 0), side=1.0, height=1.0), SPEC)

    def test_empty_cloud(self):
        grid = voxelize(np.zeros((0, 3)), CROP, SPEC)
        assert grid.total_points == 0
        assert grid.dims == SPEC.grid


class TestAugment:
    def test_zero_yaw_rotation_is_identity(self):
        rng = np.random.default_rng(3)
        cloud = rng.normal(size=(100, 3))
        out = rotate_about_vertical(cloud, (0.3, -0.2), 0.0)
        np.testing.assert_array_equal(out, cloud)

    def test_augment_equals_drawn_rotation_plus_jitter(self):
        """The augmentation is exactly its documented draw sequence."""
        rng = np.random.default_rng(11)
        cloud = rng.uniform(-1, 1, size=(50, 3))
        seed = 77
        out = augment(cloud, CROP, rng_seed=seed, jitter_sigma=0.0)
        check = np.random.default_rng(seed)
        yaw = check.uniform(0.0, 2.0 * np.pi)
        expected = rotate_about_vertical(cloud, (CROP.center[0], CROP.center[1]), yaw)
        np.testing.assert_array_equal(out, expected)

    def test_rotation_preserves_z_and_axis_distance(self):
        rng = np.random.default_rng(13)
        cloud = rng.uniform(-2, 2, size=(200, 3))
        out = augment(cloud, CROP, rng_seed=5, jitter_sigma=0.0)
        np.testing.assert_array_equal(out[:, 2], cloud[:, 2])
        ax, ay = CROP.center[0], CROP.center[1]
        r_in = np.hypot(cloud[:, 0] - ax, cloud[:, 1] - ay)
        r_out = np.hypot(out[:, 0] - ax, out[:, 1] - ay)
        np.testing.assert_allclose(r_out, r_in, atol=1e-12)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(17)
        cloud = rng.normal(size=(64, 3))
        a = augment(cloud, CROP, rng_seed=123, jitter_sigma=0.02)
        b = augment(cloud, CROP, rng_seed=123, jitter_sigma=0.02)
        c = augment(cloud, CROP, rng_seed=124, jitter_sigma=0.02)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_input_not_mutated(self):
        cloud = np.ones((10, 3))
        snapshot = cloud.copy()
        augment(cloud, CROP, rng_seed=1, jitter_sigma=0.05)
        np.testing.assert_array_equal(cloud, snapshot)

    def test_negative_sigma_rejected(self):
        with pytest.raises(GeometryError):
            augment(np.zeros((1, 3)), CROP, rng_seed=1, jitter_sigma=-0.1)


class TestSerialization:
    def _grid(self):
        rng = np.random.default_rng(23)
        cloud = rng.uniform([-1, -1, 0], [1, 1, 1.5], size=(3000, 3))
        return voxelize(cloud, CROP, SPEC)

    def test_binary_round_trip(self, tmp_path):
        grid = self._grid()
        path = str(tmp_path / "grid.vox")
        write_voxel_grid(grid, path)
        back = read_voxel_grid(path)
        assert back.dims == grid.dims
        np.testing.assert_allclose(back.cell, grid.cell, atol=0)
        np.testing.assert_allclose(back.origin, grid.origin, atol=0)
        np.testing.assert_array_equal(back.data, grid.data)

    def test_binary_rejects_wrong_magic(self, tmp_path):
        path = str(tmp_path / "bogus.vox")
        with open(path, "wb") as fh:
            fh.write(b"NOTAGRID" + b"\x00" * 64)
        with pytest.raises(GeometryError):
            read_voxel_grid(path)

    def test_binary_rejects_truncation(self, tmp_path):
        grid = self._grid()
        path = str(tmp_path / "grid.vox")
        write_voxel_grid(grid, path)
        size = (tmp_path / "grid.vox").stat().st_size
        with open(path, "r+b") as fh:
            fh.truncate(size - 5)
        with pytest.raises(GeometryError):
            read_voxel_grid(path)

    def test_sparse_round_trip(self, tmp_path):
        grid = self._grid()
        path = str(tmp_path / "grid.csv")
        write_sparse_csv(grid, path)
        back = read_sparse_csv(path, grid.dims, grid.cell, grid.origin)
        np.testing.assert_array_equal(back.data, grid.data)

    def test_counts_over_u32_rejected_on_write(self, tmp_path):
        data = np.zeros((1, 1, 1), dtype=np.int64)
        data[0, 0, 0] = 2**33
        grid = VoxelGrid(dims=(1, 1, 1), cell=(1.0, 1.0, 1.0), origin=np.zeros(3), data=data)
        with pytest.raises(GeometryError):
            write_voxel_grid(grid, str(tmp_path / "big.vox"))

    def test_grid_validation(self):
        with pytest.raises(GeometryError):
            VoxelGrid(dims=(2, 2, 2), cell=(1, 1, 1), origin=np.zeros(3), data=np.zeros((2, 2, 1), dtype=np.int64))
        with pytest.raises(GeometryError):
            VoxelGrid(dims=(1, 1, 1), cell=(1, 1, 1), origin=np.zeros(3), data=np.zeros((1, 1, 1)))
