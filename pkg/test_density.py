#!/usr/bin/env python
# -*- coding: UTF-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion

"""
Ground-truth density maps
- k-NN distances against a sort oracle
- sigma clamping, splat normalisation at borders
- mass conservation, permutation invariance, sum-pooling
"""

import math
import unittest

import numpy as np

from asfnet import density
from asfnet.config import GtParams
from asfnet.density import SceneAnnotation
from asfnet.errors import ArgumentError, SpecError, FormatError


def random_annotation(rng, n, size=128):
    pts = rng.uniform(0, size, (n, 2))
    pts = np.minimum(pts, size - 1e-6)
    return SceneAnnotation(size, size, pts.tolist())


class TestKnn(unittest.TestCase):
    def test_collinear(self):
        pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
        self.assertEqual(density.knn_mean_distance(pts, 1, 2), 1.0)

    def test_fewer_neighbours_than_k(self):
        self.assertEqual(density.knn_mean_distance(
            [(0.0, 0.0), (3.0, 4.0)], 0, 10), 5.0)

    def test_sort_oracle(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 100, (50, 2))
        vectorised = density.knn_mean_distances(pts, 10)
        for i in range(50):
            dists = sorted(math.hypot(pts[i, 0] - pts[j, 0],
                                      pts[i, 1] - pts[j, 1])
                           for j in range(50) if j != i)
            oracle = sum(dists[:10]) / 10.0
            self.assertAlmostEqual(density.knn_mean_distance(pts, i, 10),
                                   oracle, places=10)
            self.assertAlmostEqual(vectorised[i], oracle, places=10)

    def test_single_point(self):
        with self.assertRaises(ArgumentError):
            density.knn_mean_distance([(1.0, 1.0)], 0, 3)


class TestSigma(unittest.TestCase):
    def test_adaptive(self):
        self.assertAlmostEqual(density.adaptive_sigma(10.0), 3.0)
        self.assertEqual(density.adaptive_sigma(0.0), 0.5)
        self.assertEqual(density.adaptive_sigma(100.0), 15.0)

    def test_params_validated(self):
        with self.assertRaises(SpecError):
            GtParams.from_dict({"sigma_floor": 2.0, "sigma_cap": 1.0})
        with self.assertRaises(SpecError):
            GtParams.from_dict({"k": 0})


class TestSplat(unittest.TestCase):
    def test_interior_unit_mass(self):
        grid = np.zeros((32, 32))
        density.splat_gaussian(grid, (15.3, 16.7), 2.0)
        self.assertAlmostEqual(grid.sum(), 1.0, delta=1e-6)

    def test_corner_unit_mass(self):
        for centre in ((0.0, 0.0), (31.9, 31.9), (0.2, 31.5)):
            grid = np.zeros((32, 32))
            density.splat_gaussian(grid, centre, 5.0)
            self.assertAlmostEqual(grid.sum(), 1.0, delta=1e-6)

    def test_shape(self):
        grid = np.zeros((41, 41))
        # centre of pixel (20, 20)
        density.splat_gaussian(grid, (20.5, 20.5), 2.0)
        peak = grid[20, 20]
        self.assertEqual(grid.max(), peak)
        self.assertGreater(peak, grid[20, 28])
        self.assertGreater(peak, grid[12, 20])
        for dy, dx in ((0, 3), (3, 0), (0, -3), (-3, 0)):
            self.assertAlmostEqual(grid[20 + dy, 20 + dx], grid[23, 20],
                                   places=12)
        ratio = grid[20, 22] / peak
        self.assertAlmostEqual(ratio, math.exp(-4.0 / 8.0), places=10)

    def test_tiny_sigma(self):
        grid = np.zeros((8, 8))
        density.splat_gaussian(grid, (3.5, 2.5), 1e-3)
        self.assertAlmostEqual(grid[2, 3], 1.0)
        self.assertAlmostEqual(grid.sum(), 1.0)


class TestDensityMap(unittest.TestCase):
    def test_empty(self):
        d = density.generate_density_map(SceneAnnotation(16, 12, []))
        self.assertEqual(d.shape, (1, 1, 12, 16))
        self.assertEqual(d.dtype, np.float32)
        self.assertFalse(d.any())

    def test_two_points(self):
        ann = SceneAnnotation(64, 64, [(5.0, 5.0), (55.0, 50.0)])
        d = density.generate_density_map(ann)
        self.assertAlmostEqual(float(d.sum(dtype=np.float64)), 2.0,
                               delta=1e-6)

    def test_single_point_fallback(self):
        ann = SceneAnnotation(32, 32, [(16.0, 16.0)])
        d = density.generate_density_map(ann)
        grid = np.zeros((32, 32))
        density.splat_gaussian(grid, (16.0, 16.0), 4.0)
        np.testing.assert_allclose(d[0, 0], grid, atol=1e-7)

    def test_mass_conservation(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(1, 201))
            ann = random_annotation(rng, n)
            if rng.uniform() < 0.3:
                ann = SceneAnnotation(128, 128, ann.points + [
                    (0.0, 0.0), (127.99, 127.99), (0.0, 64.0)])
            d = density.generate_density_map(ann)
            total = float(d.sum(dtype=np.float64))
            self.assertLessEqual(abs(total - len(ann)), 1e-4 * len(ann))
            pooled = density.pool_to(d, 32, 32)
            self.assertAlmostEqual(float(pooled.sum(dtype=np.float64)),
                                   total, delta=1e-6 * max(1.0, total))

    def test_hundred_points(self):
        ann = random_annotation(np.random.default_rng(2), 100)
        d = density.generate_density_map(ann)
        self.assertAlmostEqual(float(d.sum(dtype=np.float64)), 100.0,
                               delta=0.01)
        pooled = density.pool_to(d, 64, 64)
        self.assertAlmostEqual(float(pooled.sum(dtype=np.float64)), 100.0,
                               delta=0.01)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        ann = random_annotation(rng, 40, 64)
        shuffled = SceneAnnotation(64, 64, [ann.points[i] for i in
                                            rng.permutation(40)])
        np.testing.assert_array_equal(density.generate_density_map(ann),
                                      density.generate_density_map(shuffled))

    def test_adding_point_adds_unit_mass(self):
        rng = np.random.default_rng(4)
        ann = random_annotation(rng, 20, 64)
        more = SceneAnnotation(64, 64, ann.points + [(32.0, 32.0)])
        a = density.generate_density_map(ann).sum(dtype=np.float64)
        b = density.generate_density_map(more).sum(dtype=np.float64)
        self.assertAlmostEqual(b - a, 1.0, delta=1e-5)

    def test_fixed_sigma_matches_equal_distances(self):
        ann = SceneAnnotation(64, 64, [(20.0, 30.0), (30.0, 30.0)])
        adaptive = density.generate_density_map(ann)
        fixed = density.generate_density_map(
            ann, GtParams(fixed_sigma=3.0))
        np.testing.assert_allclose(adaptive, fixed, atol=1e-7)

    def test_out_of_range_point(self):
        with self.assertRaises(SpecError):
            SceneAnnotation(10, 10, [(10.0, 3.0)])
        with self.assertRaises(SpecError):
            SceneAnnotation(10, 10, [(-0.5, 3.0)])

    def test_malformed_annotation(self):
        with self.assertRaises(FormatError):
            SceneAnnotation.from_dict({"height": 4, "points": []})


class TestPool(unittest.TestCase):
    def test_constant(self):
        pooled = density.pool_to(np.full((1, 1, 4, 6), 0.5, np.float32), 2, 3)
        np.testing.assert_array_equal(pooled, np.full((1, 1, 2, 3), 2.0))

    def test_sum_preserved(self):
        d = np.random.default_rng(5).uniform(0, 1, (1, 1, 64, 64))
        self.assertAlmostEqual(density.pool_to(d, 32, 32).sum(), d.sum(),
                               delta=1e-6)

    def test_not_divisible(self):
        with self.assertRaises(SpecError):
            density.pool_to(np.zeros((1, 1, 10, 10)), 3, 5)


if __name__ == '__main__':
    unittest.main()
