#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion
#
# Copyright 2024 ASFNet contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#

"""
Ground-truth density maps with geometry-adaptive Gaussian kernels.

Every annotated head becomes a truncated Gaussian of unit mass whose sigma is
beta times the mean distance to its k nearest neighbours, clamped to
[sigma_floor, sigma_cap]. Splats are renormalised after truncation and border
clipping, so a map always integrates to its point count.
"""

import math as _math

import numpy as _np

from .config import GtParams
from .errors import ArgumentError, SpecError, FormatError
from .tensor import as_tensor


class SceneAnnotation(object):
    def __init__(self, width, height, points=None):
        self.width = int(width)
        self.height = int(height)
        self.points = [(float(x), float(y)) for x, y in (points or [])]
        self.validate()

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise SpecError("annotation size must be positive, got %dx%d" % (
                self.width, self.height))
        for i, (x, y) in enumerate(self.points):
            if not (_math.isfinite(x) and _math.isfinite(y)) or \
                    not (0 <= x < self.width and 0 <= y < self.height):
                raise SpecError(
                    "point %d (%g, %g) is outside the %dx%d image" % (
                        i, x, y, self.width, self.height))

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return 'asfnet.SceneAnnotation <%dx%d, %d points>' % (
            self.width, self.height, len(self.points))

    def __eq__(self, other):
        return isinstance(other, SceneAnnotation) and \
            self.to_dict() == other.to_dict()

    @classmethod
    def from_dict(cls, data, path=None):
        try:
            return cls(data["width"], data["height"],
                       [(p[0], p[1]) for p in data.get("points", [])])
        except (KeyError, TypeError, IndexError) as e:
            raise FormatError("malformed annotation (%s)" % e, path=path)

    def to_dict(self):
        return {"width": self.width, "height": self.height,
                "points": [[x, y] for x, y in self.points]}


def _as_points(points):
    pts = _np.asarray(points, dtype=_np.float64).reshape(-1, 2)
    return pts


def knn_mean_distance(points, i, k):
    """
    Mean distance from points[i] to its min(k, n-1) nearest other points.

    Brute force. Raises ArgumentError for fewer than 2 points, where callers
    fall back to a fixed sigma.
    """
    pts = _as_points(points)
    if len(pts) < 2:
        raise ArgumentError("k-NN distance needs at least 2 points")
    d = _np.sqrt(((pts - pts[i]) ** 2).sum(axis=1))
    d = _np.delete(d, i)
    k = min(int(k), len(d))
    return float(_np.sort(d)[:k].mean())


def knn_mean_distances(points, k):
    """ all d_bar values at once (one row of the distance matrix per point) """
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise ArgumentError("k-NN distance needs at least 2 points")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = _np.sqrt((diff ** 2).sum(axis=2))
    _np.fill_diagonal(dist, _np.inf)
    k = min(int(k), n - 1)
    return _np.sort(dist, axis=1)[:, :k].mean(axis=1)


def adaptive_sigma(d_bar, params=None):
    params = params or GtParams()
    return float(min(max(params.beta * float(d_bar), params.sigma_floor),
                     params.sigma_cap))


def splat_gaussian(grid, center, sigma, params=None):
    """
    Add a unit-mass truncated Gaussian centred at the sub-pixel ``center``
    (x, y) to the 2-D float64 ``grid`` in place. Pixel (r, c) is sampled at
    its centre (c + 0.5, r + 0.5).
    """
    params = params or GtParams()
    height, width = grid.shape
    x, y = float(center[0]), float(center[1])
    radius = int(_math.ceil(params.truncation_radius * sigma))
    cx, cy = int(_math.floor(x)), int(_math.floor(y))
    r0, r1 = max(cy - radius, 0), min(cy + radius, height - 1)
    c0, c1 = max(cx - radius, 0), min(cx + radius, width - 1)

    dy = _np.arange(r0, r1 + 1, dtype=_np.float64) + 0.5 - y
    dx = _np.arange(c0, c1 + 1, dtype=_np.float64) + 0.5 - x
    gy = _np.exp(-dy * dy / (2.0 * sigma * sigma))
    gx = _np.exp(-dx * dx / (2.0 * sigma * sigma))
    kernel = _np.outer(gy, gx)
    total = kernel.sum()
    if total <= 0:
        # sigma far below the pixel pitch: all mass on the containing pixel
        kernel = _np.zeros_like(kernel)
        kernel[cy - r0, cx - c0] = 1.0
        total = 1.0
    grid[r0:r1 + 1, c0:c1 + 1] += kernel / total


def point_sigmas(points, params=None):
    params = params or GtParams()
    n = len(points)
    if n == 0:
        return _np.zeros(0)
    if params.fixed_sigma is not None:
        return _np.full(n, float(params.fixed_sigma))
    if n == 1:
        return _np.full(n, float(params.single_point_sigma))
    d_bar = knn_mean_distances(points, params.k)
    return _np.array([adaptive_sigma(d, params) for d in d_bar])


def generate_density_map(ann, params=None):
    """
    :Returns:
        ndarray (1, 1, height, width) float32 summing to len(ann.points)
    """
    params = params or GtParams()
    grid = _np.zeros((ann.height, ann.width), dtype=_np.float64)
    if ann.points:
        pts = _as_points(ann.points)
        sigmas = point_sigmas(pts, params)
        # fixed accumulation order makes the map independent of list order
        order = _np.lexsort((sigmas, pts[:, 0], pts[:, 1]))
        for j in order:
            splat_gaussian(grid, pts[j], sigmas[j], params)
    return as_tensor(grid[None, None], dtype=_np.float32, name="density")


def pool_to(density, out_h, out_w):
    """ sum-pool (N, C, H, W) over equal blocks; totals are preserved """
    x = _np.asarray(density)
    n, c, h, w = x.shape
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1 or h % out_h or w % out_w:
        raise SpecError("cannot sum-pool %dx%d to %dx%d (sizes must divide)"
                        % (h, w, out_h, out_w))
    fh, fw = h // out_h, w // out_w
    pooled = x.astype(_np.float64).reshape(
        n, c, out_h, fh, out_w, fw).sum(axis=(3, 5))
    return as_tensor(pooled, dtype=x.dtype, name="pooled density")
