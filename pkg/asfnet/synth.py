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
Synthetic crowd scenes: dark blobs on a light, noisy background, with the
exact blob centres as annotations.
"""

from __future__ import print_function

import os as _os
from dataclasses import dataclass, field, asdict

import numpy as _np

from . import utils
from . import fileio
from .config import _from_dict, _check_ints, _is_number
from .density import SceneAnnotation
from .errors import SpecError

BACKGROUND = 0.85
BLOB_DEPTH = 0.6


@dataclass
class SynthSpec:
    image_size: list = field(default_factory=lambda: [64, 64])
    n_scenes: int = 8
    count_range: list = field(default_factory=lambda: [5, 20])
    clusters: int = 3
    spread: float = 8.0
    blob_radius: list = field(default_factory=lambda: [1.5, 3.0])
    noise: float = 0.05
    seed: int = 0

    def validate(self):
        _check_ints(self.image_size, "image_size", 2)
        _check_ints(self.count_range, "count_range", 2)
        if len(self.blob_radius) != 2 \
                or not all(_is_number(r) for r in self.blob_radius):
            raise SpecError("blob_radius must be [min, max] numbers")
        if len(self.image_size) != 2 or min(self.image_size) < 16:
            raise SpecError("image_size must be [height, width], >= 16")
        for d in self.image_size:
            if d % 16:
                raise SpecError(
                    "image dimensions must be divisible by 16, got %d" % d)
        lo, hi = self.count_range
        if not 0 <= lo <= hi:
            raise SpecError("count_range must satisfy 0 <= min <= max")
        if self.n_scenes < 1 or self.clusters < 1:
            raise SpecError("n_scenes and clusters must be >= 1")
        if self.spread <= 0 or self.noise < 0:
            raise SpecError("spread must be positive, noise non-negative")
        if not 0 < self.blob_radius[0] <= self.blob_radius[1]:
            raise SpecError("blob_radius must satisfy 0 < min <= max")

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "synth")

    @classmethod
    def load(cls, path):
        return cls.from_dict(utils.read_json(path))

    def to_dict(self):
        return asdict(self)


def _place(rng, centre, spread, height, width):
    # rejection sampling keeps the cluster shape inside the frame
    while True:
        x, y = rng.normal(centre, spread)
        # two decimals so the JSON annotation holds exactly what is drawn
        x, y = _np.floor(x * 100) / 100, _np.floor(y * 100) / 100
        if 0 <= x < width and 0 <= y < height:
            return float(x), float(y)


def synth_scene(spec, index):
    """
    :Returns:
        (image (1, 3, H, W) float32 in [0, 1], SceneAnnotation)

    Deterministic per (spec.seed, index).
    """
    height, width = spec.image_size
    rng = _np.random.default_rng([spec.seed, index])
    lo, hi = spec.count_range
    count = int(rng.integers(lo, hi + 1))
    centres = rng.uniform((0, 0), (width, height), size=(spec.clusters, 2))

    points = []
    for _ in range(count):
        centre = centres[rng.integers(spec.clusters)]
        points.append(_place(rng, centre, spec.spread, height, width))
    radii = rng.uniform(spec.blob_radius[0], spec.blob_radius[1], size=count)

    grey = BACKGROUND + spec.noise * rng.standard_normal((height, width))
    ys = _np.arange(height, dtype=_np.float64)[:, None] + 0.5
    xs = _np.arange(width, dtype=_np.float64)[None, :] + 0.5
    for (x, y), r in zip(points, radii):
        d2 = (xs - x) ** 2 + (ys - y) ** 2
        grey -= BLOB_DEPTH * _np.exp(-d2 / (2.0 * r * r))
    grey = _np.clip(grey, 0.0, 1.0)

    image = _np.ascontiguousarray(
        _np.broadcast_to(grey, (1, 3, height, width)), dtype=_np.float32)
    return image, SceneAnnotation(width, height, points)


def write_dataset(spec, out_dir, split="train", progress=False):
    """
    Write ``scene_XXXX.pgm`` / ``scene_XXXX.json`` pairs and
    ``manifest.json`` under ``out_dir``.

    :Returns:
        Dataset
    """
    spec.validate()
    if not _os.path.isdir(out_dir):
        _os.makedirs(out_dir)
    bar = utils.ProgressBar(spec.n_scenes, 'scenes') if progress else None
    items = []
    for index in range(spec.n_scenes):
        image, ann = synth_scene(spec, index)
        image_name = "scene_%04d.pgm" % index
        ann_name = "scene_%04d.json" % index
        fileio.save_image(_os.path.join(out_dir, image_name), image)
        fileio.save_annotation(_os.path.join(out_dir, ann_name), ann)
        items.append((image_name, ann_name))
        if bar is not None:
            bar.animate()
    if bar is not None:
        bar.completed()
    fileio.write_manifest(out_dir, items, split)
    return fileio.load_dataset(out_dir)
