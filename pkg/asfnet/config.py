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
Declarative configuration objects and their JSON form.

The config file holds four top-level keys: ``backbone``, ``fusion``,
``train`` and ``gt``. Missing keys fall back to defaults; unknown keys are
rejected.
"""

import copy as _copy
import math as _math
import numbers as _numbers
from dataclasses import dataclass, field, fields, asdict

from . import utils
from .errors import AsfnetError, ArgumentError, SpecError
from .tensor import ConvSpec


def _is_int(value):
    return isinstance(value, _numbers.Integral) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, _numbers.Real) and not isinstance(value, bool)


_FIELD_CHECKS = {
    int: (_is_int, "an integer"),
    float: (_is_number, "a number"),
    bool: (lambda v: isinstance(v, bool), "true or false"),
    str: (lambda v: isinstance(v, str), "a string"),
    list: (lambda v: isinstance(v, list), "a list"),
    dict: (lambda v: isinstance(v, dict), "an object"),
}


def _check_field(f, value, where):
    if value is None and f.default is None:
        return
    check = _FIELD_CHECKS.get(f.type)
    if check is not None and not check[0](value):
        raise SpecError("%s.%s must be %s, got %r" % (
            where, f.name, check[1], value))


def _check_ints(values, where, length=None):
    """ raises SpecError unless ``values`` is a list of integers """
    if not isinstance(values, (list, tuple)) \
            or not all(_is_int(v) for v in values):
        raise SpecError("%s must be a list of integers, got %r" % (
            where, values))
    if length is not None and len(values) != length:
        raise SpecError("%s must hold %d integers, got %r" % (
            where, length, values))


def _as_object(data, where):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SpecError("%s must be a JSON object, got %s" % (
            where, type(data).__name__))
    return dict(data)


def _from_dict(cls, data, where):
    data = _as_object(data, where)
    known = dict((f.name, f) for f in fields(cls))
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ArgumentError("unknown %s option(s): %s" % (
            where, ", ".join(unknown)))
    for name, value in data.items():
        _check_field(known[name], value, where)
    try:
        obj = cls(**data)
        obj.validate()
    except AsfnetError:
        raise
    except (TypeError, ValueError, KeyError, IndexError) as e:
        raise SpecError("invalid %s options: %s" % (where, e))
    return obj


def kernel_spec(kernel, in_channels, out_channels, stride=1,
                depthwise=False, has_bias=True):
    """ {"kernel": [kh, kw], "dilation": [dh, dw]} -> "same"-padded ConvSpec """
    return ConvSpec.same(in_channels, out_channels,
                         kernel.get("kernel", [3, 3]),
                         kernel.get("dilation", [1, 1]), stride,
                         depthwise, has_bias)


def _check_kernel(kernel, where):
    if not isinstance(kernel, dict) or "kernel" not in kernel:
        raise SpecError("%s must look like {\"kernel\": [kh, kw]}" % where)
    unknown = sorted(set(kernel) - {"kernel", "dilation"})
    if unknown:
        raise SpecError("%s has unknown key(s): %s" % (
            where, ", ".join(unknown)))
    _check_ints(kernel["kernel"], where + ".kernel", 2)
    if "dilation" in kernel:
        _check_ints(kernel["dilation"], where + ".dilation", 2)
        if min(kernel["dilation"]) < 1:
            raise SpecError("%s dilation must be positive" % where)
    for k in kernel["kernel"]:
        if int(k) < 1 or int(k) % 2 == 0:
            raise SpecError("%s sizes must be odd, got %s" % (
                where, kernel["kernel"]))


@dataclass
class BackboneConfig:
    stage_channels: list = field(default_factory=lambda: [16, 32, 64, 128])
    stage_strides: list = field(default_factory=lambda: [2, 2, 2, 2])
    in_channels: int = 3
    block: str = "depthwise-separable"

    def validate(self):
        if len(self.stage_channels) != 4 or len(self.stage_strides) != 4:
            raise SpecError("backbone needs exactly 4 stages")
        _check_ints(self.stage_channels, "stage_channels")
        _check_ints(self.stage_strides, "stage_strides")
        if min(self.stage_channels) < 1 or min(self.stage_strides) < 1 \
                or self.in_channels < 1:
            raise SpecError("backbone channels and strides must be positive")
        if self.block != "depthwise-separable":
            raise SpecError("unsupported backbone block %r" % self.block)

    @property
    def cumulative_strides(self):
        out, total = [], 1
        for s in self.stage_strides:
            total *= int(s)
            out.append(total)
        return out

    def check_input(self, h, w):
        total = self.cumulative_strides[-1]
        if h % total or w % total:
            raise SpecError(
                "input %dx%d is not divisible by the backbone stride %d; "
                "pad the image to a multiple of %d" % (h, w, total, total))

    def tap_sizes(self, h, w):
        self.check_input(h, w)
        return [(h // s, w // s) for s in self.cumulative_strides]

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "backbone")

    def to_dict(self):
        return asdict(self)


@dataclass
class FusionConfig:
    branch_kernels: list = field(default_factory=lambda: [
        {"kernel": [3, 3], "dilation": [2, 2]},
        {"kernel": [3, 3]},
        {"kernel": [1, 1]},
        {"kernel": [1, 1]}])
    lambdas: list = field(default_factory=lambda: [0.1, 0.1, 0.5, 1.0])
    pairing: list = field(default_factory=lambda: [[1, 2], [3, 4]])
    branch_out_channels: int = 32
    fuse_channels: int = 32
    fuse1_kernel: dict = field(default_factory=lambda: {"kernel": [3, 3]})
    fuse2_kernel: dict = field(default_factory=lambda: {"kernel": [1, 1]})
    fused_kernel: dict = field(default_factory=lambda: {
        "kernel": [3, 3], "dilation": [2, 2]})
    net_kernel: dict = field(default_factory=lambda: {"kernel": [3, 3]})
    net_channels: int = 16
    target_resolution: str = "finest"

    def validate(self):
        if len(self.branch_kernels) != 4:
            raise SpecError("fusion head needs 4 branch kernels")
        for i, kernel in enumerate(self.branch_kernels):
            _check_kernel(kernel, "branch_kernels[%d]" % i)
        for name in ("fuse1_kernel", "fuse2_kernel", "fused_kernel",
                     "net_kernel"):
            _check_kernel(getattr(self, name), name)
        if len(self.lambdas) != 4 or not all(
                _is_number(v) and _math.isfinite(float(v))
                for v in self.lambdas):
            raise SpecError("lambdas must be 4 finite numbers")
        if not isinstance(self.pairing, (list, tuple)):
            raise SpecError("pairing must be a list of two pairs")
        for pair in self.pairing:
            _check_ints(pair, "pairing entry")
        flat = sorted(int(i) for pair in self.pairing for i in pair)
        if len(self.pairing) != 2 or any(len(p) != 2 for p in self.pairing) \
                or flat != [1, 2, 3, 4]:
            raise SpecError(
                "pairing must split {1,2,3,4} into two pairs, got %r" % (
                    self.pairing,))
        if min(self.branch_out_channels, self.fuse_channels,
               self.net_channels) < 1:
            raise SpecError("head channel widths must be positive")
        if self.target_resolution not in ("finest", "input"):
            raise SpecError("target_resolution must be 'finest' or 'input'")

    def target_size(self, input_h, input_w, tap_sizes):
        if self.target_resolution == "input":
            return input_h, input_w
        return tap_sizes[0]

    def no_weights(self):
        """ ablation variant with every branch multiplier set to 1 """
        other = _copy.deepcopy(self)
        other.lambdas = [1.0, 1.0, 1.0, 1.0]
        return other

    def with_pairing(self, pairing):
        other = _copy.deepcopy(self)
        other.pairing = [list(p) for p in pairing]
        other.validate()
        return other

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "fusion")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainConfig:
    learning_rate: float = 5e-5
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 500
    batch_size: int = 1
    rng_seed: int = 0
    lambda_trainable: bool = False
    checkpoint_every: int = 50
    shuffle: bool = False

    def validate(self):
        if not self.learning_rate > 0:
            raise SpecError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise SpecError("adam betas must be in [0, 1)")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise SpecError("epsilon must be > 0 and weight_decay >= 0")
        if self.epochs < 0 or self.batch_size < 1 \
                or self.checkpoint_every < 0:
            raise SpecError("epochs, batch_size and checkpoint_every "
                            "must be non-negative (batch_size >= 1)")

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "train")

    def to_dict(self):
        return asdict(self)


@dataclass
class GtParams:
    k: int = 10
    beta: float = 0.3
    sigma_floor: float = 0.5
    sigma_cap: float = 15.0
    truncation_radius: float = 4.0
    fixed_sigma: float = None
    single_point_sigma: float = 4.0

    def validate(self):
        if self.k < 1:
            raise SpecError("k must be >= 1")
        if self.beta <= 0 or self.truncation_radius <= 0:
            raise SpecError("beta and truncation_radius must be positive")
        if not 0 < self.sigma_floor <= self.sigma_cap:
            raise SpecError("need 0 < sigma_floor <= sigma_cap")
        if self.fixed_sigma is not None and self.fixed_sigma <= 0:
            raise SpecError("fixed_sigma must be positive")
        if self.single_point_sigma <= 0:
            raise SpecError("single_point_sigma must be positive")

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "gt")

    @classmethod
    def load(cls, path):
        return cls.from_dict(utils.read_json(path))

    def to_dict(self):
        return asdict(self)


@dataclass
class NetworkConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def validate(self):
        self.backbone.validate()
        self.fusion.validate()


@dataclass
class Config:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gt: GtParams = field(default_factory=GtParams)

    @property
    def network(self):
        return NetworkConfig(self.backbone, self.fusion)

    def validate(self):
        for part in (self.backbone, self.fusion, self.train, self.gt):
            part.validate()

    def replace(self, **parts):
        other = _copy.deepcopy(self)
        for key, value in parts.items():
            setattr(other, key, value)
        other.validate()
        return other

    @classmethod
    def from_dict(cls, data):
        data = _as_object(data, "config")
        unknown = sorted(set(data) - {"backbone", "fusion", "train", "gt"})
        if unknown:
            raise ArgumentError("unknown config section(s): %s" % (
                ", ".join(unknown)))
        return cls(BackboneConfig.from_dict(data.get("backbone")),
                   FusionConfig.from_dict(data.get("fusion")),
                   TrainConfig.from_dict(data.get("train")),
                   GtParams.from_dict(data.get("gt")))

    @classmethod
    def load(cls, path):
        return cls.from_dict(utils.read_json(path))

    def to_dict(self):
        return {"backbone": self.backbone.to_dict(),
                "fusion": self.fusion.to_dict(),
                "train": self.train.to_dict(),
                "gt": self.gt.to_dict()}

    def save(self, path):
        utils.write_json(path, self.to_dict())
