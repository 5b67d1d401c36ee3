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
Toy multi-scale feature extractor.

Four depthwise-separable stages (depthwise 3x3 with stride, then pointwise
1x1, each followed by ReLU) expose the tap points F1..F4, from the highest
resolution / fewest channels to the lowest resolution / most channels.
"""

from collections import OrderedDict as _OrderedDict

import numpy as _np

from . import autodiff as _autodiff
from .config import BackboneConfig
from .errors import ShapeError
from .tensor import ConvSpec


def rng_from(seed):
    if isinstance(seed, _np.random.Generator):
        return seed
    return _np.random.default_rng(seed)


def he_normal(rng, shape, fan_in):
    """ zero-mean normal draws with std sqrt(2 / fan_in), as float32 """
    std = _np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(_np.float32)


def init_conv(rng, spec):
    kh, kw = spec.kernel
    fan_in = (spec.in_channels // spec.groups) * kh * kw
    weight = he_normal(rng, spec.weight_shape, fan_in)
    bias = _np.zeros(spec.bias_shape, dtype=_np.float32) \
        if spec.has_bias else None
    return weight, bias


def layer_specs(config=None):
    """ ordered layer name -> ConvSpec for the four stages """
    config = config or BackboneConfig()
    specs = _OrderedDict()
    c_in = config.in_channels
    for k, (c_out, stride) in enumerate(
            zip(config.stage_channels, config.stage_strides)):
        stage = "backbone.stage%d" % (k + 1)
        specs[stage + ".dw"] = ConvSpec.same(
            c_in, c_in, 3, stride=stride, depthwise=True, has_bias=False)
        specs[stage + ".pw"] = ConvSpec.same(c_in, c_out, 1)
        c_in = c_out
    return specs


def init_params(config=None, rng_seed=0):
    """
    He-initialised backbone parameters.

    Identical seeds give bit-identical parameters.
    """
    rng = rng_from(rng_seed)
    params = _OrderedDict()
    for name, spec in layer_specs(config).items():
        weight, bias = init_conv(rng, spec)
        params[name + ".weight"] = weight
        if bias is not None:
            params[name + ".bias"] = bias
    return params


def conv_layer(tape, x, name, spec, params, trainable=True):
    weight = tape.param(name + ".weight", params[name + ".weight"], trainable)
    bias = None
    if spec.has_bias:
        bias = tape.param(name + ".bias", params[name + ".bias"], trainable)
    return tape.conv2d(x, weight, bias, spec)


def extract_vars(tape, x, config, params):
    """ taped version of ``extract``: returns the four tap Vars """
    n, c, h, w = x.shape
    if c != config.in_channels:
        raise ShapeError("backbone expects %d input channels, got %d" % (
            config.in_channels, c), axis="C")
    config.check_input(h, w)
    taps = []
    specs = layer_specs(config)
    for k in range(4):
        stage = "backbone.stage%d" % (k + 1)
        x = tape.relu(conv_layer(tape, x, stage + ".dw",
                                 specs[stage + ".dw"], params))
        x = tape.relu(conv_layer(tape, x, stage + ".pw",
                                 specs[stage + ".pw"], params))
        taps.append(x)
    return taps


def extract(input, config=None, params=None):
    """
    :Parameters:
        input : ndarray (N, 3, H, W)
            H and W must be divisible by the product of the stage strides
    :Returns:
        [F1, F2, F3, F4]
    """
    config = config or BackboneConfig()
    params = params if params is not None else init_params(config)
    tape = _autodiff.Tape(record=False)
    x = tape.input(input, name="image")
    return [f.value for f in extract_vars(tape, x, config, params)]
