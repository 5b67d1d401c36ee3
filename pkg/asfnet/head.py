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
Adjacent feature fusion head: {F1..F4} -> single-channel density map.

    branch_i   F'_i = resize(lambda_i * relu(H_i(F_i)))
    fuse       f_k  = relu(H_k(F'_a ++ F'_b))     for each pair (a, b)
    fused           = relu(H_fused(f_1 ++ f_2))
    net             = relu(H_net(fused))
    density         = relu(H_out(net))            1x1 conv to one channel

``++`` is channel concatenation. The first pair of ``pairing`` goes through
``fuse1_kernel``, the second through ``fuse2_kernel``.
"""

from collections import OrderedDict as _OrderedDict

import numpy as _np

from . import autodiff as _autodiff
from .backbone import rng_from, init_conv, conv_layer
from .config import NetworkConfig, kernel_spec
from .errors import ShapeError


def layer_specs(network=None):
    network = network or NetworkConfig()
    fusion = network.fusion
    specs = _OrderedDict()
    for i, (c_in, kernel) in enumerate(zip(network.backbone.stage_channels,
                                           fusion.branch_kernels)):
        specs["head.branch%d" % (i + 1)] = kernel_spec(
            kernel, c_in, fusion.branch_out_channels)
    pair_in = 2 * fusion.branch_out_channels
    specs["head.fuse1"] = kernel_spec(fusion.fuse1_kernel, pair_in,
                                      fusion.fuse_channels)
    specs["head.fuse2"] = kernel_spec(fusion.fuse2_kernel, pair_in,
                                      fusion.fuse_channels)
    specs["head.fused"] = kernel_spec(fusion.fused_kernel,
                                      2 * fusion.fuse_channels,
                                      fusion.fuse_channels)
    specs["head.net"] = kernel_spec(fusion.net_kernel, fusion.fuse_channels,
                                    fusion.net_channels)
    specs["head.out"] = kernel_spec({"kernel": [1, 1]}, fusion.net_channels, 1)
    return specs


def lambda_name(i):
    return "head.lambda%d" % i


def init_params(network=None, rng_seed=0):
    network = network or NetworkConfig()
    rng = rng_from(rng_seed)
    params = _OrderedDict()
    for name, spec in layer_specs(network).items():
        weight, bias = init_conv(rng, spec)
        params[name + ".weight"] = weight
        params[name + ".bias"] = bias
    for i, lam in enumerate(network.fusion.lambdas):
        params[lambda_name(i + 1)] = _np.full((1, 1, 1, 1), lam,
                                              dtype=_np.float32)
    return params


def set_lambdas(params, lambdas):
    for i, lam in enumerate(lambdas):
        params[lambda_name(i + 1)] = _np.full((1, 1, 1, 1), lam,
                                              dtype=_np.float32)
    return params


def _check_features(features, network):
    if len(features) != 4:
        raise ShapeError("fusion head takes 4 feature maps, got %d" % len(
            features), axis="scales")
    for i, (f, c) in enumerate(zip(features, network.backbone.stage_channels)):
        if f.shape[1] != c:
            raise ShapeError("F%d has %d channels, expected %d" % (
                i + 1, f.shape[1], c), axis="C")


def target_size(features, network, input_size=None):
    sizes = [tuple(f.shape[2:]) for f in features]
    if input_size is None:
        s = network.backbone.stage_strides[0]
        input_size = (sizes[0][0] * s, sizes[0][1] * s)
    return network.fusion.target_size(input_size[0], input_size[1], sizes)


def branch_var(tape, f, i, network, params, target, lambda_trainable=False):
    name = "head.branch%d" % i
    specs = layer_specs(network)
    x = tape.relu(conv_layer(tape, f, name, specs[name], params))
    lam = tape.param(lambda_name(i), params[lambda_name(i)],
                     trainable=lambda_trainable)
    x = tape.scale(x, lam)
    return tape.resize(x, target[0], target[1])


def fuse_pair_var(tape, fa, fb, stage, network, params):
    name = "head.fuse%d" % stage
    spec = layer_specs(network)[name]
    return tape.relu(conv_layer(tape, tape.concat(fa, fb), name, spec,
                                params))


def forward_head_vars(tape, features, network, params,
                      lambda_trainable=False, input_size=None):
    _check_features(features, network)
    target = target_size(features, network, input_size)
    branches = {}
    for i, f in enumerate(features):
        branches[i + 1] = branch_var(tape, f, i + 1, network, params, target,
                                     lambda_trainable)

    fused = [fuse_pair_var(tape, branches[int(a)], branches[int(b)],
                           stage + 1, network, params)
             for stage, (a, b) in enumerate(network.fusion.pairing)]

    specs = layer_specs(network)
    x = tape.concat(fused[0], fused[1])
    x = tape.relu(conv_layer(tape, x, "head.fused", specs["head.fused"],
                             params))
    x = tape.relu(conv_layer(tape, x, "head.net", specs["head.net"], params))
    return tape.relu(conv_layer(tape, x, "head.out", specs["head.out"],
                                params))


# ------------------------
# untaped entry points

def branch(f, i, network=None, params=None, target=None):
    """
    :Parameters:
        f : ndarray
            Tap F_i from the backbone
        i : int
            Branch index, 1..4
        target : (int, int)
            Output size; defaults to the input's own size
    """
    network = network or NetworkConfig()
    params = params if params is not None else init_params(network)
    tape = _autodiff.Tape(record=False)
    target = target or f.shape[2:]
    return branch_var(tape, tape.input(f), i, network, params,
                      target).value


def fuse_pair(fa, fb, stage, network=None, params=None):
    network = network or NetworkConfig()
    params = params if params is not None else init_params(network)
    tape = _autodiff.Tape(record=False)
    return fuse_pair_var(tape, tape.input(fa), tape.input(fb), stage,
                         network, params).value


def forward_head(features, network=None, params=None, input_size=None):
    """ density map (N, 1, H_t, W_t) for the four backbone taps """
    network = network or NetworkConfig()
    params = params if params is not None else init_params(network)
    tape = _autodiff.Tape(record=False)
    taps = [tape.input(f, name="F%d" % (i + 1))
            for i, f in enumerate(features)]
    return forward_head_vars(tape, taps, network, params,
                             input_size=input_size).value


def predicted_count(density):
    """ per-item sum of a (N, 1, H, W) density map """
    density = _np.asarray(density)
    return density.sum(axis=(1, 2, 3), dtype=_np.float64)
