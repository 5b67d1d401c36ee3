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

"""Count metrics and analytic parameter / FLOPs accounting"""

import math as _math

import numpy as _np
import pandas as _pd

from . import backbone as _backbone
from . import head as _head
from .config import NetworkConfig
from .errors import ArgumentError

FLOPS_CONVENTION = "1 multiply-accumulate = 2 FLOPs"

# per output element per channel: 16 multiplies + 15 adds
RESIZE_FLOPS = 31

ASFT_HEADER_BYTES = 4 + 4 + 1 + 4 * 4
ASFC_HEADER_BYTES = 4 + 4 + 4


class MetricReport(object):
    """
    MAE and "MSE" over per-image counts. "MSE" follows the crowd-counting
    convention: the root of the mean squared count error.
    """

    def __init__(self, pairs):
        pairs = [(float(p), float(t)) for p, t in pairs]
        if not pairs:
            raise ArgumentError("count metrics need at least one image")
        err = _np.array([p - t for p, t in pairs], dtype=_np.float64)
        self.pairs = pairs
        self.n_images = len(pairs)
        self.mae = float(_np.mean(_np.abs(err)))
        self.mse = float(_math.sqrt(_np.mean(err * err)))
        self.extra = {}

    def to_frame(self):
        return _pd.DataFrame(self.pairs, columns=["predicted", "actual"])

    def to_dict(self):
        data = {"mae": self.mae, "mse": self.mse, "n_images": self.n_images,
                "pairs": [list(p) for p in self.pairs]}
        data.update(self.extra)
        return data

    def __repr__(self):
        return 'asfnet.MetricReport <MAE %.4f, MSE %.4f, %d images>' % (
            self.mae, self.mse, self.n_images)


def count_metrics(pairs):
    """ MetricReport from [(predicted_count, true_count), ...] """
    return MetricReport(pairs)


class CostReport(object):
    def __init__(self, layers, size_bytes, input_size):
        self.layers = layers
        self.total_params = int(layers["params"].sum()) if len(layers) else 0
        self.total_flops = int(layers["flops"].sum()) if len(layers) else 0
        self.size_bytes = int(size_bytes)
        self.input_size = tuple(input_size)
        self.convention = FLOPS_CONVENTION

    def to_dict(self):
        return {"total_params": self.total_params,
                "total_flops": self.total_flops,
                "size_bytes": self.size_bytes,
                "input_size": list(self.input_size),
                "convention": self.convention,
                "layers": self.layers}

    def __repr__(self):
        return 'asfnet.CostReport <%d params, %d FLOPs>' % (
            self.total_params, self.total_flops)


def conv_cost(spec, h_out, w_out):
    """ (params, FLOPs) of one conv layer at the given output size """
    kh, kw = spec.kernel
    macs_per_out = kh * kw * (spec.in_channels // spec.groups)
    params = macs_per_out * spec.out_channels
    flops = 2 * macs_per_out * spec.out_channels * h_out * w_out
    if spec.has_bias:
        params += spec.out_channels
        flops += spec.out_channels * h_out * w_out
    return params, flops


class _Ledger(object):
    def __init__(self):
        self.rows = []

    def add(self, name, kind, params, flops, shape):
        self.rows.append({"layer": name, "kind": kind, "params": int(params),
                          "flops": int(flops),
                          "output": "x".join(str(d) for d in shape)})

    def conv(self, name, spec, h, w):
        h_out, w_out = spec.output_size(h, w)
        params, flops = conv_cost(spec, h_out, w_out)
        self.add(name, "conv", params, flops,
                 (spec.out_channels, h_out, w_out))
        return h_out, w_out

    def relu(self, name, c, h, w):
        self.add(name + ".relu", "relu", 0, c * h * w, (c, h, w))

    def frame(self):
        return _pd.DataFrame(self.rows, columns=[
            "layer", "kind", "params", "flops", "output"])


def _network(config):
    if config is None:
        return NetworkConfig()
    if hasattr(config, "network"):
        return config.network
    return config


def checkpoint_size(shapes):
    """ bytes of the ASFC file holding tensors {name: shape} """
    total = ASFC_HEADER_BYTES
    for name, shape in shapes.items():
        total += 2 + len(name.encode("utf-8")) + ASFT_HEADER_BYTES + \
            4 * int(_np.prod(shape))
    return total


def count_cost(config=None, input_size=None):
    """
    Layer-by-layer parameter and FLOP counts for one (C, H, W) image.

    Convolutions: params = kh*kw*(C_in/groups)*C_out + C_out*bias,
    FLOPs = 2*kh*kw*(C_in/groups)*C_out*H_out*W_out + C_out*H_out*W_out*bias.
    ReLU and lambda scaling cost 1 FLOP per element, bicubic resizing 31 per
    output element per channel.
    """
    if input_size is None:
        raise ArgumentError("FLOPs depend on the input resolution; "
                            "pass input_size=(C, H, W)")
    network = _network(config)
    network.validate()
    c, h, w = [int(d) for d in input_size]
    in_h, in_w = h, w
    if c != network.backbone.in_channels:
        raise ArgumentError("input has %d channels, backbone expects %d" % (
            c, network.backbone.in_channels))
    taps = network.backbone.tap_sizes(h, w)
    ledger = _Ledger()

    specs = _backbone.layer_specs(network.backbone)
    for name, spec in specs.items():
        h, w = ledger.conv(name, spec, h, w)
        ledger.relu(name, spec.out_channels, h, w)

    fusion = network.fusion
    th, tw = fusion.target_size(in_h, in_w, taps)
    head_specs = _head.layer_specs(network)
    for i, (fh, fw) in enumerate(taps):
        name = "head.branch%d" % (i + 1)
        spec = head_specs[name]
        bh, bw = ledger.conv(name, spec, fh, fw)
        cb = spec.out_channels
        ledger.relu(name, cb, bh, bw)
        ledger.add(name + ".scale", "scale", 1, cb * bh * bw, (cb, bh, bw))
        ledger.add(name + ".resize", "resize", 0,
                   RESIZE_FLOPS * cb * th * tw, (cb, th, tw))

    for name in ("head.fuse1", "head.fuse2", "head.fused", "head.net",
                 "head.out"):
        spec = head_specs[name]
        oh, ow = ledger.conv(name, spec, th, tw)
        ledger.relu(name, spec.out_channels, oh, ow)

    shapes = dict((n + ".weight", s.weight_shape) for n, s in specs.items())
    shapes.update((n + ".bias", s.bias_shape) for n, s in specs.items()
                  if s.has_bias)
    shapes.update((n + ".weight", s.weight_shape)
                  for n, s in head_specs.items())
    shapes.update((n + ".bias", s.bias_shape) for n, s in head_specs.items())
    shapes.update((_head.lambda_name(i + 1), (1, 1, 1, 1)) for i in range(4))
    return CostReport(ledger.frame(), checkpoint_size(shapes), (c, in_h, in_w))
