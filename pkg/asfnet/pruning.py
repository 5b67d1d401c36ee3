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
Magnitude pruning of convolution weights.

``l1``: unstructured, zeroes the ceil(f*N) smallest |w| of every conv weight
tensor (ties go to the lowest flat index). ``l2``: structured, zeroes whole
output channels with the smallest L2 norm, choosing the channel count whose
fraction is nearest the target while keeping at least one channel.
Biases and branch multipliers are never pruned.
"""

import math as _math
from collections import OrderedDict as _OrderedDict

import numpy as _np

from .errors import ArgumentError, FormatError

CRITERIA = ("l1", "l2")

MASK_PREFIX = "mask:"
META_PREFIX = "prune:"


class PruneMask(object):
    def __init__(self, masks, criterion, fraction):
        self.masks = masks
        self.criterion = criterion
        self.fraction = float(fraction)

    def __contains__(self, name):
        return name in self.masks

    def __getitem__(self, name):
        return self.masks[name]

    def items(self):
        return self.masks.items()

    def apply(self, params):
        out = _OrderedDict(params)
        for name, mask in self.masks.items():
            out[name] = params[name] * mask.astype(params[name].dtype)
        return out

    def to_tensors(self):
        """ checkpoint form: one ``mask:<param>`` tensor per mask """
        tensors = _OrderedDict()
        tensors[META_PREFIX + self.criterion] = _np.full(
            (1, 1, 1, 1), self.fraction, dtype=_np.float32)
        for name, mask in self.masks.items():
            tensors[MASK_PREFIX + name] = mask.astype(_np.float32)
        return tensors

    @classmethod
    def from_tensors(cls, tensors):
        masks = _OrderedDict()
        criterion, fraction = None, 0.0
        for name, value in tensors.items():
            if name.startswith(MASK_PREFIX):
                masks[name[len(MASK_PREFIX):]] = (value != 0).astype(
                    _np.float32)
            elif name.startswith(META_PREFIX):
                criterion = name[len(META_PREFIX):]
                if _np.size(value) != 1:
                    raise FormatError("%s must hold a single value" % name)
                fraction = float(value.reshape(-1)[0])
        if not masks:
            return None
        return cls(masks, criterion, fraction)

    def __repr__(self):
        return 'asfnet.PruneMask <%s %.3g, %d tensors>' % (
            self.criterion, self.fraction, len(self.masks))


def prunable(name):
    return name.endswith(".weight")


def _check_fraction(fraction):
    fraction = float(fraction)
    if not 0.0 <= fraction < 1.0:
        raise ArgumentError("prune fraction must be in [0, 1), got %r" % (
            fraction,))
    return fraction


def l1_mask(weight, fraction):
    w = _np.abs(_np.asarray(weight, dtype=_np.float64)).reshape(-1)
    # rounding guards ceil against 0.3*10 = 3.0000000000000004
    k = int(_math.ceil(round(fraction * w.size, 9)))
    mask = _np.ones(w.size, dtype=_np.float32)
    mask[_np.argsort(w, kind="stable")[:k]] = 0.0
    return mask.reshape(_np.shape(weight))


def channels_to_prune(n_channels, fraction):
    options = range(n_channels)
    return min(options, key=lambda c: (abs(float(c) / n_channels - fraction),
                                       c))


def l2_channel_mask(weight, fraction):
    w = _np.asarray(weight, dtype=_np.float64)
    n = w.shape[0]
    norms = _np.sqrt((w.reshape(n, -1) ** 2).sum(axis=1))
    drop = _np.argsort(norms, kind="stable")[:channels_to_prune(n, fraction)]
    mask = _np.ones(w.shape, dtype=_np.float32)
    mask[drop] = 0.0
    return mask


def prune(params, criterion="l1", fraction=0.25):
    """
    :Returns:
        (masked params, PruneMask)
    """
    criterion = str(criterion).lower()
    if criterion not in CRITERIA:
        raise ArgumentError("criterion must be one of %s, got %r" % (
            ", ".join(CRITERIA), criterion))
    fraction = _check_fraction(fraction)
    builder = l1_mask if criterion == "l1" else l2_channel_mask
    masks = _OrderedDict()
    for name, value in params.items():
        if prunable(name):
            masks[name] = builder(value, fraction)
    mask = PruneMask(masks, criterion, fraction)
    return mask.apply(params), mask


def sparsity_report(mask):
    """ zero fraction per masked tensor, plus the element-weighted global """
    tensors = _OrderedDict()
    zeros = total = 0
    for name, m in mask.items():
        z = int(m.size - _np.count_nonzero(m))
        tensors[name] = float(z) / m.size if m.size else 0.0
        zeros += z
        total += m.size
    return {"tensors": tensors,
            "global": float(zeros) / total if total else 0.0,
            "criterion": mask.criterion, "fraction": mask.fraction}
