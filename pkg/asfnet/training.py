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

from __future__ import print_function

import sys as _sys
from collections import OrderedDict as _OrderedDict

import numpy as _np
import pandas as _pd

from . import autodiff as _autodiff
from . import utils
from .config import TrainConfig
from .errors import ArgumentError, ShapeError, NumericError, DivergenceError


def l2_density_loss(pred, gt, return_grad=False):
    """
    Pixel-wise L2 objective, normalised per batch:

        L = 1/(2N) * sum_i sum_pixels (pred - gt)^2

    With ``return_grad`` the gradient wrt ``pred``, (pred - gt)/N, is
    returned as well.
    """
    pred = _np.asarray(pred)
    gt = _np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError("loss: prediction %s vs ground truth %s" % (
            pred.shape, gt.shape), axis="shape")
    n = pred.shape[0]
    diff = pred.astype(_np.float64) - gt
    loss = float(0.5 * _np.sum(diff * diff) / n)
    if return_grad:
        return loss, (diff / n).astype(pred.dtype)
    return loss


class OptimizerState(object):
    def __init__(self):
        self.m = _OrderedDict()
        self.v = _OrderedDict()
        self.step = 0

    def __repr__(self):
        return 'asfnet.OptimizerState <step %d, %d tensors>' % (
            self.step, len(self.m))


def adam_step(params, grads, state, config=None, masks=None,
              no_decay=()):
    """
    One Adam update with decoupled weight decay, in place on ``params``.

    Decay p <- p * (1 - lr * wd) is applied before the moment update, and
    skipped for names in ``no_decay``. Pruned positions (``masks``) are
    zeroed again after the update.
    """
    config = config or TrainConfig()
    for name, g in grads.items():
        if name in params and not _np.isfinite(g).all():
            raise NumericError("non-finite gradient", name=name)

    state.step += 1
    lr, wd = config.learning_rate, config.weight_decay
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step

    for name, g in grads.items():
        if name not in params:
            continue
        p = params[name].astype(_np.float64)
        g = _np.asarray(g, dtype=_np.float64)
        if name not in state.m:
            state.m[name] = _np.zeros_like(p)
            state.v[name] = _np.zeros_like(p)
        if wd and name not in no_decay:
            p *= 1.0 - lr * wd
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / bc1) / (_np.sqrt(v / bc2) + config.epsilon)
        if masks is not None and name in masks:
            p *= masks[name]
        params[name] = p.astype(params[name].dtype)
    return params, state


def _batches(n_items, batch_size, order):
    return [order[i:i + batch_size] for i in range(0, n_items, batch_size)]


def train(graph, params, dataset, config=None, masks=None, no_decay=(),
          checkpoint=None, progress=False, debug=False):
    """
    :Parameters:
        graph : callable(tape, params, images) -> density Var
        params : dict name -> ndarray
            Updated in place
        dataset : list of (image, gt)
            gt already pooled to the head's output resolution
        config : TrainConfig
        masks : dict name -> ndarray
            Optional. Prune masks reapplied after every step
        checkpoint : callable(epoch, params) -> path
            Optional. Called every ``checkpoint_every`` epochs and at the end
        progress : bool
            Show a progress bar on stderr
        debug : bool
            Print the mean loss of every epoch
    :Returns:
        (params, DataFrame[epoch, mean_loss])
    """
    config = config or TrainConfig()
    if not dataset:
        raise ArgumentError("training needs a non-empty dataset")
    if masks:
        for name, mask in masks.items():
            params[name] = params[name] * mask.astype(params[name].dtype)

    state = OptimizerState()
    rng = _np.random.default_rng(config.rng_seed)
    log = []
    last_good = None
    bar = utils.ProgressBar(config.epochs, 'epochs') \
        if progress and config.epochs else None

    for epoch in range(1, config.epochs + 1):
        order = _np.arange(len(dataset))
        if config.shuffle:
            order = rng.permutation(len(dataset))
        losses = []
        for batch in _batches(len(dataset), config.batch_size, order):
            images = _np.concatenate([dataset[i][0] for i in batch], axis=0)
            gt = _np.concatenate([dataset[i][1] for i in batch], axis=0)
            try:
                out, tape = _autodiff.forward(graph, params, images)
                loss = tape.l2_loss(tape.output, gt)
            except NumericError as e:
                raise DivergenceError("%s at epoch %d" % (e, epoch),
                                      checkpoint=last_good)
            value = float(loss.value)
            if not _np.isfinite(value):
                raise DivergenceError(
                    "loss became non-finite at epoch %d" % epoch,
                    checkpoint=last_good)
            grads = _autodiff.backward(tape, 1.0, output=loss)
            grads.pop("input0", None)
            try:
                adam_step(params, grads, state, config, masks, no_decay)
            except NumericError as e:
                raise DivergenceError("%s at epoch %d" % (e, epoch),
                                      checkpoint=last_good)
            losses.append(value)

        mean_loss = float(_np.mean(losses))
        log.append((epoch, mean_loss))
        if debug:
            print('- epoch %d: %.6g' % (epoch, mean_loss), file=_sys.stderr)
        if bar is not None:
            bar.animate(suffix='loss %.4g' % mean_loss)
        if checkpoint is not None and (
                epoch == config.epochs or (config.checkpoint_every and
                                           epoch % config.checkpoint_every == 0)):
            last_good = checkpoint(epoch, params)

    if bar is not None:
        bar.completed()
    return params, _pd.DataFrame(log, columns=["epoch", "mean_loss"])
