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

import os as _os
from collections import OrderedDict as _OrderedDict

import numpy as _np

from . import autodiff as _autodiff
from . import backbone as _backbone
from . import head as _head
from . import density as _density
from . import fileio
from . import training
from .config import Config
from .errors import FormatError, ShapeError
from .pruning import PruneMask, MASK_PREFIX, META_PREFIX

CONFIG_NAME = "config.json"
LOSS_NAME = "loss.csv"
FINAL_NAME = "final.asfc"


def init_params(config=None, seed=0):
    """ backbone + head parameters, in layer order """
    network = (config or Config()).network
    params = _backbone.init_params(network.backbone, seed)
    params.update(_head.init_params(network, seed + 1))
    return params


class ModelBase():
    def __init__(self, config=None, params=None, masks=None, seed=None):
        self.config = config or Config()
        self.config.validate()
        if seed is None:
            seed = self.config.train.rng_seed
        self.seed = seed
        self.params = params if params is not None else init_params(
            self.config, seed)
        self.masks = masks
        self._history = None
        self._check_params()
        if self.masks is not None:
            self._check_masks()
            self.params = self.masks.apply(self.params)

    def _check_params(self):
        expected = init_params(self.config, 0)
        for name, value in expected.items():
            if name not in self.params:
                raise FormatError("checkpoint has no tensor %r" % name)
            if tuple(self.params[name].shape) != value.shape:
                raise ShapeError("%s has shape %s, expected %s" % (
                    name, tuple(self.params[name].shape), value.shape),
                    axis=name)

    def _check_masks(self):
        for name, mask in self.masks.masks.items():
            if name not in self.params:
                raise FormatError("mask names unknown tensor %r" % name)
            if tuple(mask.shape) != tuple(self.params[name].shape):
                raise FormatError("mask for %s has shape %s, expected %s" % (
                    name, tuple(mask.shape),
                    tuple(self.params[name].shape)))

    @property
    def network(self):
        return self.config.network

    def graph(self, tape, params, images):
        """ image Var -> density Var, recorded on ``tape`` """
        network = self.network
        taps = _backbone.extract_vars(tape, images, network.backbone, params)
        return _head.forward_head_vars(
            tape, taps, network, params,
            lambda_trainable=self.config.train.lambda_trainable,
            input_size=images.shape[2:])

    def forward(self, images):
        images = _np.asarray(images)
        value, _ = _autodiff.forward(self.graph, self.params, images,
                                     record=False)
        return value

    def features(self, images):
        """ the four backbone taps [F1, F2, F3, F4] for ``images`` """
        return _backbone.extract(_np.asarray(images), self.network.backbone,
                                 self.params)

    def predict_counts(self, images):
        return _head.predicted_count(self.forward(images))

    def output_size(self, height, width):
        network = self.network
        return network.fusion.target_size(
            height, width, network.backbone.tap_sizes(height, width))

    def ground_truth(self, ann):
        """ density map for ``ann`` pooled to this model's output grid """
        gt = _density.generate_density_map(ann, self.config.gt)
        return _density.pool_to(gt, *self.output_size(ann.height, ann.width))

    def _samples(self, data):
        if hasattr(data, "samples"):
            return data.samples
        return list(data)

    def fit(self, data, checkpoint_dir=None, progress=False, debug=False):
        """
        :Parameters:
            data : Dataset or list of (image, SceneAnnotation)
            checkpoint_dir : str
                Optional. Receives epoch_XXXX.asfc checkpoints, final.asfc,
                loss.csv and config.json
            progress : bool
                Show a progress bar
            debug : bool
                Print the loss of every epoch
        :Returns:
            DataFrame[epoch, mean_loss]
        """
        dataset = [(image, self.ground_truth(ann))
                   for image, ann in self._samples(data)]

        checkpoint = None
        if checkpoint_dir is not None:
            if not _os.path.isdir(checkpoint_dir):
                _os.makedirs(checkpoint_dir)
            self.config.save(_os.path.join(checkpoint_dir, CONFIG_NAME))

            def checkpoint(epoch, params):
                path = _os.path.join(checkpoint_dir, "epoch_%04d.asfc" % epoch)
                self.save(path)
                return path

        no_decay = [_head.lambda_name(i + 1) for i in range(4)]
        masks = self.masks.masks if self.masks is not None else None
        self.params, self._history = training.train(
            self.graph, self.params, dataset, self.config.train, masks=masks,
            no_decay=no_decay, checkpoint=checkpoint, progress=progress,
            debug=debug)

        if checkpoint_dir is not None:
            self.save(_os.path.join(checkpoint_dir, FINAL_NAME))
            self._history.to_csv(_os.path.join(checkpoint_dir, LOSS_NAME),
                                 index=False)
        return self._history

    @property
    def history(self):
        return self._history

    def tensors(self):
        tensors = _OrderedDict(self.params)
        if self.masks is not None:
            tensors.update(self.masks.to_tensors())
        return tensors

    def save(self, path):
        fileio.save_checkpoint(path, self.tensors())

    @classmethod
    def load(cls, path, config=None):
        """
        Read an ASFC checkpoint. Without ``config``, ``config.json`` next to
        the checkpoint is used when present, else the defaults.
        """
        if config is None:
            sidecar = _os.path.join(_os.path.dirname(_os.path.abspath(path)),
                                    CONFIG_NAME)
            config = Config.load(sidecar) if _os.path.isfile(sidecar) \
                else Config()
        tensors = fileio.load_checkpoint(path)
        params = _OrderedDict(
            (name, value) for name, value in tensors.items()
            if not name.startswith((MASK_PREFIX, META_PREFIX)))
        masks = PruneMask.from_tensors(tensors)
        return cls(config, params, masks)
