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

import pandas as _pd

from . import multi
from .config import Config
from .model import Model

PAIRINGS = _OrderedDict([
    ("pairs-12-34", [[1, 2], [3, 4]]),
    ("pairs-13-24", [[1, 3], [2, 4]]),
    ("pairs-14-23", [[1, 4], [2, 3]]),
])
NO_WEIGHTS = "no-weights"


def variant_configs(config=None):
    """ name -> Config for the fusion ablation """
    config = config or Config()
    configs = _OrderedDict()
    for name, pairing in PAIRINGS.items():
        configs[name] = config.replace(
            fusion=config.fusion.with_pairing(pairing))
    configs[NO_WEIGHTS] = config.replace(fusion=config.fusion.no_weights())
    return configs


class Variants():

    def __repr__(self):
        return 'asfnet.Variants object <%s>' % ",".join(self.names)

    def __init__(self, config=None, names=None):
        configs = variant_configs(config)
        self.names = list(names or configs.keys())
        self.models = _OrderedDict(
            (name, Model(configs[name])) for name in self.names)
        self.reports = _OrderedDict()

    def fit(self, data, out_dir=None, progress=False, debug=False):
        """
        Train every variant on the same data. Checkpoints go to
        ``out_dir/<variant>/`` when ``out_dir`` is given.

        :Returns:
            DataFrame[variant, epochs, final_loss]
        """
        rows = []
        for name, model in self.models.items():
            ckpt = _os.path.join(out_dir, name) if out_dir else None
            log = model.fit(data, checkpoint_dir=ckpt, progress=progress,
                            debug=debug)
            final = float(log["mean_loss"].iloc[-1]) if len(log) else None
            rows.append((name, len(log), final))
        return _pd.DataFrame(rows, columns=["variant", "epochs",
                                            "final_loss"])

    def evaluate(self, dataset, threads=True, progress=False):
        """
        :Returns:
            DataFrame[variant, pairing, lambdas, mae, mse]
        """
        rows = []
        for name, model in self.models.items():
            report = multi.evaluate(model, dataset, threads=threads,
                                    progress=progress)
            self.reports[name] = report
            rows.append((name, str(model.pairing),
                         ",".join("%g" % lam for lam in model.lambdas),
                         report.mae, report.mse))
        return _pd.DataFrame(rows, columns=["variant", "pairing", "lambdas",
                                            "mae", "mse"])
