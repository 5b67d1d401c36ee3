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

import pandas as _pd

from . import metrics as _metrics
from . import utils
from . import pruning as _pruning
from .base import ModelBase
from .head import lambda_name

DEFAULT_INPUT_SIZE = (3, 64, 64)


class Model(ModelBase):

    def __repr__(self):
        return 'asfnet.Model object <%d params, pairing %s%s>' % (
            self.parameter_count, self.pairing,
            ", pruned" if self.masks is not None else "")

    def get_cost(self, input_size=None, as_dict=False):
        """
        :Parameters:
            input_size : (C, H, W) or "CxHxW"
                Default is 3x64x64
            as_dict : bool
                Return a plain dict instead of a CostReport
        """
        if input_size is None:
            input_size = DEFAULT_INPUT_SIZE
        elif isinstance(input_size, str):
            input_size = utils.parse_input_size(input_size)
        report = _metrics.count_cost(self.config, input_size)
        if as_dict:
            return report.to_dict()
        return report

    def get_sparsity(self, as_dict=False):
        if self.masks is None:
            return None
        report = _pruning.sparsity_report(self.masks)
        if as_dict:
            return report
        return _pd.DataFrame(list(report["tensors"].items()),
                             columns=["tensor", "sparsity"])

    def get_parameter_count(self):
        return int(sum(v.size for v in self.params.values()))

    def prune(self, criterion="l1", fraction=0.25):
        """
        Magnitude-prune every conv weight. A new prune replaces any earlier
        mask; weights it zeroed stay zero.

        :Returns:
            sparsity report dict
        """
        self.params, self.masks = _pruning.prune(self.params, criterion,
                                                 fraction)
        return _pruning.sparsity_report(self.masks)

    @property
    def cost(self):
        return self.get_cost()

    @property
    def sparsity(self):
        return self.get_sparsity()

    @property
    def parameter_count(self):
        return self.get_parameter_count()

    @property
    def lambdas(self):
        return [float(self.params[lambda_name(i + 1)].reshape(-1)[0])
                for i in range(4)]

    @property
    def pairing(self):
        return [list(p) for p in self.config.fusion.pairing]
