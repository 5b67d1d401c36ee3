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

from . import version
from .config import (Config, BackboneConfig, FusionConfig, TrainConfig,
                     GtParams, NetworkConfig)
from .model import Model
from .variants import Variants
from .multi import evaluate
from .fileio import load_dataset, load_image
from .synth import SynthSpec, synth_scene
from .density import SceneAnnotation, generate_density_map
from .metrics import count_cost, count_metrics
from .pruning import prune, sparsity_report

__version__ = version.version
__author__ = "ASFNet contributors"

__all__ = ['Model', 'Variants', 'evaluate', 'Config', 'BackboneConfig',
           'FusionConfig', 'TrainConfig', 'GtParams', 'NetworkConfig',
           'load_dataset', 'load_image', 'SynthSpec', 'synth_scene',
           'SceneAnnotation', 'generate_density_map', 'count_cost',
           'count_metrics', 'prune', 'sparsity_report']
