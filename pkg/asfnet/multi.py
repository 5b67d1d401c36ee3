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
import time as _time
import multitasking as _multitasking

from . import utils
from . import shared
from .errors import AsfnetError
from .metrics import MetricReport
from .pruning import sparsity_report


def evaluate(model, dataset, threads=True, progress=True, show_errors=True):
    """Count every scene of a dataset and score the predictions
    :Parameters:
        model : Model
            Trained (or freshly initialised) model
        dataset : Dataset, list
            Dataset from ``fileio.load_dataset`` or a list of
            (image, SceneAnnotation) pairs
        threads: bool / int
            How many threads to use. Default is True (2 x cpu count)
        progress : bool
            Show a progress bar on stderr
        show_errors: bool
            Optional. Print the images that failed
    :Returns:
        MetricReport with pairs in dataset order
    """
    samples = dataset.samples if hasattr(dataset, "samples") \
        else list(dataset)
    names = dataset.names() if hasattr(dataset, "names") \
        else ["image%d" % i for i in range(len(samples))]

    if progress:
        shared._PROGRESS_BAR = utils.ProgressBar(len(samples), 'images')

    shared._PREDS = {}
    shared._ERRORS = {}

    if threads:
        if threads is True:
            threads = min([len(samples), _multitasking.cpu_count() * 2])
        _multitasking.set_max_threads(max(threads, 1))
        for i, (image, ann) in enumerate(samples):
            _count_one_threaded(model, i, names[i], image, ann, progress)
        while len(shared._PREDS) + len(shared._ERRORS) < len(samples):
            _time.sleep(0.01)

    else:
        for i, (image, ann) in enumerate(samples):
            _count_one(model, i, names[i], image, ann)
            if progress:
                shared._PROGRESS_BAR.animate()

    if progress:
        shared._PROGRESS_BAR.completed()

    if shared._ERRORS and show_errors:
        print('\n%.f Failed image%s:' % (
            len(shared._ERRORS), 's' if len(shared._ERRORS) > 1 else ''),
            file=_sys.stderr)
        print("\n".join(['- %s: %s' % v
                         for v in list(shared._ERRORS.values())]),
              file=_sys.stderr)

    if not shared._PREDS:
        raise AsfnetError("no image could be evaluated")

    report = MetricReport([shared._PREDS[i] for i in sorted(shared._PREDS)])
    report.extra["images"] = [names[i] for i in sorted(shared._PREDS)]
    if shared._ERRORS:
        report.extra["failed"] = dict(shared._ERRORS.values())
    if model.masks is not None:
        report.extra["sparsity"] = sparsity_report(model.masks)["global"]
    return report


@_multitasking.task
def _count_one_threaded(model, index, name, image, ann, progress=True):
    _count_one(model, index, name, image, ann)
    if progress:
        shared._PROGRESS_BAR.animate()


def _count_one(model, index, name, image, ann):
    try:
        count = float(model.predict_counts(image)[0])
    except Exception as e:
        shared._ERRORS[index] = (name, str(e))
        return
    shared._PREDS[index] = (count, float(len(ann)))
