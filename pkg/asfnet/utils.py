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
import re as _re

import numpy as _np
import pandas as _pd

try:
    import ujson as _json
except ImportError:
    import json as _json

from .errors import FormatError, ArgumentError


def to_json(data):
    """ serialize with sorted keys so identical inputs give identical bytes """
    return _json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def write_json(path, data):
    with open(path, "w") as f:
        f.write(to_json(data))


def read_json(path):
    try:
        with open(path) as f:
            return _json.loads(f.read())
    except ValueError as e:
        raise FormatError("invalid JSON: %s" % e, path=str(path))


def _plain(data):
    # numpy scalars/arrays and DataFrames are not JSON-native
    if isinstance(data, dict):
        return dict((str(k), _plain(v)) for k, v in data.items())
    if isinstance(data, (list, tuple)):
        return [_plain(v) for v in data]
    if isinstance(data, _pd.DataFrame):
        return [_plain(r) for r in data.to_dict(orient="records")]
    if isinstance(data, _np.ndarray):
        return _plain(data.tolist())
    if isinstance(data, _np.integer):
        return int(data)
    if isinstance(data, _np.floating):
        return float(data)
    if isinstance(data, _np.bool_):
        return bool(data)
    return data


def parse_input_size(text):
    """ "3x64x64" -> (3, 64, 64) """
    parts = _re.split(r"[x,]", str(text).strip().lower())
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        dims = ()
    if len(dims) != 3 or min(dims) < 1:
        raise ArgumentError(
            "input size must look like CxHxW, got %r" % text)
    return dims


def render_table(df):
    if df is None or len(df) == 0:
        return "(empty)"
    return df.to_string(index=False)


class ProgressBar:
    def __init__(self, iterations, text='completed', stream=None):
        self.text = text
        self.iterations = max(int(iterations), 1)
        self.stream = stream or _sys.stderr
        self.prog_bar = '[]'
        self.fill_char = '*'
        self.width = 50
        self.__update_amount(0)
        self.elapsed = 0

    def completed(self):
        if self.elapsed > self.iterations:
            self.elapsed = self.iterations
        self.update_iteration(1)
        print('\r' + str(self), end='', file=self.stream)
        self.stream.flush()
        print(file=self.stream)

    def animate(self, iteration=None, suffix=None):
        if iteration is None:
            self.elapsed += 1
        else:
            self.elapsed += iteration

        self.update_iteration()
        if suffix:
            self.prog_bar += '  %s' % suffix
        print('\r' + str(self), end='', file=self.stream)
        self.stream.flush()

    def update_iteration(self, val=None):
        val = val if val is not None else self.elapsed / float(self.iterations)
        self.__update_amount(val * 100.0)
        self.prog_bar += '  %s of %s %s' % (
            self.elapsed, self.iterations, self.text)

    def __update_amount(self, new_amount):
        percent_done = int(round((new_amount / 100.0) * 100.0))
        all_full = self.width - 2
        num_hashes = int(round((percent_done / 100.0) * all_full))
        self.prog_bar = '[' + self.fill_char * \
            num_hashes + ' ' * (all_full - num_hashes) + ']'
        pct_place = (len(self.prog_bar) // 2) - len(str(percent_done))
        pct_string = '%d%%' % percent_done
        self.prog_bar = self.prog_bar[0:pct_place] + \
            (pct_string + self.prog_bar[pct_place + len(pct_string):])

    def __str__(self):
        return str(self.prog_bar)
