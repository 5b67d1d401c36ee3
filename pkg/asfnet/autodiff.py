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
Define-by-run reverse-mode differentiation over the tensor kernels.

A ``Tape`` records every op as it executes (kind, input node ids and the
values its adjoint needs). ``backward`` replays the record in reverse and
returns a gradient map keyed by parameter / input name.
"""

from collections import OrderedDict as _OrderedDict

import numpy as _np

from . import tensor as _tensor
from .errors import ShapeError, NumericError


class Var(object):
    __slots__ = ("tape", "index", "value", "name")

    def __init__(self, tape, index, value, name=None):
        self.tape = tape
        self.index = index
        self.value = value
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return 'asfnet.Var <%s %s>' % (self.name or self.index, self.shape)


class Node(object):
    __slots__ = ("kind", "inputs", "saved", "value")

    def __init__(self, kind, inputs=(), saved=None, value=None):
        self.kind = kind
        self.inputs = tuple(inputs)
        self.saved = saved
        self.value = value


class Tape(object):
    """
    Execution record of one forward pass.

    A tape belongs to a single thread. Parameters are registered once per
    name; registering the same name again returns the same leaf.
    """

    def __init__(self, record=True, track_kinks=False):
        self.record = record
        self.nodes = []
        self.params = _OrderedDict()
        self.trainable = _OrderedDict()
        self.inputs = _OrderedDict()
        self.output = None
        self.relu_patterns = [] if track_kinks else None

    def __len__(self):
        return len(self.nodes)

    def _push(self, kind, value, inputs=(), saved=None, name=None):
        if not self.record:
            return Var(self, -1, value, name)
        for var in inputs:
            if var is not None and var.tape is not self:
                raise ValueError("variable belongs to another tape")
        self.nodes.append(Node(kind, [
            v.index if v is not None else None for v in inputs], saved, value))
        return Var(self, len(self.nodes) - 1, value, name)

    # ------------------------
    # leaves

    def param(self, name, value, trainable=True):
        if name in self.params:
            return self.params[name]
        var = self._push("param", _np.asarray(value), name=name)
        self.params[name] = var
        self.trainable[name] = bool(trainable)
        return var

    def input(self, value, name=None):
        name = name or "input%d" % len(self.inputs)
        var = self._push("input", _tensor.as_tensor(value, name=name),
                         name=name)
        self.inputs[name] = var
        return var

    def constant(self, value):
        return self._push("const", _np.asarray(value))

    # ------------------------
    # ops

    def conv2d(self, x, weight, bias, spec):
        out = _tensor.conv2d(x.value, weight.value,
                             None if bias is None else bias.value, spec)
        return self._push("conv2d", out, (x, weight, bias), spec)

    def relu(self, x):
        if self.relu_patterns is not None:
            self.relu_patterns.append(x.value > 0)
        return self._push("relu", _tensor.relu(x.value), (x,))

    def scale(self, x, lam):
        if isinstance(lam, Var):
            factor = float(_np.asarray(lam.value).reshape(-1)[0])
            return self._push("scale", _tensor.scale(x.value, factor),
                              (x, lam), factor)
        return self._push("scale", _tensor.scale(x.value, lam), (x, None),
                          float(lam))

    def concat(self, a, b):
        out = _tensor.concat_channels(a.value, b.value)
        return self._push("concat", out, (a, b), a.shape[1])

    def resize(self, x, out_h, out_w):
        out = _tensor.bicubic_resize(x.value, out_h, out_w)
        return self._push("resize", out, (x,), x.shape[2:])

    def sum(self, x):
        return self._push("sum", _np.asarray(x.value.sum(dtype=_np.float64)),
                          (x,))

    def l2_loss(self, pred, gt):
        """ 1/(2N) * sum((pred - gt)^2), N the batch size """
        if not isinstance(gt, Var):
            gt = self.constant(gt)
        if pred.shape != gt.shape:
            raise ShapeError("l2 loss: prediction %s vs ground truth %s" % (
                pred.shape, gt.shape), axis="shape")
        diff = pred.value.astype(_np.float64) - gt.value
        n = pred.shape[0]
        value = _np.asarray(0.5 * _np.sum(diff * diff) / n)
        return self._push("l2_loss", value, (pred, gt), n)


# ------------------------
# adjoints

def _conv2d_backward(tape, node, g, values):
    x, w, b = node.inputs
    grad_x, grad_w, grad_b = _tensor.conv2d_adjoint(
        g, values[x], values[w], node.saved)
    out = [(x, grad_x), (w, grad_w)]
    if b is not None:
        out.append((b, grad_b.reshape(values[b].shape)))
    return out


def _relu_backward(tape, node, g, values):
    x, = node.inputs
    return [(x, g * (values[x] > 0))]


def _scale_backward(tape, node, g, values):
    x, lam = node.inputs
    out = [(x, g * g.dtype.type(node.saved))]
    if lam is not None:
        total = _np.sum(g.astype(_np.float64) * values[x])
        out.append((lam, _np.full(values[lam].shape, total,
                                  dtype=values[lam].dtype)))
    return out


def _concat_backward(tape, node, g, values):
    a, b = node.inputs
    split = node.saved
    return [(a, _np.ascontiguousarray(g[:, :split])),
            (b, _np.ascontiguousarray(g[:, split:]))]


def _resize_backward(tape, node, g, values):
    x, = node.inputs
    in_h, in_w = node.saved
    return [(x, _tensor.bicubic_resize_adjoint(g, in_h, in_w))]


def _sum_backward(tape, node, g, values):
    x, = node.inputs
    return [(x, _np.full(values[x].shape, float(g),
                         dtype=values[x].dtype))]


def _l2_backward(tape, node, g, values):
    pred, gt = node.inputs
    diff = (values[pred].astype(_np.float64) - values[gt]) * \
        (float(g) / node.saved)
    return [(pred, diff.astype(values[pred].dtype)),
            (gt, (-diff).astype(values[gt].dtype))]


_BACKWARD = {
    "conv2d": _conv2d_backward,
    "relu": _relu_backward,
    "scale": _scale_backward,
    "concat": _concat_backward,
    "resize": _resize_backward,
    "sum": _sum_backward,
    "l2_loss": _l2_backward,
}


def backward(tape, seed, output=None):
    """
    Reverse sweep over ``tape`` starting from ``seed`` at ``output``.

    Returns an OrderedDict with one gradient per trainable parameter
    (zeros when the parameter does not reach the output) followed by one per
    named input.
    """
    if not tape.record:
        raise ValueError("tape was created with record=False")
    output = output if output is not None else tape.output
    if output is None:
        raise ValueError("no output recorded on the tape")
    seed = _np.asarray(seed, dtype=output.value.dtype)
    if seed.shape != output.shape:
        raise ShapeError("seed shape %s does not match output %s" % (
            seed.shape, output.shape), axis="shape")

    values = _NodeValues(tape.nodes)
    grads = {output.index: seed}
    for index in range(output.index, -1, -1):
        g = grads.pop(index, None)
        node = tape.nodes[index]
        if g is None or node.kind not in _BACKWARD:
            if g is not None:
                grads[index] = g
            continue
        for target, grad in _BACKWARD[node.kind](tape, node, g, values):
            if target is None:
                continue
            if target in grads:
                grads[target] = grads[target] + grad
            else:
                grads[target] = grad

    result = _OrderedDict()
    for name, var in tape.params.items():
        if tape.trainable[name]:
            grad = grads.get(var.index)
            result[name] = _np.zeros_like(var.value) if grad is None \
                else grad.reshape(var.shape).astype(var.value.dtype)
    for name, var in tape.inputs.items():
        grad = grads.get(var.index)
        result[name] = _np.zeros_like(var.value) if grad is None else grad
    return result


class _NodeValues(object):
    """ node id -> forward value """

    def __init__(self, nodes):
        self._nodes = nodes

    def __getitem__(self, index):
        return self._nodes[index].value


def forward(graph, params, *inputs, **kwargs):
    """
    Run ``graph(tape, params, *input_vars)`` on a fresh tape.

    :Returns:
        (output value, tape)
    """
    tape = Tape(record=kwargs.get("record", True),
                track_kinks=kwargs.get("track_kinks", False))
    variables = [tape.input(x, name="input%d" % i)
                 for i, x in enumerate(inputs)]
    out = graph(tape, params, *variables)
    tape.output = out
    return out.value, tape


def merge_gradients(maps):
    """ sum gradient maps from separate tapes, in the order given """
    merged = _OrderedDict()
    for grads in maps:
        for name, grad in grads.items():
            if name in merged:
                merged[name] = merged[name] + grad
            else:
                merged[name] = _np.array(grad, copy=True)
    return merged


# ------------------------
# finite-difference certification

class GradCheckReport(object):
    def __init__(self, errors, step, tolerance, flagged, checked, skipped):
        self.errors = errors
        self.step = step
        self.tolerance = tolerance
        self.flagged = flagged
        self.checked = checked
        self.skipped = skipped
        self.worst = max(errors, key=errors.get) if errors else None
        self.max_error = errors[self.worst] if errors else 0.0
        self.passed = self.max_error < tolerance and not flagged

    def to_dict(self):
        return {"errors": dict(self.errors), "step": self.step,
                "tolerance": self.tolerance, "worst": self.worst,
                "max_error": self.max_error, "flagged": list(self.flagged),
                "checked": self.checked, "skipped": self.skipped,
                "passed": self.passed}

    def __repr__(self):
        return 'asfnet.GradCheckReport <%s worst=%s err=%.3g>' % (
            'pass' if self.passed else 'FAIL', self.worst, self.max_error)


def _evaluate(graph, params, inputs):
    out, tape = forward(graph, params, *inputs, record=False,
                        track_kinks=True)
    return float(_np.sum(out, dtype=_np.float64)), tape.relu_patterns


def _same_pattern(a, b):
    return len(a) == len(b) and all(
        _np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(graph, inputs, params, tolerance=1e-4, step=1e-3,
               max_entries=None, seed=0, exclude_kinks=False):
    """
    Compare ``backward`` against central differences, in 64-bit.

    The graph output is reduced with a sum. Each checked entry is perturbed
    by h = step * max(1, |p|). Entries whose +h / -h evaluations change the
    ReLU activation pattern straddle a kink: their parameter is flagged
    (failing the report) unless ``exclude_kinks`` drops them from the check.

    :Parameters:
        graph : callable(tape, params, *input_vars) -> Var
        inputs : list of ndarray
        params : dict name -> ndarray
        max_entries : int
            Optional. Check a seeded random subset of entries per parameter
    """
    params = _OrderedDict((k, _np.array(v, dtype=_np.float64))
                          for k, v in params.items())
    inputs = [_np.array(x, dtype=_np.float64) for x in inputs]
    out, tape = forward(graph, params, *inputs)
    grads = backward(tape, _np.ones_like(out))
    rng = _np.random.default_rng(seed)

    errors = _OrderedDict()
    flagged = []
    checked = skipped = 0
    for name in tape.params:
        if not tape.trainable[name]:
            continue
        flat = params[name].reshape(-1)
        analytic = grads[name].reshape(-1)
        entries = _np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            entries = _np.sort(rng.choice(flat.size, max_entries,
                                          replace=False))
        worst = 0.0
        for k in entries:
            orig = flat[k]
            h = step * max(1.0, abs(orig))
            flat[k] = orig + h
            f_plus, pat_plus = _evaluate(graph, params, inputs)
            flat[k] = orig - h
            f_minus, pat_minus = _evaluate(graph, params, inputs)
            flat[k] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            if not _np.isfinite(numeric):
                raise NumericError(
                    "finite-difference estimate is not finite", name=name)
            if not _same_pattern(pat_plus, pat_minus):
                if name not in flagged:
                    flagged.append(name)
                if exclude_kinks:
                    skipped += 1
                    continue
            a = float(analytic[k])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, err)
            checked += 1
        errors[name] = worst

    if exclude_kinks:
        flagged = []
    return GradCheckReport(errors, step, tolerance, flagged, checked,
                           skipped)
