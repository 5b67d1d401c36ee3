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
Dense NCHW tensors and the forward kernels the whole pipeline is built from.

A tensor is a C-contiguous, rank-4 ``numpy.ndarray`` (N, C, H, W). Storage
is float32; float64 arrays pass through every kernel unchanged so gradients
can be certified in 64-bit. Kernels never modify their inputs.
"""

import math as _math

import numpy as _np

from .errors import ShapeError, SpecError, NumericError

_AXES = ("N", "C", "H", "W")

# Keys cubic convolution parameter
CUBIC_A = -0.5


def as_tensor(data, dtype=None, name="tensor"):
    arr = _np.asarray(data)
    if dtype is None:
        dtype = _np.float64 if arr.dtype == _np.float64 else _np.float32
    arr = _np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim != 4:
        raise ShapeError("%s must be rank 4 (N, C, H, W), got shape %s" % (
            name, arr.shape), axis="rank")
    check_finite(arr, name)
    return arr


def check_finite(arr, name="tensor"):
    if arr.size and not _np.isfinite(arr).all():
        raise NumericError("non-finite values in %s" % name, name=name)
    return arr


def _finite_as(out, dtype, name):
    # float64 results that overflow the storage dtype become inf here
    with _np.errstate(over="ignore"):
        out = _np.ascontiguousarray(out, dtype=dtype)
    return check_finite(out, name)


def zeros(n, c, h, w, dtype=_np.float32):
    return _np.zeros((n, c, h, w), dtype=dtype)


def _same_dims(a, b, axes, what):
    for axis in axes:
        i = _AXES.index(axis)
        if a.shape[i] != b.shape[i]:
            raise ShapeError("%s: axis %s differs (%d vs %d)" % (
                what, axis, a.shape[i], b.shape[i]), axis=axis)


def _pair(value):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SpecError("expected a pair, got %r" % (value,))
        return int(value[0]), int(value[1])
    return int(value), int(value)


class ConvSpec(object):
    """
    Static description of one 2-D convolution layer.

    Depthwise layers are grouped convolutions with groups = in_channels,
    weights shaped (out_channels, 1, kh, kw).
    """

    def __init__(self, in_channels, out_channels, kernel=(3, 3), stride=(1, 1),
                 padding=(0, 0), dilation=(1, 1), depthwise=False,
                 has_bias=True):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel = _pair(kernel)
        self.stride = _pair(stride)
        self.padding = _pair(padding)
        self.dilation = _pair(dilation)
        self.depthwise = bool(depthwise)
        self.has_bias = bool(has_bias)
        self.validate()

    @classmethod
    def same(cls, in_channels, out_channels, kernel=3, dilation=1, stride=1,
             depthwise=False, has_bias=True):
        """ padding chosen so stride 1 preserves the spatial size """
        kh, kw = _pair(kernel)
        dh, dw = _pair(dilation)
        return cls(in_channels, out_channels, (kh, kw), stride,
                   (dh * (kh - 1) // 2, dw * (kw - 1) // 2), (dh, dw),
                   depthwise, has_bias)

    def validate(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise SpecError("channel counts must be positive")
        if min(self.kernel) < 1 or min(self.stride) < 1 \
                or min(self.dilation) < 1:
            raise SpecError("kernel, stride and dilation must be >= 1")
        if min(self.padding) < 0:
            raise SpecError("padding must be >= 0")
        if self.depthwise and self.out_channels % self.in_channels:
            raise SpecError(
                "depthwise conv needs out_channels (%d) to be a multiple "
                "of in_channels (%d)" % (self.out_channels, self.in_channels))

    @property
    def groups(self):
        return self.in_channels if self.depthwise else 1

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels // self.groups) + \
            self.kernel

    @property
    def bias_shape(self):
        return (1, self.out_channels, 1, 1)

    def output_size(self, h, w):
        (kh, kw), (sh, sw) = self.kernel, self.stride
        (ph, pw), (dh, dw) = self.padding, self.dilation
        h_out = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
        w_out = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
        if h_out < 1 or w_out < 1:
            raise SpecError(
                "conv output would be %dx%d for a %dx%d input" % (
                    h_out, w_out, h, w))
        return h_out, w_out

    def to_dict(self):
        return {"in_channels": self.in_channels,
                "out_channels": self.out_channels,
                "kernel": list(self.kernel), "stride": list(self.stride),
                "padding": list(self.padding),
                "dilation": list(self.dilation),
                "depthwise": self.depthwise, "has_bias": self.has_bias}

    def __eq__(self, other):
        return isinstance(other, ConvSpec) and \
            self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'asfnet.ConvSpec <%d->%d k=%s s=%s p=%s d=%s%s>' % (
            self.in_channels, self.out_channels, self.kernel, self.stride,
            self.padding, self.dilation, ' dw' if self.depthwise else '')


# ------------------------
# convolution

def _im2col(x, spec):
    """ (N, C, H, W) -> float64 columns (N, G, C/G*kh*kw, Ho*Wo) """
    n, c, h, w = x.shape
    (kh, kw), (sh, sw) = spec.kernel, spec.stride
    (ph, pw), (dh, dw) = spec.padding, spec.dilation
    h_out, w_out = spec.output_size(h, w)
    xp = _np.pad(x.astype(_np.float64),
                 ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode="constant")
    s_n, s_c, s_h, s_w = xp.strides
    patches = _np.lib.stride_tricks.as_strided(
        xp, shape=(n, c, kh, kw, h_out, w_out),
        strides=(s_n, s_c, dh * s_h, dw * s_w, sh * s_h, sw * s_w),
        writeable=False)
    g = spec.groups
    return patches.reshape(n, g, (c // g) * kh * kw, h_out * w_out)


def _col2im(cols, x_shape, spec):
    """ adjoint of _im2col: scatter-add columns back onto the input grid """
    n, c, h, w = x_shape
    (kh, kw), (sh, sw) = spec.kernel, spec.stride
    (ph, pw), (dh, dw) = spec.padding, spec.dilation
    h_out, w_out = spec.output_size(h, w)
    cols = cols.reshape(n, c, kh, kw, h_out, w_out)
    xp = _np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=_np.float64)
    for i in range(kh):
        top = i * dh
        rows = slice(top, top + sh * (h_out - 1) + 1, sh)
        for j in range(kw):
            left = j * dw
            xp[:, :, rows, left:left + sw * (w_out - 1) + 1:sw] += \
                cols[:, :, i, j]
    return xp[:, :, ph:ph + h, pw:pw + w]


def _check_conv_args(x, weights, bias, spec):
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ShapeError("conv2d input: axis C is %d, spec expects %d" % (
            c, spec.in_channels), axis="C")
    weights = _np.asarray(weights)
    expected = spec.weight_shape
    if weights.ndim != 4:
        raise ShapeError("conv2d weights must be rank 4", axis="rank")
    for axis, (got, want) in zip(("out", "in", "kh", "kw"),
                                 zip(weights.shape, expected)):
        if got != want:
            raise ShapeError("conv2d weights: axis %s is %d, expected %d" % (
                axis, got, want), axis=axis)
    check_finite(weights, "conv2d weights")
    if bias is not None:
        bias = _np.asarray(bias)
        if bias.size != spec.out_channels:
            raise ShapeError("conv2d bias has %d entries, expected %d" % (
                bias.size, spec.out_channels), axis="C")
        check_finite(bias, "conv2d bias")
    elif spec.has_bias:
        raise ShapeError("spec declares a bias but none was given",
                         axis="bias")
    return weights, bias


def conv2d(input, weights, bias=None, spec=None):
    """
    Zero-padded 2-D cross-correlation (no kernel flip).

    :Parameters:
        input : ndarray (N, C_in, H, W)
        weights : ndarray (C_out, C_in/groups, kh, kw)
        bias : ndarray, optional
            C_out values, any shape with C_out elements
        spec : ConvSpec
            Output size is floor((H + 2p - d(k-1) - 1)/s) + 1 per axis
    """
    if spec is None:
        raise SpecError("conv2d needs a ConvSpec")
    x = as_tensor(input, name="conv2d input")
    weights, bias = _check_conv_args(x, weights, bias, spec)
    n = x.shape[0]
    h_out, w_out = spec.output_size(x.shape[2], x.shape[3])

    cols = _im2col(x, spec)
    g = spec.groups
    wmat = weights.astype(_np.float64).reshape(
        g, spec.out_channels // g, -1)
    out = _np.matmul(wmat, cols).reshape(n, spec.out_channels, h_out, w_out)
    if bias is not None:
        out += bias.astype(_np.float64).reshape(1, -1, 1, 1)
    return _finite_as(out, x.dtype, "conv2d output")


def conv2d_adjoint(grad_output, input, weights, spec):
    """ gradients of conv2d wrt (input, weights, bias) for a given seed """
    x = _np.asarray(input)
    n, c, h, w = x.shape
    g = spec.groups
    cog = spec.out_channels // g
    go = grad_output.astype(_np.float64).reshape(n, g, cog, -1)
    cols = _im2col(x, spec)
    wmat = weights.astype(_np.float64).reshape(g, cog, -1)

    grad_w = _np.matmul(go, cols.transpose(0, 1, 3, 2)).sum(axis=0)
    grad_cols = _np.matmul(wmat.transpose(0, 2, 1), go)
    grad_x = _col2im(grad_cols, x.shape, spec)
    grad_b = go.sum(axis=(0, 3)).reshape(spec.bias_shape)
    return (grad_x.astype(x.dtype),
            grad_w.reshape(weights.shape).astype(weights.dtype),
            grad_b.astype(weights.dtype))


# ------------------------
# elementwise and channel ops

def relu(input):
    x = as_tensor(input, name="relu input")
    return _np.maximum(x, x.dtype.type(0))


def scale(input, lam):
    x = as_tensor(input, name="scale input")
    lam = float(lam)
    if not _math.isfinite(lam):
        raise NumericError("scale factor is not finite", name="lambda")
    return _finite_as(x.astype(_np.float64) * lam, x.dtype, "scale output")


def concat_channels(a, b):
    a = as_tensor(a, name="concat lhs")
    b = as_tensor(b, name="concat rhs")
    _same_dims(a, b, ("N", "H", "W"), "concat_channels")
    return _np.concatenate([a, b.astype(a.dtype)], axis=1)


def slice_channels(input, start, stop):
    x = _np.asarray(input)
    return _np.ascontiguousarray(x[:, start:stop])


# ------------------------
# bicubic resampling

def cubic_weight(t, a=CUBIC_A):
    t = abs(t)
    if t <= 1.0:
        return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    if t < 2.0:
        return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    return 0.0


def bicubic_taps(src, size):
    """
    Source indices and weights of the 4 taps around coordinate ``src``.

    The window is anchored at floor(src) - 1; indices past the border are
    clamped to the nearest valid pixel.
    """
    base = int(_math.floor(src))
    t = src - base
    weights = [cubic_weight(t + 1.0), cubic_weight(t),
               cubic_weight(1.0 - t), cubic_weight(2.0 - t)]
    index = [min(max(base - 1 + k, 0), size - 1) for k in range(4)]
    return index, weights


def resize_matrix(in_size, out_size):
    """ (out_size, in_size) float64 operator with rows summing to 1 """
    if in_size < 1 or out_size < 1:
        raise SpecError("resize sizes must be >= 1 (got %d -> %d)" % (
            in_size, out_size))
    ratio = float(in_size) / out_size
    mat = _np.zeros((out_size, in_size), dtype=_np.float64)
    for i in range(out_size):
        # half-pixel centres
        src = (i + 0.5) * ratio - 0.5
        index, weights = bicubic_taps(src, in_size)
        for j, wt in zip(index, weights):
            mat[i, j] += wt
    return mat


def bicubic_resize(input, out_h, out_w):
    """
    Separable Keys cubic resampling (a = -0.5) to (out_h, out_w).

    Each output pixel is a 4x4 weighted sum of its source neighbourhood;
    resizing to the input size is an exact identity.
    """
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise SpecError("bicubic_resize target must be >= 1x1, got %dx%d" % (
            out_h, out_w))
    x = as_tensor(input, name="bicubic_resize input")
    rows = resize_matrix(x.shape[2], out_h)
    cols = resize_matrix(x.shape[3], out_w)
    out = _np.matmul(_np.matmul(rows, x.astype(_np.float64)), cols.T)
    return _finite_as(out, x.dtype, "bicubic_resize output")


def bicubic_resize_adjoint(grad_output, in_h, in_w):
    """ transpose of bicubic_resize: spreads the seed with the same weights """
    g = _np.asarray(grad_output)
    rows = resize_matrix(in_h, g.shape[2])
    cols = resize_matrix(in_w, g.shape[3])
    out = _np.matmul(_np.matmul(rows.T, g.astype(_np.float64)), cols)
    return _np.ascontiguousarray(out, dtype=g.dtype)
