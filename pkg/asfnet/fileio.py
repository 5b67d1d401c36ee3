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
File formats.

ASFT (one tensor)::

    b"ASFT" | u32 version=1 | u8 rank=4 | 4 x u32 dims | N*C*H*W x f32
    (little endian, row-major)

ASFC (named tensors)::

    b"ASFC" | u32 version=1 | u32 count | count x (u16 name length,
    UTF-8 name, ASFT payload)

Images are binary PGM (P5) or ASFT; annotations and manifests are JSON.
"""

import os as _os
import struct as _struct
from collections import OrderedDict as _OrderedDict

import numpy as _np

from . import utils
from .density import SceneAnnotation
from .errors import FormatError, ShapeError

TENSOR_MAGIC = b"ASFT"
CHECKPOINT_MAGIC = b"ASFC"
VERSION = 1

_TENSOR_HEADER = _struct.Struct("<4sIB4I")
_CHECKPOINT_HEADER = _struct.Struct("<4sII")
_NAME_LEN = _struct.Struct("<H")

MANIFEST = "manifest.json"


# ------------------------
# ASFT

def encode_tensor(x):
    x = _np.asarray(x)
    if x.ndim != 4:
        raise ShapeError("ASFT stores rank-4 tensors, got shape %s" % (
            x.shape,), axis="rank")
    header = _TENSOR_HEADER.pack(TENSOR_MAGIC, VERSION, 4, *x.shape)
    return header + _np.ascontiguousarray(x, dtype="<f4").tobytes()


def _need(buf, offset, size, what, path):
    if len(buf) < offset + size:
        raise FormatError("truncated %s" % what, offset=len(buf), path=path)


def decode_tensor(buf, offset=0, path=None):
    """ (tensor, offset past the payload) """
    _need(buf, offset, _TENSOR_HEADER.size, "ASFT header", path)
    magic, version, rank, n, c, h, w = _TENSOR_HEADER.unpack_from(buf, offset)
    if magic != TENSOR_MAGIC:
        raise FormatError("bad ASFT magic %r" % magic, offset=offset,
                          path=path)
    if version != VERSION:
        raise FormatError("unsupported ASFT version %d" % version,
                          offset=offset + 4, path=path)
    if rank != 4:
        raise FormatError("ASFT rank must be 4, got %d" % rank,
                          offset=offset + 8, path=path)
    offset += _TENSOR_HEADER.size
    count = n * c * h * w
    _need(buf, offset, 4 * count, "ASFT payload", path)
    data = _np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
    tensor = data.astype(_np.float32).reshape(n, c, h, w)
    return tensor, offset + 4 * count


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def _write(path, data):
    with open(path, "wb") as f:
        f.write(data)


def save_tensor(path, x):
    _write(path, encode_tensor(x))


def load_tensor(path):
    buf = _read(path)
    tensor, end = decode_tensor(buf, 0, path=str(path))
    if end != len(buf):
        raise FormatError("trailing bytes after ASFT payload", offset=end,
                          path=str(path))
    return tensor


# ------------------------
# ASFC

def encode_checkpoint(tensors):
    parts = [_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, VERSION,
                                     len(tensors))]
    for name, value in tensors.items():
        raw = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(raw)))
        parts.append(raw)
        parts.append(encode_tensor(value))
    return b"".join(parts)


def decode_checkpoint(buf, path=None):
    _need(buf, 0, _CHECKPOINT_HEADER.size, "ASFC header", path)
    magic, version, count = _CHECKPOINT_HEADER.unpack_from(buf, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError("bad ASFC magic %r" % magic, offset=0, path=path)
    if version != VERSION:
        raise FormatError("unsupported ASFC version %d" % version, offset=4,
                          path=path)
    offset = _CHECKPOINT_HEADER.size
    tensors = _OrderedDict()
    for _ in range(count):
        _need(buf, offset, _NAME_LEN.size, "tensor name length", path)
        size, = _NAME_LEN.unpack_from(buf, offset)
        offset += _NAME_LEN.size
        _need(buf, offset, size, "tensor name", path)
        try:
            name = buf[offset:offset + size].decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("tensor name is not UTF-8", offset=offset,
                              path=path)
        offset += size
        tensors[name], offset = decode_tensor(buf, offset, path=path)
    if offset != len(buf):
        raise FormatError("trailing bytes after last tensor", offset=offset,
                          path=path)
    return tensors


def save_checkpoint(path, tensors):
    _write(path, encode_checkpoint(tensors))


def load_checkpoint(path):
    return decode_checkpoint(_read(path), path=str(path))


# ------------------------
# PGM

def decode_pgm(buf, path=None):
    """ binary P5 -> (2-D uint array, maxval) """
    if buf[:2] != b"P5":
        raise FormatError("not a binary PGM (P5) file", offset=0, path=path)
    fields, offset = [], 2
    while len(fields) < 3:
        while offset < len(buf) and buf[offset:offset + 1].isspace():
            offset += 1
        if offset < len(buf) and buf[offset:offset + 1] == b"#":
            while offset < len(buf) and buf[offset:offset + 1] not in (
                    b"\n", b"\r"):
                offset += 1
            continue
        start = offset
        while offset < len(buf) and buf[offset:offset + 1].isdigit():
            offset += 1
        if start == offset:
            raise FormatError("malformed PGM header", offset=offset,
                              path=path)
        fields.append(int(buf[start:offset]))
    width, height, maxval = fields
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError("invalid PGM size or maxval", offset=offset,
                          path=path)
    _need(buf, offset, 1, "PGM header", path)
    offset += 1
    dtype = _np.uint8 if maxval < 256 else ">u2"
    size = width * height * _np.dtype(dtype).itemsize
    _need(buf, offset, size, "PGM pixel data", path)
    pixels = _np.frombuffer(buf, dtype=dtype, count=width * height,
                            offset=offset)
    return pixels.reshape(height, width), maxval


def encode_pgm(pixels):
    pixels = _np.asarray(pixels, dtype=_np.uint8)
    height, width = pixels.shape
    return ("P5\n%d %d\n255\n" % (width, height)).encode("ascii") + \
        pixels.tobytes()


def save_pgm(path, pixels):
    _write(path, encode_pgm(pixels))


def image_to_pixels(image):
    """ (1, C, H, W) in [0, 1] -> 8-bit grey (channel mean) """
    image = _np.asarray(image, dtype=_np.float64)
    grey = image[0].mean(axis=0)
    return _np.clip(_np.round(grey * 255.0), 0, 255).astype(_np.uint8)


def density_to_pixels(density):
    """ max-normalised 8-bit view of a density map """
    d = _np.asarray(density, dtype=_np.float64)[0, 0]
    peak = d.max() if d.size else 0.0
    if peak <= 0:
        return _np.zeros(d.shape, dtype=_np.uint8)
    return _np.clip(_np.round(d / peak * 255.0), 0, 255).astype(_np.uint8)


def load_image(path):
    """
    (1, 3, H, W) float32 image from a P5 PGM (scaled to [0, 1], grey
    replicated to 3 channels) or an ASFT tensor.
    """
    buf = _read(path)
    if buf[:4] == TENSOR_MAGIC:
        tensor, end = decode_tensor(buf, 0, path=str(path))
        if end != len(buf):
            raise FormatError("trailing bytes after ASFT payload",
                              offset=end, path=str(path))
        if tensor.shape[0] != 1 or tensor.shape[1] != 3:
            raise ShapeError("%s: image tensors must be 1x3xHxW, got %s" % (
                path, "x".join(str(d) for d in tensor.shape)), axis="C")
        return tensor
    if buf[:2] == b"P5":
        pixels, maxval = decode_pgm(buf, path=str(path))
        grey = pixels.astype(_np.float32) / _np.float32(maxval)
        return _np.ascontiguousarray(
            _np.broadcast_to(grey, (1, 3) + grey.shape), dtype=_np.float32)
    raise FormatError("unrecognised image format", offset=0, path=str(path))


def save_image(path, image):
    if str(path).endswith(".asft"):
        save_tensor(path, image)
    else:
        save_pgm(path, image_to_pixels(image))


# ------------------------
# annotations and datasets

def load_annotation(path):
    return SceneAnnotation.from_dict(utils.read_json(path), path=str(path))


def save_annotation(path, ann):
    utils.write_json(path, ann.to_dict())


class Dataset(object):
    """
    Ordered (image, annotation) pairs listed by ``manifest.json``.

    Every file is read and cross-checked when the dataset is loaded.
    """

    def __init__(self, root, items, split="train"):
        self.root = _os.path.abspath(root)
        self.items = list(items)
        self.split = split
        self._samples = None

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        return 'asfnet.Dataset <%s, %d scenes, %s>' % (
            self.root, len(self.items), self.split)

    def path(self, relative):
        return _os.path.join(self.root, relative)

    def names(self):
        return [image for image, _ in self.items]

    @property
    def samples(self):
        if self._samples is None:
            self._samples = [self._load_item(i) for i in range(len(self))]
        return self._samples

    def _load_item(self, i):
        image_name, ann_name = self.items[i]
        image = load_image(self.path(image_name))
        ann = load_annotation(self.path(ann_name))
        if image.shape[2:] != (ann.height, ann.width):
            raise ShapeError(
                "%s is %dx%d but its annotation says %dx%d" % (
                    image_name, image.shape[3], image.shape[2], ann.width,
                    ann.height), axis="H")
        return image, ann


def write_manifest(root, items, split="train"):
    utils.write_json(_os.path.join(root, MANIFEST), {
        "split": split,
        "items": [{"image": image, "annotation": ann}
                  for image, ann in items]})


def load_dataset(root):
    path = _os.path.join(root, MANIFEST)
    data = utils.read_json(path)
    try:
        items = [(item["image"], item["annotation"])
                 for item in data["items"]]
    except (KeyError, TypeError) as e:
        raise FormatError("malformed manifest (%s)" % e, path=path)
    if not all(isinstance(name, str) for item in items for name in item):
        raise FormatError("manifest file names must be strings", path=path)
    dataset = Dataset(root, items, data.get("split", "train"))
    for image, ann in items:
        for name in (image, ann):
            if not _os.path.isfile(dataset.path(name)):
                raise FormatError("missing file %s" % name, path=path)
    dataset.samples
    return dataset
