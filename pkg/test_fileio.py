#!/usr/bin/env python
# -*- coding: UTF-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion

"""
Binary formats, images, annotations and datasets
- ASFT / ASFC decoding errors carry the failing byte offset
- PGM images load as 3-channel tensors in [0, 1]
- synthetic scenes are reproducible from their seed
"""

import os
import shutil
import struct
import tempfile
import unittest
from collections import OrderedDict

import numpy as np

from asfnet import fileio, synth
from asfnet.density import SceneAnnotation
from asfnet.errors import FormatError, ShapeError, SpecError
from asfnet.synth import SynthSpec


class TempDirCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp(prefix="asfnet-")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def write(self, name, data):
        with open(self.path(name), "wb") as f:
            f.write(data)
        return self.path(name)


class TestTensorFormat(TempDirCase):
    def test_roundtrip_bits(self):
        x = np.random.default_rng(0).standard_normal((2, 3, 4, 5)) \
            .astype(np.float32)
        x[0, 0, 0, 0] = -0.0
        x[0, 0, 0, 1] = np.float32(1e-45)
        fileio.save_tensor(self.path("x.asft"), x)
        y = fileio.load_tensor(self.path("x.asft"))
        self.assertEqual(y.dtype, np.float32)
        self.assertEqual(y.shape, x.shape)
        self.assertEqual(y.tobytes(), x.tobytes())

    def test_layout(self):
        buf = fileio.encode_tensor(np.ones((1, 1, 1, 2), np.float32))
        self.assertEqual(buf[:4], b"ASFT")
        self.assertEqual(struct.unpack("<IB4I", buf[4:25]),
                         (1, 4, 1, 1, 1, 2))
        self.assertEqual(buf[25:], struct.pack("<2f", 1.0, 1.0))

    def test_truncated_payload(self):
        buf = fileio.encode_tensor(np.ones((1, 2, 3, 3), np.float32))[:-5]
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_tensor(buf)
        self.assertEqual(ctx.exception.offset, len(buf))

    def test_truncated_header(self):
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_tensor(b"ASFT\x01")
        self.assertEqual(ctx.exception.offset, 5)

    def test_bad_header_fields(self):
        good = fileio.encode_tensor(np.ones((1, 1, 1, 1), np.float32))
        cases = [(b"XXXX" + good[4:], 0),
                 (good[:4] + struct.pack("<I", 2) + good[8:], 4),
                 (good[:8] + b"\x03" + good[9:], 8)]
        for buf, offset in cases:
            with self.assertRaises(FormatError) as ctx:
                fileio.decode_tensor(buf)
            self.assertEqual(ctx.exception.offset, offset)
            self.assertIn("offset %d" % offset, str(ctx.exception))

    def test_trailing_bytes(self):
        buf = fileio.encode_tensor(np.ones((1, 1, 1, 1), np.float32))
        path = self.write("x.asft", buf + b"\x00")
        with self.assertRaises(FormatError) as ctx:
            fileio.load_tensor(path)
        self.assertEqual(ctx.exception.offset, len(buf))

    def test_rank_enforced(self):
        with self.assertRaises(ShapeError):
            fileio.encode_tensor(np.ones((2, 2), np.float32))


class TestCheckpointFormat(TempDirCase):
    def tensors(self):
        rng = np.random.default_rng(1)
        return OrderedDict([
            ("backbone.stage1.dw.weight",
             rng.standard_normal((3, 1, 3, 3)).astype(np.float32)),
            ("head.lambda1", np.full((1, 1, 1, 1), 0.1, np.float32)),
            ("mask:backbone.stage1.dw.weight",
             np.ones((3, 1, 3, 3), np.float32))])

    def test_roundtrip(self):
        tensors = self.tensors()
        fileio.save_checkpoint(self.path("m.asfc"), tensors)
        loaded = fileio.load_checkpoint(self.path("m.asfc"))
        self.assertEqual(list(loaded), list(tensors))
        for name in tensors:
            self.assertEqual(loaded[name].tobytes(), tensors[name].tobytes())
        with open(self.path("m.asfc"), "rb") as f:
            self.assertEqual(fileio.encode_checkpoint(loaded), f.read())

    def test_empty(self):
        self.assertEqual(fileio.decode_checkpoint(
            fileio.encode_checkpoint(OrderedDict())), OrderedDict())

    def test_errors(self):
        buf = fileio.encode_checkpoint(self.tensors())
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_checkpoint(b"ASFX" + buf[4:])
        self.assertEqual(ctx.exception.offset, 0)
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_checkpoint(buf[:4] + struct.pack("<I", 9) + buf[8:])
        self.assertEqual(ctx.exception.offset, 4)
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_checkpoint(buf[:-1])
        self.assertEqual(ctx.exception.offset, len(buf) - 1)
        with self.assertRaises(FormatError) as ctx:
            fileio.decode_checkpoint(buf + b"\x00\x00")
        self.assertEqual(ctx.exception.offset, len(buf))

    def test_path_in_message(self):
        path = self.write("bad.asfc", b"nope")
        with self.assertRaises(FormatError) as ctx:
            fileio.load_checkpoint(path)
        self.assertIn("bad.asfc", str(ctx.exception))


class TestImages(TempDirCase):
    def test_white_pgm(self):
        path = self.write("white.pgm", b"P5\n8 8\n255\n" + b"\xff" * 64)
        image = fileio.load_image(path)
        self.assertEqual(image.shape, (1, 3, 8, 8))
        self.assertEqual(image.dtype, np.float32)
        np.testing.assert_array_equal(image, 1.0)

    def test_pgm_comments_and_layout(self):
        pixels = bytes(range(6))
        path = self.write("c.pgm",
                          b"P5\n# made by hand\n3 # width\n2\n255\n" + pixels)
        image = fileio.load_image(path)
        self.assertEqual(image.shape, (1, 3, 2, 3))
        np.testing.assert_array_equal(
            image[0, 1], np.arange(6, dtype=np.float32).reshape(2, 3) / 255)

    def test_sixteen_bit_pgm(self):
        path = self.write("w.pgm", b"P5 2 1 1000\n" +
                          struct.pack(">2H", 0, 1000))
        image = fileio.load_image(path)
        np.testing.assert_array_equal(image[0, 2, 0], [0.0, 1.0])

    def test_bad_images(self):
        cases = [(b"P5\n8 8\n255\n" + b"\x00" * 10, FormatError),
                 (b"P5\nx 8\n255\n", FormatError),
                 (b"P5\n2 2\n0\n\x00\x00\x00\x00", FormatError),
                 (b"GIF89a", FormatError)]
        for buf, error in cases:
            with self.assertRaises(error):
                fileio.load_image(self.write("bad.pgm", buf))

    def test_asft_image(self):
        x = np.random.default_rng(2).random((1, 3, 16, 16)).astype(np.float32)
        fileio.save_image(self.path("x.asft"), x)
        self.assertEqual(fileio.load_image(self.path("x.asft")).tobytes(),
                         x.tobytes())
        fileio.save_tensor(self.path("grey.asft"),
                           np.ones((1, 1, 4, 4), np.float32))
        with self.assertRaises(ShapeError) as ctx:
            fileio.load_image(self.path("grey.asft"))
        self.assertEqual(ctx.exception.axis, "C")

    def test_pgm_save_load(self):
        pixels = np.random.default_rng(3).integers(0, 256, (16, 32))
        grey = pixels.astype(np.float32) / np.float32(255)
        image = np.broadcast_to(grey, (1, 3, 16, 32))
        fileio.save_image(self.path("g.pgm"), image)
        np.testing.assert_array_equal(fileio.load_image(self.path("g.pgm")),
                                      image)

    def test_density_pixels(self):
        zero = np.zeros((1, 1, 4, 4), np.float32)
        np.testing.assert_array_equal(fileio.density_to_pixels(zero), 0)
        d = zero.copy()
        d[0, 0, 1, 2] = 0.5
        d[0, 0, 3, 3] = 0.25
        pixels = fileio.density_to_pixels(d)
        self.assertEqual(pixels[1, 2], 255)
        self.assertEqual(pixels[3, 3], 128)


class TestDataset(TempDirCase):
    def test_annotation_roundtrip(self):
        ann = SceneAnnotation(32, 16, [(0.5, 1.25), (31.0, 15.99)])
        fileio.save_annotation(self.path("a.json"), ann)
        self.assertEqual(fileio.load_annotation(self.path("a.json")), ann)

    def test_synth_dataset(self):
        spec = SynthSpec(image_size=[32, 48], n_scenes=3, count_range=[4, 9])
        written = synth.write_dataset(spec, self.path("train"))
        loaded = fileio.load_dataset(self.path("train"))
        self.assertEqual(len(loaded), 3)
        self.assertEqual(loaded.names(), ["scene_0000.pgm", "scene_0001.pgm",
                                          "scene_0002.pgm"])
        self.assertEqual(loaded.split, "train")
        for (image, ann), (image2, ann2) in zip(written.samples,
                                                loaded.samples):
            self.assertEqual(image.shape, (1, 3, 32, 48))
            self.assertEqual((ann.width, ann.height), (48, 32))
            self.assertTrue(4 <= len(ann) <= 9)
            self.assertEqual(ann, ann2)
            np.testing.assert_array_equal(image, image2)

    def test_synth_files_reproducible(self):
        spec = SynthSpec(image_size=[16, 16], n_scenes=2, seed=7)
        synth.write_dataset(spec, self.path("a"))
        synth.write_dataset(spec, self.path("b"))
        for name in sorted(os.listdir(self.path("a"))):
            with open(os.path.join(self.path("a"), name), "rb") as f:
                first = f.read()
            with open(os.path.join(self.path("b"), name), "rb") as f:
                self.assertEqual(f.read(), first, name)

    def test_dimension_mismatch(self):
        self.write("img.pgm", b"P5\n8 8\n255\n" + b"\x80" * 64)
        fileio.save_annotation(self.path("img.json"),
                               SceneAnnotation(16, 8, [(1, 1)]))
        fileio.write_manifest(self.tmp, [("img.pgm", "img.json")])
        with self.assertRaises(ShapeError):
            fileio.load_dataset(self.tmp)

    def test_missing_file(self):
        fileio.write_manifest(self.tmp, [("nope.pgm", "nope.json")])
        with self.assertRaises(FormatError):
            fileio.load_dataset(self.tmp)

    def test_malformed_manifest(self):
        self.write(fileio.MANIFEST, b'{"items": [{"image": "a.pgm"}]}')
        with self.assertRaises(FormatError):
            fileio.load_dataset(self.tmp)
        self.write(fileio.MANIFEST, b'{"items": [')
        with self.assertRaises(FormatError):
            fileio.load_dataset(self.tmp)
        self.write(fileio.MANIFEST,
                   b'{"items": [{"image": 3, "annotation": "a.json"}]}')
        with self.assertRaises(FormatError):
            fileio.load_dataset(self.tmp)


class TestSynth(unittest.TestCase):
    def test_deterministic(self):
        spec = SynthSpec(seed=11)
        image, ann = synth.synth_scene(spec, 2)
        image2, ann2 = synth.synth_scene(spec, 2)
        self.assertEqual(image.tobytes(), image2.tobytes())
        self.assertEqual(ann, ann2)
        other, _ = synth.synth_scene(spec, 3)
        self.assertNotEqual(image.tobytes(), other.tobytes())

    def test_exact_count(self):
        spec = SynthSpec(count_range=[5, 5])
        for index in range(10):
            image, ann = synth.synth_scene(spec, index)
            self.assertEqual(len(ann), 5)
            self.assertTrue(0.0 <= image.min() and image.max() <= 1.0)
            for x, y in ann.points:
                self.assertTrue(0 <= x < 64 and 0 <= y < 64)

    def test_empty_scene(self):
        image, ann = synth.synth_scene(SynthSpec(count_range=[0, 0],
                                                 noise=0.0), 0)
        self.assertEqual(len(ann), 0)
        np.testing.assert_allclose(image, synth.BACKGROUND, rtol=1e-6)

    def test_people_are_darker(self):
        spec = SynthSpec(count_range=[1, 1], noise=0.0, blob_radius=[2, 2])
        image, ann = synth.synth_scene(spec, 0)
        x, y = ann.points[0]
        self.assertLess(image[0, 0, int(y), int(x)], synth.BACKGROUND - 0.3)

    def test_validation(self):
        for kwargs in ({"image_size": [20, 32]}, {"count_range": [5, 2]},
                       {"blob_radius": [0, 1]}):
            with self.assertRaises(SpecError):
                SynthSpec(**kwargs).validate()
        for data in ({"count_range": 5}, {"image_size": [16.5, 16]},
                     {"blob_radius": ["a", 2]}, {"seed": "1"}, [16, 16]):
            with self.assertRaises(SpecError):
                SynthSpec.from_dict(data)


if __name__ == '__main__':
    unittest.main()
