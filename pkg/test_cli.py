#!/usr/bin/env python
# -*- coding: UTF-8 -*-
#
# ASFNet: lightweight crowd counting with adjacent feature fusion

"""
Command line: exit codes, outputs and the synth/train/eval/prune flow
"""

import contextlib
import io
import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from asfnet import Model, cli, fileio, utils

TINY_CONFIG = {
    "backbone": {"stage_channels": [2, 3, 3, 4]},
    "fusion": {"branch_out_channels": 3, "fuse_channels": 3,
               "net_channels": 2},
    "train": {"epochs": 2, "learning_rate": 0.001, "checkpoint_every": 1},
}
TINY_SYNTH = {"image_size": [16, 16], "n_scenes": 3, "count_range": [3, 6],
              "spread": 4.0, "seed": 2}

# closed-form totals of the default network on a 3x64x64 input
DEFAULT_PARAMS = 75824
DEFAULT_FLOPS = 109276672


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli.main(list(argv))
    return code, out.getvalue(), err.getvalue()


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


class CliCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp(prefix="asfnet-cli-")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write_json(self, name, data):
        utils.write_json(self.path(name), data)
        return self.path(name)

    def assertOk(self, result):
        code, out, err = result
        self.assertEqual(code, 0, err)
        return out


class TestFlops(CliCase):
    def test_default_totals(self):
        out = self.assertOk(run("flops", "--input-size", "3x64x64",
                                "--json", self.path("cost.json")))
        report = json.loads(out.split("\n\n", 1)[1])
        self.assertEqual(report["total_params"], DEFAULT_PARAMS)
        self.assertEqual(report["total_flops"], DEFAULT_FLOPS)
        self.assertEqual(report["input_size"], [3, 64, 64])
        self.assertIn("head.fuse1", out.split("\n\n", 1)[0])
        with open(self.path("cost.json")) as f:
            self.assertEqual(json.load(f)["total_flops"], DEFAULT_FLOPS)

    def test_bad_input_size(self):
        code, _, err = run("flops", "--input-size", "64x64")
        self.assertEqual(code, 1)
        self.assertIn("CxHxW", err)
        code, _, _ = run("flops", "--input-size", "3x60x60")
        self.assertEqual(code, 2)


class TestGroundTruth(CliCase):
    def test_empty_annotation(self):
        ann = self.write_json("empty.json",
                              {"width": 16, "height": 8, "points": []})
        out = self.assertOk(run("gen-gt", "--ann", ann,
                                "--out", self.path("gt.asft"),
                                "--pgm", self.path("gt.pgm")))
        self.assertIn("count: 0.000000", out)
        density = fileio.load_tensor(self.path("gt.asft"))
        self.assertEqual(density.shape, (1, 1, 8, 16))
        np.testing.assert_array_equal(density, 0.0)
        pixels, _ = fileio.decode_pgm(read_bytes(self.path("gt.pgm")))
        np.testing.assert_array_equal(pixels, 0)

    def test_points_count(self):
        ann = self.write_json("two.json", {
            "width": 32, "height": 32, "points": [[10, 10], [20, 22]]})
        out = self.assertOk(run("gen-gt", "--ann", ann,
                                "--out", self.path("gt.asft")))
        self.assertIn("count: 2.000000", out)

    def test_gt_params_file(self):
        ann = self.write_json("one.json", {
            "width": 32, "height": 32, "points": [[16, 16]]})
        params = self.write_json("gt.json", {"fixed_sigma": 2.0})
        self.assertOk(run("gen-gt", "--ann", ann, "--params", params,
                          "--out", self.path("gt.asft")))
        bad = self.write_json("bad.json", {"sigma": 2.0})
        code, _, _ = run("gen-gt", "--ann", ann, "--params", bad,
                         "--out", self.path("gt.asft"))
        self.assertEqual(code, 2)


class TestErrors(CliCase):
    def test_unknown_flag(self):
        code, _, err = run("flops", "--bogus")
        self.assertEqual(code, 1)
        self.assertIn("usage", err)

    def test_missing_command(self):
        self.assertEqual(run()[0], 1)

    def test_version(self):
        self.assertEqual(run("--version")[0], 0)

    def test_malformed_files(self):
        with open(self.path("broken.asfc"), "wb") as f:
            f.write(b"ASFC\x01")
        code, _, err = run("eval", "--ckpt", self.path("broken.asfc"),
                           "--data", self.tmp)
        self.assertEqual(code, 2)
        ann = self.path("ann.json")
        with open(ann, "w") as f:
            f.write("{not json")
        code, _, _ = run("gen-gt", "--ann", ann, "--out", self.path("x.asft"))
        self.assertEqual(code, 2)
        code, _, _ = run("gen-gt", "--ann", self.path("missing.json"),
                         "--out", self.path("x.asft"))
        self.assertEqual(code, 2)

    def test_badly_typed_config(self):
        for i, data in enumerate([
                {"fusion": {"pairing": 5}},
                {"fusion": {"pairing": [["a", 2], [3, 4]]}},
                {"fusion": {"lambdas": ["x", 1, 1, 1]}},
                {"fusion": {"net_kernel": {"kernel": 3}}},
                {"backbone": {"stage_channels": 5}},
                {"backbone": {"stage_channels": [2, 3, 3, "4"]}},
                {"train": {"epochs": "x"}},
                {"train": {"shuffle": 1}},
                {"gt": {"k": 2.5}},
                {"backbone": [1, 2]},
                [1, 2]]):
            path = self.write_json("bad%d.json" % i, data)
            code, out, err = run("flops", "--config", path)
            self.assertEqual(code, 2, (data, err))
            self.assertEqual(out, "")
            self.assertIn("error", err)

    def test_badly_typed_synth_spec(self):
        for i, data in enumerate([{"count_range": 5},
                                  {"image_size": [16.5, 16]},
                                  {"blob_radius": ["a", 2]},
                                  {"n_scenes": None}]):
            path = self.write_json("spec%d.json" % i, data)
            code, _, err = run("synth", "--spec", path,
                               "--out", self.path("d%d" % i))
            self.assertEqual(code, 2, (data, err))

    def test_checkpoint_with_foreign_mask(self):
        tensors = Model().tensors()
        tensors["mask:nope.weight"] = np.ones((1, 1, 1, 1), dtype=np.float32)
        fileio.save_checkpoint(self.path("foreign.asfc"), tensors)
        image = self.path("img.asft")
        fileio.save_tensor(image, np.zeros((1, 3, 16, 16), dtype=np.float32))
        code, _, err = run("infer", "--ckpt", self.path("foreign.asfc"),
                           "--image", image, "--out", self.path("d.asft"))
        self.assertEqual(code, 2)
        self.assertIn("nope.weight", err)

        tensors = Model().tensors()
        tensors["mask:head.out.weight"] = np.ones((1, 1, 2, 2),
                                                  dtype=np.float32)
        fileio.save_checkpoint(self.path("shape.asfc"), tensors)
        code, _, err = run("infer", "--ckpt", self.path("shape.asfc"),
                           "--image", image, "--out", self.path("d.asft"))
        self.assertEqual(code, 2)
        self.assertIn("head.out.weight", err)

    def test_fraction_range(self):
        for fraction in ("1.0", "-0.5"):
            code, _, err = run("prune", "--ckpt", "x.asfc", "--criterion",
                               "l1", "--fraction", fraction, "--out", "y.asfc")
            self.assertEqual(code, 1)
            self.assertIn("fraction", err)


class TestPipeline(CliCase):
    def synth(self, name="data"):
        spec = self.write_json("synth.json", TINY_SYNTH)
        out = self.assertOk(run("synth", "--spec", spec,
                                "--out", self.path(name)))
        self.assertIn("wrote 3 scenes", out)
        return self.path(name)

    def train(self, data, name="run"):
        config = self.write_json("config.json", TINY_CONFIG)
        out = self.assertOk(run("train", "--config", config, "--data", data,
                                "--out", self.path(name)))
        self.assertIn("after 2 epochs", out)
        return self.path(name)

    def test_synth_train_eval_prune(self):
        data = self.synth()
        run_dir = self.train(data)
        for name in ("config.json", "loss.csv", "final.asfc",
                     "epoch_0001.asfc", "epoch_0002.asfc"):
            self.assertTrue(os.path.isfile(os.path.join(run_dir, name)), name)
        ckpt = os.path.join(run_dir, "final.asfc")

        out = self.assertOk(run("eval", "--ckpt", ckpt, "--data", data,
                                "--report", self.path("report.json")))
        self.assertIn("MAE:", out)
        self.assertNotIn("sparsity", out)
        with open(self.path("report.json")) as f:
            report = json.load(f)
        self.assertEqual(report["n_images"], 3)
        self.assertEqual(len(report["pairs"]), 3)

        pruned = self.path("pruned", "pruned.asfc")
        out = self.assertOk(run("prune", "--ckpt", ckpt, "--criterion", "l1",
                                "--fraction", "0.25", "--out", pruned))
        self.assertIn("global sparsity", out)
        self.assertTrue(os.path.isfile(self.path("pruned", "config.json")))
        with open(self.path("pruned", "pruned_sparsity.json")) as f:
            sparsity = json.load(f)
        self.assertAlmostEqual(sparsity["global"], 0.25, delta=0.05)

        out = self.assertOk(run("eval", "--ckpt", pruned, "--data", data,
                                "--no-threads",
                                "--report", self.path("pruned.json")))
        self.assertIn("sparsity: ", out)
        with open(self.path("pruned.json")) as f:
            self.assertAlmostEqual(json.load(f)["sparsity"],
                                   sparsity["global"], places=9)

    def test_infer(self):
        data = self.synth()
        run_dir = self.train(data)
        out = self.assertOk(run(
            "infer", "--ckpt", os.path.join(run_dir, "final.asfc"),
            "--image", os.path.join(data, "scene_0000.pgm"),
            "--out", self.path("d.asft"), "--pgm", self.path("d.pgm"),
            "--features", self.path("taps")))
        self.assertIn("count: ", out)
        density = fileio.load_tensor(self.path("d.asft"))
        self.assertEqual(density.shape, (1, 1, 8, 8))
        self.assertGreaterEqual(float(density.min()), 0.0)
        pixels, maxval = fileio.decode_pgm(read_bytes(self.path("d.pgm")))
        self.assertEqual((pixels.shape, maxval), ((8, 8), 255))
        for i, size in enumerate([8, 4, 2, 1]):
            pixels, _ = fileio.decode_pgm(read_bytes(
                self.path("taps", "tap%d.pgm" % (i + 1))))
            self.assertEqual(pixels.shape, (size, size))

    def test_byte_reproducible(self):
        data = self.synth()
        first = self.train(data, "first")
        second = self.train(data, "second")
        for name in ("final.asfc", "loss.csv", "epoch_0001.asfc"):
            self.assertEqual(read_bytes(os.path.join(first, name)),
                             read_bytes(os.path.join(second, name)), name)


if __name__ == '__main__':
    unittest.main()
