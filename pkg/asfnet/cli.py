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
Command-line entry point: ``asfnet <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric
failure (non-finite values, diverged training).
"""

from __future__ import print_function

import argparse as _argparse
import os as _os
import sys as _sys

from . import fileio
from . import multi
from . import utils
from . import version
from .base import CONFIG_NAME
from .config import Config, GtParams
from .density import generate_density_map
from .errors import (AsfnetError, ArgumentError, FormatError,
                     DivergenceError, UsageError)
from .model import Model
from .pruning import CRITERIA
from .synth import SynthSpec, write_dataset
from .variants import Variants

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(_argparse.ArgumentParser):
    def error(self, message):
        raise UsageError("%s%s: error: %s" % (
            self.format_usage(), self.prog, message))


def _load(loader, path):
    # option errors inside a file are data errors, not usage errors
    try:
        return loader(path)
    except ArgumentError as e:
        raise FormatError(str(e), path=path)


def _config(path, near=None):
    if path:
        return _load(Config.load, path)
    if near:
        sidecar = _os.path.join(_os.path.dirname(_os.path.abspath(near)),
                                CONFIG_NAME)
        if _os.path.isfile(sidecar):
            return _load(Config.load, sidecar)
    return Config()


def _makedirs(path):
    if path and not _os.path.isdir(path):
        _os.makedirs(path)


def _parent(path):
    _makedirs(_os.path.dirname(_os.path.abspath(path)))


def cmd_synth(args):
    spec = _load(SynthSpec.load, args.spec)
    dataset = write_dataset(spec, args.out, split=args.split,
                            progress=args.progress)
    print("wrote %d scenes to %s" % (len(dataset), args.out))


def cmd_gen_gt(args):
    params = _load(GtParams.load, args.params) if args.params \
        else GtParams()
    ann = fileio.load_annotation(args.ann)
    density = generate_density_map(ann, params)
    _parent(args.out)
    fileio.save_tensor(args.out, density)
    if args.pgm:
        fileio.save_pgm(args.pgm, fileio.density_to_pixels(density))
    print("count: %.6f" % float(density.sum(dtype="float64")))


def cmd_train(args):
    config = _load(Config.load, args.config) if args.config else Config()
    dataset = fileio.load_dataset(args.data)
    model = Model(config)
    log = model.fit(dataset, checkpoint_dir=args.out, progress=args.progress,
                    debug=args.debug)
    if len(log):
        print("final loss: %.6g after %d epochs" % (
            log["mean_loss"].iloc[-1], len(log)))
    else:
        print("no epochs run")


def cmd_eval(args):
    config = _config(args.config, args.ckpt)
    model = Model.load(args.ckpt, config)
    dataset = fileio.load_dataset(args.data)
    report = multi.evaluate(model, dataset, threads=not args.no_threads,
                            progress=args.progress)
    if args.report:
        _parent(args.report)
        utils.write_json(args.report, report.to_dict())
    print("MAE: %.6f  MSE: %.6f  (%d images)" % (
        report.mae, report.mse, report.n_images))
    if "sparsity" in report.extra:
        print("sparsity: %.6f" % report.extra["sparsity"])


def cmd_infer(args):
    config = _config(args.config, args.ckpt)
    model = Model.load(args.ckpt, config)
    image = fileio.load_image(args.image)
    density = model.forward(image)
    _parent(args.out)
    fileio.save_tensor(args.out, density)
    if args.pgm:
        fileio.save_pgm(args.pgm, fileio.density_to_pixels(density))
    if args.features:
        _makedirs(args.features)
        for i, f in enumerate(model.features(image)):
            # channel mean, max-normalised like the density view
            fileio.save_pgm(
                _os.path.join(args.features, "tap%d.pgm" % (i + 1)),
                fileio.density_to_pixels(f.mean(axis=1, keepdims=True)))
    print("count: %.6f" % float(density.sum(dtype="float64")))


def cmd_prune(args):
    config = _config(args.config, args.ckpt)
    model = Model.load(args.ckpt, config)
    report = model.prune(args.criterion, args.fraction)
    _parent(args.out)
    model.save(args.out)
    sidecar = _os.path.join(_os.path.dirname(_os.path.abspath(args.out)),
                            CONFIG_NAME)
    if not _os.path.isfile(sidecar):
        config.save(sidecar)
    path = args.report or _os.path.splitext(args.out)[0] + "_sparsity.json"
    utils.write_json(path, report)
    print("global sparsity: %.6f" % report["global"])


def cmd_flops(args):
    config = _load(Config.load, args.config) if args.config else Config()
    report = Model(config).get_cost(utils.parse_input_size(args.input_size))
    print(utils.render_table(report.layers))
    print()
    print(utils.to_json(report.to_dict()), end="")
    if args.json:
        _parent(args.json)
        utils.write_json(args.json, report.to_dict())


def cmd_ablate(args):
    config = _load(Config.load, args.config) if args.config else Config()
    dataset = fileio.load_dataset(args.data)
    variants = Variants(config)
    _makedirs(args.out)
    variants.fit(dataset, out_dir=args.out, progress=args.progress)
    summary = variants.evaluate(dataset, threads=not args.no_threads)
    for name, report in variants.reports.items():
        utils.write_json(_os.path.join(args.out, name + ".json"),
                         report.to_dict())
    summary.to_csv(_os.path.join(args.out, "summary.csv"), index=False)
    print(utils.render_table(summary))


def build_parser():
    parser = _Parser(prog="asfnet", description="Lightweight crowd counting "
                     "with adjacent feature fusion")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + version.version)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="SynthSpec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--split", default="train")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-gt", help="ground-truth density map")
    p.add_argument("--ann", required=True, help="annotation JSON")
    p.add_argument("--params", help="GtParams JSON (default: built-ins)")
    p.add_argument("--out", required=True, help="output .asft")
    p.add_argument("--pgm", help="optional 8-bit visualisation")
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="config JSON (default: built-ins)")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--debug", action="store_true",
                   help="print the loss of every epoch")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", help="MetricReport JSON")
    p.add_argument("--config", help="default: config.json beside --ckpt")
    p.add_argument("--no-threads", action="store_true")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="density map for one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--image", required=True, help=".pgm or .asft image")
    p.add_argument("--out", required=True, help="output .asft")
    p.add_argument("--pgm", help="optional 8-bit visualisation")
    p.add_argument("--features", metavar="DIR",
                   help="write tap1..tap4.pgm backbone feature views")
    p.add_argument("--config", help="default: config.json beside --ckpt")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("prune", help="magnitude-prune a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--criterion", required=True, choices=CRITERIA)
    p.add_argument("--fraction", required=True, type=float)
    p.add_argument("--out", required=True, help="output .asfc")
    p.add_argument("--report", help="sparsity JSON "
                   "(default: <out>_sparsity.json)")
    p.add_argument("--config", help="default: config.json beside --ckpt")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("flops", help="parameter and FLOP accounting")
    p.add_argument("--config", help="config JSON (default: built-ins)")
    p.add_argument("--input-size", default="3x64x64", help="CxHxW")
    p.add_argument("--json", help="also write the report here")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("ablate", help="pairing / weighting ablation")
    p.add_argument("--config", help="config JSON (default: built-ins)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-threads", action="store_true")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "fraction", None) is not None and \
                not 0 <= args.fraction < 1:
            parser.error("--fraction must be in [0, 1)")
        args.func(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK
    except UsageError as e:
        print(e, file=_sys.stderr)
        return EXIT_USAGE
    except ArgumentError as e:
        print("%sasfnet: error: %s" % (parser.format_usage(), e),
              file=_sys.stderr)
        return EXIT_USAGE
    except DivergenceError as e:
        print("error: %s" % e, file=_sys.stderr)
        if e.checkpoint:
            print("last good checkpoint: %s" % e.checkpoint, file=_sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as e:
        print("error: %s" % e, file=_sys.stderr)
        return EXIT_NUMERIC
    except (AsfnetError, ValueError, OSError) as e:
        print("error: %s" % e, file=_sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    _sys.exit(main())
