"""Command-line entry point.

Subcommands cover the whole experiment path: phantom generation, corruption,
training, reconstruction, evaluation, and parameter accounting. Exit codes:
0 success, 2 configuration problem, 3 data problem, 4 numeric failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from ..errors import ConfigError, DataError, NumericError, ShapeError
from ..fourier import FREQUENCY, IMAGE, ComplexField
from ..models import count_trainable_params, load_checkpoint, model_forward
from ..tensor import Tensor, no_grad
from . import report
from .config import (
    CorruptionSpec,
    corruption_from_dict,
    load_train_config,
    train_config_to_dict,
)
from .data import (
    IMAGE_EXT,
    KSPACE_EXT,
    list_field_files,
    load_field,
    save_field,
    save_magnitude_png,
)
from .phantoms import PhantomSpec, generate_phantoms
from .train import evaluate, make_training_pair, train


def _cmd_phantom(args):
    spec = PhantomSpec(
        count=args.count, size=args.size,
        ellipses=tuple(args.ellipses), intensity=tuple(args.intensity),
        smoothness=args.smoothness, seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    fields = generate_phantoms(spec)
    for i in range(spec.count):
        sample = ComplexField(Tensor(fields.tensor.data[i:i + 1]), IMAGE)
        stem = os.path.join(args.out, f"phantom_{i:05d}")
        save_field(stem + IMAGE_EXT, sample)
        if args.png:
            save_magnitude_png(stem + ".png", sample, bits=args.png_bits)
    print(f"wrote {spec.count} phantoms to {args.out}")
    return 0


def _load_corruption(path):
    if path is None:
        return CorruptionSpec()
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read corruption config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return corruption_from_dict(doc)


def _input_files(paths, exts):
    out = []
    for p in paths:
        if os.path.isdir(p):
            hits = []
            for ext in exts:
                try:
                    hits.extend(list_field_files(p, ext))
                except DataError:
                    pass
            if not hits:
                raise DataError(f"no field files under {p}")
            out.extend(sorted(hits))
        else:
            out.append(p)
    return out


def _cmd_corrupt(args):
    spec = _load_corruption(args.config)
    files = _input_files(args.inputs, (IMAGE_EXT, KSPACE_EXT))
    os.makedirs(args.out, exist_ok=True)
    for i, path in enumerate(files):
        field = load_field(path)
        image = field.to_image() if field.domain == FREQUENCY else field
        corrupted, target = make_training_pair(image, spec, args.seed + i)
        stem = os.path.join(args.out, os.path.splitext(os.path.basename(path))[0])
        save_field(stem + KSPACE_EXT, corrupted)
        save_field(stem + "_target" + IMAGE_EXT, target)
        if args.png:
            save_magnitude_png(stem + "_zerofill.png", corrupted.to_image())
    print(f"corrupted {len(files)} files into {args.out}")
    return 0


def _cmd_train(args):
    cfg = load_train_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.json"), "w") as fh:
        json.dump(train_config_to_dict(cfg), fh, indent=2)
    log = None if args.quiet else print
    model, history = train(cfg, out_dir=args.out, log=log)
    report.render_loss_curves(
        history, os.path.join(args.out, "loss.png"),
        title=f"{cfg.architecture}, {cfg.loss.kind}",
    )
    last = history[-1]
    print(
        f"done: {len(history)} epochs, train {last['train_loss']:.6f}, "
        f"val {last['val_loss']:.6f}; outputs in {args.out}"
    )
    return 0


def _cmd_reconstruct(args):
    model = load_checkpoint(args.checkpoint)
    files = _input_files(args.inputs, (KSPACE_EXT,))
    os.makedirs(args.out, exist_ok=True)
    with no_grad():
        for path in files:
            field = load_field(path)
            if field.domain != FREQUENCY:
                raise DataError(f"{path} is not k-space data")
            zf = field.to_image()
            peak = float(
                np.hypot(zf.tensor.data[..., 0::2], zf.tensor.data[..., 1::2]).max()
            )
            if peak == 0:
                raise DataError(f"{path} holds an identically zero field")
            scaled = ComplexField(Tensor(field.tensor.data / peak), FREQUENCY)
            out = model_forward(model, scaled, mode="eval")
            img = out.to_image()
            stem = os.path.join(args.out, os.path.splitext(os.path.basename(path))[0])
            save_field(stem + "_recon" + IMAGE_EXT, img)
            save_magnitude_png(stem + "_recon.png", img, bits=args.png_bits)
            report.render_reconstruction(
                [("zero-filled", zf), ("reconstruction", img)],
                stem + "_panel.png",
            )
    print(f"reconstructed {len(files)} files into {args.out}")
    return 0


def _cmd_evaluate(args):
    cfg = load_train_config(args.config)
    model = load_checkpoint(args.checkpoint)
    metrics = tuple(args.metrics.split(",")) if args.metrics else None
    kwargs = {"metrics": metrics} if metrics else {}
    rows = evaluate(model, cfg, split=args.split, **kwargs)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    report.write_metrics_csv(csv_path, rows)
    report.render_metric_panel(
        rows, os.path.join(args.out, "metrics.png"),
        title=f"{model.config.architecture} on {args.split}",
    )
    for r in rows:
        if r["sample_id"] == "median":
            print(f"median {r['metric']}: {r['value']:.6g}")
    print(f"wrote {csv_path}")
    return 0


def _cmd_params(args):
    if args.config:
        cfg = load_train_config(args.config).model_config()
    else:
        from ..models import ModelConfig, default_layers

        layers = args.layers if args.layers is not None else default_layers(args.architecture)
        cfg = ModelConfig(
            architecture=args.architecture, layers=layers,
            kernel=args.kernel, features=args.features,
        )
    from ..models import build_model

    model = build_model(cfg, seed=0)
    rows = [(p.name, "x".join(map(str, p.tensor.shape)), p.tensor.data.size)
            for p in model.parameters() if p.trainable]
    width = max(len(r[0]) for r in rows)
    for name, shape, size in rows:
        print(f"{name:<{width}}  {shape:>14}  {size:>9}")
    print(f"total trainable parameters: {count_trainable_params(model)}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="jointrec",
        description="Joint frequency/image convolutional reconstruction toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic phantom dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ellipses", type=int, nargs=2, default=(4, 9), metavar=("LO", "HI"))
    p.add_argument("--intensity", type=float, nargs=2, default=(0.3, 1.0), metavar=("LO", "HI"))
    p.add_argument("--smoothness", type=float, default=1.5)
    p.add_argument("--png", action="store_true", help="also write magnitude previews")
    p.add_argument("--png-bits", type=int, default=8, choices=(8, 16))
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("corrupt", help="corrupt clean data into normalized training pairs")
    p.add_argument("inputs", nargs="+", help="field files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON corruption spec (undersample/motion/noise)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--png", action="store_true", help="also write zero-filled previews")
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reconstruct", help="run a checkpoint on k-space files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--png-bits", type=int, default=8, choices=(8, 16))
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="metric sweep of a checkpoint over config data")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="val", choices=("val", "train", "all"))
    p.add_argument("--metrics", help="comma-separated subset of the metric names")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("params", help="parameter count and breakdown")
    p.add_argument("--architecture", default="interleaved")
    p.add_argument("--layers", type=int)
    p.add_argument("--kernel", type=int, default=9)
    p.add_argument("--features", type=int, default=32)
    p.add_argument("--config", help="take the model settings from a training config")
    p.set_defaults(func=_cmd_params)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
