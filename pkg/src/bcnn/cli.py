"""Command-line interface: ``bcnn train | eval | predict | gradcheck``.

Exit status: 0 on success, 1 for usage or configuration errors, 2 for data,
integrity or gradient-check failures.
"""

import argparse
import csv
import logging
import sys

import numpy as np

from . import BACKEND
from .data import Sample, load_dataset, load_image
from .errors import BCNNError, ConfigError, IngestionError, IntegrityError
from .evaluation import accuracy, confusion, exact_accuracy, format_prediction, percent, predict
from .gradcheck import check_model
from .modelfile import load_model, save_model
from .network import NetworkSpec, build_model
from .optim import TrainConfig, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

METRICS_FIELDS = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]

log = logging.getLogger("bcnn")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    return h, w


def _filters(text):
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated counts, got {text!r}")
    return a, b


def build_parser():
    defaults = TrainConfig()
    p = _Parser(prog="bcnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model on a folder-per-class dataset")
    t.add_argument("--data", required=True, help="training root with one folder per class")
    t.add_argument("--out", default="model.bcnn", help="model file to write")
    t.add_argument("--metrics", help="per-epoch metrics CSV to write")
    t.add_argument("--epochs", type=int, default=defaults.epochs)
    t.add_argument("--lr", type=float, default=defaults.learning_rate)
    t.add_argument("--batch", type=int, default=defaults.batch_size)
    t.add_argument("--dropout", type=float, default=defaults.dropout_rate)
    t.add_argument("--seed", type=int, default=defaults.seed)
    t.add_argument("--val-frac", type=float, default=defaults.validation_fraction)
    t.add_argument("--n6", type=int, default=NetworkSpec.n6, help="hidden dense width")
    t.add_argument("--size", type=_size, default=None, metavar="HxW",
                   help="input geometry (default 80x100)")
    t.add_argument("--filters", type=_filters, default=None, metavar="A,B",
                   help="feature maps of the two conv layers (default 32,64)")

    e = sub.add_parser("eval", help="confusion matrix and accuracy on a test folder")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True, help="test root with one folder per class")
    e.add_argument("--csv", help="write the confusion counts as CSV")

    pr = sub.add_parser("predict", help="class probabilities for individual images")
    pr.add_argument("--model", required=True)
    pr.add_argument("images", nargs="+")

    g = sub.add_parser("gradcheck", help="compare analytic and numeric gradients")
    g.add_argument("--model", help="model file (default: a fresh small network)")
    g.add_argument("--image", help="image to check on (default: random pixels)")
    g.add_argument("--label", type=int, default=0)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--budget", type=int, default=50, help="coordinates per tensor")
    g.add_argument("--eps", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    return p


def cmd_train(args):
    spec_kwargs = {"n6": args.n6}
    if args.size:
        spec_kwargs["input_shape"] = (3, *args.size)
    if args.filters:
        spec_kwargs["conv1_filters"], spec_kwargs["conv2_filters"] = args.filters
    spec = NetworkSpec(**spec_kwargs)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch,
                      dropout_rate=args.dropout, seed=args.seed,
                      validation_fraction=args.val_frac)
    data = load_dataset(args.data, "train", size=spec.input_shape[1:])
    model = build_model(spec, seed=args.seed)
    print(f"training {model.parameter_count()} parameters on {len(data)} images "
          f"({BACKEND} kernels)")

    metrics_fh = writer = None
    if args.metrics:
        metrics_fh = open(args.metrics, "w", newline="")
        writer = csv.writer(metrics_fh)
        writer.writerow(METRICS_FIELDS)

    def on_epoch(rec):
        print(f"epoch {rec.epoch:3d}  loss {rec.train_loss:.4f}  acc {rec.train_acc:.4f}  "
              f"val_loss {rec.val_loss:.4f}  val_acc {rec.val_acc:.4f}", flush=True)
        if writer:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.train_acc),
                             repr(rec.val_loss), repr(rec.val_acc)])
            metrics_fh.flush()

    try:
        history = fit(model, data, cfg, on_epoch)
    finally:
        if metrics_fh:
            metrics_fh.close()
    save_model(model, args.out)
    if history:
        last = history[-1]
        print(f"final: train acc {percent(last.train_acc)}, val acc {percent(last.val_acc)}, "
              f"train loss {last.train_loss:.4f}, val loss {last.val_loss:.4f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.model)
    test = load_dataset(args.data, "test", size=model.spec.input_shape[1:],
                        class_names=model.class_names)
    cm = confusion(model, test)
    print(cm.format_table())
    frac = exact_accuracy(cm)
    print(f"accuracy: {percent(accuracy(cm), 1)} "
          f"({frac.numerator}/{frac.denominator} = {float(frac):.6f}), "
          f"{cm.errors} misclassified")
    if args.csv:
        cm.write_csv(args.csv)
    return EXIT_OK


def cmd_predict(args):
    model = load_model(args.model)
    ok = 0
    for path in args.images:
        try:
            pixels = load_image(path, model.spec.input_shape[1:])
        except (OSError, ValueError, IngestionError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            continue
        print(path)
        print(format_prediction(predict(model, pixels, path), model.class_names))
        ok += 1
    return EXIT_OK if ok else EXIT_DATA


def cmd_gradcheck(args):
    rng = np.random.default_rng(args.seed)
    if args.model:
        model = load_model(args.model)
    else:
        model = build_model(NetworkSpec.tiny(), seed=args.seed)
    shape = model.spec.input_shape
    if args.image:
        pixels = load_image(args.image, shape[1:])
        if shape[0] != 3:
            raise ConfigError("image checks need a 3-channel model")
    else:
        pixels = rng.random(shape)
    if not 0 <= args.label < model.spec.n_classes:
        raise ConfigError(f"label must lie in 0..{model.spec.n_classes - 1}")
    report = check_model(model, Sample(pixels, args.label), args.tol, args.budget,
                         args.eps, args.seed)
    print(report.format_table())
    return EXIT_OK if report.passed else EXIT_DATA


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (IngestionError, BCNNError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
