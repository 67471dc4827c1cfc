"""Command-line interface.

Exit status: 0 on success, 1 on runtime or check failure, 2 on usage error.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import model as M
from .checkpoint import load_checkpoint, save_checkpoint
from .data import SplitSpec, generate_synthetic, load_manifest, preprocess, read_pgm, split, write_dataset
from .exceptions import ConfigError, SmallCNNError
from .metrics import DEFAULT_THRESHOLD, classify, confusion
from .optim import HyperParams
from .training import TrainConfig, evaluate, train

log = logging.getLogger("smallcnn")

GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_SEEDS = 10
SUMMARY_COLUMNS = ("model", "train_acc", "val_acc", "train_loss", "val_loss", "notes")

# The four configurations compared in the experiment: (name, optimizer,
# first-layer activation, uses zoom augmentation, note).
EXPERIMENT_MODELS = (
    ("Model1", "rmsprop", "relu", False, ""),
    ("Model2", "adam", "relu", False, ""),
    ("Model3", "adam", "leaky_relu", False, "LeakyRelu in 1st layer"),
    ("Model4", "adam", "relu", True, "random zoom augmentation"),
)


class UsageError(Exception):
    pass


# -- argument types --------------------------------------------------------------

def _number(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}") from None
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{value} is below the allowed range")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"{value} is above the allowed range")
        return value
    return parse


seed_type = _number(int, 0, 2 ** 64 - 1)
positive_int = _number(int, 1)
positive_float = _number(float, 0.0, lo_open=True)
unit_open = _number(float, 0.0, 1.0, lo_open=True, hi_open=True)
zoom_type = _number(float, 0.0, 1.0, hi_open=True)
decay_type = _number(float, 0.0, 1.0, hi_open=True)


def _activation(text):
    name = text.replace("-", "_")
    if name not in ("relu", "leaky_relu"):
        raise argparse.ArgumentTypeError(f"expected relu or leaky-relu, got {text!r}")
    return name


def _add_training_flags(p, zoom_default):
    p.add_argument("--epochs", type=positive_int, default=50)
    p.add_argument("--batch-size", type=positive_int, default=16)
    p.add_argument("--lr", type=positive_float, default=0.001, help="learning rate")
    p.add_argument("--beta1", type=decay_type, default=0.9)
    p.add_argument("--beta2", type=decay_type, default=0.999)
    p.add_argument("--rho", type=decay_type, default=0.9, help="RMSProp decay rate")
    p.add_argument("--epsilon", type=positive_float, default=1e-8)
    p.add_argument("--leaky-slope", type=unit_open, default=M.DEFAULT_LEAKY_SLOPE)
    p.add_argument("--zoom", type=zoom_type, default=zoom_default)
    p.add_argument("--threshold", type=unit_open, default=DEFAULT_THRESHOLD)
    p.add_argument("--train-fraction", type=unit_open, default=0.7)
    p.add_argument("--train-size", type=positive_int, default=None,
                   help="exact number of training samples (overrides --train-fraction)")


def build_parser():
    parser = argparse.ArgumentParser(prog="smallcnn", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress per-epoch progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic two-class PGM dataset and manifest")
    p.add_argument("--n-per-class", type=positive_int, default=325)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train one model and save checkpoint + metrics CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--optimizer", choices=("adam", "rmsprop"), default="adam")
    p.add_argument("--first-activation", type=_activation, default="relu")
    _add_training_flags(p, zoom_default=0.0)

    p = sub.add_parser("experiment", help="train the four comparison models on one split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--out", required=True)
    _add_training_flags(p, zoom_default=0.2)

    p = sub.add_parser("eval", help="loss, accuracy and confusion matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--predictions", help="CSV of 'prediction,label' lines to score directly")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=unit_open, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="directory for confusion.csv")

    p = sub.add_parser("predict", help="probability and label for individual images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--threshold", type=unit_open, default=DEFAULT_THRESHOLD)
    p.add_argument("images", nargs="+")

    p = sub.add_parser("gradcheck", help="compare backprop against finite differences")
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--first-activation", type=_activation, default="relu")
    p.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    return parser


# -- commands ----------------------------------------------------------------------

def _hyper(args):
    return HyperParams(args.lr, args.beta1, args.beta2, args.rho, args.epsilon)


def _split(args):
    dataset = load_manifest(args.manifest)
    spec = SplitSpec(train_fraction=args.train_fraction, seed=args.seed, train_size=args.train_size)
    return split(dataset, spec)


def _fmt(value):
    return "" if value != value else repr(float(value))


def cmd_synth(args):
    dataset = generate_synthetic(args.n_per_class, args.seed)
    manifest = write_dataset(dataset, args.out)
    neg, pos = dataset.class_counts
    print(f"wrote {len(dataset)} images to {args.out} (class 0: {neg}, class 1: {pos})")
    print(f"manifest: {manifest}")
    return 0


def _run(config, train_set, val_set, out_dir, stem):
    model, history = train(config, train_set, val_set)
    os.makedirs(out_dir, exist_ok=True)
    history.write_csv(os.path.join(out_dir, f"{stem}.csv"))
    save_checkpoint(model, os.path.join(out_dir, f"{stem}.scnv"), seed=config.seed,
                    epochs=len(history), config=config.to_dict())
    return model, history


def cmd_train(args):
    config = TrainConfig(
        optimizer=args.optimizer, first_layer_activation=args.first_activation,
        leaky_slope=args.leaky_slope, zoom_range=args.zoom, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed, hyper=_hyper(args), threshold=args.threshold,
    )
    train_set, val_set = _split(args)
    log.info("training on %d samples, validating on %d", len(train_set), len(val_set))
    _, history = _run(config, train_set, val_set, args.out, "metrics")
    r = history.final
    print(f"epoch {r.epoch}: train_loss={r.train_loss:.6g} train_acc={r.train_accuracy:.4f} "
          f"val_loss={r.val_loss:.6g} val_acc={r.val_accuracy:.4f}")
    print(f"checkpoint: {os.path.join(args.out, 'metrics.scnv')}")
    return 0


def experiment_configs(args):
    configs = []
    for name, opt, act, zoomed, note in EXPERIMENT_MODELS:
        config = TrainConfig(
            optimizer=opt, first_layer_activation=act, leaky_slope=args.leaky_slope,
            zoom_range=args.zoom if zoomed else 0.0, epochs=args.epochs,
            batch_size=args.batch_size, seed=args.seed, hyper=_hyper(args), threshold=args.threshold,
        )
        configs.append((name, config, note))
    return configs


def cmd_experiment(args):
    configs = experiment_configs(args)
    train_set, val_set = _split(args)
    log.info("experiment: %d training / %d validation samples", len(train_set), len(val_set))
    rows = []
    for name, config, note in configs:
        log.info("%s: optimizer=%s first_activation=%s zoom=%g", name, config.optimizer,
                 config.first_layer_activation, config.zoom_range)
        try:
            _, history = _run(config, train_set, val_set, args.out, name.lower())
        except Exception as exc:
            raise SmallCNNError(f"{name} failed: {exc}") from exc
        r = history.final
        rows.append((name, _fmt(r.train_accuracy), _fmt(r.val_accuracy), _fmt(r.train_loss),
                     _fmt(r.val_loss), note))
    summary = os.path.join(args.out, "summary.csv")
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerows(rows)
    print(f"{'model':8s} {'train_acc':>9s} {'val_acc':>9s} {'train_loss':>11s} {'val_loss':>11s}  notes")
    for name, tra, vaa, trl, val, note in rows:
        print(f"{name:8s} {float(tra):9.4f} {float(vaa or 'nan'):9.4f} {float(trl):11.4g} "
              f"{float(val or 'nan'):11.4g}  {note}")
    print(f"summary: {summary}")
    return 0


def confusion_report(cm, loss=None):
    lines = []
    if loss is not None:
        lines.append(f"loss: {loss:.6g}")
    lines.append(f"accuracy: {cm.accuracy():.10g}")
    lines.append(f"total: {cm.total}")
    lines.append("confusion matrix (rows actual, columns predicted):")
    lines.append(cm.format_table())
    return "\n".join(lines)


def _read_predictions(path):
    preds, labels = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (lineno == 1 and [c.strip() for c in row] == ["prediction", "label"]):
                continue
            if len(row) != 2 or row[0].strip() not in ("0", "1") or row[1].strip() not in ("0", "1"):
                raise SmallCNNError(f"{path} line {lineno}: expected 'prediction,label' with 0/1 values")
            preds.append(int(row[0]))
            labels.append(int(row[1]))
    return preds, labels


def cmd_eval(args):
    loss = None
    if args.predictions:
        cm = confusion(*_read_predictions(args.predictions))
    else:
        if not args.manifest:
            raise UsageError("--manifest is required with --checkpoint")
        model = load_checkpoint(args.checkpoint)
        result = evaluate(model, load_manifest(args.manifest, size=model.input_shape[:2]), args.threshold)
        loss, cm = result.loss, result.confusion
    print(confusion_report(cm, loss))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "confusion.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(cm.to_csv())
        print(f"confusion csv: {path}")
    return 0


def cmd_predict(args):
    model = load_checkpoint(args.checkpoint)
    failures = 0
    for path in args.images:
        try:
            image = preprocess(read_pgm(path), model.input_shape[:2])
        except (OSError, SmallCNNError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        p, _ = M.model_forward(model, image)
        print(f"{path}, {p:.6f}, {classify(p, args.threshold)}")
    return 1 if failures else 0


def gradcheck_run(seed=0, first_activation="relu", n_seeds=GRADCHECK_SEEDS, inject_bug=False):
    """Worst relative error per parameter tensor over ``n_seeds`` reduced models."""
    from .metrics import bce_grad

    worst = {}
    for s in range(seed, seed + n_seeds):
        rng = np.random.default_rng(s)
        model = M.build_model(M.reduced_architecture(first_activation), (8, 8, 1), rng)
        image = rng.uniform(0.0, 1.0, size=(8, 8, 1))
        label = int(rng.integers(0, 2))
        grads = None
        if inject_bug:
            p, cache = M.model_forward(model, image)
            grads = M.model_backward(model, cache, bce_grad(p, label))
            name = next(n for n in grads if n.endswith(".weight"))
            grads[name] = grads[name].copy()
            flat = grads[name].reshape(-1)
            flat[np.argmax(np.abs(flat))] *= 2.0
        for name, err in M.grad_check_report(model, image, label, grads=grads).items():
            worst[name] = max(worst.get(name, 0.0), err)
    return worst


def cmd_gradcheck(args):
    worst = gradcheck_run(args.seed, args.first_activation, inject_bug=args.inject_bug)
    for name, err in worst.items():
        print(f"{name:16s} {err:.3e}")
    overall = max(worst.values())
    ok = overall <= GRADCHECK_TOLERANCE
    print(f"max relative error over {GRADCHECK_SEEDS} seeds: {overall:.3e} "
          f"({'ok' if ok else 'FAIL'}, tolerance {GRADCHECK_TOLERANCE:g})")
    return 0 if ok else 1


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "experiment": cmd_experiment,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"smallcnn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SmallCNNError, OSError) as exc:
        print(f"smallcnn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
