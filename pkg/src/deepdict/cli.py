"""Command line interface.

Subcommands: ``train``, ``encode``, ``eval-knn``, ``compare`` and ``info``.
Every option can also come from a ``--config`` file of ``key=value`` lines
whose keys are option names without the leading dashes; options given on
the command line win.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

from deepdict import classify, dataio, deep, persist
from deepdict.exceptions import DeepDictError

logger = logging.getLogger("deepdict")

REQUIRED = {
    "train": ("data", "layers", "out"),
    "encode": ("model", "data", "out"),
    "eval-knn": ("train", "test"),
    "compare": ("data", "test_data", "layers", "shallow"),
    "info": ("path",),
}


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


def _layers(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"layers must be comma-separated integers, got {text!r}")
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError(f"layers must be positive integers, got {text!r}")
    return sizes


def _add_data(p, prefix="", label=""):
    dest = prefix.replace("-", "_")
    p.add_argument(f"--{prefix}data", dest=f"{dest}data", metavar="PATH",
                   help=f"{label}samples (IDX image file or amat file)")
    p.add_argument(f"--{prefix}labels", dest=f"{dest}labels", metavar="PATH",
                   help=f"{label}IDX label file (idx format only)")
    p.add_argument(f"--{prefix}limit", dest=f"{dest}limit", type=int, metavar="N",
                   help=f"use only the first N {label}samples")


def _add_format(p):
    p.add_argument("--format", choices=("idx", "amat"), default=None,
                   help="dataset format (default: guessed from the file name)")


def _add_hyper(p):
    p.add_argument("--layers", type=_layers, help="comma-separated atom counts, e.g. 300,150,50")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="l1 penalty of the sparse layer")
    p.add_argument("--dense-iters", type=int, default=10, help="alternation rounds of dense layers")
    p.add_argument("--sparse-iters", type=int, default=15, help="alternation rounds of the sparse layer")
    p.add_argument("--ista-iters", type=int, default=50, help="ISTA sweeps per coding step")
    p.add_argument("--rel-tol", type=float, default=1e-4, help="early stop of dense layers")
    p.add_argument("--step-safety", type=float, default=1.01, help="ISTA step safety factor")
    p.add_argument("--all-dense", action="store_true", help="make the last layer dense as well")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepdict", description="Greedy deep dictionary learning.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="train a dictionary stack")
    _add_data(p)
    _add_format(p)
    _add_hyper(p)
    p.add_argument("--out", metavar="PATH", help="model file to write")
    p.add_argument("--config", metavar="PATH", help="key=value option file")

    p = sub.add_parser("encode", help="encode samples with a trained model")
    p.add_argument("--model", metavar="PATH")
    _add_data(p)
    _add_format(p)
    p.add_argument("--out", metavar="PATH", help="feature file to write")
    p.add_argument("--config", metavar="PATH", help="key=value option file")

    p = sub.add_parser("eval-knn", help="1-NN accuracy of test features against train features")
    p.add_argument("--train", metavar="PATH", help="training feature file (with labels)")
    p.add_argument("--test", metavar="PATH", help="test feature file (with labels)")
    p.add_argument("--config", metavar="PATH", help="key=value option file")

    p = sub.add_parser("compare", help="deep vs shallow 1-NN accuracy on one dataset")
    _add_data(p)
    _add_data(p, "test-", "test ")
    _add_format(p)
    _add_hyper(p)
    p.add_argument("--shallow", type=int, metavar="N", help="atoms of the shallow baseline")
    p.add_argument("--shallow-kind", choices=deep.KINDS, default=deep.SPARSE,
                   help="learning used for the shallow baseline")
    p.add_argument("--name", help="dataset name in the table (default: file stem)")
    p.add_argument("--out-dir", metavar="DIR", help="write models and features here")
    p.add_argument("--config", metavar="PATH", help="key=value option file")

    p = sub.add_parser("info", help="describe a model or feature file")
    p.add_argument("path", nargs="?", metavar="PATH")
    p.add_argument("--config", metavar="PATH", help="key=value option file")
    return parser


def _read_config(path, subparser) -> dict:
    actions = {a.dest: a for a in subparser._actions}
    aliases = {}
    for a in subparser._actions:
        for opt in a.option_strings:
            aliases[opt.lstrip("-")] = a.dest
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            dest = aliases.get(key, aliases.get(key.replace("_", "-")))
            if dest is None or dest == "config":
                raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
            action = actions[dest]
            if isinstance(action, argparse._StoreTrueAction):
                values[dest] = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                values[dest] = action.type(value)
            else:
                values[dest] = value
    return values


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    if getattr(args, "config", None):
        try:
            defaults = _read_config(args.config, subparser)
        except (OSError, ValueError, argparse.ArgumentTypeError) as exc:
            subparser.error(str(exc))
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    missing = [name for name in REQUIRED[args.command] if getattr(args, name, None) is None]
    if missing:
        subparser.error("missing required option(s): "
                        + ", ".join("--" + m.replace("_", "-") for m in missing))
    return args


def _guess_format(path, fmt):
    if fmt:
        return fmt
    return "amat" if str(path).endswith(".amat") else "idx"


def load_dataset(path, labels_path=None, fmt=None, limit=None):
    """Load ``(X, labels)``; labels may be ``None`` for an unlabelled IDX file."""
    fmt = _guess_format(path, fmt)
    if fmt == "amat":
        X, y = dataio.read_amat(path)
    else:
        X = dataio.read_idx_images(path)
        y = dataio.read_idx_labels(labels_path) if labels_path else None
    if y is not None:
        dataio.check_pairing(X, y)
    if limit is not None:
        X = X[:, :limit]
        y = None if y is None else y[:limit]
    return X, y


def train_config(args, layers=None) -> deep.DeepTrainConfig:
    layers = layers or args.layers
    kinds = [deep.DENSE] * len(layers) if args.all_dense else None
    return deep.DeepTrainConfig(
        layer_sizes=layers,
        outer_iters_dense=args.dense_iters,
        outer_iters_sparse=args.sparse_iters,
        ista_iters=args.ista_iters,
        lam=args.lam,
        rel_tol=args.rel_tol,
        step_safety=args.step_safety,
        kinds=kinds,
    )


def _train(X, cfg):
    report = []
    t0 = time.perf_counter()
    model, Z = deep.train_deep(X, cfg, report=report)
    return model, Z, report, time.perf_counter() - t0


def cmd_train(args) -> int:
    X, _ = load_dataset(args.data, args.labels, args.format, args.limit)
    model, _, report, elapsed = _train(X, train_config(args))
    persist.save_model(model, args.out)
    for row in report:
        print(f"layer {row['layer']}\t{row['kind']}\t{row['n_atoms']}\tobjective {row['objective']:.6e}")
    print(f"training time\t{elapsed:.2f} s")
    return 0


def cmd_encode(args) -> int:
    model = persist.load_model(args.model)
    X, y = load_dataset(args.data, args.labels, args.format, args.limit)
    if X.shape[0] != model.input_dim:
        raise CliError(f"data has {X.shape[0]} dimensions but the model expects {model.input_dim}")
    Z = deep.encode(model, X)
    persist.save_features(Z, args.out, labels=y)
    print(f"wrote {Z.shape[0]}x{Z.shape[1]} features to {args.out}")
    return 0


def cmd_eval_knn(args) -> int:
    F_train, y_train = persist.load_features(args.train)
    F_test, y_test = persist.load_features(args.test)
    if y_train is None or y_test is None:
        raise CliError("both feature files must carry labels")
    if F_train.shape[0] != F_test.shape[0]:
        raise CliError(f"feature dimensions differ: {F_train.shape[0]} vs {F_test.shape[0]}")
    rep = classify.evaluate(F_train, y_train, F_test, y_test)
    print(f"accuracy\t{rep.percent}\t({rep.n_errors} errors in {rep.n_test})")
    return 0


def cmd_compare(args) -> int:
    X, y = load_dataset(args.data, args.labels, args.format, args.limit)
    Xt, yt = load_dataset(args.test_data, args.test_labels, args.format, args.test_limit)
    if y is None or yt is None:
        raise CliError("compare needs labels for both the training and test data")
    if X.shape[0] != Xt.shape[0]:
        raise CliError(f"train data has {X.shape[0]} dimensions, test data {Xt.shape[0]}")

    deep_cfg = train_config(args)
    shallow_cfg = train_config(args, layers=[args.shallow])
    if args.shallow_kind != (deep.DENSE if args.all_dense else deep.SPARSE):
        shallow_cfg = dataclasses.replace(shallow_cfg, kinds=(args.shallow_kind,))
    # fail on bad chains before spending time on training
    deep.check_chain(X.shape[0], X.shape[1], deep_cfg.layer_sizes)
    deep.check_chain(X.shape[0], X.shape[1], shallow_cfg.layer_sizes)

    results = {}
    times = {}
    for tag, cfg in (("deep", deep_cfg), ("shallow", shallow_cfg)):
        model, Z, _, times[tag] = _train(X, cfg)
        Zt = deep.encode(model, Xt)
        results[tag] = classify.evaluate(Z, y, Zt, yt)
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            persist.save_model(model, os.path.join(args.out_dir, f"{tag}.ddl"))
            persist.save_features(Z, os.path.join(args.out_dir, f"{tag}_train.ddf"), labels=y)
            persist.save_features(Zt, os.path.join(args.out_dir, f"{tag}_test.ddf"), labels=yt)

    name = args.name or os.path.splitext(os.path.basename(args.data))[0]
    deep_label = "-".join(str(s) for s in deep_cfg.layer_sizes)
    print(f"dataset\tdeep ({deep_label})\tshallow ({args.shallow})")
    print(f"{name}\t{results['deep'].percent}\t{results['shallow'].percent}")
    print(f"training time\t{times['deep']:.2f} s\t{times['shallow']:.2f} s")
    return 0


def cmd_info(args) -> int:
    header = persist.read_header(args.path)
    kind = header.get("type")
    if kind == "model":
        model = persist.load_model(args.path)
        chain = "-".join(str(s) for s in [model.input_dim] + model.layer_sizes)
        print("type\tmodel")
        print(f"chain\t{chain}")
        print(f"kinds\t{','.join(model.kinds)}")
        print(f"lambda\t{model.lam!r}")
        print(f"ista_iters\t{model.ista_iters}")
        if model.config:
            print(f"config\t{json.dumps(model.config, sort_keys=True)}")
    elif kind == "features":
        F, y = persist.load_features(args.path)
        print("type\tfeatures")
        print(f"shape\t{F.shape[0]}x{F.shape[1]}")
        print(f"labels\t{'yes' if y is not None else 'no'}")
    else:
        raise CliError(f"{args.path}: unknown content type {kind!r}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "eval-knn": cmd_eval_knn,
    "compare": cmd_compare,
    "info": cmd_info,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (DeepDictError, CliError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
