"""Command-line interface.

Subcommands cover the whole downstream pipeline: ``fixtures`` writes a
synthetic two-class dataset, ``train`` fits the head on stack files,
``score`` applies a checkpoint, ``fuse`` merges two score files,
``eval`` turns scores plus a manifest into EER reports, and ``weights``
dumps per-utterance layer gate activations.

Conventions: diagnostics go to stderr, data goes to the paths named by
flags (``-`` means stdout where noted).  Exit codes: 0 success, 1 usage
errors, 2 data errors (malformed or missing files), 3 numeric failures
during training.  Given identical inputs and seeds, every output file
is byte-identical across runs and platforms.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .ensemble import fuse_entries, read_scores, write_scores, ScoreEntry
from .errors import DataError, NumericError, UsageError
from .evalmetrics import breakdown, join_scores, render_report, write_report_csv
from .featstore import (
    FixtureSpec,
    Manifest,
    StackDirectory,
    read_manifest,
    synth_fixture,
    write_manifest,
)
from .rng import derive
from .slshead import layer_weights, load_params, save_params, write_layer_weight_csv
from .trainer import TrainConfig, load_config, train, write_history_csv

log = logging.getLogger("slskit")


class _Parser(argparse.ArgumentParser):
    # route argparse's own complaints through the usual exit-1 path
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _write_text(destination: str, text: str) -> None:
    if destination == "-":
        sys.stdout.write(text)
    else:
        Path(destination).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# fixtures


def cmd_fixtures(args) -> int:
    out_dir = Path(args.out)
    features = out_dir / "features"
    common = dict(
        layers=args.layers,
        frames=args.frames,
        feature_dim=args.dim,
        class_separation=args.delta,
        signal_dims=args.signal_dims,
    )
    # distinct child seeds so train and dev never share noise draws
    train_spec = FixtureSpec(
        count_per_class=args.train_per_class,
        seed=derive(args.seed, 0),
        id_prefix="trn",
        **common,
    )
    train_manifest = synth_fixture(train_spec, features)
    write_manifest(train_manifest, out_dir / "train.tsv")
    n_files = 2 * args.train_per_class
    if args.dev_per_class > 0:
        dev_spec = FixtureSpec(
            count_per_class=args.dev_per_class,
            seed=derive(args.seed, 1),
            id_prefix="dev",
            **common,
        )
        dev_manifest = synth_fixture(dev_spec, features)
        write_manifest(dev_manifest, out_dir / "dev.tsv")
        n_files += 2 * args.dev_per_class
    _write_fixture_readme(out_dir / "README.txt", args, train_spec)
    log.info("wrote %d stack files under %s", n_files, features)
    return 0


def _write_fixture_readme(path: Path, args, spec: FixtureSpec) -> None:
    lines = [
        "Synthetic two-class fixture for the layer-gating pipeline.",
        "",
        f"stacks: L={args.layers} layers, N={args.frames} frames, D={args.dim} dims",
        f"class separation: {args.delta} on the first {spec.effective_signal_dims} feature dims",
        "noise: uniform on [-sqrt(3), sqrt(3)), unit variance",
        f"seed: {args.seed} (train stream 0, dev stream 1; one child seed per utterance)",
        f"train: {args.train_per_class} per class, ids trn_*",
        f"dev: {args.dev_per_class} per class, ids dev_*",
        "",
        "Rerunning the fixtures command with these parameters reproduces",
        "every file byte for byte.",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# train


_HYPER_FLOAT = ("learning_rate", "weight_decay", "eta_min", "focal_gamma", "focal_alpha")
_HYPER_INT = ("t_max", "batch_size", "epochs", "seed")


def cmd_train(args) -> int:
    config = TrainConfig()
    if args.config is not None:
        config = load_config(args.config, base=config)
    overrides = {
        name: getattr(args, name)
        for name in _HYPER_FLOAT + _HYPER_INT
        if getattr(args, name) is not None
    }
    if overrides:
        config = replace(config, **overrides)
    config.validate()

    train_manifest = read_manifest(args.train_manifest)
    features = StackDirectory(args.features)
    dev_manifest = None
    dev_features = None
    if args.dev_manifest is not None:
        dev_manifest = read_manifest(args.dev_manifest)
        dev_features = StackDirectory(args.dev_features or args.features)

    def progress(stats):
        dev = "-" if stats.dev_eer is None else f"{stats.dev_eer:.4f}"
        log.info(
            "epoch %d/%d lr=%.3g loss=%.6f train_eer=%.4f dev_eer=%s",
            stats.epoch, config.epochs, stats.lr, stats.mean_loss, stats.train_eer, dev,
        )

    result = train(
        train_manifest,
        features,
        config,
        dev_manifest=dev_manifest,
        dev_features=dev_features,
        progress=progress,
    )
    save_params(result.params, args.out)
    history_path = args.history if args.history is not None else f"{args.out}.history.csv"
    write_history_csv(history_path, result.history)
    log.info("kept epoch %d; checkpoint %s, history %s", result.best_epoch, args.out, history_path)
    return 0


# ---------------------------------------------------------------------------
# score / fuse / weights


def cmd_score(args) -> int:
    manifest = read_manifest(args.manifest)
    params = load_params(args.checkpoint)
    features = StackDirectory(args.features)
    from .slshead import score_stack

    entries = [
        ScoreEntry(record.utterance_id, score_stack(features.load(record.utterance_id), params))
        for record in manifest
    ]
    if args.out == "-":
        write_scores(sys.stdout, entries)
    else:
        write_scores(args.out, entries)
    return 0


def cmd_fuse(args) -> int:
    fused = fuse_entries(read_scores(args.scores_x), read_scores(args.scores_w))
    if args.out == "-":
        write_scores(sys.stdout, fused)
    else:
        write_scores(args.out, fused)
    return 0


def cmd_weights(args) -> int:
    manifest = read_manifest(args.manifest)
    params = load_params(args.checkpoint)
    features = StackDirectory(args.features)
    rows = (
        (record.utterance_id, layer_weights(features.load(record.utterance_id), params))
        for record in manifest
    )
    if args.out == "-":
        write_layer_weight_csv(sys.stdout, rows)
    else:
        write_layer_weight_csv(args.out, rows)
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    entries = read_scores(args.scores)
    manifest = read_manifest(args.manifest)
    trials = join_scores(entries, manifest)
    cells = []
    if args.per_attack:
        cells.extend(breakdown(trials, "per_attack"))
    if args.per_origin:
        cells.extend(breakdown(trials, "per_origin"))
    cells.extend(breakdown(trials, "overall"))
    if args.exclude_origin is not None:
        cells.extend(breakdown(trials, "exclude_origin", origin=args.exclude_origin))
    report = render_report([(name, None if r is None else r.eer) for name, r in cells])
    _write_text(args.out, report)
    if args.csv is not None:
        write_report_csv(args.csv, cells)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="slskit",
        description="Layer-gating head over frozen backbone features: "
        "fixtures, training, scoring, fusion, and EER reports.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fixtures", help="write a synthetic two-class dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-per-class", type=int, default=200)
    p.add_argument("--dev-per-class", type=int, default=100, help="0 disables the dev split")
    p.add_argument("--delta", type=float, default=4.0, help="class mean separation")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--signal-dims", type=int, default=None,
                   help="feature dims carrying the separation (default: half)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("train", help="fit the head on stack files")
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--features", required=True, help="directory of <id>.hstk files")
    p.add_argument("--dev-manifest")
    p.add_argument("--dev-features", help="defaults to --features")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--config", help="key = value hyper-parameter file")
    for name in _HYPER_FLOAT:
        p.add_argument(f"--{name.replace('_', '-')}", type=float, default=None, dest=name)
    for name in _HYPER_INT:
        p.add_argument(f"--{name.replace('_', '-')}", type=int, default=None, dest=name)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a manifest with a checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="score TSV path, - for stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fuse", help="max-magnitude fusion of two score files")
    p.add_argument("scores_x", help="first score file (wins ties)")
    p.add_argument("scores_w", help="second score file")
    p.add_argument("--out", required=True, help="fused TSV path, - for stdout")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="EER report from scores plus a manifest")
    p.add_argument("--scores", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--per-attack", action="store_true", help="one column per attack tag")
    p.add_argument("--per-origin", action="store_true", help="one column per origin")
    p.add_argument("--exclude-origin", metavar="ORIGIN",
                   help="add a leave-origin-out column")
    p.add_argument("--out", default="-", help="report path, - for stdout (default)")
    p.add_argument("--csv", help="full-precision CSV twin")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("weights", help="per-utterance layer gate activations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="CSV path, - for stdout")
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"slskit: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return int(args.func(args) or 0)
    except UsageError as exc:
        log.error("error: %s", exc)
        return 1
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return 3
    except (DataError, OSError) as exc:
        log.error("error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
