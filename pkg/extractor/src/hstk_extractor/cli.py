"""hstk-extract: dump backbone hidden states, or prove the run is stable.

Exit codes: 0 success, 1 usage, 2 bad input data, 3 backbone failure.
Logs go to standard error; data goes only to the flagged paths.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .backbones import REGISTRY, backbone_spec, load_backbone
from .errors import AudioError, BackboneError, FormatError, UsageError
from .pipeline import extract_files, read_id_list, selfcheck

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _model_flags(parser):
    parser.add_argument("--model", required=True, choices=sorted(REGISTRY))
    parser.add_argument("--checkpoint", help="local checkpoint path (default: the hub id)")
    parser.add_argument("--random-init", action="store_true",
                        help="seeded random weights instead of a checkpoint (offline runs)")
    parser.add_argument("--drop-embedding", action="store_true",
                        help="omit hidden-state entry 0 (the pre-transformer embedding)")
    parser.add_argument("--device", default="cpu")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hstk-extract",
                     description="hidden-state extraction for anti-spoofing features")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write one .hstk file per utterance id")
    _model_flags(p)
    p.add_argument("--audio-dir", required=True, help="directory of <id>.wav files")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ids", required=True, help="text file, one utterance id per line")
    p.add_argument("--train-crop", action="store_true",
                   help="random 4 s crop per file (default: crop from offset 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest-out",
                   help="skeleton TSV path (default: <out-dir>/manifest_skeleton.tsv)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("selfcheck", help="run a fixed tone twice and report L/N/D")
    _model_flags(p)
    p.add_argument("--expect-layers", type=int, default=None,
                   help="override the expected hidden-state entry count")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def cmd_extract(args) -> int:
    ids = read_id_list(args.ids)
    spec = backbone_spec(args.model, args.device)
    model = load_backbone(spec, checkpoint=args.checkpoint, random_init=args.random_init)
    written = extract_files(
        ids, args.audio_dir, args.out_dir, spec, model,
        seed=args.seed, train_crop=args.train_crop,
        drop_embedding=args.drop_embedding, manifest_out=args.manifest_out,
    )
    log.info("extracted %d utterances", len(written))
    return 0


def cmd_selfcheck(args) -> int:
    spec = backbone_spec(args.model, args.device)
    model = load_backbone(spec, checkpoint=args.checkpoint, random_init=args.random_init)
    report = selfcheck(spec, model, drop_embedding=args.drop_embedding,
                       expect_layers=args.expect_layers)
    sys.stdout.write(f"model={args.model} " + report.render())
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        log.error("error: %s", exc)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("error: %s", exc)
        return 1
    except (AudioError, FormatError, OSError) as exc:
        log.error("error: %s", exc)
        return 2
    except BackboneError as exc:
        log.error("error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
