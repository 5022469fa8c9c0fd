"""Command line entry point: ``ssdetect <verb> ...``.

Verbs: extract, train, score, fuse, eval, simulate. Every verb accepts
``--config``, ``--seed`` and ``--out``. Errors print one ``error:`` line to
stderr and exit with the error's code (see ``ssdetect.errors``).
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import read_config, with_seed
from .errors import ConfigError, SSDError

EXIT_USAGE = 2


def _common(p: argparse.ArgumentParser, out_help: str, out_required: bool = True):
    p.add_argument("--config", help="flat key = value config file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=out_required, help=out_help)


def _list(text):
    return tuple(t for t in (text or "").replace(",", " ").split() if t)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssdetect",
                                 description="Group-wise GMM synthetic speech detection.")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("extract", help="audio manifest -> MFCC feature files")
    p.add_argument("manifest")
    _common(p, "output directory (feats/ and features.lst)")

    p = sub.add_parser("train", help="train natural and synthetic GMMs")
    p.add_argument("manifest")
    _common(p, "output model directory")

    p = sub.add_parser("score", help="group score vectors for a manifest")
    p.add_argument("manifest")
    p.add_argument("--models", required=True, help="directory written by 'train'")
    p.add_argument("--scheme", help="comma separated: baseline, class, phoneme, gaussian")
    p.add_argument("--weighted", action="store_true", default=None,
                   help="apply duration weighting ln(N_j + 1)")
    p.add_argument("--variant", choices=("adapt", "noadapt"), help="synthetic model variant")
    _common(p, "output directory, one <scheme>[_dw].scores file per scheme")

    p = sub.add_parser("fuse", help="train or apply a logistic fusion model")
    p.add_argument("inputs", nargs="+",
                   help="one SSDSCORES file (first stage) or several trial files (second stage)")
    p.add_argument("--apply", metavar="MODEL", help="apply this fusion model instead of training")
    p.add_argument("--manifest", help="manifest giving attack ids (and held-out attacks)")
    p.add_argument("--prior", type=float, help="override fusion_prior")
    p.add_argument("--names", help="comma separated input names for a second-stage model")
    _common(p, "fusion model file (train) or trial file (apply)")

    p = sub.add_parser("eval", help="per-attack EER report")
    p.add_argument("trials", nargs="+", help="trial files (or single-group score files)")
    p.add_argument("--known", help="comma separated known attack ids (default: all)")
    p.add_argument("--names", help="comma separated column names")
    p.add_argument("--manifest", help="manifest giving attack ids for score-file inputs")
    _common(p, "report file (stdout when omitted)", out_required=False)

    p = sub.add_parser("simulate", help="write a simulated natural/spoofed corpus")
    p.add_argument("--attacks", help="comma separated attack kinds to include")
    _common(p, "output corpus directory")
    return ap


def run(args) -> int:
    overrides = {}
    if getattr(args, "prior", None) is not None:
        overrides["fusion_prior"] = args.prior
    if getattr(args, "variant", None):
        overrides["variant"] = args.variant
    if getattr(args, "attacks", None):
        overrides["attacks"] = _list(args.attacks)
    cfg = with_seed(read_config(args.config, **overrides), args.seed)

    if args.verb == "extract":
        print(pipeline.cmd_extract(args.manifest, args.out, cfg))
    elif args.verb == "train":
        for path in pipeline.cmd_train(args.manifest, args.out, cfg).values():
            print(path)
    elif args.verb == "score":
        schemes = _list(args.scheme) or None
        paths = pipeline.cmd_score(args.manifest, args.models, args.out, cfg, schemes,
                                   args.weighted)
        for path in paths.values():
            print(path)
    elif args.verb == "fuse":
        names = _list(args.names) or None
        if args.apply:
            pipeline.cmd_fuse_apply(args.apply, args.inputs, args.out, args.manifest)
        else:
            pipeline.cmd_fuse_train(args.inputs, args.out, cfg, args.manifest, names)
        print(args.out)
    elif args.verb == "eval":
        known = _list(args.known) if args.known is not None else None
        names = _list(args.names) or None
        if names and len(names) != len(args.trials):
            raise ConfigError("--names must give one name per trial file")
        text = pipeline.cmd_eval(args.trials, known, args.out, names, args.manifest)
        if not args.out:
            sys.stdout.write(text)
    elif args.verb == "simulate":
        for path in pipeline.cmd_simulate(args.out, cfg).values():
            print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except SSDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
