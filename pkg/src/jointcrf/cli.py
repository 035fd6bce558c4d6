"""Command-line front end: build-space, train, tag, complete, eval.

Exit codes: 0 success, 2 usage problems (bad flags, missing files, corpora
unsuitable for the subcommand), 3 data errors (malformed corpora, infeasible
constraints). Set JCRF_LOG=DEBUG|INFO|WARNING to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import conll_io
from .errors import CorpusParseError, DataError, JointCrfError
from .evaluation import decode_corpus, evaluate_tag_pairs
from .labels import (build_label_space, derive_cooccurrence_filter,
                     load_cooccurrence_filter, load_inventories,
                     write_cooccurrence_filter)
from .model import load_model, save_model
from .semlink import load_semlink
from .training import REGIMES, TrainConfig, train

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _configure_logging() -> None:
    level_name = os.environ.get("JCRF_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _existing(path: str | None, flag: str) -> str:
    if path is None:
        raise UsageError(f"missing required flag {flag}")
    if not Path(path).exists():
        raise UsageError(f"{flag}: no such file {path!r}")
    return path


def _load_space(inventory_path: str, cooccurrence_path: str | None):
    vn_inv, pb_inv = load_inventories(inventory_path)
    filt = load_cooccurrence_filter(cooccurrence_path) if cooccurrence_path else set()
    return build_label_space(vn_inv, pb_inv, filt)


def _cmd_build_space(args) -> int:
    inventory = _existing(args.inventory, "--inventory")
    corpus_path = _existing(args.corpus, "--corpus")
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    vn_inv, pb_inv = load_inventories(inventory)
    corpus = conll_io.parse_corpus(corpus_path)
    jointly = [inst for inst in corpus if inst.gold_joint is not None]
    filt = derive_cooccurrence_filter(jointly, vn_inv, pb_inv,
                                      drop_modifier_pairs=args.drop_modifier_pairs)
    space = build_label_space(vn_inv, pb_inv, filt)
    full = build_label_space(vn_inv, pb_inv, set())

    write_cooccurrence_filter(out_dir / "cooccurrence.tsv", filt)
    with open(out_dir / "labels.tsv", "w", encoding="utf-8") as fh:
        fh.write("# vn_tag\tpb_tag\tindex\n")
        for lab in space:
            fh.write(f"{lab.vn_tag}\t{lab.pb_tag}\t{lab.index}\n")
    print(json.dumps({
        "n_joint_instances": len(jointly),
        "n_filter_pairs": len(filt),
        "n_labels": len(space),
        "n_labels_unfiltered": len(full),
        "out": str(out_dir),
    }, indent=2))
    return 0


def _merged_config(args) -> TrainConfig:
    if args.config:
        config = TrainConfig.from_file(_existing(args.config, "--config"))
    else:
        config = TrainConfig()
    overrides = {}
    for key in ("corpus", "dev", "semlink", "inventory", "cooccurrence", "regime"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = TrainConfig(**{**config.to_dict(), **overrides})
    return config


def _cmd_train(args) -> int:
    config = _merged_config(args)
    corpus_path = _existing(config.corpus, "--corpus")
    inventory = _existing(config.inventory, "--inventory")
    out_path = args.out
    if out_path is None:
        raise UsageError("missing required flag --out (model file)")

    vn_inv, pb_inv = load_inventories(inventory)
    corpus = conll_io.parse_corpus(corpus_path)
    if config.cooccurrence:
        filt = load_cooccurrence_filter(_existing(config.cooccurrence, "--cooccurrence"))
    else:
        jointly = [inst for inst in corpus if inst.gold_joint is not None]
        filt = derive_cooccurrence_filter(jointly, vn_inv, pb_inv) if jointly else set()
        logger.info("derived co-occurrence filter with %d pairs from the training data",
                    len(filt))
    space = build_label_space(vn_inv, pb_inv, filt)

    mapping = None
    if config.semlink:
        mapping = load_semlink(_existing(config.semlink, "--semlink"), space)
        bad = mapping.audit_gold(corpus, space)
        if bad:
            logger.warning("gold labels violate their lexicon entry for %d instances: %s",
                           len(bad), bad[:5])
    dev = conll_io.parse_corpus(_existing(config.dev, "--dev")) if config.dev else None

    metrics_fh = open(args.metrics, "w", encoding="utf-8") if args.metrics else sys.stderr
    try:
        model = train(corpus, config, space, mapping, dev, metrics_stream=metrics_fh)
    finally:
        if args.metrics:
            metrics_fh.close()
    save_model(out_path, model)
    print(json.dumps({"model": out_path, "regime": config.regime,
                      "n_instances": len(corpus), "n_labels": len(space)}))
    return 0


def _decode_and_write(args, completion: bool) -> int:
    model = load_model(_existing(args.model, "--model"))
    corpus = conll_io.parse_corpus(_existing(args.corpus, "--corpus"))
    if args.out is None:
        raise UsageError("missing required flag --out (predictions file)")
    mapping = load_semlink(args.semlink, model.space) if args.semlink else None
    use_semlink = not getattr(args, "no_semlink", False)
    if completion:
        missing = [inst.instance_id for inst in corpus if inst.observed_pb is None]
        if missing:
            raise UsageError(
                f"completion needs observed PB columns; missing for {missing[:5]}")
    pairs = decode_corpus(model, corpus, mapping, use_semlink=use_semlink,
                          completion=completion)
    conll_io.write_predictions(args.out, corpus, pairs)
    print(json.dumps({"predictions": args.out, "n_instances": len(corpus),
                      "semlink": bool(mapping) and use_semlink,
                      "completion": completion}))
    return 0


def _cmd_tag(args) -> int:
    return _decode_and_write(args, completion=bool(getattr(args, "completion", False)))


def _cmd_complete(args) -> int:
    return _decode_and_write(args, completion=True)


def _cmd_eval(args) -> int:
    gold = conll_io.parse_corpus(_existing(args.corpus, "--corpus"))
    pred_instances, pred_pairs = conll_io.parse_predictions(_existing(args.pred, "--pred"))
    if len(gold) != len(pred_instances):
        raise DataError(f"{len(gold)} gold vs {len(pred_instances)} predicted instances")
    for g, p in zip(gold, pred_instances):
        if g.tokens != p.tokens or g.predicate_index != p.predicate_index:
            raise DataError(f"instance {g.instance_id}: gold and prediction disagree "
                            f"on tokens or predicate position")
    mapping = load_semlink(args.semlink) if args.semlink else None
    report = evaluate_tag_pairs(pred_pairs, gold, mapping, space=None)
    print(json.dumps(report, indent=2))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointcrf",
        description="Joint VN/PB BIO tagging with a constrained linear-chain CRF.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-space", help="derive the co-occurrence filter and label space")
    p.add_argument("--inventory")
    p.add_argument("--corpus")
    p.add_argument("--drop-modifier-pairs", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_build_space)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--dev")
    p.add_argument("--semlink")
    p.add_argument("--inventory")
    p.add_argument("--cooccurrence")
    p.add_argument("--regime", choices=REGIMES)
    p.add_argument("--seed", type=int)
    p.add_argument("--metrics")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("tag", help="decode a corpus")
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--semlink")
    p.add_argument("--no-semlink", action="store_true")
    p.add_argument("--completion", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_tag)

    p = sub.add_parser("complete", help="infer VN labels from observed PB labels")
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--semlink")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_complete)

    p = sub.add_parser("eval", help="score a predictions file against gold")
    p.add_argument("--corpus", help="gold corpus file")
    p.add_argument("--pred", help="predictions file from tag/complete")
    p.add_argument("--semlink")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"jointcrf: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"jointcrf: {exc}", file=sys.stderr)
        return 2
    except (CorpusParseError, DataError) as exc:
        print(f"jointcrf: {exc}", file=sys.stderr)
        return 3
    except JointCrfError as exc:
        print(f"jointcrf: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
