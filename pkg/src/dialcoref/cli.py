"""Command-line entry point.

Subcommands: ``convert``, ``stats``, ``train``, ``predict``, ``score`` and
``export-scores``.  Failures exit with status 1 and print a one-line JSON
object (``error``, ``message`` and, for parse errors, ``file`` and
``line``) on stderr.  Relative input paths are resolved against
``$DIALCOREF_DATA_ROOT`` when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config, resolve_path
from .doc_model import Corpus, corpus_stats
from .evaluator import evaluate
from .format_io import ColumnSchema, ParseError, dropped_layers, guess_format, read_corpus, write_corpus
from .pipeline import evaluate_model, predict_corpus, score_document, train
from .scorer import load_checkpoint, save_checkpoint, write_tables
from .scorer.train import TrainingDiverged

log = logging.getLogger("dialcoref")

FORMATS = ("ua", "conll", "json")


class CommandError(Exception):
    """A user-facing failure with a short machine-readable kind."""

    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


def _read(path, fmt=None, name=None) -> Corpus:
    path = resolve_path(path)
    if not path.exists():
        raise CommandError("missing_file", f"{path}: no such file")
    return read_corpus(path, fmt, name)


def _add_config_flags(parser):
    """One ``--field-name VALUE`` flag per config field; values override the file."""
    group = parser.add_argument_group("config overrides")
    for f in dataclasses.fields(PipelineConfig):
        group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name,
                           metavar="VALUE", default=None)


def _config_from_args(args) -> PipelineConfig:
    config = load_config(resolve_path(args.config)) if args.config else PipelineConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return config.with_overrides(overrides)


# -- commands -----------------------------------------------------------------

def cmd_convert(args):
    corpus = _read(args.input, args.in_format)
    out_fmt = (args.out_format or guess_format(args.output)).lower()
    if out_fmt != "json":
        for layer, count in dropped_layers(corpus, ColumnSchema.for_format(out_fmt.upper())).items():
            if count:
                log.warning("dropped %d %s span(s): the %s format cannot carry them",
                            count, layer, out_fmt)
    write_corpus(corpus, args.output, out_fmt)
    return 0


def cmd_stats(args):
    rows = [corpus_stats(_read(p, args.format)).as_row() for p in args.paths]
    header = ["corpus", "docs", "mentions", "clusters", "singletons", "pronouns", "speakers/doc"]
    widths = [max(len(r[k]) for r in rows + [header]) for k in range(len(header))]
    for row in [header] + rows:
        print("  ".join(cell.ljust(w) if k == 0 else cell.rjust(w)
                        for k, (cell, w) in enumerate(zip(row, widths))))
    return 0


def cmd_train(args):
    config = _config_from_args(args)
    if not config.uad_train:
        raise CommandError("missing_corpus", "no UA-format training corpus configured (uad_train)")
    paths = config.uad_train + config.od_train + config.dev + config.test
    missing = [str(resolve_path(p)) for p in paths if not resolve_path(p).exists()]
    if missing:
        raise CommandError("missing_corpus", f"corpora not found: {', '.join(missing)}",
                           paths=missing)
    uad = [_read(p) for p in config.uad_train]
    od = [_read(p) for p in config.od_train]
    dev = [_read(p) for p in config.dev]
    test = [_read(p) for p in config.test]
    if config.include_dev_in_train:
        uad += dev

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(config.dumps(), encoding="utf-8")
    history_path = out / "history.jsonl"
    history_path.write_text("", encoding="utf-8")

    def on_epoch(record):
        with open(history_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    epoch_dir = out / "epochs" if args.keep_epochs else None
    try:
        model = train(uad, od, config, checkpoint_dir=epoch_dir, on_epoch=on_epoch)
    except TrainingDiverged as exc:
        if exc.last_good is not None:
            save_checkpoint(exc.last_good, out / "last-good.ckpt")
        raise
    ckpt = out / "model.ckpt"
    save_checkpoint(model, ckpt)

    eval_sets = [(c, "test") for c in test] or [(c, "dev") for c in dev if not config.include_dev_in_train]
    reports = {}
    for corpus, split in eval_sets:
        report = evaluate_model(model, corpus)
        reports[f"{split}:{corpus.name}"] = report.to_dict()
        print(f"{split} {corpus.name}\n{report.render()}")
    if reports:
        payload = {"config": config.to_dict(), "reports": reports}
        (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True),
                                         encoding="utf-8")
    print(ckpt)
    return 0


def cmd_predict(args):
    model = load_checkpoint(resolve_path(args.checkpoint))
    corpus = _read(args.input, args.in_format)
    response, tables = predict_corpus(model, corpus, with_tables=True)
    write_corpus(response, args.output, args.out_format)
    if args.scores:
        write_tables(tables, args.scores)
    return 0


def cmd_export_scores(args):
    model = load_checkpoint(resolve_path(args.checkpoint))
    corpus = _read(args.input, args.in_format)
    write_tables([score_document(model, doc) for doc in corpus.documents], args.output)
    return 0


def cmd_score(args):
    key = _read(args.key, args.key_format)
    response = _read(args.response, args.response_format)
    key_ids = [d.doc_id for d in key.documents]
    resp_docs = {d.doc_id: d for d in response.documents}
    only_key = sorted(set(key_ids) - set(resp_docs))
    only_resp = sorted(set(resp_docs) - set(key_ids))
    if only_key or only_resp:
        raise CommandError("doc_id_mismatch",
                           f"key and response documents differ: missing from response {only_key}, "
                           f"missing from key {only_resp}",
                           missing_from_response=only_key, missing_from_key=only_resp)
    pairs, excludes = [], []
    for doc in key.documents:
        r = resp_docs[doc.doc_id]
        if len(r.tokens) != len(doc.tokens):
            raise CommandError("token_mismatch",
                               f"{doc.doc_id}: key has {len(doc.tokens)} tokens, "
                               f"response {len(r.tokens)}")
        pairs.append((_clusters(doc), _clusters(r)))
        excludes.append(doc.non_referring if args.exclude_non_referring else ())
    report = evaluate(pairs, excludes, args.aggregate)
    structured = report.to_dict()
    structured["exclude_non_referring"] = args.exclude_non_referring
    text = json.dumps(structured, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    if args.json:
        print(text)
    else:
        print(report.render())
    return 0


def _clusters(doc):
    from .doc_model import ClusterSet
    return doc.gold_clusters if doc.gold_clusters is not None else ClusterSet()


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dialcoref",
                                     description="Singleton-aware coreference for dialogue.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", parents=[common], help="convert between UA, CoNLL and interchange files")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--in-format", choices=FORMATS)
    p.add_argument("--out-format", choices=FORMATS)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics table")
    p.add_argument("paths", nargs="+")
    p.add_argument("--format", choices=FORMATS)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train a model from a config")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--output", "-o", required=True, help="output directory")
    p.add_argument("--keep-epochs", action="store_true", help="also write one checkpoint per epoch")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="write predicted clusters for a corpus")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--in-format", choices=FORMATS)
    p.add_argument("--out-format", choices=FORMATS)
    p.add_argument("--scores", help="also write the score tables to this file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-scores", parents=[common], help="write score tables for a corpus")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--in-format", choices=FORMATS)
    p.set_defaults(func=cmd_export_scores)

    p = sub.add_parser("score", parents=[common], help="score a response file against a key file")
    p.add_argument("key")
    p.add_argument("response")
    p.add_argument("--key-format", choices=FORMATS)
    p.add_argument("--response-format", choices=FORMATS)
    p.add_argument("--exclude-non-referring", dest="exclude_non_referring",
                   action=argparse.BooleanOptionalAction, default=True,
                   help="drop the key's non-referring spans before scoring (default: on)")
    p.add_argument("--aggregate", choices=("micro", "macro"), default="micro")
    p.add_argument("--json", action="store_true", help="print the structured report instead of the table")
    p.add_argument("--report", help="write the structured report to this file")
    p.set_defaults(func=cmd_score)
    return parser


def _error(kind, message, **extra) -> int:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CommandError as exc:
        return _error(exc.kind, str(exc), **exc.extra)
    except ParseError as exc:
        return _error("parse_error", str(exc), file=exc.source, line=exc.line)
    except TrainingDiverged as exc:
        return _error("training_diverged", str(exc))
    except (ValueError, OSError) as exc:
        return _error(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
