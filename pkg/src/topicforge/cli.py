"""Command-line interface: run / plan / similarity / eval subcommands.

Exit codes: 0 success, 2 configuration error, 3 strict-mode topic failure,
4 external-trainer protocol error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .corpus import FieldMapping, load_corpus
from .errors import ConfigError, TopicForgeError
from .evaluation import RankedEntry, RankedList, average_precision
from .runner import ExperimentConfig, TopicRunError, run_all, write_outputs
from .schedule import Scheme, build_plan, split_target
from .similarity import order_sources
from .trainer import ExternalTrainerError

logger = logging.getLogger(__name__)

SCHEME_SLUGS = [s.value for s in Scheme]


def _add_corpus_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus file (jsonl, csv, or tsv)")
    parser.add_argument("--col-id", default="id", help="id column/field name")
    parser.add_argument("--col-topic", default="topic", help="topic column/field name")
    parser.add_argument("--col-text", default="text", help="text column/field name")
    parser.add_argument("--col-label", default="label", help="label column/field name")


def _load_corpus_arg(args: argparse.Namespace):
    mapping = FieldMapping(
        id=args.col_id, topic=args.col_topic, text=args.col_text, label=args.col_label
    )
    return load_corpus(args.corpus, mapping)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    sweep = run_all(cfg, strict=args.strict, jobs=args.jobs)
    written = write_outputs(sweep, args.out or cfg.output_dir)
    for cell in sweep.cells:
        mean = "n/a" if cell.map_mean is None else f"{cell.map_mean:.4f}"
        print(f"{cell.scheme.value} s{cell.stages}: MAP {mean}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_plan(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args)
    scheme = Scheme.from_slug(args.scheme)
    ordering = None
    if scheme.needs_ordering:
        train_ids, _ = split_target(
            corpus, args.target, args.budget, args.seed, args.min_test
        )
        ordering = order_sources(
            corpus, args.target, [corpus.claim(cid) for cid in train_ids]
        )
    plan = build_plan(
        corpus,
        args.target,
        scheme,
        args.stages,
        args.budget,
        args.seed,
        ordering,
        args.min_test,
    )
    Path(args.out).write_text(
        json.dumps(plan.to_dict(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_similarity(args: argparse.Namespace) -> int:
    corpus = _load_corpus_arg(args)
    if args.full_target:
        reference = list(corpus.topic_claims(args.target))
    else:
        train_ids, _ = split_target(
            corpus, args.target, args.budget, args.seed, args.min_test
        )
        reference = [corpus.claim(cid) for cid in train_ids]
    ordering = order_sources(corpus, args.target, reference)
    print("topic_id,similarity")
    for topic_id, similarity in ordering.ordered_sources:
        print(f"{topic_id},{similarity:.6f}")
    return 0


def _read_column_file(path: str, value_column: str) -> dict[str, str]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames:
            raise ConfigError(f"{path}: expected a CSV header with an 'id' column")
        if value_column not in reader.fieldnames:
            raise ConfigError(f"{path}: expected a {value_column!r} column")
        return {row["id"]: row[value_column] for row in reader}


def _cmd_eval(args: argparse.Namespace) -> int:
    scores = _read_column_file(args.scores, "score")
    labels = _read_column_file(args.labels, "label")
    if set(scores) != set(labels):
        raise ConfigError("score and label files list different ids")
    entries = sorted(
        (
            RankedEntry(
                claim_id=cid,
                score=float(scores[cid]),
                relevant=labels[cid].strip() == "1",
            )
            for cid in scores
        ),
        key=lambda e: (-e.score, e.claim_id),
    )
    ranked = RankedList(entries=tuple(entries))
    avep = average_precision(ranked, args.ap_denominator)
    n_relevant = sum(1 for e in entries if e.relevant)
    print(
        json.dumps(
            {"avep": avep, "n": len(entries), "n_relevant": n_relevant}, sort_keys=True
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicforge",
        description="Staged-curriculum training schedules and MAP evaluation "
        "for cross-topic claim ranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full experiment sweep from a config file")
    p_run.add_argument("--config", required=True, help="experiment config (JSON)")
    p_run.add_argument("--strict", action="store_true", help="abort on any topic failure")
    p_run.add_argument("--jobs", type=int, default=1, help="concurrent cells")
    p_run.add_argument("--out", default=None, help="override the config output_dir")
    p_run.set_defaults(func=_cmd_run)

    p_plan = sub.add_parser("plan", help="emit a stage plan as JSON")
    _add_corpus_args(p_plan)
    p_plan.add_argument("--target", required=True, help="target topic id")
    p_plan.add_argument("--scheme", required=True, choices=SCHEME_SLUGS)
    p_plan.add_argument("--stages", type=int, required=True)
    p_plan.add_argument("--budget", type=int, default=200)
    p_plan.add_argument("--seed", type=int, default=0)
    p_plan.add_argument("--min-test", type=int, default=50)
    p_plan.add_argument("--out", required=True, help="output path for the plan JSON")
    p_plan.set_defaults(func=_cmd_plan)

    p_sim = sub.add_parser(
        "similarity", help="print source topics by ascending similarity to the target"
    )
    _add_corpus_args(p_sim)
    p_sim.add_argument("--target", required=True, help="target topic id")
    p_sim.add_argument("--budget", type=int, default=200)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--min-test", type=int, default=50)
    p_sim.add_argument(
        "--full-target",
        action="store_true",
        help="vectorize the whole target topic instead of a few-shot sample",
    )
    p_sim.set_defaults(func=_cmd_similarity)

    p_eval = sub.add_parser("eval", help="average precision from score/label CSV files")
    p_eval.add_argument("--scores", required=True, help="CSV with id,score columns")
    p_eval.add_argument("--labels", required=True, help="CSV with id,label columns")
    p_eval.add_argument(
        "--ap-denominator", choices=("relevant", "total"), default="relevant"
    )
    p_eval.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ExternalTrainerError as exc:
        print(f"trainer protocol error: {exc}", file=sys.stderr)
        return 4
    except TopicRunError as exc:
        print(f"topic failure: {exc}", file=sys.stderr)
        return 3
    except TopicForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
