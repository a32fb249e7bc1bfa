"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 stage
dependency error (a prerequisite stage has not run or is stale).
"""

from __future__ import annotations

import argparse
import json
import sys

from .features import ClockAnomalyError, TfIdfError
from .forest import ForestError
from .ingest import DecodeError, ParseError, SchemaVersionError
from .learners import LearnerError
from .metrics import MetricsError
from .mlp import DivergenceError, MlpError
from .pipeline import (
    ConfigError,
    DataError,
    StageError,
    cmd_evaluate,
    cmd_features,
    cmd_ingest,
    cmd_rank,
    cmd_run,
    cmd_select,
    cmd_train,
    load_config,
)
from .resample import ResampleError

_DATA_ERRORS = (
    DataError,
    ParseError,
    DecodeError,
    SchemaVersionError,
    ClockAnomalyError,
    TfIdfError,
    ResampleError,
    ForestError,
    MlpError,
    DivergenceError,
    LearnerError,
    MetricsError,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON settings file")
    p.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        dest="overrides",
        help="override one setting, e.g. --set forest.n_estimators=50",
    )
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--threads", type=int, help="worker threads for forest fitting")
    p.add_argument("--out", metavar="DIR", help="work directory (default: workdir)")
    p.add_argument("--posts", metavar="FILE", help="posts XML dump")
    p.add_argument("--users", metavar="FILE", help="users XML dump")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soaccept",
        description="Predict which answer a question asker will accept.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    stages = (
        ("ingest", "filter the XML dumps into dataset.jsonl"),
        ("features", "extract the per-answer feature matrix"),
        ("select", "prune features by correlation and information gain"),
        ("train", "fit the forest and network on the balanced training split"),
        ("evaluate", "score the held-out split and write the report"),
        ("run", "all stages in order"),
    )
    for name, help_text in stages:
        _add_common(sub.add_parser(name, help=help_text))
    rank = sub.add_parser("rank", help="order new candidate answers by model score")
    _add_common(rank)
    rank.add_argument("--input", required=True, metavar="FILE", help="candidates JSON")
    rank.add_argument(
        "--model", choices=("rf", "mlp"), default="rf", help="which trained model scores"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(
            path=args.config,
            sets=args.overrides,
            seed=args.seed,
            threads=args.threads,
            workdir=args.out,
            posts=args.posts,
            users=args.users,
        )
        if args.command == "ingest":
            report = cmd_ingest(cfg)
            print(
                f"retained {report['questions_retained']} questions"
                f" / {report['answers_retained']} answers"
            )
        elif args.command == "features":
            stats = cmd_features(cfg)
            print(f"wrote {stats['n_rows']} feature rows")
        elif args.command == "select":
            selection = cmd_select(cfg)
            print(f"retained {len(selection['retained'])} features")
        elif args.command == "train":
            summary = cmd_train(cfg)
            print(
                f"trained on {summary['resampled_rows']} resampled rows"
                f" (oob error {summary['oob_error']:.4f})"
            )
        elif args.command == "evaluate":
            report = cmd_evaluate(cfg)
            for ev in report.evals:
                print(
                    f"{ev.model}/{ev.sampler}: accuracy {ev.accuracy:.4f}"
                    f" mcc {ev.mcc:.4f} auc {ev.roc.auc:.4f}"
                )
        elif args.command == "run":
            summary = cmd_run(cfg)
            print(
                f"{summary['questions']} questions -> {summary['feature_rows']} rows"
                f" -> {summary['retained_features']} features; report in"
                f" {summary['report_dir']}"
            )
        elif args.command == "rank":
            ranking = cmd_rank(cfg, args.input, model_kind=args.model)
            json.dump(ranking, sys.stdout, indent=2, sort_keys=True)
            print()
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
