"""``graphsense`` command line.

Exit status: 0 on success, 1 for usage or input errors, 2 when a pipeline
stage or model call fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import config as cfgmod
from . import pipeline
from .errors import (
    GatewayError,
    GraphSenseError,
    InvalidConfig,
    NoIndex,
    NoSummaries,
    StageFailed,
    WorkspaceLocked,
)
from .workspace import Workspace

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _config_parent() -> argparse.ArgumentParser:
    parent = Parser(add_help=False)
    group = parent.add_argument_group("configuration (each flag sets one config key)")
    group.add_argument("--config", metavar="FILE", help=f"config file (default: <workspace>/{cfgmod.CONFIG_FILE})")
    for s in cfgmod.SCHEMA:
        help_text = f"{s.help} [{s.key}, default {s.default!r}]"
        if s.type is bool:
            group.add_argument(s.flag, dest=s.dest, action=argparse.BooleanOptionalAction, default=None, help=help_text)
        else:
            group.add_argument(
                s.flag, dest=s.dest, type=s.type, default=None, choices=s.choices, metavar=s.type.__name__.upper(),
                help=help_text,
            )
    return parent


def build_parser() -> Parser:
    parser = Parser(prog="graphsense", description="Graph-based indexing and global question answering.")
    common = Parser(add_help=False)
    common.add_argument("-w", "--workspace", default="graphsense_workspace", help="workspace directory")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parents = [common, _config_parent()]
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("index", parents=parents, help="build the index from a directory of .txt files")
    p.add_argument("corpus", help="directory containing .txt documents")

    p = sub.add_parser("query", parents=parents, help="answer a question")
    p.add_argument("-q", "--question", required=True)
    p.add_argument(
        "--condition", default=None, choices=pipeline.CONDITIONS,
        help="c0-c3 community levels, ts source texts, ss semantic search (default c0)",
    )
    p.add_argument("--level", type=int, choices=range(4), default=None, help="shorthand for --condition c<level>")
    p.add_argument("--show-ledger", action="store_true", help="print the packing ledger and token accounting")

    p = sub.add_parser("inspect", parents=parents, help="show stage status, level table or one level's communities")
    p.add_argument("--level", type=int, default=None)

    p = sub.add_parser("questions", parents=parents, help="generate evaluation questions")
    p.add_argument("--description", required=True, help="short description of the dataset")
    p.add_argument("-n", type=int, default=5, help="personas, tasks per persona and questions per task")
    p.add_argument("--out", required=True, help="output JSONL file")

    p = sub.add_parser("eval", parents=parents, help="head-to-head comparison of conditions")
    p.add_argument("--conditions", default="c0,c2,ts,ss")
    p.add_argument("--metrics", default="all")
    p.add_argument("--questions", required=True, help="JSONL file of questions")
    p.add_argument("--trials", type=int, default=None, help="same as --eval-trials")
    return parser


def _resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {s.key: getattr(args, s.dest) for s in cfgmod.SCHEMA if getattr(args, s.dest, None) is not None}
    return cfgmod.resolve(args.workspace, args.config, overrides)


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        print(text)


def cmd_index(args, config) -> int:
    progress = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = pipeline.index_corpus(args.corpus, args.workspace, config, progress=progress)
    _emit(args, {"ok": True, **report.to_dict()}, report.render())
    return EXIT_OK


def cmd_query(args, config) -> int:
    if not args.question.strip():
        raise UsageError("--question must not be empty")
    condition = args.condition or (f"c{args.level}" if args.level is not None else "c0")
    if args.condition and args.level is not None and args.condition != f"c{args.level}":
        raise UsageError("--level and --condition disagree")
    ws = Workspace(args.workspace)
    gw = pipeline.build_gateway(config)
    result = pipeline.answer(ws, args.question, condition, config, gw)
    payload = {"ok": True, "condition": condition, "answer": result.text}
    if args.show_ledger or args.json:
        payload["ledger"] = result.to_dict()
    text = result.text
    if args.show_ledger:
        text += "\n\n" + json.dumps(result.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)
    _emit(args, payload, text)
    return EXIT_OK


def cmd_inspect(args, config) -> int:
    ws = Workspace(args.workspace)
    if not ws.exists:
        raise NoIndex(f"{ws.root} is not a workspace")
    stages = pipeline.status(ws)
    if args.level is None:
        payload: dict[str, Any] = {"ok": True, "stages": stages}
        lines = [f"{name:<21} {'complete' if done else 'missing'}" for name, done in stages.items()]
        if all(stages.values()):
            rows = pipeline.level_table(pipeline.load_index(ws))
            payload["levels"] = [r.__dict__ for r in rows]
            lines += ["", pipeline.render_level_table(rows)]
        _emit(args, payload, "\n".join(lines))
        return EXIT_OK
    if args.level < 0:
        raise UsageError("--level must be >= 0")
    index = pipeline.load_index(ws)
    summaries = index.level_summaries(args.level)
    rows = [
        {
            "id": s.ref,
            "title": s.title,
            "tokens": s.token_count,
            "context_tokens": s.context_token_count,
            "nodes": s.node_count,
        }
        for s in summaries
    ]
    lines = [f"{r['id']:<8} {r['tokens']:>6} {r['context_tokens']:>7}  {r['title']}" for r in rows]
    _emit(args, {"ok": True, "level": args.level, "communities": rows}, "\n".join(lines))
    return EXIT_OK


def cmd_questions(args, config) -> int:
    if args.n < 1:
        raise UsageError("-n must be >= 1")
    gw = pipeline.build_gateway(config)
    qs = pipeline.make_questions(args.description, args.n, config, gw)
    pipeline.write_questions(qs, args.out)
    payload = {"ok": True, "count": len(qs.questions), "flags": qs.flags, "out": str(args.out)}
    _emit(args, payload, f"wrote {len(qs.questions)} questions to {args.out}")
    return EXIT_OK


def cmd_eval(args, config) -> int:
    conditions = [c.strip().lower() for c in args.conditions.split(",") if c.strip()]
    bad = [c for c in conditions if c not in pipeline.CONDITIONS]
    if bad:
        raise UsageError(f"unknown conditions: {', '.join(bad)}")
    if not Path(args.questions).exists():
        raise UsageError(f"questions file {args.questions} does not exist")
    ws = Workspace(args.workspace)
    gw = pipeline.build_gateway(config)
    questions = pipeline.load_questions(args.questions)
    matrices = pipeline.evaluate(ws, questions, conditions, args.metrics, config, gw, args.trials)
    payload = {"ok": True, "matrices": {m: w.to_dict() for m, w in matrices.items()}}
    _emit(args, payload, "\n\n".join(w.render() for w in matrices.values()))
    return EXIT_OK


COMMANDS = {
    "index": cmd_index,
    "query": cmd_query,
    "inspect": cmd_inspect,
    "questions": cmd_questions,
    "eval": cmd_eval,
}


def _fail(args, code: int, message: str, **extra) -> int:
    if args is not None and getattr(args, "json", False):
        print(json.dumps({"ok": False, "error": message, **extra}, sort_keys=True))
    print(f"graphsense: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            import logging

            logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
        config = _resolve_config(args)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except StageFailed as exc:
        return _fail(args, EXIT_FAILURE, str(exc), stage=exc.stage)
    except (InvalidConfig, NoIndex, NoSummaries, WorkspaceLocked, FileNotFoundError, ValueError) as exc:
        return _fail(args, EXIT_USAGE, str(exc))
    except (GatewayError, GraphSenseError) as exc:
        return _fail(args, EXIT_FAILURE, str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
