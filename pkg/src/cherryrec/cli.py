"""``cherryrec`` command line.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
from collections.abc import Sequence

from . import __version__
from .config import ENV_VAR, EngineConfig, load_config
from .errors import CherryRecError, ConfigError, ContractError, DataError
from .ingest import build_snapshot, load_snapshot, save_snapshot

log = logging.getLogger("cherryrec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _serving_config(args, stored: EngineConfig) -> EngineConfig:
    """An explicit config wins over the one saved next to the models."""
    if args.config or os.environ.get(ENV_VAR):
        return load_config(args.config)
    return stored


def _load_engine(args):
    from .pipeline import Engine, load_models

    model, stored = load_models(args.models)
    config = _serving_config(args, stored)
    return Engine(load_snapshot(args.snapshot), config, model)


def _wait_for_signal() -> None:
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    while not stop.wait(0.5):
        pass


def cmd_ingest(args) -> int:
    snap = build_snapshot(args.news, args.behaviors, args.roles, k=args.k_core)
    out = save_snapshot(snap, args.out)
    counts = {"news": len(snap.catalog), "users": len(snap.sequences),
              "behavior_rows": snap.provenance["behaviors"]["rows"]}
    print(json.dumps({"snapshot": str(out), **counts}, sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import save_models, train

    config = load_config(args.config)
    result = train(load_snapshot(args.snapshot), config)
    save_models(result, args.models, config)
    print(json.dumps(result.report, sort_keys=True))
    return EXIT_OK


def cmd_recommend(args) -> int:
    engine = _load_engine(args)
    try:
        items = engine.recommend(args.user, args.k)
    finally:
        engine.close()
    if args.json:
        body = {"user_id": args.user, "items": [{"id": c.news_id, "score": c.vans_prediction} for c in items]}
        print(json.dumps(body, sort_keys=True))
    else:
        for rank, c in enumerate(items, start=1):
            print(f"{rank}\t{c.news_id}\t{c.vans_prediction:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from dataclasses import replace

    from .pipeline import evaluate, load_models

    model, stored = load_models(args.models)
    config = _serving_config(args, stored)
    if args.k is not None:
        config = replace(config, eval=replace(config.eval, k=args.k))
    outcome = evaluate(load_snapshot(args.snapshot), model, config)
    text = json.dumps(outcome.to_json(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    if args.table:
        print(outcome.report.table(), file=sys.stderr)
        print(f"random baseline Recall@{config.eval.k}: {outcome.random_recall:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .httpjson import server_url
    from .service import serve_recommendations

    engine = _load_engine(args)
    server = serve_recommendations(engine, args.bind, args.port)
    print(f"serving on {server_url(server)}", file=sys.stderr, flush=True)
    try:
        _wait_for_signal()
    finally:
        server.shutdown()
        engine.close()
    return EXIT_OK


def cmd_mock_llm_serve(args) -> int:
    from .cnle.server import serve_mock_llm
    from .httpjson import server_url

    server = serve_mock_llm(args.bind, args.port, args.delay)
    print(f"cnle/1 mock evaluator on {server_url(server)}", file=sys.stderr, flush=True)
    try:
        _wait_for_signal()
    finally:
        server.shutdown()
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import SyntheticSpec, generate

    paths = generate(SyntheticSpec(users=args.users, news=args.news, seed=args.seed), args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"engine config file (default: ${ENV_VAR} or built-in defaults)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="cherryrec", description="Three-stage news recommendation engine.")
    parser.add_argument("--version", action="version", version=f"cherryrec {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", parents=[common], help="build a snapshot from news/behaviors TSV files")
    p.add_argument("--news", required=True)
    p.add_argument("--behaviors", required=True)
    p.add_argument("--roles", help="user_id<TAB>role text file")
    p.add_argument("--out", required=True, help="snapshot directory")
    p.add_argument("--k-core", type=int, default=5)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train the ranking model on a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--models", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", parents=[common], help="print a ranked list for one user")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--json", action="store_true", help="print the HTTP response body instead of TSV")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("eval", parents=[common], help="leave-one-out evaluation; report JSON on stdout")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--table", action="store_true", help="human-readable table on stderr")
    p.set_defaults(func=cmd_eval)

    for name, func, port, helptext in (
        ("serve", cmd_serve, 8080, "HTTP recommendation service"),
        ("mock-llm-serve", cmd_mock_llm_serve, 8081, "cnle/1 stub evaluator backed by the mock"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--bind", default="127.0.0.1")
        p.add_argument("--port", type=int, default=port)
        if name == "serve":
            p.add_argument("--snapshot", required=True)
            p.add_argument("--models", required=True)
        else:
            p.add_argument("--delay", type=float, default=0.0, help="seconds to hold each request")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic planted-preference dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--news", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "k", None) is not None and args.k < 1:
        print("cherryrec: error: --k must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, ContractError) as exc:
        print(f"cherryrec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"cherryrec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CherryRecError, OSError, ArithmeticError) as exc:
        print(f"cherryrec: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
