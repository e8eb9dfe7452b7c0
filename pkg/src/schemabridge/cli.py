"""Command line entry points: serve the proxy, run the benchmark."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .bench.fixtures import default_scenarios_dir
from .bench.report import render_report
from .bench.runner import BenchConfig, run_benchmark
from .gateway.client import LlmClient
from .gateway.live import LiveBackend
from .gateway.mock import MockBackend
from .gateway.profiles import load_profiles
from .gateway.prompts import load_prompts
from .middleware import MetricsSink, Middleware
from .model import load_registry

logger = logging.getLogger(__name__)


def _add_client_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["mock", "live"], default="mock",
                        help="model backend (default: mock)")
    parser.add_argument("--model", default="mock", help="model profile name")
    parser.add_argument("--profiles", default=None,
                        help="profiles JSON file (default: packaged)")
    parser.add_argument("--prompts", default=None,
                        help="prompt directory (default: packaged)")
    parser.add_argument("--scenarios", default=None,
                        help="scenario fixtures directory (default: packaged)")
    parser.add_argument("--fault-kind", default="drop_field",
                        choices=["garbled", "drop_field", "bad_function", "wrong_value"],
                        help="mock fault kind (with --fault-rate > 0)")
    parser.add_argument("--fault-rate", type=float, default=0.0,
                        help="mock corruption probability per call")
    parser.add_argument("--outage", action="store_true", help="mock outage mode")
    parser.add_argument("--seed", type=int, default=0, help="mock determinism seed")


def _build_client(args: argparse.Namespace) -> LlmClient:
    profiles = load_profiles(args.profiles)
    if args.model not in profiles:
        raise SystemExit(f"unknown model profile {args.model!r}; "
                         f"known: {', '.join(sorted(profiles))}")
    profile = profiles[args.model]
    prompts = load_prompts(args.prompts)
    if args.backend == "mock":
        mode = "outage" if args.outage else ("faulty" if args.fault_rate > 0 else "faithful")
        backend = MockBackend.from_directory(
            args.scenarios or default_scenarios_dir(),
            mode=mode, fault_kind=args.fault_kind,
            fault_rate=args.fault_rate, seed=args.seed,
        )
    else:
        backend = LiveBackend(profile.provider)
    return LlmClient(backend, profile, prompts)


def _cmd_serve(args: argparse.Namespace) -> int:
    import os

    import uvicorn

    from .proxy import HttpForwarder, build_asgi_app
    from .resolve import load_cache, save_cache

    registry = load_registry(args.config)
    client = _build_client(args)
    metrics = MetricsSink(args.metrics_out)
    cache = None
    if args.cache_file and os.path.exists(args.cache_file):
        cache = load_cache(args.cache_file)
        logger.info("loaded mapping cache from %s", args.cache_file)
    core = Middleware(registry, client, HttpForwarder(), cache=cache,
                      metrics=metrics, ensemble_size=args.ensemble)
    app = build_asgi_app(core)
    logger.info("listening on %s:%d (%d routes, backend=%s, model=%s)",
                args.host, args.port, len(registry.routes), args.backend, args.model)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        if args.cache_file:
            save_cache(core.cache, args.cache_file)
            logger.info("saved mapping cache to %s", args.cache_file)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    strategies = {
        "direct": ("DIRECT",),
        "codegen": ("CODEGEN",),
        "both": ("DIRECT", "CODEGEN"),
    }[args.strategy]
    modes = {"on": (True,), "off": (False,), "both": (True, False)}[args.safeguards]
    config = BenchConfig(
        scenarios_dir=args.scenarios,
        strategies=strategies,
        safeguard_modes=modes,
        runs=args.runs,
        ensemble_size=args.ensemble,
        parallel=args.parallel,
    )
    client = _build_client(args)
    report = run_benchmark(config, client)
    text, doc = render_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as sink:
            json.dump(doc, sink, indent=2)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schemabridge",
        description="Schema-mismatch repairing proxy and its benchmark harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the transforming proxy")
    serve.add_argument("--config", required=True, help="registry config JSON file")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--metrics-out", default=None, help="JSONL metrics file")
    serve.add_argument("--cache-file", default=None,
                       help="load the mapping cache from here and save it on shutdown")
    serve.add_argument("--ensemble", type=int, default=3, help="ensemble vote size")
    _add_client_args(serve)
    serve.set_defaults(func=_cmd_serve)

    bench = sub.add_parser("bench", help="run the benchmark protocol")
    bench.add_argument("--strategy", choices=["direct", "codegen", "both"], default="both")
    bench.add_argument("--safeguards", choices=["on", "off", "both"], default="both")
    bench.add_argument("--runs", type=int, default=3)
    bench.add_argument("--out", default=None, help="write the report JSON here")
    bench.add_argument("--ensemble", type=int, default=3, help="ensemble vote size")
    bench.add_argument("--parallel", action="store_true",
                       help="run combinations in parallel (mock only; skews latency)")
    _add_client_args(bench)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
