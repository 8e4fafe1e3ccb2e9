from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from .artifacts import dumps, write_text
from .config import Settings
from .deps import Deps
from .errors import EqkitError, NoConvergence, SchemaError, UnknownCommand
from .graph import build_run_graph
from .logging import configure_logging
from .models import COMMANDS, RunConfig
from .run_store import RunStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NO_CONVERGENCE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqkit",
        description="Equilibrium solvers for self-sustained multi-agent resource allocation.",
    )
    # Free string: an unknown command must exit 1, argparse choices would exit 2.
    parser.add_argument("command", help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument("--input", dest="input_path", type=Path)
    parser.add_argument("--output", dest="output_path", type=Path)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", default="json")
    parser.add_argument("--resolution", type=float)
    parser.add_argument("--mode")
    parser.add_argument("--equilibrium", dest="equilibrium_path", type=Path)
    parser.add_argument("--example", type=int)
    parser.add_argument("--c-max", dest="c_max", type=float, default=40.0)
    parser.add_argument("--c-step", dest="c_step", type=float, default=0.8)
    parser.add_argument("--grid", type=int)
    parser.add_argument("--budget", type=int, default=1000)
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.command not in COMMANDS:
        raise UnknownCommand(f"unknown command {args.command!r}; expected one of {COMMANDS}")
    return RunConfig.model_validate(vars(args))


def _error_payload(exc: Exception) -> dict[str, Any]:
    if isinstance(exc, SchemaError):
        return exc.as_dict()
    if isinstance(exc, ValidationError):
        errors = exc.errors()
        loc = errors[0]["loc"] if errors else ()
        field = ".".join(str(p) for p in loc)
        return {"path": None, "line": None, "field": field or None, "error": str(exc)}
    return {"path": None, "line": None, "field": None, "error": str(exc)}


def _record_failure(store: RunStore | None, config: RunConfig, exit_code: int, error: str) -> None:
    if store is None:
        return
    store.record_run(
        command=config.command, input_digest=None, exit_code=exit_code, summary={"error": error}
    )


def run(config: RunConfig, settings: Settings) -> int:
    store = RunStore(settings.database_path) if settings.record_runs else None
    deps = Deps(settings=settings, store=store)
    graph = build_run_graph(deps)
    logger.info(
        "Run started",
        extra={"event": "run_started", "command": config.command},
    )
    try:
        out = graph.invoke({"config": config})
    except NoConvergence as exc:
        # Raised outside the solve node's own handling, e.g. from a verify run.
        logger.error(
            "Solver did not converge",
            extra={"event": "no_convergence", "command": config.command},
        )
        write_text(config.output_path, dumps({"error": str(exc), "exit_code": 2}))
        _record_failure(store, config, EXIT_NO_CONVERGENCE, str(exc))
        return EXIT_NO_CONVERGENCE
    except (EqkitError, ValidationError) as exc:
        logger.error(
            "Run failed on input",
            extra={"event": "input_error", "command": config.command, "extra": _error_payload(exc)},
        )
        print(f"error: {exc}", file=sys.stderr)
        _record_failure(store, config, EXIT_INPUT_ERROR, str(exc))
        return EXIT_INPUT_ERROR
    except Exception:
        logger.exception("Run failed", extra={"event": "run_failed", "command": config.command})
        raise
    finally:
        if store is not None:
            store.close()

    for line in out.get("summary_lines", []):
        print(line, file=sys.stderr if config.output_path is None else sys.stdout)
    exit_code = int(out.get("exit_code", EXIT_OK))
    logger.info(
        "Run finished",
        extra={"event": "run_finished", "command": config.command, "extra": {"exit": exit_code}},
    )
    return exit_code


def main(argv: Sequence[str] | None = None) -> int:
    settings = Settings()  # type: ignore[call-arg]
    configure_logging(settings.logging_level, stream=sys.stderr)
    try:
        config = parse_config(argv)
    except (UnknownCommand, ValidationError) as exc:
        logger.error(
            "Invalid command line",
            extra={"event": "input_error", "extra": _error_payload(exc)},
        )
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return run(config, settings)


if __name__ == "__main__":
    raise SystemExit(main())
