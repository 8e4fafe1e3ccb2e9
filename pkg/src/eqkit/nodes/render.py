from __future__ import annotations

from pathlib import Path
from typing import Any

from ..artifacts import (
    contour_csv,
    dumps,
    fmt,
    price_csv,
    sweep_csv,
    trajectory_csv,
    trajectory_path,
)
from ..deps import Deps
from ..models import (
    AdmissibilityReport,
    ContourGrid,
    DynamicEquilibrium,
    RunConfig,
    StaticEquilibrium,
    WorstCaseCertificate,
)
from ..reproduce import Reproduction

Artifact = tuple[Path | None, str]


def _flag(value: bool) -> str:
    return "true" if value else "false"


def _sibling(path: Path | None, name: str) -> Path | None:
    return None if path is None else path.with_name(f"{path.stem}_{name}.csv")


def _reproduction(
    result: Reproduction, config: RunConfig, digits: int
) -> tuple[list[Artifact], list[str], dict[str, Any]]:
    if config.format == "csv":
        main_text = result.table_csv(digits)
    else:
        main_text = dumps(
            {
                "example": result.example,
                "passed": result.passed,
                "rows": [
                    {
                        "quantity": r.quantity,
                        "expected": r.expected,
                        "computed": r.computed,
                        "abs_error": r.abs_error,
                        "status": r.status,
                    }
                    for r in result.rows
                ],
            }
        )
    artifacts: list[Artifact] = [(config.output_path, main_text)]
    if config.output_path is not None:
        artifacts.extend(
            (_sibling(config.output_path, name), text) for name, text in result.tables.items()
        )
    lines = [f"{r.quantity}: {r.status}" for r in result.rows]
    lines.append(f"example {result.example}: {'PASS' if result.passed else 'FAIL'}")
    return artifacts, lines, {"passed": result.passed, "rows": len(result.rows)}


def render_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    config: RunConfig = state["config"]
    settings = deps.settings
    digits = settings.csv_digits
    result = state.get("result")
    report = state.get("verification")
    out = config.output_path

    artifacts: list[Artifact] = []
    lines: list[str] = []
    summary: dict[str, Any] = {"command": config.command}

    if isinstance(result, StaticEquilibrium):
        body = report if config.command == "verify" else result
        artifacts.append((out, dumps(body)))
        lines.append(f"lambda: {fmt(result.lambda_, digits)}")
        summary["lambda"] = result.lambda_
    elif isinstance(result, DynamicEquilibrium):
        if config.command == "verify":
            artifacts.append((out, dumps(report)))
        elif config.format == "csv":
            artifacts.append((out, price_csv(result, digits)))
            if out is not None:
                artifacts.append((trajectory_path(out), trajectory_csv(result, digits)))
        else:
            artifacts.append((out, dumps(result)))
        lines.append(f"residual: {fmt(result.residual, digits)}")
        lines.append(f"iterations: {result.iterations}")
        summary.update({"residual": result.residual, "iterations": result.iterations})
    elif isinstance(result, list):
        mode = config.mode or "sald"
        artifacts.append((out, sweep_csv(result, mode, digits)))
        summary["rows"] = len(result)
    elif isinstance(result, AdmissibilityReport):
        artifacts.append((out, dumps(result)))
        lines.append(f"admissible: {_flag(result.admissible)}")
        lines.extend(
            f"condition {i}: slack {fmt(slack, digits)} ({_flag(ok)})"
            for i, (slack, ok) in enumerate(zip(result.slacks, result.holds), start=1)
        )
        summary["admissible"] = result.admissible
    elif isinstance(result, WorstCaseCertificate):
        artifacts.append((out, dumps(result)))
        lines.append(f"worst_lambda: {fmt(result.worst_lambda, digits)}")
        lines.append(f"resilient: {_flag(result.resilient)}")
        summary.update({"worst_lambda": result.worst_lambda, "resilient": result.resilient})
    elif isinstance(result, ContourGrid):
        artifacts.append((out, contour_csv(result, settings.contour_digits)))
        a1, a2 = result.argmax()
        peak = fmt(result.max_value, digits)
        lines.append(f"max: {peak} at ({fmt(a1, digits)}, {fmt(a2, digits)})")
        summary["max"] = result.max_value
    elif isinstance(result, Reproduction):
        extra_artifacts, extra_lines, extra_summary = _reproduction(result, config, digits)
        artifacts.extend(extra_artifacts)
        lines.extend(extra_lines)
        summary.update(extra_summary)

    if report is not None:
        lines.append(f"accepted: {_flag(report.accepted)}")
        summary["accepted"] = report.accepted
    if state.get("error"):
        if result is None:
            artifacts.append((out, dumps({"error": state["error"], "exit_code": 2})))
        lines.append(f"error: {state['error']}")
        summary["error"] = state["error"]

    next_state = dict(state)
    next_state.update({"artifacts": artifacts, "summary_lines": lines, "summary": summary})
    return next_state
