"""Reading scenario files and writing result artifacts."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from collections.abc import Iterable, Sequence
from importlib import resources
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from .errors import SchemaError
from .models import ContourGrid, DynamicEquilibrium

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def json_ready(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return json_ready(value.model_dump(by_alias=True))
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if hasattr(value, "tolist"):
        return json_ready(value.tolist())
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(json_ready(payload), indent=2) + "\n"


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _line_of(text: str, loc: Sequence[int | str]) -> int | None:
    keys = [part for part in loc if isinstance(part, str)]
    if not keys:
        return None
    pos = text.find(f'"{keys[-1]}"')
    if pos < 0:
        return None
    return text.count("\n", 0, pos) + 1


def parse_model(text: str, model: type[ModelT], *, source: str = "<input>") -> ModelT:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, path=source, line=exc.lineno) from exc
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = tuple(first["loc"])
        raise SchemaError(
            first["msg"],
            path=source,
            line=_line_of(text, loc),
            field=".".join(str(part) for part in loc) or None,
        ) from exc


def read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise SchemaError("file not found", path=str(path)) from exc


def load_model(path: Path, model: type[ModelT]) -> ModelT:
    return parse_model(read_text(path), model, source=str(path))


def fixture_text(name: str) -> str:
    return resources.files("eqkit").joinpath("fixtures").joinpath(name).read_text(encoding="utf-8")


def load_fixture(name: str, model: type[ModelT]) -> ModelT:
    return parse_model(fixture_text(name), model, source=f"fixtures/{name}")


def write_text(path: Path | None, text: str) -> None:
    """Write an artifact, or print it when no path is given."""
    if path is None:
        print(text, end="")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info(
        "Artifact written",
        extra={"event": "artifact_written", "extra": {"path": str(path), "bytes": len(text)}},
    )


def fmt(value: float, digits: int) -> str:
    return f"{value:.{digits}g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def sweep_csv(rows: Iterable[tuple[float, float]], mode: str, digits: int = 12) -> str:
    return csv_text(
        ["C", f"lambda_{mode}"], ([fmt(c, digits), fmt(lam, digits)] for c, lam in rows)
    )


def contour_csv(grid: ContourGrid, digits: int = 9) -> str:
    header = [f"{grid.axes[0]}\\{grid.axes[1]}", *(fmt(v, digits) for v in grid.axis2)]
    rows = (
        [fmt(v1, digits), *(fmt(cell, digits) for cell in row)]
        for v1, row in zip(grid.axis1, grid.values)
    )
    return csv_text(header, rows)


def price_csv(eq: DynamicEquilibrium, digits: int = 12) -> str:
    return csv_text(["t", "lambda"], ([t, fmt(v, digits)] for t, v in enumerate(eq.lambda_)))


def trajectory_csv(eq: DynamicEquilibrium, digits: int = 12) -> str:
    rows = []
    for agent, Y in enumerate(eq.Y or [], start=1):
        for t, y in enumerate(Y):
            for dim, value in enumerate(y, start=1):
                rows.append([t, agent, dim, fmt(value, digits)])
    return csv_text(["t", "agent", "dim", "y"], rows)


def trajectory_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}_trajectory.csv")
