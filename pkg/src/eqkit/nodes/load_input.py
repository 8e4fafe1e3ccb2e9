from __future__ import annotations

import json
from typing import Any

from pydantic import BaseModel

from ..artifacts import digest, parse_model, read_text
from ..deps import Deps
from ..errors import SchemaError
from ..models import (
    ContourJob,
    DynamicEquilibrium,
    DynamicScenario,
    RunConfig,
    ShapingBounds,
    StaticEquilibrium,
    StaticScenario,
    UtilityTemplate,
)

INPUT_MODELS: dict[str, type[BaseModel]] = {
    "solve-sald": StaticScenario,
    "solve-saltd": StaticScenario,
    "sweep-capacity": UtilityTemplate,
    "shaping-check": ShapingBounds,
    "shaping-certify": ShapingBounds,
    "shaping-contour": ContourJob,
    "solve-daltd": DynamicScenario,
}


def _load_equilibrium(config: RunConfig) -> tuple[BaseModel, type[BaseModel]]:
    if config.equilibrium_path is None:
        raise SchemaError("verify needs --equilibrium", field="equilibrium")
    text = read_text(config.equilibrium_path)
    source = str(config.equilibrium_path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.msg, path=source, line=exc.lineno) from exc
    if config.mode == "daltd" or (isinstance(data, dict) and "U" in data):
        return parse_model(text, DynamicEquilibrium, source=source), DynamicScenario
    return parse_model(text, StaticEquilibrium, source=source), StaticScenario


def load_input_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    config: RunConfig = state["config"]
    next_state = dict(state)
    if config.command == "reproduce-example":
        if config.example is None:
            raise SchemaError("reproduce-example needs --example", field="example")
        next_state.update({"input_digest": None})
        return next_state

    if config.command == "verify":
        equilibrium, model = _load_equilibrium(config)
        next_state["equilibrium"] = equilibrium
    else:
        model = INPUT_MODELS[config.command]
    if config.input_path is None:
        raise SchemaError(f"{config.command} needs --input", field="input")
    text = read_text(config.input_path)
    next_state.update(
        {
            "scenario": parse_model(text, model, source=str(config.input_path)),
            "input_digest": digest(text),
        }
    )
    return next_state
