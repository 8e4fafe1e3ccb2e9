from __future__ import annotations

from typing import Any

from ..artifacts import write_text
from ..deps import Deps


def write_artifacts_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    written: list[str] = []
    for path, text in state.get("artifacts", []):
        write_text(path, text)
        written.append("-" if path is None else str(path))
    next_state = dict(state)
    next_state["written"] = written
    return next_state
