from __future__ import annotations

import logging
from typing import Any

from ..deps import Deps

logger = logging.getLogger(__name__)


def record_run_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    if deps.store is None:
        return state
    config = state["config"]
    summary = dict(state.get("summary") or {})
    summary["artifacts"] = state.get("written", [])
    run_id = deps.store.record_run(
        command=config.command,
        input_digest=state.get("input_digest"),
        exit_code=int(state.get("exit_code", 0)),
        summary=summary,
    )
    logger.debug(
        "Run recorded",
        extra={"event": "run_recorded", "command": config.command, "extra": {"run_id": run_id}},
    )
    next_state = dict(state)
    next_state["run_id"] = run_id
    return next_state
