from __future__ import annotations

from typing import Any

from ..deps import Deps
from ..dynamic_equilibrium import verify_dynamic_equilibrium
from ..models import DynamicEquilibrium, Mode, RunConfig, StaticEquilibrium
from ..oracle import dp_welfare_sald, dp_welfare_saltd
from ..static_equilibrium import verify_equilibrium

STATIC_VERIFY_TOL = 1e-6
DYNAMIC_PAYOFF_TOL = 1e-3


def verify_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    config: RunConfig = state["config"]
    result = state.get("result")
    next_state = dict(state)
    # Solver runs verify their own output at the default acceptance tolerance;
    # --tol then only tightens the solver.
    tol = config.tol if config.command == "verify" and config.tol else None

    if isinstance(result, StaticEquilibrium):
        mode: Mode = result.mode
        if config.mode == "sald" or config.mode == "saltd":
            mode = config.mode
        report = verify_equilibrium(
            state["scenario"], result, mode, tol=tol or STATIC_VERIFY_TOL
        )
        if config.resolution is not None:
            dp = dp_welfare_sald if mode == "sald" else dp_welfare_saltd
            oracle = dp(state["scenario"], config.resolution)
            report = report.model_copy(
                update={
                    "oracle_welfare": oracle.welfare,
                    "oracle_gap": report.welfare - oracle.welfare,
                }
            )
        next_state["verification"] = report
    elif isinstance(result, DynamicEquilibrium):
        next_state["verification"] = verify_dynamic_equilibrium(
            state["scenario"],
            result,
            payoff_tol=DYNAMIC_PAYOFF_TOL,
            balance_tol=tol or config.tol or deps.settings.dynamic_tol,
        )
    return next_state
