from __future__ import annotations

import logging
from typing import Any

from ..deps import Deps
from ..dynamic_equilibrium import solve_daltd
from ..errors import NoConvergence, SchemaError
from ..models import RunConfig
from ..reproduce import capacity_grid, reproduce_example
from ..shaping import certify_worst_case_price, contour_sweep, is_admissible
from ..static_equilibrium import price_capacity_sweep, solve_sald, solve_saltd

logger = logging.getLogger(__name__)


def _static_limits(config: RunConfig, deps: Deps) -> tuple[float, int]:
    settings = deps.settings
    return config.tol or settings.static_tol, config.max_iter or settings.static_max_iter


def _solve_dynamic(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    config: RunConfig = state["config"]
    settings = deps.settings
    try:
        eq = solve_daltd(
            state["scenario"],
            config.tol or settings.dynamic_tol,
            config.max_iter or settings.dynamic_max_iter,
            step_scale=settings.dynamic_step_scale,
            averaging_fraction=settings.dynamic_averaging_fraction,
            newton_polish=settings.dynamic_newton_polish,
            polish_after=settings.dynamic_polish_after,
        )
    except NoConvergence as exc:
        logger.error(
            "Dynamic solver did not converge",
            extra={
                "event": "dynamic_no_convergence",
                "solver": "daltd",
                "iteration": exc.iterations,
                "residual": exc.residual,
            },
        )
        return {"result": exc.equilibrium, "exit_code": 2, "error": str(exc)}
    return {"result": eq}


def solve_node(state: dict[str, Any], deps: Deps) -> dict[str, Any]:
    config: RunConfig = state["config"]
    command = config.command
    next_state = dict(state)
    next_state.setdefault("exit_code", 0)

    if command == "solve-sald":
        tol, max_iter = _static_limits(config, deps)
        next_state["result"] = solve_sald(
            state["scenario"], tol, max_iter=max_iter, balance_tol=deps.settings.balance_tol
        )
    elif command == "solve-saltd":
        tol, max_iter = _static_limits(config, deps)
        next_state["result"] = solve_saltd(
            state["scenario"], tol, max_iter=max_iter, balance_tol=deps.settings.balance_tol
        )
    elif command == "sweep-capacity":
        mode = config.mode or "sald"
        if mode == "daltd":
            raise SchemaError("sweep-capacity supports --mode sald or saltd", field="mode")
        tol, max_iter = _static_limits(config, deps)
        next_state["result"] = price_capacity_sweep(
            state["scenario"].utilities,
            capacity_grid(config.c_max, config.c_step),
            mode,
            tol=tol,
            max_iter=max_iter,
        )
    elif command == "shaping-check":
        next_state["result"] = is_admissible(state["scenario"])
    elif command == "shaping-certify":
        next_state["result"] = certify_worst_case_price(
            state["scenario"], config.budget, seed=config.seed
        )
    elif command == "shaping-contour":
        job = state["scenario"]
        next_state["result"] = contour_sweep(
            job.profile, job.axes, job.ranges, job.C, config.grid or job.grid
        )
    elif command == "solve-daltd":
        next_state.update(_solve_dynamic(state, deps))
    elif command == "verify":
        next_state["result"] = state["equilibrium"]
    elif command == "reproduce-example":
        settings = deps.settings
        assert config.example is not None
        try:
            next_state["result"] = reproduce_example(
                config.example,
                digits=settings.csv_digits,
                contour_digits=settings.contour_digits,
                dynamic_tol=config.tol or settings.dynamic_tol,
                dynamic_max_iter=config.max_iter or settings.dynamic_max_iter,
            )
        except NoConvergence as exc:
            next_state.update({"result": None, "exit_code": 2, "error": str(exc)})
    return next_state
