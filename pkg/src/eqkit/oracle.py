"""Brute-force reference solvers used to falsify the equilibrium solvers.

Nothing here shares code with the solvers beyond utility evaluation: the grids
search loads directly instead of going through prices and best responses.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from .errors import DimensionMismatch, GridTooLarge, InfeasiblePoint, InfeasibleScenario
from .models import (
    CappedLinearUtility,
    DynamicScenario,
    Mode,
    OracleResult,
    QuadraticUtility,
    StaticScenario,
    UtilityFunction,
)
from .utility import best_payoff, evaluate, piecewise_values

logger = logging.getLogger(__name__)

MAX_DP_CELLS = 1_000_000
MAX_GRID_POINTS = 10_000_000


def welfare(utilities: Sequence[UtilityFunction], x: Sequence[float]) -> float:
    return math.fsum(evaluate(u, xi) for u, xi in zip(utilities, x, strict=True))


def dual_value(utilities: Sequence[UtilityFunction], capacity: float, lam: float) -> float:
    """L*(lambda) = sum_i max_x [f_i(x) + lambda (a_i - x)]; only the total capacity matters."""
    total = math.fsum(best_payoff(u, lam) for u in utilities)
    return total + lam * capacity


def duality_gap(
    s: StaticScenario,
    lam: float,
    x: Sequence[float],
    *,
    mode: Mode = "sald",
    tol: float = 1e-6,
) -> float:
    if len(x) != s.n:
        raise DimensionMismatch(f"allocation has {len(x)} entries for {s.n} agents")
    capacity = s.capacity
    slack = tol * max(1.0, capacity)
    if any(xi < -slack for xi in x):
        raise InfeasiblePoint("allocation has negative entries")
    total = math.fsum(x)
    if mode == "sald" and abs(total - capacity) > slack:
        raise InfeasiblePoint(f"allocation sums to {total}, capacity is {capacity}")
    if mode == "saltd":
        if total > capacity + slack:
            raise InfeasiblePoint(f"allocation sums to {total}, above capacity {capacity}")
        if lam < 0:
            raise InfeasiblePoint("trading prices must be nonnegative")
    primal = welfare(s.utilities, [max(0.0, xi) for xi in x])
    return dual_value(s.utilities, capacity, lam) - primal


def _grid_values(u: UtilityFunction, grid: np.ndarray) -> np.ndarray:
    if isinstance(u, QuadraticUtility):
        return -0.5 * u.b * grid * grid + u.k * grid
    if isinstance(u, CappedLinearUtility):
        return np.minimum(u.k * grid, u.beta)
    return piecewise_values(u, grid)


def _max_plus(head: np.ndarray, tail: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """best[q] = max_j head[j] + tail[q - j]; ties go to the smallest j."""
    size = len(tail)
    best = np.empty(size)
    choice = np.empty(size, dtype=np.int64)
    for q in range(size):
        cand = head[: q + 1] + tail[q::-1]
        j = int(np.argmax(cand))
        best[q] = cand[j]
        choice[q] = j
    return best, choice


def _dp_welfare(s: StaticScenario, resolution: float, *, equality: bool) -> OracleResult:
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    capacity = s.capacity
    cells = int(round(capacity / resolution))
    if cells > MAX_DP_CELLS:
        raise GridTooLarge(f"{cells} capacity cells exceed the limit of {MAX_DP_CELLS}")
    grid = np.arange(cells + 1) * resolution
    values = [_grid_values(u, grid) for u in s.utilities]
    n = s.n

    # Agents are folded in from the last one so the first agent picks last,
    # taking the smallest load among ties.
    tail = values[-1]
    last_choice = np.arange(cells + 1)
    if not equality:
        running = np.maximum.accumulate(tail)
        improves = tail > np.concatenate(([-np.inf], running[:-1]))
        last_choice = np.maximum.accumulate(np.where(improves, last_choice, 0))
        tail = running
    choices: list[np.ndarray] = []
    for k in range(n - 2, 0, -1):
        tail, choice = _max_plus(values[k], tail)
        choices.insert(0, choice)

    units = []
    if n == 1:
        remaining = cells
    else:
        top = values[0] + tail[::-1]
        first = int(np.argmax(top))
        units.append(first)
        remaining = cells - first
        for choice in choices:
            j = int(choice[remaining])
            units.append(j)
            remaining -= j
    units.append(int(last_choice[remaining]))

    allocation = [j * resolution for j in units]
    total = math.fsum(float(v[j]) for v, j in zip(values, units))
    result = OracleResult(
        welfare=total,
        allocation=allocation,
        resolution=resolution,
        target=capacity,
        snap_error=abs(cells * resolution - capacity),
    )
    logger.debug(
        "Capacity-grid oracle solved",
        extra={
            "event": "oracle_dp",
            "solver": "sald" if equality else "saltd",
            "extra": {"cells": cells, "welfare": total},
        },
    )
    return result


def dp_welfare_sald(s: StaticScenario, resolution: float) -> OracleResult:
    return _dp_welfare(s, resolution, equality=True)


def dp_welfare_saltd(s: StaticScenario, resolution: float) -> OracleResult:
    return _dp_welfare(s, resolution, equality=False)


def _control_grid(lo: float, hi: float, resolution: float, dims: int) -> np.ndarray:
    steps = int(round((hi - lo) / resolution))
    axis = lo + np.arange(steps + 1) * resolution
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _candidate_scores(
    s: DynamicScenario, index: int, controls: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Horizon utility and per-step resource use of every candidate control sequence."""
    agent = s.agents[index]
    T, m = s.T, s.m
    A = np.asarray(agent.A, dtype=float)
    B = np.asarray(agent.B, dtype=float)
    R = np.asarray(agent.R, dtype=float)
    Q = np.asarray(agent.Q, dtype=float)
    H = np.asarray(agent.H, dtype=float)
    W = np.asarray(agent.W, dtype=float)
    K = np.asarray(agent.K, dtype=float)
    R_T, W_T = (np.asarray(v, dtype=float) for v in agent.terminal_weights())

    u = controls.reshape(-1, T, m)
    y = np.broadcast_to(np.asarray(agent.y0, dtype=float), (u.shape[0], m))
    score = np.zeros(u.shape[0])
    usage = np.empty((u.shape[0], T))
    for t in range(T):
        ut = u[:, t, :]
        score += np.einsum("ci,ij,cj->c", y, R, y) + y @ W
        score += np.einsum("ci,ij,cj->c", ut, Q, ut) + ut @ K
        usage[:, t] = np.einsum("ci,ij,cj->c", ut, H, ut)
        y = y @ A.T + ut @ B.T
    score += np.einsum("ci,ij,cj->c", y, R_T, y) + y @ W_T
    return score, usage


def grid_search_daltd(
    s: DynamicScenario, box: tuple[float, float], resolution: float
) -> OracleResult:
    """Exhaustive search over gridded controls with trades eliminated.

    Trades only move resource between agents, so a control profile is feasible
    exactly when total usage fits total supply at every step.
    """
    lo, hi = box
    if resolution <= 0 or hi < lo:
        raise ValueError("need a positive resolution and lo <= hi")
    dims = s.T * s.m
    per_axis = int(round((hi - lo) / resolution)) + 1
    per_agent = per_axis**dims
    if per_agent**s.n > MAX_GRID_POINTS:
        raise GridTooLarge(
            f"{per_agent}^{s.n} candidate profiles exceed the limit of {MAX_GRID_POINTS}"
        )

    controls = _control_grid(lo, hi, resolution, dims)
    total_score: np.ndarray | None = None
    total_usage: np.ndarray | None = None
    for i in range(s.n):
        score, usage = _candidate_scores(s, i, controls)
        if total_score is None or total_usage is None:
            total_score, total_usage = score, usage
            continue
        total_score = (total_score[:, None] + score[None, :]).ravel()
        total_usage = (total_usage[:, None, :] + usage[None, :, :]).reshape(-1, s.T)
    assert total_score is not None and total_usage is not None

    supply = s.total_supply()
    feasible = np.all(total_usage <= supply + 1e-12, axis=1)
    if not feasible.any():
        raise InfeasibleScenario("no gridded control profile fits the supply")
    best = int(np.argmax(np.where(feasible, total_score, -np.inf)))
    picks = np.unravel_index(best, (len(controls),) * s.n)
    allocation = [float(v) for p in picks for v in controls[int(p)]]
    return OracleResult(
        welfare=float(total_score[best]),
        allocation=allocation,
        resolution=resolution,
    )
