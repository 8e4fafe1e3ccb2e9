from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import DimensionMismatch, InfeasibleBalance, NonConcaveUtility
from .models import (
    Mode,
    StaticEquilibrium,
    StaticScenario,
    StaticVerificationReport,
    UtilityFunction,
)
from .oracle import dual_value, welfare
from .utility import (
    ResponseInterval,
    best_payoff,
    best_response,
    check_concavity,
    evaluate,
    kink_prices,
    marginal_at_zero,
    payoff,
    slope,
)

logger = logging.getLogger(__name__)

MAX_BRACKET_DOUBLINGS = 200
BALANCE_TOL = 1e-9

_TOO_LOW = -1
_CLEARS = 0
_TOO_HIGH = 1


@dataclass(frozen=True)
class _Clearing:
    price: float
    lo_alloc: list[float]
    hi_alloc: list[float]
    iterations: int


def _require_concave(utilities: Sequence[UtilityFunction]) -> None:
    for i, u in enumerate(utilities, start=1):
        if not check_concavity(u):
            raise NonConcaveUtility(f"agent {i}: utility {u.type} is not concave")


def _responses(utilities: Sequence[UtilityFunction], lam: float) -> list[ResponseInterval]:
    return [best_response(u, lam) for u in utilities]


def _demand_state(responses: Sequence[ResponseInterval], capacity: float) -> int:
    if any(r.exploding for r in responses):
        return _TOO_HIGH
    if math.fsum(r.lo for r in responses) > capacity:
        return _TOO_HIGH
    if math.fsum(r.upper for r in responses) < capacity:
        return _TOO_LOW
    return _CLEARS


def _clearing_price(
    utilities: Sequence[UtilityFunction],
    capacity: float,
    *,
    tol: float,
    max_iter: int,
    price_floor: float | None,
) -> _Clearing:
    """Bisection on the aggregate demand correspondence.

    The bracket keeps demand at ``lo`` at or above capacity and demand at ``hi``
    at or below it. With ``price_floor`` set the search never goes under it and a
    floor price with demand that fits is returned as is.
    """

    def state(lam: float) -> tuple[int, list[ResponseInterval]]:
        responses = _responses(utilities, lam)
        return _demand_state(responses, capacity), responses

    hi = max(0.0, max(marginal_at_zero(u) for u in utilities)) + 1.0
    s_hi, _ = state(hi)
    if s_hi == _TOO_HIGH:
        raise InfeasibleBalance(f"demand exceeds capacity {capacity} at price {hi}")

    lo = 0.0
    s_lo, responses = state(lo)
    if s_lo == _CLEARS or (price_floor is not None and s_lo == _TOO_LOW):
        return _Clearing(lo, [r.lo for r in responses], [r.upper for r in responses], 0)
    if s_lo == _TOO_LOW:
        step = 1.0
        for _ in range(MAX_BRACKET_DOUBLINGS):
            s_lo, responses = state(-step)
            if s_lo != _TOO_LOW:
                break
            step *= 2.0
        else:
            raise InfeasibleBalance(
                f"no finite price clears capacity {capacity}: demand stays below it"
            )
        hi, lo = (-step / 2.0 if step > 1.0 else 0.0), -step
        if s_lo == _CLEARS:
            return _Clearing(lo, [r.lo for r in responses], [r.upper for r in responses], 0)

    iterations = 0
    while iterations < max_iter and hi - lo > tol:
        iterations += 1
        mid = 0.5 * (lo + hi)
        s_mid, responses = state(mid)
        if s_mid == _TOO_HIGH:
            lo = mid
        elif s_mid == _TOO_LOW:
            hi = mid
        else:
            return _Clearing(
                mid, [r.lo for r in responses], [r.upper for r in responses], iterations
            )

    kinks = sorted({p for u in utilities for p in kink_prices(u) if lo <= p <= hi})
    for kink in kinks:
        s_kink, responses = state(kink)
        if s_kink == _CLEARS:
            return _Clearing(
                kink, [r.lo for r in responses], [r.upper for r in responses], iterations
            )
    # Demand is monotone, so its hull across the final bracket straddles capacity.
    lo_alloc = [r.lo for r in _responses(utilities, hi)]
    hi_alloc = [r.upper for r in _responses(utilities, lo)]
    return _Clearing(0.5 * (lo + hi), lo_alloc, hi_alloc, iterations)


def _reconcile(
    lo_alloc: Sequence[float],
    hi_alloc: Sequence[float],
    target: float,
    order: Iterable[int],
    balance_tol: float = BALANCE_TOL,
) -> list[float]:
    """Start every agent at its lower end and hand out the remainder in id order."""
    x = list(lo_alloc)
    remainder = target - math.fsum(x)
    tol = balance_tol * max(1.0, abs(target))
    if remainder < -tol:
        raise InfeasibleBalance(f"lower allocations exceed target by {-remainder:.3e}")
    for i in order:
        if remainder <= 0:
            break
        take = min(remainder, hi_alloc[i] - x[i])
        x[i] += take
        remainder -= take
    if remainder > tol:
        raise InfeasibleBalance(f"upper allocations fall short of target by {remainder:.3e}")
    return x


def _fill_order(s: StaticScenario) -> list[int]:
    return sorted(range(s.n), key=lambda i: s.agents[i].id)


def shrink_trades(slack: Sequence[float]) -> list[float]:
    """Zero-price trades: buyers keep their slack, sellers shrink proportionally to balance."""
    sellers = math.fsum(s for s in slack if s > 0)
    surplus = math.fsum(slack)
    if surplus <= 0 or sellers <= 0:
        return list(slack)
    keep = 1.0 - surplus / sellers
    return [s * keep if s > 0 else s for s in slack]


def solve_sald(
    s: StaticScenario,
    tol: float = 1e-9,
    *,
    max_iter: int = 200,
    balance_tol: float = BALANCE_TOL,
) -> StaticEquilibrium:
    utilities = s.utilities
    _require_concave(utilities)
    capacity = s.capacity
    clearing = _clearing_price(
        utilities, capacity, tol=tol, max_iter=max_iter, price_floor=None
    )
    x = _reconcile(
        clearing.lo_alloc, clearing.hi_alloc, capacity, _fill_order(s), balance_tol
    )
    gap = dual_value(utilities, capacity, clearing.price) - welfare(utilities, x)
    eq = StaticEquilibrium(
        mode="sald",
        lambda_=clearing.price,
        x=x,
        duality_gap=max(0.0, gap),
        balance_residual=math.fsum(x) - capacity,
        iterations=clearing.iterations,
    )
    logger.info(
        "Static equilibrium solved",
        extra={
            "event": "static_solved",
            "solver": "sald",
            "price": eq.lambda_,
            "iteration": clearing.iterations,
            "residual": eq.balance_residual,
        },
    )
    return eq


def solve_saltd(
    s: StaticScenario,
    tol: float = 1e-9,
    *,
    max_iter: int = 200,
    balance_tol: float = BALANCE_TOL,
) -> StaticEquilibrium:
    utilities = s.utilities
    _require_concave(utilities)
    capacity = s.capacity
    a = [agent.a for agent in s.agents]
    clearing = _clearing_price(
        utilities, capacity, tol=tol, max_iter=max_iter, price_floor=0.0
    )
    if clearing.price > 0:
        x = _reconcile(
            clearing.lo_alloc, clearing.hi_alloc, capacity, _fill_order(s), balance_tol
        )
        e = [ai - xi for ai, xi in zip(a, x)]
    else:
        x = list(clearing.lo_alloc)
        e = shrink_trades([ai - xi for ai, xi in zip(a, x)])
    price = max(0.0, clearing.price)
    gap = dual_value(utilities, capacity, price) - welfare(utilities, x)
    eq = StaticEquilibrium(
        mode="saltd",
        lambda_=price,
        x=x,
        e=e,
        duality_gap=max(0.0, gap),
        balance_residual=math.fsum(e),
        iterations=clearing.iterations,
    )
    logger.info(
        "Static equilibrium solved",
        extra={
            "event": "static_solved",
            "solver": "saltd",
            "price": eq.lambda_,
            "iteration": clearing.iterations,
            "residual": eq.balance_residual,
        },
    )
    return eq


def _gap_limit(u: UtilityFunction, x: float, lam: float, best: float, tol: float) -> float:
    """Payoff loss allowed for a load within the distance tolerance of a best response."""
    if math.isinf(best):
        return 0.0
    # f is concave, so |f'| on [0, x] peaks at an endpoint.
    steepest = max(abs(slope(u, 0.0)), abs(slope(u, x))) + abs(lam)
    return tol * (1.0 + abs(best)) + tol * max(1.0, abs(x)) * steepest


def verify_equilibrium(
    s: StaticScenario,
    eq: StaticEquilibrium,
    mode: Mode | None = None,
    *,
    tol: float = 1e-6,
) -> StaticVerificationReport:
    mode = mode or eq.mode
    n = s.n
    if len(eq.x) != n:
        raise DimensionMismatch(f"allocation has {len(eq.x)} entries for {n} agents")
    if mode == "saltd" and (eq.e is None or len(eq.e) != n):
        raise DimensionMismatch("SALTD verification needs a trade vector with one entry per agent")

    lam = eq.lambda_
    capacity = s.capacity
    scale = max(1.0, capacity)
    utilities = s.utilities

    gaps: list[float] = []
    gap_limits: list[float] = []
    distances: list[float] = []
    violation = 0.0
    for u, xi in zip(utilities, eq.x):
        if xi < 0:
            gaps.append(math.inf)
            gap_limits.append(0.0)
            distances.append(-xi)
            violation = max(violation, -xi)
            continue
        best = best_payoff(u, lam)
        gaps.append(best - payoff(u, xi, lam))
        gap_limits.append(_gap_limit(u, xi, lam, best, tol))
        distances.append(best_response(u, lam).distance(xi))

    if mode == "saltd":
        assert eq.e is not None
        residual = math.fsum(eq.e)
        for agent, xi, ei in zip(s.agents, eq.x, eq.e):
            violation = max(violation, xi + ei - agent.a)
    else:
        residual = math.fsum(eq.x) - capacity
    price_violation = mode == "saltd" and lam < 0

    primal = math.fsum(evaluate(u, max(0.0, xi)) for u, xi in zip(utilities, eq.x))
    duality_gap = abs(dual_value(utilities, capacity, lam) - primal)

    accepted = (
        all(d <= tol * max(1.0, abs(xi)) for d, xi in zip(distances, eq.x))
        and all(g <= limit for g, limit in zip(gaps, gap_limits))
        and abs(residual) <= tol * scale
        and violation <= tol * scale
        and not price_violation
        and duality_gap <= tol * (1.0 + abs(primal))
    )
    report = StaticVerificationReport(
        mode=mode,
        lambda_=lam,
        accepted=accepted,
        tolerance=tol,
        payoff_gaps=gaps,
        response_distances=distances,
        balance_residual=residual,
        max_constraint_violation=violation,
        price_violation=price_violation,
        duality_gap=duality_gap,
        welfare=primal,
    )
    logger.info(
        "Static equilibrium verified",
        extra={
            "event": "static_verified",
            "solver": mode,
            "price": lam,
            "residual": residual,
            "extra": {"accepted": accepted, "max_gap": report.max_gap},
        },
    )
    return report


def price_capacity_sweep(
    template: Sequence[UtilityFunction],
    C_values: Iterable[float],
    mode: Mode,
    *,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> list[tuple[float, float]]:
    """Clearing price per capacity, with the capacity split evenly across agents.

    Only the total C enters the SALD and SALTD welfare problems, so the even
    split does not change the price.
    """
    values = sorted(float(c) for c in C_values)
    if any(not math.isfinite(c) or c <= 0 for c in values):
        raise ValueError("capacities must be positive and finite")
    n = len(template)
    solve = solve_sald if mode == "sald" else solve_saltd
    rows: list[tuple[float, float]] = []
    for c in values:
        scenario = StaticScenario.from_utilities(list(template), [c / n] * n)
        rows.append((c, solve(scenario, tol, max_iter=max_iter).lambda_))
    return rows
