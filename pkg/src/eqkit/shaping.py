from __future__ import annotations

import logging
import math
import re
from collections.abc import Sequence

import numpy as np

from .errors import DimensionMismatch, PartialOrderViolated, ZeroCurvature
from .models import (
    AdmissibilityReport,
    ContourGrid,
    QuadraticPrice,
    QuadraticProfile,
    ShapingBounds,
    StaticScenario,
    WorstCaseCertificate,
)
from .static_equilibrium import solve_sald

logger = logging.getLogger(__name__)

EXACT_CORNER_LIMIT = 20
_AXIS = re.compile(r"^([kb])(\d+)$")


def quadratic_price(p: QuadraticProfile, C: float) -> QuadraticPrice:
    """Closed-form clearing price for quadratic agents, checked against the interior case."""
    if any(b == 0 for b in p.b):
        raise ZeroCurvature("closed-form price needs every b_i > 0")
    inverse = math.fsum(1.0 / b for b in p.b)
    weighted = math.fsum(k / b for k, b in zip(p.k, p.b))
    closed = (weighted - C) / inverse
    interior = 0.0 <= closed <= min(p.k)
    solver = None
    if not interior:
        scenario = StaticScenario.from_utilities(p.utilities(), [C / p.n] * p.n)
        solver = solve_sald(scenario).lambda_
    return QuadraticPrice(closed_form=closed, interior_valid=interior, solver=solver)


def is_admissible(bounds: ShapingBounds) -> AdmissibilityReport:
    n, C = bounds.n, bounds.C
    low_supply = n * bounds.k_min / bounds.b_max
    high_supply = n * bounds.k_max / bounds.b_min
    slacks = (
        low_supply - C,
        C - (high_supply - low_supply),
        C - (high_supply - n * bounds.lambda_dagger / bounds.b_max),
    )
    tol = 1e-12 * max(1.0, C)
    holds = (slacks[0] >= -tol, slacks[1] >= -tol, slacks[2] >= -tol)
    return AdmissibilityReport(admissible=all(holds), slacks=slacks, holds=holds)


def _corner_profiles(bounds: ShapingBounds) -> list[QuadraticProfile]:
    # Prices are symmetric in the agents, so a corner is fixed by how many agents sit at b_min.
    n = bounds.n
    k = [bounds.k_max] * n
    return [
        QuadraticProfile(k=k, b=[bounds.b_min] * j + [bounds.b_max] * (n - j))
        for j in range(n + 1)
    ]


def _stationary_refinement(
    bounds: ShapingBounds, profile: QuadraticProfile, price: float
) -> QuadraticProfile:
    # d price / d(1/b_i) has the sign of k_i - price.
    b = [bounds.b_min if k > price else bounds.b_max for k in profile.k]
    return QuadraticProfile(k=list(profile.k), b=b)


def certify_worst_case_price(
    bounds: ShapingBounds, budget: int = 1000, *, seed: int = 0
) -> WorstCaseCertificate:
    """Largest clearing price over the admissible box.

    The price grows with every k_i, so the search fixes k at k_max and scans the
    curvature corners, then adds ``budget`` uniform samples from the whole box.
    """
    best_price = -math.inf
    best_profile: QuadraticProfile | None = None
    evaluated = 0

    def consider(profile: QuadraticProfile) -> float:
        nonlocal best_price, best_profile, evaluated
        price = quadratic_price(profile, bounds.C).value
        evaluated += 1
        if price > best_price:
            best_price, best_profile = price, profile
        return price

    exact = bounds.n <= EXACT_CORNER_LIMIT
    for profile in _corner_profiles(bounds):
        consider(profile)
    assert best_profile is not None
    consider(_stationary_refinement(bounds, best_profile, best_price))

    rng = np.random.default_rng(seed)
    for _ in range(budget):
        k = rng.uniform(bounds.k_min, bounds.k_max, size=bounds.n)
        b = rng.uniform(bounds.b_min, bounds.b_max, size=bounds.n)
        consider(QuadraticProfile(k=k.tolist(), b=b.tolist()))

    assert best_profile is not None
    certificate = WorstCaseCertificate(
        worst_lambda=best_price,
        witness=best_profile,
        lambda_dagger=bounds.lambda_dagger,
        resilient=best_price <= bounds.lambda_dagger,
        exact=exact,
        evaluated=evaluated,
    )
    logger.info(
        "Worst-case price certified",
        extra={
            "event": "shaping_certified",
            "price": best_price,
            "extra": {"resilient": certificate.resilient, "evaluated": evaluated},
        },
    )
    return certificate


def monotonicity_check(p: QuadraticProfile, p_prime: QuadraticProfile, C: float) -> bool:
    """True when raising marginal values (k <= k' componentwise) does not lower the price."""
    if p.n != p_prime.n:
        raise DimensionMismatch("profiles must have the same number of agents")
    if list(p.b) != list(p_prime.b):
        raise ValueError("profiles must share the curvature vector b")
    if any(k > k2 for k, k2 in zip(p.k, p_prime.k)):
        raise PartialOrderViolated("k must be componentwise below k'")
    low = quadratic_price(p, C)
    high = quadratic_price(p_prime, C)
    if low.interior_valid and high.interior_valid:
        return low.value <= high.value + 1e-12
    return low.value <= high.value + 1e-9 * (1.0 + abs(high.value))


def _parse_axis(name: str, n: int) -> tuple[str, int]:
    match = _AXIS.match(name)
    if match is None:
        raise ValueError(f"axis {name!r} must look like k1 or b2")
    index = int(match.group(2))
    if not 1 <= index <= n:
        raise ValueError(f"axis {name!r} refers to agent {index}, profile has {n}")
    return match.group(1), index - 1


def _substitute(
    profile: QuadraticProfile, settings: Sequence[tuple[str, int, float]]
) -> QuadraticProfile:
    k, b = list(profile.k), list(profile.b)
    for param, index, value in settings:
        (k if param == "k" else b)[index] = value
    return QuadraticProfile(k=k, b=b)


def contour_sweep(
    profile: QuadraticProfile,
    axes: tuple[str, str],
    ranges: tuple[tuple[float, float], tuple[float, float]],
    C: float,
    grid: int = 11,
) -> ContourGrid:
    """Clearing price over a grid of two free profile parameters, rows along the first axis."""
    if grid < 2:
        raise ValueError("grid needs at least two points per axis")
    first = _parse_axis(axes[0], profile.n)
    second = _parse_axis(axes[1], profile.n)
    if first == second:
        raise ValueError("contour axes must be two different parameters")
    axis1 = np.linspace(ranges[0][0], ranges[0][1], grid).tolist()
    axis2 = np.linspace(ranges[1][0], ranges[1][1], grid).tolist()
    values = [
        [
            quadratic_price(
                _substitute(profile, [(*first, v1), (*second, v2)]), C
            ).value
            for v2 in axis2
        ]
        for v1 in axis1
    ]
    return ContourGrid(axes=axes, axis1=axis1, axis2=axis2, values=values)
