from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeLoad
from .models import (
    CappedLinearUtility,
    PiecewiseLinearUtility,
    QuadraticUtility,
    UtilityFunction,
)

SLOPE_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class ResponseInterval:
    """Argmax set of f(x) - lambda x over x >= 0.

    ``hi is None`` encodes UNBOUNDED. With ``indifferent`` set every point of the
    interval is a maximizer; an unbounded interval without it means the payoff
    grows without limit from ``lo`` onwards and no finite maximizer exists.
    """

    lo: float
    hi: float | None
    indifferent: bool = False

    @property
    def exploding(self) -> bool:
        return self.hi is None and not self.indifferent

    @property
    def upper(self) -> float:
        return math.inf if self.hi is None else self.hi

    def distance(self, x: float) -> float:
        if self.exploding:
            return math.inf
        if x < self.lo:
            return self.lo - x
        return max(0.0, x - self.upper)


def evaluate(u: UtilityFunction, x: float) -> float:
    if x < 0:
        raise NegativeLoad(f"load must be nonnegative, got {x!r}")
    if isinstance(u, QuadraticUtility):
        return -0.5 * u.b * x * x + u.k * x
    if isinstance(u, CappedLinearUtility):
        return min(u.k * x, u.beta)
    return _piecewise_value(u, x)


def _knots(u: PiecewiseLinearUtility) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(u.points, dtype=float)
    return points[:, 0], points[:, 1]


def piecewise_values(u: PiecewiseLinearUtility, x: np.ndarray) -> np.ndarray:
    """Vectorised f(x); the last segment extends past the final breakpoint."""
    xs, fs = _knots(u)
    x = np.asarray(x, dtype=float)
    values = np.interp(x, xs, fs)
    beyond = x > xs[-1]
    values[beyond] = fs[-1] + u.slopes[-1] * (x[beyond] - xs[-1])
    return values


def _piecewise_value(u: PiecewiseLinearUtility, x: float) -> float:
    return float(piecewise_values(u, np.array([x]))[0])


def slope(u: UtilityFunction, x: float) -> float:
    """Right derivative of f at x (the analytic slope inside a segment)."""
    if x < 0:
        raise NegativeLoad(f"load must be nonnegative, got {x!r}")
    if isinstance(u, QuadraticUtility):
        return u.k - u.b * x
    if isinstance(u, CappedLinearUtility):
        return u.k if u.k * x < u.beta else 0.0
    xs, _ = _knots(u)
    j = min(int(np.searchsorted(xs, x, side="right")) - 1, len(xs) - 2)
    return u.slopes[j]


def marginal_at_zero(u: UtilityFunction) -> float:
    return slope(u, 0.0)


def kink_prices(u: UtilityFunction) -> list[float]:
    """Prices at which the demand map jumps or stops responding."""
    if isinstance(u, QuadraticUtility):
        return [u.k]
    if isinstance(u, CappedLinearUtility):
        return [0.0, u.k]
    return list(u.slopes)


def check_concavity(u: UtilityFunction) -> bool:
    if isinstance(u, QuadraticUtility):
        return u.b >= 0 and u.k >= 0
    if isinstance(u, CappedLinearUtility):
        return u.k > 0 and u.beta > 0
    slopes = u.slopes
    return all(s1 <= s0 + SLOPE_TOL for s0, s1 in zip(slopes, slopes[1:]))


def best_response(u: UtilityFunction, lam: float) -> ResponseInterval:
    if isinstance(u, QuadraticUtility):
        if u.b > 0:
            x = max(0.0, (u.k - lam) / u.b)
            return ResponseInterval(x, x)
        if lam > u.k:
            return ResponseInterval(0.0, 0.0)
        return ResponseInterval(0.0, None, indifferent=lam == u.k)
    if isinstance(u, CappedLinearUtility):
        kink = u.beta / u.k
        if lam <= 0:
            return ResponseInterval(kink, None, indifferent=lam == 0)
        if lam < u.k:
            return ResponseInterval(kink, kink)
        if lam == u.k:
            return ResponseInterval(0.0, kink, indifferent=True)
        return ResponseInterval(0.0, 0.0)
    return _piecewise_response(u, lam)


def _piecewise_response(u: PiecewiseLinearUtility, lam: float) -> ResponseInterval:
    # Concave tabulation: segments where the slope beats the price come first,
    # then segments that tie it, then the ones below it.
    xs = [p[0] for p in u.points]
    net = [s - lam for s in u.slopes]
    rising = sum(1 for d in net if d > SLOPE_TOL)
    flat = sum(1 for d in net if abs(d) <= SLOPE_TOL)
    if net[-1] > SLOPE_TOL:
        return ResponseInterval(xs[-1], None)
    if abs(net[-1]) <= SLOPE_TOL:
        return ResponseInterval(xs[rising], None, indifferent=True)
    lo = xs[rising]
    hi = xs[rising + flat]
    return ResponseInterval(lo, hi, indifferent=hi > lo)


def payoff(u: UtilityFunction, x: float, lam: float) -> float:
    """Price-dependent part of an agent's payoff, f(x) - lambda x."""
    return evaluate(u, x) - lam * x


def best_payoff(u: UtilityFunction, lam: float) -> float:
    response = best_response(u, lam)
    if response.exploding:
        return math.inf
    return payoff(u, response.lo, lam)
