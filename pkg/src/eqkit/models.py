from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, Union, get_args

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    FiniteFloat,
    field_validator,
    model_validator,
)

Mode = Literal["sald", "saltd"]
Command = Literal[
    "solve-sald",
    "solve-saltd",
    "shaping-check",
    "shaping-certify",
    "shaping-contour",
    "sweep-capacity",
    "solve-daltd",
    "verify",
    "reproduce-example",
]
COMMANDS: tuple[str, ...] = get_args(Command)


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


class QuadraticUtility(_Frozen):
    """f(x) = -b x^2 / 2 + k x."""

    type: Literal["quadratic"] = "quadratic"
    b: FiniteFloat
    k: FiniteFloat


class CappedLinearUtility(_Frozen):
    """f(x) = min(k x, beta)."""

    type: Literal["capped_linear"] = "capped_linear"
    k: FiniteFloat
    beta: FiniteFloat


class PiecewiseLinearUtility(_Frozen):
    """Linear interpolation of tabulated points; the last segment extends to infinity."""

    type: Literal["piecewise_linear"] = "piecewise_linear"
    points: tuple[tuple[FiniteFloat, FiniteFloat], ...]

    @field_validator("points")
    @classmethod
    def _check_breakpoints(
        cls, value: tuple[tuple[float, float], ...]
    ) -> tuple[tuple[float, float], ...]:
        if len(value) < 2:
            raise ValueError("piecewise_linear needs at least two points")
        if value[0][0] != 0.0:
            raise ValueError("first breakpoint must sit at x = 0")
        xs = [p[0] for p in value]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing in x")
        return value

    @property
    def slopes(self) -> list[float]:
        return [
            (f1 - f0) / (x1 - x0)
            for (x0, f0), (x1, f1) in zip(self.points, self.points[1:])
        ]


UtilityFunction = Annotated[
    Union[QuadraticUtility, CappedLinearUtility, PiecewiseLinearUtility],
    Field(discriminator="type"),
]


class AgentSpec(_Frozen):
    id: int = Field(ge=1)
    utility: UtilityFunction
    a: FiniteFloat = Field(ge=0)


class StaticScenario(_Frozen):
    agents: list[AgentSpec] = Field(min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _number_agents(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("agents"), list):
            agents = []
            for pos, agent in enumerate(data["agents"], start=1):
                if isinstance(agent, dict) and "id" not in agent:
                    agent = {**agent, "id": pos}
                agents.append(agent)
            data = {**data, "agents": agents}
        return data

    @field_validator("agents")
    @classmethod
    def _unique_ids(cls, value: list[AgentSpec]) -> list[AgentSpec]:
        ids = [a.id for a in value]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        return value

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def capacity(self) -> float:
        return float(sum(a.a for a in self.agents))

    @property
    def utilities(self) -> list[UtilityFunction]:
        return [a.utility for a in self.agents]

    @classmethod
    def from_utilities(
        cls, utilities: list[UtilityFunction], a: list[float]
    ) -> StaticScenario:
        return cls(
            agents=[
                AgentSpec(id=i, utility=u, a=ai)
                for i, (u, ai) in enumerate(zip(utilities, a, strict=True), start=1)
            ]
        )


class UtilityTemplate(_Frozen):
    """A static scenario without local resources, used by capacity sweeps."""

    utilities: list[UtilityFunction] = Field(min_length=1)


class StaticEquilibrium(_Frozen):
    mode: Mode
    lambda_: float = Field(alias="lambda")
    x: list[float]
    e: list[float] | None = None
    duality_gap: float = Field(ge=0)
    balance_residual: float
    iterations: int = 0


class StaticVerificationReport(_Frozen):
    mode: Mode
    lambda_: float = Field(alias="lambda")
    accepted: bool
    tolerance: float
    payoff_gaps: list[float]
    response_distances: list[float]
    balance_residual: float
    max_constraint_violation: float
    price_violation: bool
    duality_gap: float
    welfare: float
    oracle_welfare: float | None = None
    oracle_gap: float | None = None

    @property
    def max_gap(self) -> float:
        return max(self.response_distances, default=0.0)


class ShapingBounds(_Frozen):
    k_min: FiniteFloat = Field(ge=0)
    k_max: FiniteFloat = Field(ge=0)
    b_min: FiniteFloat = Field(gt=0)
    b_max: FiniteFloat = Field(gt=0)
    lambda_dagger: FiniteFloat = Field(gt=0)
    n: int = Field(ge=1)
    C: FiniteFloat = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> ShapingBounds:
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        if self.b_min > self.b_max:
            raise ValueError("b_min must not exceed b_max")
        return self


class QuadraticProfile(_Frozen):
    k: list[FiniteFloat] = Field(min_length=1)
    b: list[FiniteFloat] = Field(min_length=1)

    @model_validator(mode="after")
    def _shape(self) -> QuadraticProfile:
        if len(self.k) != len(self.b):
            raise ValueError("k and b must have the same length")
        if any(v < 0 for v in self.k) or any(v < 0 for v in self.b):
            raise ValueError("k and b must be nonnegative")
        return self

    @property
    def n(self) -> int:
        return len(self.k)

    def is_admissible_under(self, bounds: ShapingBounds) -> bool:
        return all(bounds.k_min <= k <= bounds.k_max for k in self.k) and all(
            bounds.b_min <= b <= bounds.b_max for b in self.b
        )

    def utilities(self) -> list[UtilityFunction]:
        return [QuadraticUtility(b=b, k=k) for k, b in zip(self.k, self.b)]


class QuadraticPrice(_Frozen):
    closed_form: float
    interior_valid: bool
    solver: float | None = None

    @property
    def value(self) -> float:
        """Authoritative price: the solver's whenever the closed form is not interior-valid."""
        if self.interior_valid or self.solver is None:
            return self.closed_form
        return self.solver


class AdmissibilityReport(_Frozen):
    admissible: bool
    slacks: tuple[float, float, float]
    holds: tuple[bool, bool, bool]


class WorstCaseCertificate(_Frozen):
    worst_lambda: float
    witness: QuadraticProfile
    lambda_dagger: float
    resilient: bool
    exact: bool
    evaluated: int


class ContourJob(_Frozen):
    profile: QuadraticProfile
    C: FiniteFloat
    axes: tuple[str, str]
    ranges: tuple[tuple[FiniteFloat, FiniteFloat], tuple[FiniteFloat, FiniteFloat]]
    grid: int = Field(default=11, ge=2)


class ContourGrid(_Frozen):
    axes: tuple[str, str]
    axis1: list[float]
    axis2: list[float]
    values: list[list[float]]

    @property
    def max_value(self) -> float:
        return max(max(row) for row in self.values)

    def argmax(self) -> tuple[float, float]:
        arr = np.asarray(self.values)
        i, j = np.unravel_index(int(np.argmax(arr)), arr.shape)
        return self.axis1[int(i)], self.axis2[int(j)]


def _as_row(value: Any) -> Any:
    # W and K are 1 x m; accept either [[...]] or [...].
    if isinstance(value, (list, tuple)) and len(value) == 1 and isinstance(value[0], (list, tuple)):
        return list(value[0])
    return value


class DynamicAgent(_Frozen):
    A: list[list[FiniteFloat]]
    B: list[list[FiniteFloat]]
    R: list[list[FiniteFloat]]
    W: list[FiniteFloat]
    Q: list[list[FiniteFloat]]
    K: list[FiniteFloat]
    H: list[list[FiniteFloat]]
    a: list[FiniteFloat] = Field(min_length=1)
    y0: list[FiniteFloat] = Field(min_length=1)
    R_T: list[list[FiniteFloat]] | None = None
    W_T: list[FiniteFloat] | None = None

    @field_validator("W", "K", "W_T", mode="before")
    @classmethod
    def _flatten_row(cls, value: Any) -> Any:
        return _as_row(value)

    @model_validator(mode="after")
    def _check_shapes(self) -> DynamicAgent:
        m = len(self.y0)
        for name in ("A", "B", "R", "Q", "H"):
            mat = np.asarray(getattr(self, name), dtype=float)
            if mat.shape != (m, m):
                raise ValueError(f"{name} must be {m}x{m}, got {mat.shape}")
        for name in ("W", "K"):
            if len(getattr(self, name)) != m:
                raise ValueError(f"{name} must have length {m}")
        if self.R_T is not None and np.asarray(self.R_T).shape != (m, m):
            raise ValueError(f"R_T must be {m}x{m}")
        if self.W_T is not None and len(self.W_T) != m:
            raise ValueError(f"W_T must have length {m}")
        if np.max(np.linalg.eigvalsh(_sym(self.R))) > 1e-12:
            raise ValueError("R must be negative semidefinite")
        if self.R_T is not None and np.max(np.linalg.eigvalsh(_sym(self.R_T))) > 1e-12:
            raise ValueError("R_T must be negative semidefinite")
        if np.max(np.linalg.eigvalsh(_sym(self.Q))) >= 0:
            raise ValueError("Q must be negative definite")
        if np.min(np.linalg.eigvalsh(_sym(self.H))) <= 0:
            raise ValueError("H must be positive definite")
        return self

    @property
    def m(self) -> int:
        return len(self.y0)

    @property
    def T(self) -> int:
        return len(self.a)

    def terminal_weights(self) -> tuple[list[list[float]], list[float]]:
        return (self.R_T if self.R_T is not None else self.R), (
            self.W_T if self.W_T is not None else self.W
        )


def _sym(mat: list[list[float]]) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    return 0.5 * (arr + arr.T)


class DynamicScenario(_Frozen):
    agents: list[DynamicAgent] = Field(min_length=1)
    T: int = Field(ge=1)

    @model_validator(mode="after")
    def _consistent(self) -> DynamicScenario:
        m = self.agents[0].m
        for i, agent in enumerate(self.agents, start=1):
            if agent.T != self.T:
                raise ValueError(f"agent {i}: supply sequence length {agent.T} != T={self.T}")
            if agent.m != m:
                raise ValueError(f"agent {i}: state dimension {agent.m} != {m}")
        return self

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return self.agents[0].m

    def total_supply(self) -> np.ndarray:
        return np.sum([np.asarray(a.a, dtype=float) for a in self.agents], axis=0)


class DynamicEquilibrium(_Frozen):
    lambda_: list[float] = Field(alias="lambda")
    U: list[list[float]]
    E: list[list[float]]
    Y: list[list[list[float]]] | None = None
    residual: float
    iterations: int
    converged: bool = True
    averaged: bool = False


class DynamicVerificationReport(_Frozen):
    accepted: bool
    payoff_tolerance: float
    balance_tolerance: float
    payoffs: list[float]
    payoff_gaps: list[float]
    balance_residuals: list[float]
    trade_violations: list[float]
    lambda_nonnegative: bool
    mu: list[list[float]]

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.balance_residuals), default=0.0)


class OracleResult(_Frozen):
    welfare: float
    allocation: list[float]
    resolution: float
    target: float | None = None
    snap_error: float = 0.0


class RunConfig(_Frozen):
    command: Command
    input_path: Path | None = None
    output_path: Path | None = None
    tol: float | None = Field(default=None, gt=0)
    max_iter: int | None = Field(default=None, gt=0)
    seed: int = 0
    format: Literal["json", "csv"] = "json"
    resolution: float | None = Field(default=None, gt=0)
    mode: Literal["sald", "saltd", "daltd"] | None = None
    equilibrium_path: Path | None = None
    example: int | None = Field(default=None, ge=1, le=4)
    c_max: float = Field(default=40.0, gt=0)
    c_step: float = Field(default=0.8, gt=0)
    grid: int | None = Field(default=None, ge=2)
    budget: int = Field(default=1000, ge=0)
