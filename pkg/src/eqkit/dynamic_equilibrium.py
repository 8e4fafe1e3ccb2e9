from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.linalg import LinAlgError, block_diag, cho_factor, cho_solve, eigvalsh, solve

from .errors import DimensionMismatch, InfeasibleScenario, NoConvergence, SingularSystem
from .models import (
    DynamicAgent,
    DynamicEquilibrium,
    DynamicScenario,
    DynamicVerificationReport,
)
from .static_equilibrium import shrink_trades

logger = logging.getLogger(__name__)

DUAL_LOG_EVERY = 25
ARMIJO_SLOPE = 1e-4
MAX_BACKTRACKS = 30


def _sym(mat: Any) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    return 0.5 * (arr + arr.T)


@dataclass(frozen=True)
class CondensedDynamics:
    """Trajectory as an affine map of the stacked controls: Y = P y0 + Q_cond U."""

    P: np.ndarray
    Q_cond: np.ndarray

    @property
    def m(self) -> int:
        return int(self.P.shape[1])

    @property
    def T(self) -> int:
        return int(self.Q_cond.shape[1]) // self.m

    def trajectory(self, y0: Sequence[float], U: np.ndarray) -> np.ndarray:
        flat = self.P @ np.asarray(y0, dtype=float) + self.Q_cond @ U
        return flat.reshape(self.T + 1, self.m)


def _stacked_controls(agent: DynamicAgent, U: Any) -> np.ndarray:
    flat = np.asarray(U, dtype=float).ravel()
    if flat.size != agent.T * agent.m:
        raise DimensionMismatch(
            f"controls have {flat.size} entries, expected T*m = {agent.T * agent.m}"
        )
    return flat


def rollout(agent: DynamicAgent, U: Any) -> np.ndarray:
    """State trajectory y(0..T) under the stacked controls U."""
    u = _stacked_controls(agent, U).reshape(agent.T, agent.m)
    A = np.asarray(agent.A, dtype=float)
    B = np.asarray(agent.B, dtype=float)
    Y = np.empty((agent.T + 1, agent.m))
    Y[0] = agent.y0
    for t in range(agent.T):
        Y[t + 1] = A @ Y[t] + B @ u[t]
    return Y


def condense(agent: DynamicAgent) -> CondensedDynamics:
    m, T = agent.m, agent.T
    A = np.asarray(agent.A, dtype=float)
    B = np.asarray(agent.B, dtype=float)
    powers = [np.eye(m)]
    for _ in range(T):
        powers.append(A @ powers[-1])
    P = np.vstack(powers)
    Q_cond = np.zeros(((T + 1) * m, T * m))
    for t in range(1, T + 1):
        for s in range(t):
            Q_cond[t * m : (t + 1) * m, s * m : (s + 1) * m] = powers[t - 1 - s] @ B
    return CondensedDynamics(P=P, Q_cond=Q_cond)


@dataclass(frozen=True)
class _Horizon:
    """Price-independent part of one agent's horizon problem in condensed form.

    Without trades the horizon utility is U' curvature U + linear' U + constant.
    """

    agent: DynamicAgent
    condensed: CondensedDynamics
    curvature: np.ndarray
    linear: np.ndarray
    constant: float
    H: np.ndarray
    a: np.ndarray

    @classmethod
    def build(cls, agent: DynamicAgent) -> _Horizon:
        T = agent.T
        condensed = condense(agent)
        R_T, W_T = agent.terminal_weights()
        R_bar = block_diag(*([_sym(agent.R)] * T + [_sym(R_T)]))
        W_bar = np.concatenate([np.tile(np.asarray(agent.W, dtype=float), T), W_T])
        K_bar = np.tile(np.asarray(agent.K, dtype=float), T)
        Q_bar = block_diag(*([_sym(agent.Q)] * T))

        Qc = condensed.Q_cond
        free = condensed.P @ np.asarray(agent.y0, dtype=float)
        curvature = _sym(Qc.T @ R_bar @ Qc + Q_bar)
        linear = 2.0 * Qc.T @ R_bar @ free + Qc.T @ W_bar + K_bar
        constant = float(free @ R_bar @ free + W_bar @ free)
        return cls(
            agent=agent,
            condensed=condensed,
            curvature=curvature,
            linear=linear,
            constant=constant,
            H=_sym(agent.H),
            a=np.asarray(agent.a, dtype=float),
        )

    @property
    def m(self) -> int:
        return self.agent.m

    def curvature_at(self, lam: np.ndarray) -> np.ndarray:
        M = self.curvature.copy()
        m = self.m
        for t, price in enumerate(lam):
            M[t * m : (t + 1) * m, t * m : (t + 1) * m] -= price * self.H
        return M

    def usage(self, U: np.ndarray) -> np.ndarray:
        u = U.reshape(-1, self.m)
        return np.einsum("ti,ij,tj->t", u, self.H, u)

    def utility(self, U: np.ndarray) -> float:
        return float(U @ self.curvature @ U + self.linear @ U + self.constant)


@dataclass(frozen=True)
class AgentResponse:
    U: np.ndarray
    E: np.ndarray
    usage: np.ndarray
    payoff: float
    factor: tuple[np.ndarray, bool] = field(repr=False, compare=False)


def _prices(lam: Any, T: int) -> np.ndarray:
    arr = np.asarray(lam, dtype=float).ravel()
    if arr.size != T:
        raise DimensionMismatch(f"price vector has {arr.size} entries for horizon {T}")
    return arr


def _respond(horizon: _Horizon, lam: np.ndarray) -> AgentResponse:
    M = horizon.curvature_at(lam)
    try:
        factor = cho_factor(-M)
    except LinAlgError as exc:
        raise SingularSystem("horizon Hessian is not negative definite") from exc
    U = cho_solve(factor, 0.5 * horizon.linear)
    usage = horizon.usage(U)
    E = horizon.a - usage
    payoff = horizon.utility(U) + float(lam @ E)
    return AgentResponse(U=U, E=E, usage=usage, payoff=payoff, factor=factor)


def agent_best_response(agent: DynamicAgent, lam: Any) -> AgentResponse:
    """Payoff-maximising controls with tight trades e(t) = a(t) - h(u(t))."""
    return _respond(_Horizon.build(agent), _prices(lam, agent.T))


def agent_payoff(agent: DynamicAgent, U: Any, E: Any, lam: Any) -> float:
    horizon = _Horizon.build(agent)
    prices = _prices(lam, agent.T)
    trades = np.asarray(E, dtype=float).ravel()
    if trades.size != agent.T:
        raise DimensionMismatch(f"trades have {trades.size} entries for horizon {agent.T}")
    return horizon.utility(_stacked_controls(agent, U)) + float(prices @ trades)


def _dual_hessian(horizons: Sequence[_Horizon], responses: Sequence[AgentResponse]) -> np.ndarray:
    T = len(responses[0].E)
    G = np.zeros((T, T))
    for horizon, response in zip(horizons, responses):
        m = horizon.m
        u = response.U.reshape(T, m)
        S = np.zeros((T * m, T))
        for t in range(T):
            S[t * m : (t + 1) * m, t] = horizon.H @ u[t]
        G += 2.0 * S.T @ cho_solve(response.factor, S)
    return _sym(G)


def _effective_residual(lam: np.ndarray, residual: np.ndarray) -> np.ndarray:
    # Excess supply at a zero price is slack, not imbalance.
    return np.where(lam > 0, residual, np.minimum(residual, 0.0))


def _newton_step(
    horizons: Sequence[_Horizon],
    lam: np.ndarray,
    responses: Sequence[AgentResponse],
    residual: np.ndarray,
) -> np.ndarray | None:
    """Projected Newton step on the dual with Armijo backtracking; None when it fails."""
    G = _dual_hessian(horizons, responses)
    free = ~((lam <= 0) & (residual > 0))
    if not free.any():
        return None
    G_free = G[np.ix_(free, free)]
    reg = 1e-10 * (1.0 + float(np.trace(G_free)) / int(free.sum()))
    try:
        direction = solve(G_free + reg * np.eye(len(G_free)), residual[free], assume_a="pos")
    except LinAlgError:
        return None
    step = np.zeros_like(lam)
    step[free] = direction

    dual = math.fsum(r.payoff for r in responses)
    scale = 1.0
    for _ in range(MAX_BACKTRACKS):
        candidate = np.maximum(0.0, lam - scale * step)
        trial = math.fsum(_respond(h, candidate).payoff for h in horizons)
        if trial <= dual + ARMIJO_SLOPE * float(residual @ (candidate - lam)):
            return candidate
        scale *= 0.5
    return None


def _reconcile_zero_prices(lam: np.ndarray, E: np.ndarray) -> np.ndarray:
    E = E.copy()
    for t in np.flatnonzero(lam <= 0):
        E[:, t] = shrink_trades(E[:, t].tolist())
    return E


def _equilibrium(
    horizons: Sequence[_Horizon],
    lam: np.ndarray,
    U: np.ndarray,
    E: np.ndarray,
    iterations: int,
    *,
    converged: bool,
    averaged: bool,
) -> DynamicEquilibrium:
    E = _reconcile_zero_prices(lam, E)
    Y = [h.condensed.trajectory(h.agent.y0, u).tolist() for h, u in zip(horizons, U)]
    return DynamicEquilibrium(
        lambda_=lam.tolist(),
        U=U.tolist(),
        E=E.tolist(),
        Y=Y,
        residual=float(np.max(np.abs(E.sum(axis=0)))),
        iterations=iterations,
        converged=converged,
        averaged=averaged,
    )


def _initial_curvature(horizons: Sequence[_Horizon], lam: np.ndarray, fallback: float) -> float:
    """Largest eigenvalue of the dual Hessian at the starting prices."""
    responses = [_respond(h, lam) for h in horizons]
    top = float(eigvalsh(_dual_hessian(horizons, responses))[-1])
    return top if top > 0 else fallback


def solve_daltd(
    s: DynamicScenario,
    tol: float = 1e-4,
    max_iter: int = 50000,
    *,
    step_scale: float = 1.0,
    averaging_fraction: float = 0.1,
    newton_polish: bool = True,
    polish_after: int = 25,
) -> DynamicEquilibrium:
    """Dual decomposition on the per-step prices.

    Prices move by projected subgradient steps alpha_0 / sqrt(k) against the
    balance residual, where alpha_0 = step_scale / L and L is the top eigenvalue
    of the dual Hessian at the starting prices. Once ``polish_after`` iterations
    have passed, projected Newton steps on the dual take over whenever they pass
    the Armijo test.
    """
    supply = s.total_supply()
    if np.any(supply <= 0):
        steps = np.flatnonzero(supply <= 0).tolist()
        raise InfeasibleScenario(f"total supply is not positive at steps {steps}")

    horizons = [_Horizon.build(agent) for agent in s.agents]
    lam = np.ones(s.T)
    alpha0 = step_scale / _initial_curvature(horizons, lam, s.n * float(np.max(supply)))
    window = max(1, math.ceil(averaging_fraction * max_iter))
    window_start = max_iter - window + 1

    lam_sum = np.zeros(s.T)
    U_sum = np.zeros((s.n, s.T * s.m))
    E_sum = np.zeros((s.n, s.T))
    worst = math.inf

    for k in range(1, max_iter + 1):
        responses = [_respond(h, lam) for h in horizons]
        residual = np.sum([r.E for r in responses], axis=0)
        worst = float(np.max(np.abs(_effective_residual(lam, residual))))
        if k == 1 or k % DUAL_LOG_EVERY == 0:
            logger.debug(
                "Dual iteration",
                extra={
                    "event": "dual_iteration",
                    "solver": "daltd",
                    "iteration": k,
                    "residual": worst,
                    "extra": {"dual": math.fsum(r.payoff for r in responses)},
                },
            )
        if worst <= tol:
            eq = _equilibrium(
                horizons,
                lam,
                np.array([r.U for r in responses]),
                np.array([r.E for r in responses]),
                k,
                converged=True,
                averaged=False,
            )
            logger.info(
                "Dynamic equilibrium solved",
                extra={
                    "event": "dynamic_solved",
                    "solver": "daltd",
                    "iteration": k,
                    "residual": eq.residual,
                },
            )
            return eq
        if k >= window_start:
            lam_sum += lam
            U_sum += np.array([r.U for r in responses])
            E_sum += np.array([r.E for r in responses])

        polished = None
        if newton_polish and k > polish_after:
            polished = _newton_step(horizons, lam, responses, residual)
        if polished is not None:
            lam = polished
        else:
            lam = np.maximum(0.0, lam - alpha0 / math.sqrt(k) * residual)

    lam_avg = lam_sum / window
    E_avg = E_sum / window
    averaged_residual = float(
        np.max(np.abs(_effective_residual(lam_avg, E_avg.sum(axis=0))))
    )
    converged = averaged_residual <= tol
    eq = _equilibrium(
        horizons,
        lam_avg,
        U_sum / window,
        E_avg,
        max_iter,
        converged=converged,
        averaged=True,
    )
    if converged:
        logger.info(
            "Dynamic equilibrium solved by averaging",
            extra={
                "event": "dynamic_solved",
                "solver": "daltd",
                "iteration": max_iter,
                "residual": eq.residual,
            },
        )
        return eq
    final = min(worst, averaged_residual)
    raise NoConvergence(
        f"price iteration stopped after {max_iter} steps with residual {final:.3e}",
        residual=final,
        iterations=max_iter,
        equilibrium=eq,
    )


def verify_dynamic_equilibrium(
    s: DynamicScenario,
    eq: DynamicEquilibrium,
    *,
    payoff_tol: float = 1e-3,
    balance_tol: float = 1e-4,
) -> DynamicVerificationReport:
    T, n = s.T, s.n
    if len(eq.lambda_) != T:
        raise DimensionMismatch(f"price vector has {len(eq.lambda_)} entries for horizon {T}")
    if len(eq.U) != n or len(eq.E) != n:
        raise DimensionMismatch(f"equilibrium must carry controls and trades for {n} agents")
    for i, (u, e) in enumerate(zip(eq.U, eq.E), start=1):
        if len(u) != T * s.m or len(e) != T:
            raise DimensionMismatch(f"agent {i}: controls or trades have the wrong length")

    lam = np.asarray(eq.lambda_, dtype=float)
    nonnegative = bool(np.all(lam >= 0))
    E = np.asarray(eq.E, dtype=float)

    payoffs: list[float] = []
    gaps: list[float] = []
    violations: list[float] = []
    for agent, u, e in zip(s.agents, eq.U, E):
        horizon = _Horizon.build(agent)
        U = np.asarray(u, dtype=float)
        allowed = horizon.a - horizon.usage(U)
        violations.append(max(0.0, float(np.max(e - allowed))))
        # A trade above its allowance is clipped before scoring the candidate.
        candidate = horizon.utility(U) + float(lam @ np.minimum(e, allowed))
        payoffs.append(candidate)
        if not nonnegative:
            gaps.append(math.inf)
            continue
        try:
            best = _respond(horizon, lam).payoff
        except SingularSystem:
            gaps.append(math.inf)
            continue
        gaps.append(best - candidate)

    residuals = E.sum(axis=0).tolist()
    accepted = (
        nonnegative
        and all(
            g <= payoff_tol * (1.0 + abs(p)) for g, p in zip(gaps, payoffs)
        )
        and max(abs(r) for r in residuals) <= balance_tol
        and max(violations) <= balance_tol
    )
    report = DynamicVerificationReport(
        accepted=accepted,
        payoff_tolerance=payoff_tol,
        balance_tolerance=balance_tol,
        payoffs=payoffs,
        payoff_gaps=gaps,
        balance_residuals=residuals,
        trade_violations=violations,
        lambda_nonnegative=nonnegative,
        mu=[list(eq.lambda_) for _ in range(n)],
    )
    logger.info(
        "Dynamic equilibrium verified",
        extra={
            "event": "dynamic_verified",
            "solver": "daltd",
            "residual": report.max_residual,
            "extra": {"accepted": accepted},
        },
    )
    return report
