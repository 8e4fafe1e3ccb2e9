from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.optimize import minimize_scalar

from eqkit.artifacts import load_fixture
from eqkit.dynamic_equilibrium import (
    agent_best_response,
    agent_payoff,
    condense,
    rollout,
    solve_daltd,
    verify_dynamic_equilibrium,
)
from eqkit.errors import DimensionMismatch, InfeasibleScenario, NoConvergence
from eqkit.models import DynamicAgent, DynamicScenario
from eqkit.oracle import grid_search_daltd


def _scalar_agent(a: float) -> DynamicAgent:
    # One step, one state: horizon utility is -2 u^2 + 2 u.
    return DynamicAgent(
        A=[[0.5]], B=[[1.0]], R=[[-1.0]], W=[0.0], Q=[[-1.0]], K=[2.0], H=[[1.0]], a=[a], y0=[0.0]
    )


def _scalar_scenario(*supplies: float) -> DynamicScenario:
    return DynamicScenario(agents=[_scalar_agent(a) for a in supplies], T=1)


def _random_agent(rng: np.random.Generator, m: int, T: int) -> DynamicAgent:
    eye = np.eye(m)
    return DynamicAgent(
        A=rng.normal(size=(m, m)).tolist(),
        B=rng.normal(size=(m, m)).tolist(),
        R=(-eye).tolist(),
        W=[0.0] * m,
        Q=(-eye).tolist(),
        K=[0.0] * m,
        H=eye.tolist(),
        a=[1.0] * T,
        y0=rng.normal(size=m).tolist(),
    )


def test_condensed_trajectory_matches_rollout_on_random_systems() -> None:
    rng = np.random.default_rng(3)
    for _ in range(200):
        agent = _random_agent(rng, int(rng.integers(1, 4)), int(rng.integers(1, 7)))
        U = rng.normal(size=agent.T * agent.m)
        assert np.allclose(condense(agent).trajectory(agent.y0, U), rollout(agent, U))


def test_one_step_condensation_is_the_transition() -> None:
    agent = _random_agent(np.random.default_rng(5), 2, 1)
    condensed = condense(agent)
    assert np.allclose(condensed.P, np.vstack([np.eye(2), agent.A]))
    assert np.allclose(condensed.Q_cond, np.vstack([np.zeros((2, 2)), agent.B]))


def test_rollout_integrates_and_forgets() -> None:
    base = _random_agent(np.random.default_rng(9), 2, 4)
    U = np.arange(8.0)
    integrator = base.model_copy(update={"A": np.eye(2).tolist(), "B": np.eye(2).tolist()})
    Y = rollout(integrator, U)
    expected = np.asarray(base.y0) + np.vstack([np.zeros(2), np.cumsum(U.reshape(4, 2), axis=0)])
    assert np.allclose(Y, expected)

    memoryless = base.model_copy(update={"A": np.zeros((2, 2)).tolist(), "B": np.eye(2).tolist()})
    Y = rollout(memoryless, U)
    assert np.allclose(Y[0], base.y0)
    assert np.allclose(Y[1:], U.reshape(4, 2))


def test_higher_prices_shrink_resource_use() -> None:
    agent = _scalar_agent(0.1)
    usage = [float(agent_best_response(agent, [lam]).usage[0]) for lam in (0.0, 0.5, 1.0, 4.0)]
    assert all(b < a for a, b in zip(usage, usage[1:]))

    fixture_agent = load_fixture("example4.json", DynamicScenario).agents[0]
    totals = [
        float(agent_best_response(fixture_agent, np.full(fixture_agent.T, lam)).usage.sum())
        for lam in (0.0, 0.5, 1.0, 4.0)
    ]
    assert all(b <= a + 1e-9 for a, b in zip(totals, totals[1:]))


def test_condensed_trajectory_matches_rollout() -> None:
    scenario = load_fixture("example4.json", DynamicScenario)
    rng = np.random.default_rng(0)
    for agent in scenario.agents:
        U = rng.normal(size=agent.T * agent.m)
        condensed = condense(agent)
        assert condensed.T == agent.T and condensed.m == agent.m
        assert np.allclose(condensed.trajectory(agent.y0, U), rollout(agent, U))


def test_rollout_without_controls_follows_the_free_dynamics() -> None:
    agent = load_fixture("example4.json", DynamicScenario).agents[0]
    Y = rollout(agent, np.zeros(agent.T * agent.m))
    assert Y.shape == (agent.T + 1, agent.m)
    assert Y[1] == pytest.approx([-0.6, -2.8])
    with pytest.raises(DimensionMismatch):
        rollout(agent, np.zeros(3))


def test_best_response_matches_scalar_search() -> None:
    agent = _scalar_agent(0.1)
    lam = 1.0
    response = agent_best_response(agent, [lam])
    search = minimize_scalar(lambda u: -(-2 * u * u + 2 * u + lam * (0.1 - u * u)))
    assert response.U[0] == pytest.approx(search.x, abs=1e-6)
    assert response.U[0] == pytest.approx(1.0 / 3.0)
    assert response.E[0] == pytest.approx(0.1 - 1.0 / 9.0)
    assert agent_payoff(agent, response.U, response.E, [lam]) == pytest.approx(response.payoff)


def test_single_agent_clears_its_own_supply() -> None:
    eq = solve_daltd(_scalar_scenario(0.1), tol=1e-8, max_iter=5000)
    assert eq.converged
    assert eq.lambda_[0] == pytest.approx(1.0 / np.sqrt(0.1) - 2.0, abs=1e-3)
    assert eq.U[0][0] == pytest.approx(np.sqrt(0.1), abs=1e-4)
    assert eq.residual <= 1e-8


def test_surplus_supply_is_priced_at_zero() -> None:
    eq = solve_daltd(_scalar_scenario(1.0), tol=1e-8, max_iter=5000)
    assert eq.lambda_ == [0.0]
    assert eq.U[0][0] == pytest.approx(0.5)
    assert eq.E[0][0] == pytest.approx(0.0)
    report = verify_dynamic_equilibrium(_scalar_scenario(1.0), eq, balance_tol=1e-8)
    assert report.accepted


def test_verification_rejects_perturbed_controls() -> None:
    scenario = _scalar_scenario(0.1, 0.2)
    eq = solve_daltd(scenario, tol=1e-8, max_iter=5000)
    assert verify_dynamic_equilibrium(scenario, eq, balance_tol=1e-6).accepted
    moved = eq.model_copy(update={"U": [[eq.U[0][0] + 0.1], eq.U[1]]})
    report = verify_dynamic_equilibrium(scenario, moved, balance_tol=1e-6)
    assert not report.accepted
    assert report.trade_violations[0] > 0


def test_negative_prices_fail_verification() -> None:
    scenario = _scalar_scenario(0.1)
    eq = solve_daltd(scenario, tol=1e-8, max_iter=5000)
    report = verify_dynamic_equilibrium(scenario, eq.model_copy(update={"lambda_": [-1.0]}))
    assert not report.lambda_nonnegative
    assert not report.accepted


def test_solver_agrees_with_grid_search_over_two_steps() -> None:
    agent = _scalar_agent(0.05).model_copy(update={"a": [0.05, 0.05]})
    scenario = DynamicScenario(agents=[agent, agent], T=2)
    eq = solve_daltd(scenario, tol=1e-9, max_iter=5000)
    zero = [0.0, 0.0]
    total = sum(agent_payoff(a, u, zero, zero) for a, u in zip(scenario.agents, eq.U))
    assert eq.U[0] == pytest.approx([np.sqrt(0.05)] * 2, abs=1e-4)

    resolution = 0.05
    oracle = grid_search_daltd(scenario, (0.0, 1.0), resolution)
    # Rounding every control down onto the grid keeps the profile feasible.
    snapped = [np.floor(np.asarray(u) / resolution) * resolution for u in eq.U]
    floor = sum(agent_payoff(a, u, zero, zero) for a, u in zip(scenario.agents, snapped))
    assert oracle.welfare <= total + 1e-6
    assert oracle.welfare >= floor - 1e-9


def test_example4_reaches_a_verified_equilibrium() -> None:
    scenario = load_fixture("example4.json", DynamicScenario)
    eq = solve_daltd(scenario)
    assert eq.residual <= 1e-4
    assert min(eq.lambda_) >= 0.0
    assert eq.Y is not None and len(eq.Y[0]) == scenario.T + 1
    assert verify_dynamic_equilibrium(scenario, eq).accepted


def test_example4_converges_without_newton_polish() -> None:
    scenario = load_fixture("example4.json", DynamicScenario)
    eq = solve_daltd(scenario, newton_polish=False)
    assert eq.residual <= 1e-4
    assert min(eq.lambda_) >= 0.0
    assert verify_dynamic_equilibrium(scenario, eq).accepted


def test_iteration_cap_raises_with_diagnostics() -> None:
    with pytest.raises(NoConvergence) as info:
        solve_daltd(_scalar_scenario(0.1), tol=1e-12, max_iter=1)
    assert info.value.iterations == 1
    assert info.value.equilibrium is not None
    assert info.value.equilibrium.converged is False


def test_zero_supply_is_infeasible() -> None:
    with pytest.raises(InfeasibleScenario):
        solve_daltd(_scalar_scenario(0.0))


def test_agent_shapes_are_validated() -> None:
    with pytest.raises(ValidationError):
        DynamicAgent(
            A=[[1.0, 0.0]], B=[[1.0]], R=[[-1.0]], W=[0.0], Q=[[-1.0]], K=[0.0], H=[[1.0]],
            a=[1.0], y0=[0.0],
        )
    with pytest.raises(ValidationError):
        DynamicAgent(
            A=[[1.0]], B=[[1.0]], R=[[-1.0]], W=[0.0], Q=[[1.0]], K=[0.0], H=[[1.0]],
            a=[1.0], y0=[0.0],
        )
