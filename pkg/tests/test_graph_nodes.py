from __future__ import annotations

from eqkit.artifacts import fixture_text
from eqkit.config import Settings
from eqkit.deps import Deps
from eqkit.graph import build_run_graph
from eqkit.models import RunConfig, StaticEquilibrium, StaticScenario
from eqkit.nodes.record_run import record_run_node
from eqkit.nodes.render import render_node
from eqkit.nodes.verify import verify_node
from eqkit.run_store import RunStore


def test_graph_solves_verifies_and_records(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = tmp_path / "example1.json"
    src.write_text(fixture_text("example1.json"))
    out = tmp_path / "eq.json"
    settings = Settings(EQKIT_DATA_DIR=str(tmp_path))
    store = RunStore(settings.database_path)
    graph = build_run_graph(Deps(settings=settings, store=store))

    config = RunConfig(command="solve-sald", input_path=src, output_path=out)
    state = graph.invoke({"config": config})

    assert isinstance(state["result"], StaticEquilibrium)
    assert state["verification"].accepted
    assert state["exit_code"] == 0
    assert state["written"] == [str(out)]
    assert out.exists()
    runs = store.recent_runs()
    assert len(runs) == 1 and runs[0].id == state["run_id"]
    assert runs[0].summary["accepted"] is True
    store.close()


def test_graph_without_store_skips_the_ledger(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = tmp_path / "bounds.json"
    src.write_text(fixture_text("example3_bounds.json"))
    graph = build_run_graph(Deps(settings=Settings(EQKIT_DATA_DIR=str(tmp_path))))
    config = RunConfig(
        command="shaping-certify", input_path=src, output_path=tmp_path / "cert.json", budget=10
    )
    state = graph.invoke({"config": config})
    assert "run_id" not in state
    assert state["result"].resilient
    assert "resilient: true" in state["summary_lines"]


def test_verify_node_adds_the_oracle_welfare() -> None:
    scenario = StaticScenario.model_validate_json(fixture_text("example1.json"))
    eq = StaticEquilibrium(
        mode="sald",
        lambda_=20.0,
        x=[135 / 21, 38 - 135 / 21 - 130 / 23 - 150 / 32, 130 / 23, 150 / 32],
        duality_gap=0.0,
        balance_residual=0.0,
    )
    deps = Deps(settings=Settings())  # type: ignore[call-arg]
    config = RunConfig(command="verify", resolution=0.01)
    state = verify_node({"config": config, "scenario": scenario, "result": eq}, deps)
    report = state["verification"]
    assert report.accepted
    assert report.oracle_welfare is not None
    assert 0.0 <= report.oracle_gap <= 0.5


def test_render_node_prints_without_an_output_path() -> None:
    deps = Deps(settings=Settings())  # type: ignore[call-arg]
    eq = StaticEquilibrium(
        mode="sald", lambda_=1.5, x=[1.0], duality_gap=0.0, balance_residual=0.0
    )
    state = render_node({"config": RunConfig(command="solve-sald"), "result": eq}, deps)
    [(path, text)] = state["artifacts"]
    assert path is None
    assert '"lambda": 1.5' in text
    assert state["summary_lines"] == ["lambda: 1.5"]


def test_record_run_node_uses_store(mocker) -> None:  # type: ignore[no-untyped-def]
    store = mocker.Mock()
    store.record_run.return_value = 7
    deps = Deps(settings=Settings(), store=store)  # type: ignore[call-arg]
    state = {
        "config": RunConfig(command="shaping-check"),
        "input_digest": "abc",
        "exit_code": 0,
        "summary": {"admissible": True},
        "written": ["-"],
    }
    out = record_run_node(state, deps)
    assert out["run_id"] == 7
    store.record_run.assert_called_once_with(
        command="shaping-check",
        input_digest="abc",
        exit_code=0,
        summary={"admissible": True, "artifacts": ["-"]},
    )
