from __future__ import annotations

import json
from pathlib import Path

import pytest

from eqkit.artifacts import fixture_text
from eqkit.main import main, parse_config
from eqkit.run_store import RunStore

SCALAR_SCENARIO = {
    "T": 1,
    "agents": [
        {
            "A": [[0.5]],
            "B": [[1.0]],
            "R": [[-1.0]],
            "W": [0.0],
            "Q": [[-1.0]],
            "K": [2.0],
            "H": [[1.0]],
            "a": [0.1],
            "y0": [0.0],
        }
    ],
}


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path, monkeypatch) -> None:  # type: ignore[no-untyped-def]
    monkeypatch.setenv("EQKIT_DATA_DIR", str(tmp_path / "data"))
    monkeypatch.setenv("EQKIT_RECORD_RUNS", "false")
    monkeypatch.setenv("EQKIT_LOG", "error")


def _fixture_file(tmp_path: Path, name: str) -> Path:
    path = tmp_path / name
    path.write_text(fixture_text(name), encoding="utf-8")
    return path


def test_solve_sald_writes_equilibrium(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example1.json")
    out = tmp_path / "eq.json"
    assert main(["solve-sald", "--input", str(src), "--output", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["mode"] == "sald"
    assert data["lambda"] == pytest.approx(20.0, abs=1e-6)


def test_solved_equilibrium_passes_verify(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example1.json")
    eq = tmp_path / "eq.json"
    report = tmp_path / "report.json"
    assert main(["solve-saltd", "--input", str(src), "--output", str(eq)]) == 0
    code = main(
        ["verify", "--input", str(src), "--equilibrium", str(eq), "--output", str(report)]
    )
    assert code == 0
    data = json.loads(report.read_text())
    assert data["accepted"] is True
    assert data["mode"] == "saltd"


def test_verify_rejection_is_still_exit_zero(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example1.json")
    eq = tmp_path / "eq.json"
    eq.write_text(
        json.dumps(
            {
                "mode": "sald",
                "lambda": 10.0,
                "x": [9.5, 9.5, 9.5, 9.5],
                "duality_gap": 0.0,
                "balance_residual": 0.0,
            }
        )
    )
    report = tmp_path / "report.json"
    code = main(
        ["verify", "--input", str(src), "--equilibrium", str(eq), "--output", str(report)]
    )
    assert code == 0
    assert json.loads(report.read_text())["accepted"] is False


def test_sweep_writes_csv(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example2_pm1.json")
    out = tmp_path / "sweep.csv"
    code = main(
        ["sweep-capacity", "--input", str(src), "--output", str(out), "--mode", "saltd"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "C,lambda_saltd"
    assert len(lines) == 51


def test_shaping_check_reports_admissible(tmp_path, capsys) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example3_bounds.json")
    out = tmp_path / "check.json"
    assert main(["shaping-check", "--input", str(src), "--output", str(out)]) == 0
    assert json.loads(out.read_text())["admissible"] is True
    assert "admissible: true" in capsys.readouterr().out


def test_contour_grid_override(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = _fixture_file(tmp_path, "example3_k_contour.json")
    out = tmp_path / "contour.csv"
    code = main(
        ["shaping-contour", "--input", str(src), "--output", str(out), "--grid", "3"]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "k1\\k2,40,45,50"
    assert len(lines) == 4


def test_daltd_csv_writes_prices_and_trajectory(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = tmp_path / "scalar.json"
    src.write_text(json.dumps(SCALAR_SCENARIO))
    out = tmp_path / "prices.csv"
    code = main(
        ["solve-daltd", "--input", str(src), "--output", str(out), "--format", "csv"]
        + ["--tol", "1e-8"]
    )
    assert code == 0
    assert out.read_text().startswith("t,lambda\n")
    assert (tmp_path / "prices_trajectory.csv").read_text().startswith("t,agent,dim,y\n")


def test_stalled_solver_exits_two(tmp_path) -> None:  # type: ignore[no-untyped-def]
    src = tmp_path / "scalar.json"
    src.write_text(json.dumps(SCALAR_SCENARIO))
    out = tmp_path / "eq.json"
    code = main(
        [
            "solve-daltd",
            "--input", str(src),
            "--output", str(out),
            "--tol", "1e-12",
            "--max-iter", "1",
        ]
    )
    assert code == 2
    data = json.loads(out.read_text())
    assert data["converged"] is False
    assert data["iterations"] == 1


def test_input_errors_exit_one(tmp_path) -> None:  # type: ignore[no-untyped-def]
    assert main(["no-such-command"]) == 1
    assert main(["solve-sald", "--input", str(tmp_path / "missing.json")]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text('{"agents": [')
    assert main(["solve-sald", "--input", str(broken)]) == 1
    assert main(["solve-sald"]) == 1
    assert main(["solve-sald", "--input", str(broken), "--format", "xml"]) == 1


def test_reproduce_example_table(tmp_path) -> None:  # type: ignore[no-untyped-def]
    out = tmp_path / "example1.csv"
    code = main(["reproduce-example", "--example", "1", "--format", "csv", "--output", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith("quantity,expected,computed,abs_error,status\n")
    assert "FAIL" not in text


def test_runs_are_recorded(tmp_path, monkeypatch) -> None:  # type: ignore[no-untyped-def]
    monkeypatch.setenv("EQKIT_RECORD_RUNS", "true")
    src = _fixture_file(tmp_path, "example3_bounds.json")
    assert main(["shaping-check", "--input", str(src), "--output", str(tmp_path / "o.json")]) == 0
    assert main(["solve-sald", "--input", str(tmp_path / "missing.json")]) == 1
    store = RunStore(tmp_path / "data" / "runs.db")
    runs = store.recent_runs()
    store.close()
    assert [r.exit_code for r in runs] == [1, 0]
    assert runs[1].command == "shaping-check"
    assert runs[1].summary["admissible"] is True
    assert runs[1].input_digest is not None


def test_reruns_write_identical_artifacts(tmp_path) -> None:  # type: ignore[no-untyped-def]
    scalar = tmp_path / "scalar.json"
    scalar.write_text(json.dumps(SCALAR_SCENARIO))
    runs = [
        ["solve-sald", "--input", str(_fixture_file(tmp_path, "example1.json"))],
        ["solve-saltd", "--input", str(tmp_path / "example1.json")],
        ["sweep-capacity", "--input", str(_fixture_file(tmp_path, "example2_pm2.json"))],
        ["shaping-check", "--input", str(_fixture_file(tmp_path, "example3_bounds.json"))],
        [
            "shaping-certify",
            "--input", str(tmp_path / "example3_bounds.json"),
            "--budget", "100",
            "--seed", "7",
        ],
        ["shaping-contour", "--input", str(_fixture_file(tmp_path, "example3_b_contour.json"))],
        ["solve-daltd", "--input", str(scalar), "--tol", "1e-8"],
        ["reproduce-example", "--example", "1"],
    ]
    for i, args in enumerate(runs):
        first, second = tmp_path / f"run{i}_a.out", tmp_path / f"run{i}_b.out"
        assert main([*args, "--output", str(first)]) == 0
        assert main([*args, "--output", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes(), args[0]


def test_parse_config_maps_flags() -> None:
    config = parse_config(["sweep-capacity", "--c-max", "8", "--c-step", "0.5", "--mode", "sald"])
    assert config.command == "sweep-capacity"
    assert config.c_max == 8.0 and config.c_step == 0.5
    assert config.mode == "sald"
