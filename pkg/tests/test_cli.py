import httpx
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from lifereserve.cli import main
from lifereserve.fixtures import fixture_text
from lifereserve.service.app import app

from conftest import TERM_V0


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def contract_file(tmp_path):
    def write(name):
        path = tmp_path / f"{name}.yaml"
        path.write_text(fixture_text(name))
        return str(path)

    return write


def test_solve_writes_value_table(runner, contract_file, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(main, ["solve", contract_file("term_insurance"), "--step", "1e-3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = (out / "values.csv").read_text().splitlines()
    assert rows[0] == "t,state,mode,value"
    row = next(r for r in rows if r.startswith("0.0,alive,"))
    assert abs(float(row.split(",")[-1]) - TERM_V0) <= 1e-6
    assert (out / "summary.txt").exists()


def test_simulate_twice_is_byte_identical(runner, contract_file, tmp_path):
    contract = contract_file("free_policy")
    dumps = []
    for run in ("a", "b"):
        out = tmp_path / run
        result = runner.invoke(main, ["simulate", contract, "--paths", "10", "--seed", "7", "--out", str(out)])
        assert result.exit_code == 0, result.output
        dumps.append((out / "paths.csv").read_bytes())
    assert dumps[0] == dumps[1]


def test_estimate_report_is_deterministic(runner, contract_file, tmp_path):
    contract = contract_file("free_policy")
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["estimate", contract, "--kind", "adjusted", "--paths", "2000", "--seed", "3", "--step", "1e-2", "--out", str(out)]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        reports.append((out / "estimate.txt").read_bytes())
    assert reports[0] == reports[1]
    assert b"elapsed" not in reports[0]


def test_timing_flag_adds_elapsed(runner, contract_file, tmp_path):
    out = tmp_path / "out"
    args = ["estimate", contract_file("term_insurance"), "--paths", "200", "--timing", "--out", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    assert "elapsed_seconds" in (out / "estimate.txt").read_text()


def test_modifications_trace(runner, contract_file, tmp_path):
    out = tmp_path / "out"
    args = ["modifications", contract_file("switching"), "--paths", "100", "--seed", "2", "--out", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert "cantelli residual" in result.output
    assert (out / "trace.csv").read_text().startswith("path_id,m,tau,from_mode,to_mode,state,rho")


def test_unreadable_contract(runner, tmp_path):
    result = runner.invoke(main, ["solve", str(tmp_path / "missing.yaml"), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_unknown_command(runner):
    assert runner.invoke(main, ["price", "x.yaml"]).exit_code != 0


def test_nonpositive_option(runner, contract_file, tmp_path):
    result = runner.invoke(main, ["solve", contract_file("term_insurance"), "--step", "-1", "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_contract_error_exit_status(runner, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("states: {labels: [a]}\ndiscount: 0\n")
    result = runner.invoke(main, ["solve", str(bad), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2
    assert "horizon" in result.output


def test_server_mode_posts_to_service(runner, contract_file, tmp_path, monkeypatch):
    client = TestClient(app, base_url="http://reserving")
    calls = []

    def post(url, json, timeout):
        calls.append(url)
        return client.post(url, json=json)

    monkeypatch.setattr(httpx, "post", post)
    out = tmp_path / "out"
    args = ["solve", contract_file("pure_endowment"), "--server", "http://reserving/", "--out", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    assert calls == ["http://reserving/scenario"]
    assert (out / "values.csv").exists()


def test_verify_lists_every_criterion(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(main, ["verify", "--paths", "2000", "--out", str(out)])
    lines = (out / "verification.txt").read_text().splitlines()
    criteria = {line.split()[1] for line in lines if line.startswith("[")}
    assert criteria >= {"1", "2", "3", "4", "5a", "5b", "5c", "6", "7", "8"}
    failed = any(line.startswith("[FAIL]") for line in lines)
    assert result.exit_code == (1 if failed else 0)
    assert lines[-1] == f"overall: {'FAIL' if failed else 'PASS'}"
