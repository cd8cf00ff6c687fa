import pytest
from fastapi.testclient import TestClient

from lifereserve import __version__
from lifereserve.fixtures import fixture_text
from lifereserve.service.app import app
from lifereserve.service.runner import run_scenario
from lifereserve.service.schemas import ScenarioOptions, ScenarioRequest

from conftest import TERM_V0


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def files(response):
    return {f["name"]: f["content"] for f in response["files"]}


def test_health(client):
    assert client.get("/health").json() == {"status": "ok", "version": __version__}


def test_solve_term_insurance(client):
    body = {"command": "solve", "contract": fixture_text("term_insurance"), "options": {"step": 1e-3}}
    out = client.post("/scenario", json=body).json()
    assert out["exit_status"] == 0 and out["passed"]
    table = files(out)["values.csv"].splitlines()
    row = next(line for line in table[1:] if line.startswith("0.0,alive,"))
    assert abs(float(row.split(",")[-1]) - TERM_V0) <= 1e-6


def test_command_route(client):
    body = {"contract": fixture_text("free_policy"), "options": {"paths": 20, "seed": 7}}
    out = client.post("/commands/simulate", json=body).json()
    assert out["command"] == "simulate" and out["exit_status"] == 0
    assert files(out)["paths.csv"].startswith("path_id,time,kind,from,to\n")


def test_unknown_command_route(client):
    assert client.post("/commands/price", json={"contract": "x"}).status_code == 404


def test_unknown_command_in_body(client):
    assert client.post("/scenario", json={"command": "price"}).status_code == 422


@pytest.mark.parametrize("options", [{"step": 0}, {"paths": -5}, {"seed": -1}, {"colour": "red"}])
def test_invalid_options_rejected(client, options):
    body = {"command": "solve", "contract": fixture_text("term_insurance"), "options": options}
    assert client.post("/scenario", json=body).status_code == 422


def test_bad_contract_gives_exit_status_two(client):
    out = client.post("/scenario", json={"command": "solve", "contract": "states: {labels: [a]}"}).json()
    assert out["exit_status"] == 2 and not out["passed"]
    assert "horizon" in out["error"]


def test_missing_contract_gives_exit_status_two():
    response = run_scenario(ScenarioRequest(command="solve"))
    assert response.exit_status == 2


def test_solve_error_propagates(client):
    body = {"command": "solve", "contract": fixture_text("term_insurance"), "options": {"step": 20.0}}
    out = client.post("/scenario", json=body).json()
    assert out["exit_status"] == 2
    assert out["error"].startswith("ConfigurationError")


def test_estimate_and_comparison():
    request = ScenarioRequest(
        command="estimate", contract=fixture_text("term_insurance"), options=ScenarioOptions(paths=5000, seed=3)
    )
    response = run_scenario(request)
    names = {f.name for f in response.files}
    assert names == {"estimate.txt", "comparison.txt"}
    assert response.exit_status == (0 if response.passed else 1)
    assert response.passed


def test_solve_nonlinear_reports_lipschitz():
    request = ScenarioRequest(command="solve-nonlinear", contract=fixture_text("surrender"))
    response = run_scenario(request)
    assert response.exit_status == 0
    assert any(line.startswith("lipschitz:") for line in response.summary)


def test_modifications_command():
    request = ScenarioRequest(
        command="modifications", contract=fixture_text("switching"), options=ScenarioOptions(paths=200, seed=1)
    )
    response = run_scenario(request)
    assert response.exit_status == 0
    trace = {f.name: f.content for f in response.files}["trace.csv"]
    assert trace.startswith("path_id,m,tau,from_mode,to_mode,state,rho\n")


def test_modifications_need_markov():
    request = ScenarioRequest(command="modifications", contract=fixture_text("disability"))
    assert run_scenario(request).exit_status == 2


def test_identical_requests_identical_responses():
    request = ScenarioRequest(
        command="simulate", contract=fixture_text("switching"), options=ScenarioOptions(paths=50, seed=4)
    )
    assert run_scenario(request) == run_scenario(request)
