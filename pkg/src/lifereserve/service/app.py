"""FastAPI application; run with ``uvicorn lifereserve.service.app:app``."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from .runner import run_scenario
from .schemas import COMMANDS, HealthResponse, ScenarioBody, ScenarioRequest, ScenarioResponse

app = FastAPI(title="lifereserve", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/scenario", response_model=ScenarioResponse)
def scenario(request: ScenarioRequest) -> ScenarioResponse:
    return run_scenario(request)


@app.post("/commands/{command}", response_model=ScenarioResponse)
def command(command: str, body: ScenarioBody) -> ScenarioResponse:
    if command not in COMMANDS:
        raise HTTPException(status_code=404, detail=f"unknown command {command!r}")
    return run_scenario(ScenarioRequest(command=command, **body.model_dump()))
