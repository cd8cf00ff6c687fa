"""Request and response models of the reserving service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

Command = Literal["solve", "solve-nonlinear", "simulate", "estimate", "modifications", "verify"]
COMMANDS: tuple[str, ...] = ("solve", "solve-nonlinear", "simulate", "estimate", "modifications", "verify")


class ScenarioOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    step: PositiveFloat = 1e-3
    duration_step: Optional[PositiveFloat] = None
    paths: PositiveInt = 100_000
    seed: int = Field(0, ge=0, lt=2**64)
    tol: PositiveFloat = 1e-6
    mode_jump_cap: PositiveInt = 100
    kind: Literal["plain", "adjusted"] = "plain"
    workers: PositiveInt = 1
    timing: bool = False


class ScenarioBody(BaseModel):
    """Contract document and options; the command comes from the route."""

    model_config = ConfigDict(extra="forbid")

    contract: Optional[str] = Field(None, description="contract document (YAML or JSON text)")
    options: ScenarioOptions = ScenarioOptions()


class ScenarioRequest(ScenarioBody):
    command: Command


class OutputFile(BaseModel):
    name: str
    content: str


class ScenarioResponse(BaseModel):
    command: Command
    exit_status: int
    passed: bool
    summary: list[str] = []
    files: list[OutputFile] = []
    error: Optional[str] = None


class HealthResponse(BaseModel):
    status: str
    version: str
