"""Bundled example contracts."""

from __future__ import annotations

from importlib import resources

from .model import ContractSpec, load_contract

FIXTURES = (
    "term_insurance",
    "pure_endowment",
    "surrender",
    "surrender_forfeit",
    "disability",
    "free_policy",
    "switching",
)


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    return resources.files("lifereserve.contracts").joinpath(f"{name}.yaml").read_text()


def load_fixture(name: str) -> ContractSpec:
    return load_contract(fixture_text(name))
