"""Command line client.

Every command builds a scenario request and either runs it in process or,
with ``--server``, posts it to a running service.  Output files land in
``--out``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .service.schemas import ScenarioOptions, ScenarioRequest, ScenarioResponse


def _common(fn):
    options = [
        click.option("--step", type=float, default=1e-3, show_default=True, help="time step h in years"),
        click.option("--duration-step", type=float, default=None, help="duration step (semi-Markov); must equal --step"),
        click.option("--paths", type=int, default=100_000, show_default=True, help="number of simulated paths"),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--tol", type=float, default=1e-6, show_default=True, help="tolerance of closed-form checks"),
        click.option("--mode-jump-cap", type=int, default=100, show_default=True, help="max modifications per path"),
        click.option("--kind", type=click.Choice(["plain", "adjusted"]), default="plain", show_default=True, help="cash flow valued by estimate"),
        click.option("--workers", type=int, default=1, show_default=True, help="processes for Monte Carlo"),
        click.option("--timing", is_flag=True, help="add elapsed seconds to estimate reports"),
        click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True, help="output directory"),
        click.option("--server", default=None, help="base URL of a running service; run in process if omitted"),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _post(server: str, request: ScenarioRequest) -> ScenarioResponse:
    import httpx

    resp = httpx.post(server.rstrip("/") + "/scenario", json=request.model_dump(), timeout=None)
    resp.raise_for_status()
    return ScenarioResponse.model_validate(resp.json())


def _run(command: str, contract: str | None, out: str, server: str | None, **opts) -> None:
    text = None
    if contract is not None:
        try:
            text = Path(contract).read_text()
        except OSError as exc:
            click.echo(f"error: cannot read {contract}: {exc.strerror}", err=True)
            sys.exit(2)
    try:
        request = ScenarioRequest(command=command, contract=text, options=ScenarioOptions(**opts))
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    if server:
        response = _post(server, request)
    else:
        from .service.runner import run_scenario

        response = run_scenario(request)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in response.files:
        (out_dir / f.name).write_text(f.content)
    for line in response.summary:
        click.echo(line)
    if response.error:
        click.echo(f"error: {response.error}", err=True)
    sys.exit(response.exit_status)


@click.group()
@click.version_option(package_name="lifereserve")
def main():
    """Reserving engine for multi-state life insurance contracts."""


def _command(name: str, contract_required: bool = True):
    @_common
    def cmd(contract, **opts):
        _run(name, contract, **opts)

    cmd.__name__ = name.replace("-", "_")
    arg = click.argument("contract", type=click.Path(), required=contract_required)
    return main.command(name)(arg(cmd))


for _name, _help in (
    ("solve", "Solve the linear Thiele equation and write values.csv."),
    ("solve-nonlinear", "Solve with reserve-dependent surrender payments."),
    ("simulate", "Simulate paths and write paths.csv."),
    ("estimate", "Monte Carlo estimate of the reserve at time 0."),
    ("modifications", "Adjustment factors along simulated paths and trace.csv."),
):
    _command(_name).help = _help
_command("verify", contract_required=False).help = "Run every end-to-end check on the bundled contracts."


if __name__ == "__main__":  # pragma: no cover
    main()
