"""Dispatch of scenario requests to the engine.

Each command returns its output files as text; nothing is written to disk
here, so the same code serves the HTTP endpoints and the in-process CLI.
Exit status: 0 when every check of the command passed, 1 when a check
failed, 2 when the contract or the computation raised an error.
"""

from __future__ import annotations

import time
import warnings

from ..errors import ConfigurationError, ReserveError
from ..model import MARKOV, SEMI_MARKOV, ContractSpec, load_contract, validate_assumptions
from ..modifications import (
    adjustment_factors,
    cantelli_residual,
    dump_traces,
    one_more_modification_values,
    recursion_consistency,
)
from ..montecarlo import ADJUSTED, compare_to_solver, estimate_reserve, format_estimate
from ..reserve_linear import export_value_function, solve_thiele_markov, solve_thiele_semimarkov
from ..reserve_nonlinear import check_lipschitz, contract_driver, solve_nonlinear_markov
from ..simulate import dump_paths, simulate_path
from ..verification import Settings, run_verification
from .schemas import OutputFile, ScenarioOptions, ScenarioRequest, ScenarioResponse

Result = tuple[bool, list[str], dict[str, str]]


def _initial_values(V, spec: ContractSpec) -> list[str]:
    lines = []
    for i, s in enumerate(spec.states.labels):
        for k, m in enumerate(spec.modes.labels):
            lines.append(f"V(0, {s}, {m}) = {V.at(0.0, i, k)!r}")
    return lines


def _solve(spec: ContractSpec, opts: ScenarioOptions):
    if spec.kind == SEMI_MARKOV:
        return solve_thiele_semimarkov(spec, opts.step, opts.duration_step)
    return solve_thiele_markov(spec, opts.step)


def _cmd_solve(spec: ContractSpec, opts: ScenarioOptions) -> Result:
    report = validate_assumptions(spec, 1000)
    V = _solve(spec, opts)
    lines = _initial_values(V, spec)
    lines += [f"check {c.name}: {'pass' if c.passed else 'FAIL ' + str(c.witness)}" for c in report.checks]
    return report.passed, lines, {"values.csv": export_value_function(V), "summary.txt": "\n".join(lines) + "\n"}


def _cmd_solve_nonlinear(spec: ContractSpec, opts: ScenarioOptions) -> Result:
    driver = contract_driver(spec)
    V = solve_nonlinear_markov(spec, driver, opts.step, picard_tol=min(opts.tol, 1e-10))
    lip = check_lipschitz(driver, spec, 1000)
    lines = _initial_values(V, spec)
    lines += [
        f"max fixed-point sweeps per step: {V.info['max_iterations']}",
        f"max contraction ratio: {V.info['max_contraction']!r}",
        f"lipschitz: max ratio {lip.max_ratio!r}, declared C {lip.declared!r}, violations {lip.violations}",
    ]
    return lip.passed, lines, {"values.csv": export_value_function(V), "summary.txt": "\n".join(lines) + "\n"}


def _cmd_simulate(spec: ContractSpec, opts: ScenarioOptions) -> Result:
    paths = [simulate_path(spec, opts.seed, path_index=p) for p in range(opts.paths)]
    bad = 0
    for path in paths:
        try:
            path.check()
        except ValueError:
            bad += 1
    events = sum(len(p.events) for p in paths)
    lines = [f"paths: {len(paths)}", f"events: {events}", f"invalid paths: {bad}"]
    return bad == 0, lines, {"paths.csv": dump_paths(paths, spec), "summary.txt": "\n".join(lines) + "\n"}


def _cmd_estimate(spec: ContractSpec, opts: ScenarioOptions) -> Result:
    frozen = reserve = None
    multi_mode = bool(spec.intensities.mode_tables)
    if spec.kind == MARKOV and (opts.kind == ADJUSTED or spec.payments.surrender_fraction):
        frozen, _ = one_more_modification_values(spec, opts.step)
    elif spec.payments.surrender_fraction or opts.kind == ADJUSTED:
        if opts.kind == ADJUSTED:
            raise ConfigurationError("adjusted cash flows need a markov contract")
        reserve = _solve(spec, opts)
    t0 = time.perf_counter()
    est = estimate_reserve(
        spec, opts.kind, opts.paths, opts.seed, frozen=frozen, reserve=reserve,
        workers=opts.workers, mode_jump_cap=opts.mode_jump_cap,
    )
    elapsed = time.perf_counter() - t0 if opts.timing else None
    files = {"estimate.txt": format_estimate(est, elapsed)}
    x0, j0 = spec.states.initial_state, spec.modes.initial_mode
    if opts.kind == ADJUSTED:
        ref, label = frozen.value(j0, 0.0, x0), "frozen reserve"
    elif multi_mode and spec.payments.surrender_fraction:
        # surrender values follow the frozen reserves, which the modulated
        # solver does not model; there is no grid reference for this mix
        ref, label = None, None
    else:
        ref, label = (reserve or _solve(spec, opts)).at(0.0, x0, j0), "solver reserve"
    lines = files["estimate.txt"].splitlines()
    passed = True
    if ref is not None:
        cmp = compare_to_solver(est, ref)
        passed = cmp.passed
        lines += [f"{label}: {ref!r}", f"z: {cmp.z!r}", f"within 3 stderr: {cmp.passed}"]
        files["comparison.txt"] = "\n".join(lines[-3:]) + "\n"
    return passed, lines, files


def _cmd_modifications(spec: ContractSpec, opts: ScenarioOptions) -> Result:
    if spec.kind != MARKOV:
        raise ConfigurationError("modifications need a markov contract")
    frozen, W = one_more_modification_values(spec, opts.step)
    traces, worst, count = [], 0.0, 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for p in range(opts.paths):
            trace = adjustment_factors(simulate_path(spec, opts.seed, path_index=p), frozen, spec, cap=opts.mode_jump_cap)
            traces.append(trace)
            if len(trace):
                count += len(trace)
                worst = max(worst, recursion_consistency(trace, spec, W, frozen).max_difference)
    residual = cantelli_residual(frozen, spec)
    lines = [
        f"V_{m}(0, {spec.state_label(spec.states.initial_state)}) = {frozen.value(k, 0.0, spec.states.initial_state)!r}"
        for k, m in enumerate(spec.modes.labels)
    ]
    lines += [
        f"modifications: {count} on {opts.paths} paths",
        f"cantelli residual: {residual!r}",
        f"recursion consistency: {worst!r}",
    ]
    passed = residual <= 1e-9 and worst <= 1e-9
    return passed, lines, {"trace.csv": dump_traces(traces, spec), "summary.txt": "\n".join(lines) + "\n"}


def _cmd_verify(spec: ContractSpec | None, opts: ScenarioOptions) -> Result:
    settings = Settings(step=opts.step, paths=opts.paths, seed=opts.seed, tol=opts.tol, workers=opts.workers)
    results = run_verification(settings)
    lines = [r.line() for r in results]
    passed = all(r.passed for r in results)
    lines.append(f"overall: {'PASS' if passed else 'FAIL'}")
    return passed, lines, {"verification.txt": "\n".join(lines) + "\n"}


_HANDLERS = {
    "solve": _cmd_solve,
    "solve-nonlinear": _cmd_solve_nonlinear,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "modifications": _cmd_modifications,
    "verify": _cmd_verify,
}


def run_scenario(request: ScenarioRequest) -> ScenarioResponse:
    """Run one command and collect its output files."""
    try:
        spec = None
        if request.contract is not None:
            spec = load_contract(request.contract)
        elif request.command != "verify":
            raise ConfigurationError(f"command {request.command!r} needs a contract")
        passed, lines, files = _HANDLERS[request.command](spec, request.options)
    except ReserveError as exc:
        return ScenarioResponse(command=request.command, exit_status=2, passed=False, error=f"{type(exc).__name__}: {exc}")
    return ScenarioResponse(
        command=request.command,
        exit_status=0 if passed else 1,
        passed=passed,
        summary=lines,
        files=[OutputFile(name=n, content=c) for n, c in files.items()],
    )
