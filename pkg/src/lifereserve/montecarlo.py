"""Monte Carlo oracle for the prospective reserve at time 0."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cashflow import path_cashflow_value
from .errors import ConfigurationError
from .model import ContractSpec
from .modifications import FrozenValues, adjusted_cashflow_value, adjustment_factors
from .reserve_linear import ValueFunction
from .simulate import simulate_path

PLAIN = "plain"
ADJUSTED = "adjusted"


@dataclass(frozen=True)
class ReserveEstimate:
    mean: float
    stderr: float
    path_count: int
    seed: int
    cashflow_kind: str = PLAIN


@dataclass(frozen=True)
class Comparison:
    z: float
    passed: bool
    threshold: float = 3.0


def _reserve_lookup(spec, frozen, reserve):
    if frozen is not None:
        return frozen.lookup
    if reserve is not None:
        return lambda t, i, k, u: reserve.at(t, i, k, u, left=True)
    return None


def path_values(
    spec: ContractSpec,
    cashflow_kind: str,
    seed: int,
    start: int,
    stop: int,
    frozen: FrozenValues | None = None,
    reserve: ValueFunction | None = None,
    mode_jump_cap: int = 100,
) -> np.ndarray:
    """Discounted cash-flow values of paths ``start .. stop - 1``."""
    lookup = _reserve_lookup(spec, frozen, reserve)
    out = np.empty(stop - start)
    with warnings.catch_warnings():
        # negative factors are legitimate here and would flood the output
        warnings.simplefilter("ignore")
        for n, p in enumerate(range(start, stop)):
            path = simulate_path(spec, seed, path_index=p)
            if cashflow_kind == ADJUSTED:
                trace = adjustment_factors(path, frozen, spec, cap=mode_jump_cap)
                out[n] = adjusted_cashflow_value(path, trace, spec, frozen)
            else:
                out[n] = path_cashflow_value(path, spec, reserve=lookup)
    return out


def _chunk(args):
    return path_values(*args)


def estimate_reserve(
    spec: ContractSpec,
    cashflow_kind: str = PLAIN,
    path_count: int = 100_000,
    seed: int = 0,
    frozen: FrozenValues | None = None,
    reserve: ValueFunction | None = None,
    workers: int = 1,
    mode_jump_cap: int = 100,
) -> ReserveEstimate:
    """Sample mean and standard error of the discounted cash flow.

    Args:
        spec: Contract to value.
        cashflow_kind: ``"plain"`` for the contractual cash flow or
            ``"adjusted"`` for the cash flow scaled by adjustment factors.
        path_count: Number of paths, at least 100.
        seed: Root seed; path ``p`` uses the stream keyed by ``(seed, p)``.
        frozen: Frozen-mode reserves; needed for adjusted cash flows and to
            value surrender payments ``(1 - kappa) Y(t-)``.
        reserve: Alternative source of ``Y(t-)`` for plain cash flows.
        workers: Processes to spread the paths over.  The result does not
            depend on it.

    Returns:
        ReserveEstimate; identical inputs give identical estimates.
    """
    if cashflow_kind not in (PLAIN, ADJUSTED):
        raise ConfigurationError(f"unknown cash-flow kind {cashflow_kind!r}")
    if path_count < 100:
        raise ConfigurationError("path_count must be >= 100")
    if cashflow_kind == ADJUSTED and frozen is None:
        raise ConfigurationError("adjusted cash flows need frozen values")
    if spec.payments.surrender_fraction and frozen is None and reserve is None:
        raise ConfigurationError("surrender payments need frozen values or a reserve")
    workers = max(1, min(int(workers), os.cpu_count() or 1))
    if workers == 1:
        values = path_values(spec, cashflow_kind, seed, 0, path_count, frozen, reserve, mode_jump_cap)
    else:
        bounds = np.linspace(0, path_count, 4 * workers + 1).astype(int)
        jobs = [
            (spec, cashflow_kind, seed, int(a), int(b), frozen, reserve, mode_jump_cap)
            for a, b in zip(bounds, bounds[1:])
        ]
        with ProcessPoolExecutor(workers) as pool:
            values = np.concatenate(list(pool.map(_chunk, jobs)))
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(path_count))
    return ReserveEstimate(mean, stderr, path_count, seed, cashflow_kind)


def compare_to_solver(estimate: ReserveEstimate, solver_value: float, threshold: float = 3.0) -> Comparison:
    diff = solver_value - estimate.mean
    if estimate.stderr == 0.0:
        return Comparison(0.0 if diff == 0.0 else math.copysign(math.inf, diff), diff == 0.0, threshold)
    z = diff / estimate.stderr
    return Comparison(z, abs(z) <= threshold, threshold)


def format_estimate(estimate: ReserveEstimate, elapsed: float | None = None) -> str:
    """Structured text report; elapsed time only when asked for."""
    lines = [
        f"kind: {estimate.cashflow_kind}",
        f"mean: {estimate.mean!r}",
        f"stderr: {estimate.stderr!r}",
        f"n: {estimate.path_count}",
        f"seed: {estimate.seed}",
    ]
    if elapsed is not None:
        lines.append(f"elapsed_seconds: {elapsed:.3f}")
    return "\n".join(lines) + "\n"
