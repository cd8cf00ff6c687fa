"""Contract modifications: frozen-mode reserves and adjustment factors.

After a modification no further mode jumps are allowed, so the reserve from
then on is the reserve of the contract with every mode intensity switched
off.  Solving that contract once gives the value ``V_k(t, i)`` for each mode
``k``, and the adjustment factor at a modification ``k -> l`` at time ``tau``
in state ``i`` follows from the requirement that the adjusted reserve does
not jump:

    rho_{m+1} V_l(tau, i) = rho_m V_k(tau-, i) - rho_m beta_kl(tau, i)

with ``0 / 0 := 1``.  Before the first modification the factor in force is 1.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .cashflow import ScaleSchedule, path_cashflow_value
from .errors import ConfigurationError, EquivalenceError, PathMismatchError
from .model import MARKOV, ContractSpec
from .reserve_linear import (
    MarkovCoefficients,
    ValueFunction,
    lump_vector,
    make_grid,
    march_backward,
    rk4_backward,
    solve_thiele_markov,
)
from .simulate import MODE_JUMP, STATE_JUMP, Path


@dataclass(frozen=True)
class FrozenValues:
    """Reserves ``V_k(t, i)`` of the contract without further modifications.

    Without mode intensities the modes decouple, so a single solve of the
    frozen contract yields every mode's function.
    """

    values: ValueFunction

    def value(self, mode: int, t: float, state: int, left: bool = False) -> float:
        return self.values.at(t, state, mode, left=left)

    def lookup(self, t: float, state: int, mode: int, duration: float = 0.0) -> float:
        """Reserve just before ``t``, in the signature used by cash-flow valuation."""
        return self.values.at(t, state, mode, left=True)

    @cached_property
    def by_mode(self) -> tuple[ValueFunction, ...]:
        V = self.values
        return tuple(
            ValueFunction(
                V.times,
                V.values[:, :, k : k + 1],
                {n: v[:, k : k + 1] for n, v in V.left.items()},
                V.kind,
                V.state_labels,
                (V.mode_labels[k],),
            )
            for k in range(len(V.mode_labels))
        )


def frozen_value_functions(spec: ContractSpec, step: float) -> FrozenValues:
    if spec.kind != MARKOV:
        raise ConfigurationError("frozen values are available for markov contracts only")
    return FrozenValues(solve_thiele_markov(spec.without_mode_jumps(), step))


# --------------------------------------------------------------------------
# adjustment factors


@dataclass(frozen=True)
class AdjustmentRecord:
    m: int
    tau: float
    from_mode: int
    to_mode: int
    state: int
    rho: float
    rho_prev: float


@dataclass(frozen=True)
class AdjustmentTrace:
    records: tuple[AdjustmentRecord, ...]

    def __len__(self):
        return len(self.records)

    @property
    def taus(self) -> list[float]:
        return [r.tau for r in self.records]

    @property
    def rhos(self) -> list[float]:
        return [r.rho for r in self.records]

    def schedule(self) -> ScaleSchedule:
        return ScaleSchedule(self.taus, self.rhos)


def _ratio(num: float, den: float, tau: float) -> float:
    if den == 0.0:
        if num == 0.0:
            return 1.0
        raise EquivalenceError(tau, num)
    return num / den


def adjustment_factors(
    path: Path, frozen: FrozenValues, spec: ContractSpec, cap: int = 100
) -> AdjustmentTrace:
    """Walk the mode jumps of ``path`` and compute ``rho_1, rho_2, ...``.

    Raises:
        EquivalenceError: post-modification reserve is 0 while the amount to
            be carried over is not.
        PathMismatchError: path and contract do not belong together.
        ConfigurationError: more than ``cap`` modifications on the path.
    """
    if not math.isclose(path.horizon, spec.horizon, rel_tol=1e-12):
        raise PathMismatchError("path horizon differs from contract horizon")
    if path.initial_mode >= spec.n_modes or path.initial_state >= spec.n_states:
        raise PathMismatchError("path starts outside the contract's state or mode space")
    pay = spec.payments
    rho = 1.0
    records: list[AdjustmentRecord] = []
    i, k, anchor = path.initial_state, path.initial_mode, 0.0
    for ev in path.events:
        if ev.kind == STATE_JUMP:
            i, anchor = ev.target, ev.time
            continue
        if ev.source != k or ev.target >= spec.n_modes:
            raise PathMismatchError(f"mode jump {ev} does not fit the contract")
        tau, l = ev.time, ev.target
        fee = float(pay.mode_transition_payment(tau, k, l, i, tau - anchor))
        num = rho * frozen.value(k, tau, i, left=True) - rho * fee
        new = _ratio(num, frozen.value(l, tau, i), tau)
        if new < 0:
            warnings.warn(f"negative adjustment factor {new!r} at tau={tau!r}", stacklevel=2)
        records.append(AdjustmentRecord(len(records) + 1, tau, k, l, i, new, rho))
        if len(records) > cap:
            raise ConfigurationError(f"path exceeds the modification cap of {cap}")
        rho, k = new, l
        if spec.duration_resets_on_mode_jump:
            anchor = tau
    return AdjustmentTrace(tuple(records))


def adjusted_cashflow_value(
    path: Path, trace: AdjustmentTrace, spec: ContractSpec, frozen: FrozenValues | None = None
) -> float:
    """Discounted adjusted cash flow of ``path``; surrender values use ``frozen``."""
    reserve = frozen.lookup if frozen is not None else None
    return path_cashflow_value(path, spec, trace.schedule(), reserve)


# --------------------------------------------------------------------------
# Cantelli condition


def cantelli_residual(
    frozen: FrozenValues,
    spec: ContractSpec,
    grid: Sequence[float] | None = None,
    rho_override: float | None = None,
) -> float:
    """Largest adjusted mode-jump sum at risk over the grid.

    With the factor chosen by the equivalence rule the sum at risk
    ``rho V_l(t, i) - (V_k(t-, i) - beta_kl(t, i))`` vanishes up to rounding;
    ``rho_override`` replaces the rule by a fixed factor.  The default grid
    is the solver grid without ``T``, where nothing is left to adjust.
    """
    times = frozen.values.times[:-1] if grid is None else np.asarray(grid, dtype=float)
    pay = spec.payments
    worst = 0.0
    for (k, l, i), fn in spec.intensities.mode_tables.items():
        for t in times:
            t = float(t)
            if float(fn(t, 0.0)) <= 0.0:
                continue
            # events never coincide with lump atoms: a modification at an
            # atom node happens just after the lump, so the right value is
            # the pre-modification reserve there; elsewhere both limits agree
            before = frozen.value(k, t, i)
            fee = float(pay.mode_transition_payment(t, k, l, i))
            after = frozen.value(l, t, i)
            rho = rho_override if rho_override is not None else _ratio(before - fee, after, t)
            worst = max(worst, abs(rho * after - (before - fee)))
    return worst


def one_more_modification_values(spec: ContractSpec, step: float) -> tuple[FrozenValues, ValueFunction]:
    """Frozen values and the adjusted reserve allowing exactly one more modification.

    ``W(t, i, k)`` is the reserve in mode ``k`` (per unit of factor in force)
    when one further modification may occur, its factor set at that time by
    ``rho(t) V_l(t, i) = W(t-, i, k) - beta_kl(t, i)``.  Both systems are
    integrated together so that ``V_l`` is available at every RK stage.
    """
    if spec.kind != MARKOV:
        raise ConfigurationError("markov contracts only")
    frozen_spec = spec.without_mode_jumps()
    grid = make_grid(spec, step)
    coeffs = MarkovCoefficients(frozen_spec, surrender="linear")
    S, J = spec.n_states, spec.n_modes
    pay = spec.payments
    mode_items = list(spec.intensities.mode_tables.items())

    def f(t, y):
        v, w = y[0].ravel(), y[1]
        delta, A, g = coeffs(t)
        dv = delta * v - g - A @ v
        dw = (delta * w.ravel() - g - A @ w.ravel()).reshape(S, J)
        for (k, l, i), fn in mode_items:
            r = float(fn(t, 0.0))
            if r == 0.0:
                continue
            fee = float(pay.mode_transition_payment(t, k, l, i))
            after = v[i * J + l]
            carried = _ratio(w[i, k] - fee, after, t) * after
            dw[i, k] -= r * (fee + carried - w[i, k])
        return np.stack([dv.reshape(S, J), dw])

    def advance(hi, lo, y):
        return rk4_backward(f, hi, lo, y)

    def jump(n, y):
        return y + lump_vector(spec, grid.atoms[n])[None, :, :]

    right, left = march_backward(spec, grid, np.zeros((2, S, J)), advance, jump)
    frozen = FrozenValues(
        ValueFunction(grid.times, right[:, 0], {n: v[0] for n, v in left.items()}, MARKOV, spec.states.labels, spec.modes.labels)
    )
    W = ValueFunction(grid.times, right[:, 1], {n: v[1] for n, v in left.items()}, MARKOV, spec.states.labels, spec.modes.labels)
    return frozen, W


@dataclass(frozen=True)
class RecursionCheck:
    rho_recursion: tuple[float, ...]
    rho_condition: tuple[float, ...]

    @property
    def max_difference(self) -> float:
        if not self.rho_recursion:
            return 0.0
        return max(abs(a - b) for a, b in zip(self.rho_recursion, self.rho_condition))


def recursion_consistency(
    trace: AdjustmentTrace, spec: ContractSpec, W: ValueFunction, frozen: FrozenValues
) -> RecursionCheck:
    """Recompute every factor of ``trace`` from the one-more-modification reserve.

    The recursion uses the reserve with no further modification just before
    ``tau``; the condition uses ``W``, the reserve that still allows this
    modification.  They coincide because the adjusted mode-jump sum at risk
    vanishes.
    """
    pay = spec.payments
    cond = []
    for r in trace.records:
        fee = float(pay.mode_transition_payment(r.tau, r.from_mode, r.to_mode, r.state))
        before = r.rho_prev * W.at(r.tau, r.state, r.from_mode, left=True)
        cond.append(_ratio(before - r.rho_prev * fee, frozen.value(r.to_mode, r.tau, r.state), r.tau))
    return RecursionCheck(tuple(trace.rhos), tuple(cond))


def dump_traces(traces: Iterable[AdjustmentTrace], spec: ContractSpec | None = None) -> str:
    """Delimiter-separated ``path_id,m,tau,from_mode,to_mode,state,rho``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path_id", "m", "tau", "from_mode", "to_mode", "state", "rho"])
    for pid, trace in enumerate(traces):
        for r in trace.records:
            if spec is not None:
                row = [spec.mode_label(r.from_mode), spec.mode_label(r.to_mode), spec.state_label(r.state)]
            else:
                row = [r.from_mode, r.to_mode, r.state]
            writer.writerow([pid, r.m, repr(r.tau)] + row + [repr(r.rho)])
    return buf.getvalue()
