"""Contract domain types, config ingestion and assumption checks.

A contract lives on the product of a policyholder state space ``S`` and a
contract mode space ``J``.  Intensities and payments are tables indexed by
transition keys and evaluated as ``f(t, u)`` with ``u`` the duration in the
current state.

Index conventions used throughout the package:

* state transition ``(i, j, k)``: policyholder moves ``i -> j`` in mode ``k``;
* mode transition ``(k, l, i)``: contract moves ``k -> l`` while in state ``i``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from .errors import ContractParseError, ContractValidationError
from .tables import (
    DURATION,
    TIME,
    Constant,
    Exponential,
    PiecewiseConstant,
    PiecewisePolynomial,
    Table,
    table_from_values,
)

MARKOV = "markov"
SEMI_MARKOV = "semi_markov"

RateFn = Callable[..., Any]


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]
    initial_state: int = 0

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ContractValidationError("state space is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ContractValidationError("state labels must be unique")
        if not 0 <= self.initial_state < len(self.labels):
            raise ContractValidationError(f"invalid initial state {self.initial_state}")

    def __len__(self):
        return len(self.labels)

    def index(self, label: str | int) -> int:
        if isinstance(label, int) and 0 <= label < len(self.labels):
            return label
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None


@dataclass(frozen=True)
class ModeSpace:
    labels: tuple[str, ...] = ("standard",)
    initial_mode: int = 0

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.labels:
            raise ContractValidationError("mode space is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ContractValidationError("mode labels must be unique")
        if not 0 <= self.initial_mode < len(self.labels):
            raise ContractValidationError(f"invalid initial mode {self.initial_mode}")

    def __len__(self):
        return len(self.labels)

    def index(self, label: str | int) -> int:
        if isinstance(label, int) and 0 <= label < len(self.labels):
            return label
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None


@dataclass(frozen=True)
class IntensityModel:
    """Transition intensities of the state process and the mode process.

    ``state_tables[(i, j, k)]`` gives the rate of ``i -> j`` in mode ``k`` and
    ``mode_tables[(k, l, i)]`` the rate of ``k -> l`` in state ``i``; missing
    keys mean rate zero.  ``rate_bound`` must dominate the total exit rate of
    every ``(i, k)`` on ``[0, T]``; the simulator thins against it.
    """

    state_tables: Mapping[tuple[int, int, int], RateFn]
    mode_tables: Mapping[tuple[int, int, int], RateFn] = field(default_factory=dict)
    kind: str = MARKOV
    rate_bound: float = 0.0

    def __post_init__(self):
        if self.kind not in (MARKOV, SEMI_MARKOV):
            raise ContractValidationError(f"unknown model kind {self.kind!r}")
        object.__setattr__(
            self, "state_tables", {k: v for k, v in self.state_tables.items() if k[0] != k[1]}
        )
        object.__setattr__(
            self, "mode_tables", {k: v for k, v in self.mode_tables.items() if k[0] != k[1]}
        )
        if not math.isfinite(self.rate_bound) or self.rate_bound < 0:
            raise ContractValidationError("rate_bound must be finite and nonnegative")

    def state_rate(self, t, i, j, k, u=0.0):
        fn = self.state_tables.get((i, j, k))
        return 0.0 if fn is None else fn(t, u)

    def mode_rate(self, t, k, l, i, u=0.0):
        fn = self.mode_tables.get((k, l, i))
        return 0.0 if fn is None else fn(t, u)


@dataclass(frozen=True)
class PaymentModel:
    """Sojourn rates, lump sums, transition payments and surrender fractions.

    ``lumps`` maps ``(time, i, k)`` to an amount paid at that atom of the
    lump measure when the policy is in ``(i, k)`` just before it.
    ``surrender_fraction[(i, j)] = 1 - kappa`` declares that the ``i -> j``
    payment is that fraction of the reserve ``Y(t-)`` instead of a table.
    Every payment vanishes for ``t > horizon``.
    """

    horizon: float
    sojourn: Mapping[tuple[int, int], RateFn] = field(default_factory=dict)
    lumps: Mapping[tuple[float, int, int], float] = field(default_factory=dict)
    transitions: Mapping[tuple[int, int, int], RateFn] = field(default_factory=dict)
    mode_transitions: Mapping[tuple[int, int, int], RateFn] = field(default_factory=dict)
    surrender_fraction: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lumps", {(float(t), i, k): float(a) for (t, i, k), a in self.lumps.items()})
        for (i, j), frac in self.surrender_fraction.items():
            if any(key[:2] == (i, j) for key in self.transitions):
                raise ContractValidationError(
                    f"transition {i}->{j} has both a payment table and a surrender fraction"
                )

    @cached_property
    def lump_times(self) -> tuple[float, ...]:
        return tuple(sorted({t for (t, _, _) in self.lumps}))

    def sojourn_rate(self, t, i, k, u=0.0):
        fn = self.sojourn.get((i, k))
        if fn is None or t > self.horizon:
            return 0.0 * u if isinstance(u, np.ndarray) else 0.0
        return fn(t, u)

    def lump_amount(self, t, i, k, u=0.0):
        if t > self.horizon:
            return 0.0
        return self.lumps.get((float(t), i, k), 0.0)

    def state_transition_payment(self, t, i, j, k, u=0.0):
        fn = self.transitions.get((i, j, k))
        if fn is None or t > self.horizon:
            return 0.0 * u if isinstance(u, np.ndarray) else 0.0
        return fn(t, u)

    def mode_transition_payment(self, t, k, l, i, u=0.0):
        fn = self.mode_transitions.get((k, l, i))
        if fn is None or t > self.horizon:
            return 0.0 * u if isinstance(u, np.ndarray) else 0.0
        return fn(t, u)


@dataclass(frozen=True)
class DiscountModel:
    """Deterministic short rate ``delta(t)`` with ``|delta| <= bound``."""

    rate: RateFn
    bound: float

    def __call__(self, t: float) -> float:
        return self.rate(t, 0.0)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(getattr(self.rate, "breakpoints", ()))

    @cached_property
    def _pieces(self):
        """Start times, rates and cumulative integrals of a tabulated rate."""
        if isinstance(self.rate, Constant):
            return np.array([0.0]), np.array([self.rate.value]), np.array([0.0])
        if isinstance(self.rate, PiecewiseConstant) and self.rate.argument == TIME:
            starts = np.array([0.0] + [b for b in self.rate.breakpoints_ if b > 0])
            rates = np.array([self.rate(s) for s in starts])
            cum = np.concatenate([[0.0], np.cumsum(rates[:-1] * np.diff(starts))])
            return starts, rates, cum
        return None

    def cumulative(self, t):
        """``int_0^t delta(s) ds`` for a float or an array of times.

        Exact for constant and piecewise-constant rates; other rates fall back
        to adaptive quadrature split at the breakpoints.
        """
        pieces = self._pieces
        if pieces is not None:
            starts, rates, cum = pieces
            x = np.maximum(np.asarray(t, dtype=float), 0.0)
            idx = np.searchsorted(starts, x, side="right") - 1
            out = cum[idx] + rates[idx] * (x - starts[idx])
            return float(out) if out.ndim == 0 else out
        if isinstance(t, np.ndarray):
            return np.array([self.cumulative(float(s)) for s in t.ravel()]).reshape(t.shape)
        if t <= 0:
            return 0.0
        from scipy.integrate import quad

        cuts = [0.0] + [b for b in self.breakpoints if 0 < b < t] + [t]
        return sum(quad(lambda s: self.rate(s, 0.0), a, b)[0] for a, b in zip(cuts, cuts[1:]))

    def factor(self, t):
        return np.exp(-self.cumulative(t)) if isinstance(t, np.ndarray) else math.exp(-self.cumulative(t))


@dataclass(frozen=True)
class Transition:
    """One outgoing transition of an ``(i, k)`` cell, as used by the simulator."""

    is_mode: bool
    target: int
    rate: RateFn


@dataclass(frozen=True)
class ContractSpec:
    states: StateSpace
    modes: ModeSpace
    intensities: IntensityModel
    payments: PaymentModel
    discount: DiscountModel
    horizon: float
    duration_resets_on_mode_jump: bool = False
    name: str = "contract"

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ContractValidationError(f"horizon must be finite and > 0, got {self.horizon!r}")
        if self.payments.horizon != self.horizon:
            raise ContractValidationError("payment horizon differs from contract horizon")
        n_s, n_m = len(self.states), len(self.modes)
        for (i, j, k) in self.intensities.state_tables:
            if not (0 <= i < n_s and 0 <= j < n_s and 0 <= k < n_m):
                raise ContractValidationError(f"state intensity key {(i, j, k)} out of range")
        for (k, l, i) in self.intensities.mode_tables:
            if not (0 <= i < n_s and 0 <= k < n_m and 0 <= l < n_m):
                raise ContractValidationError(f"mode intensity key {(k, l, i)} out of range")
        for t in self.payments.lump_times:
            if not 0 <= t <= self.horizon:
                raise ContractValidationError(f"lump time {t} outside [0, T]")

    @property
    def kind(self) -> str:
        return self.intensities.kind

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def breakpoints(self) -> tuple[float, ...]:
        """Calendar-time breakpoints of every table, restricted to ``(0, T)``."""
        points: set[float] = set(self.discount.breakpoints)
        groups = (
            self.intensities.state_tables,
            self.intensities.mode_tables,
            self.payments.sojourn,
            self.payments.transitions,
            self.payments.mode_transitions,
        )
        for group in groups:
            for fn in group.values():
                points.update(getattr(fn, "breakpoints", ()))
        return tuple(sorted(p for p in points if 0.0 < p < self.horizon))

    @cached_property
    def exits(self) -> dict[tuple[int, int], tuple[Transition, ...]]:
        """Outgoing transitions per ``(state, mode)`` cell."""
        out: dict[tuple[int, int], list[Transition]] = {
            (i, k): [] for i in range(self.n_states) for k in range(self.n_modes)
        }
        for (i, j, k), fn in sorted(self.intensities.state_tables.items()):
            out[(i, k)].append(Transition(False, j, fn))
        for (k, l, i), fn in sorted(self.intensities.mode_tables.items()):
            out[(i, k)].append(Transition(True, l, fn))
        return {key: tuple(v) for key, v in out.items()}

    def without_mode_jumps(self) -> "ContractSpec":
        """The same contract with every mode intensity killed."""
        return replace(self, intensities=replace(self.intensities, mode_tables={}))

    def state_label(self, i: int) -> str:
        return self.states.labels[i]

    def mode_label(self, k: int) -> str:
        return self.modes.labels[k]


# --------------------------------------------------------------------------
# assumption checks


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[Check, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _first_failure(points, predicate):
    for point in points:
        ok, value = predicate(*point)
        if not ok:
            return point, value
    return None


def validate_assumptions(spec: ContractSpec, sample_count: int, seed: int = 0) -> ValidationReport:
    """Check the standing assumptions on randomly sampled points.

    Failures are reported with a witness point, never raised.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    T = spec.horizon
    n_s, n_m = spec.n_states, spec.n_modes
    ts = np.concatenate([rng.uniform(0.0, T, sample_count), np.asarray(spec.breakpoints), [0.0, T]])
    us = rng.uniform(0.0, 1.0, ts.size) * ts
    cells = [(float(t), float(u), i, k) for t, u in zip(ts, us) for i in range(n_s) for k in range(n_m)]
    checks: list[Check] = []
    ints = spec.intensities

    def rate_ok(t, u, i, k):
        for (a, j, m), fn in ints.state_tables.items():
            if a == i and m == k:
                r = fn(t, u)
                if not (math.isfinite(r) and r >= 0):
                    return False, f"state rate {i}->{j} mode {k} = {r!r} at t={t!r}, u={u!r}"
        for (m, l, a), fn in ints.mode_tables.items():
            if a == i and m == k:
                r = fn(t, u)
                if not (math.isfinite(r) and r >= 0):
                    return False, f"mode rate {k}->{l} state {i} = {r!r} at t={t!r}, u={u!r}"
        return True, None

    bad = _first_failure(cells, rate_ok)
    checks.append(Check("rate_nonnegative_finite", bad is None, None if bad is None else bad[1]))

    def bound_ok(t, u, i, k):
        total = sum(float(tr.rate(t, u)) for tr in spec.exits[(i, k)])
        if total > ints.rate_bound * (1 + 1e-12):
            return False, f"total exit rate {total!r} > bound {ints.rate_bound!r} at t={t!r}, state {i}, mode {k}"
        return True, None

    bad = _first_failure(cells, bound_ok)
    checks.append(Check("rate_bound", bad is None, None if bad is None else bad[1]))

    if spec.kind == MARKOV:
        def markov_ok(t, u, i, k):
            for tr in spec.exits[(i, k)]:
                if tr.rate(t, u) != tr.rate(t, 0.0):
                    return False, f"rate from state {i} mode {k} varies with duration at t={t!r}"
            return True, None

        bad = _first_failure(cells, markov_ok)
        checks.append(Check("markov_duration_free", bad is None, None if bad is None else bad[1]))

    pay = spec.payments

    def payment_ok(t, u, i, k):
        values = [("sojourn", pay.sojourn_rate(t, i, k, u))]
        values += [(f"transition {i}->{j}", pay.state_transition_payment(t, i, j, k, u)) for j in range(n_s) if j != i]
        values += [(f"mode transition {k}->{l}", pay.mode_transition_payment(t, k, l, i, u)) for l in range(n_m) if l != k]
        for name, v in values:
            if not math.isfinite(v):
                return False, f"{name} payment {v!r} at t={t!r}, state {i}, mode {k}"
        return True, None

    bad = _first_failure(cells, payment_ok)
    lump_bad = [key for key, amount in pay.lumps.items() if not math.isfinite(amount)]
    if bad is None and lump_bad:
        bad = (None, f"lump at {lump_bad[0]} is not finite")
    checks.append(Check("payment_bounded", bad is None, None if bad is None else bad[1]))

    beyond = T + rng.uniform(0.0, T, max(1, sample_count // 10)) + 1e-9
    late = None
    for t in beyond:
        for i in range(n_s):
            for k in range(n_m):
                vals = [pay.sojourn_rate(t, i, k), pay.lump_amount(t, i, k)]
                vals += [pay.state_transition_payment(t, i, j, k) for j in range(n_s)]
                vals += [pay.mode_transition_payment(t, k, l, i) for l in range(n_m)]
                if any(v != 0.0 for v in vals) and late is None:
                    late = f"nonzero payment at t={t!r} > T"
    checks.append(Check("payments_vanish_after_horizon", late is None, late))

    frac_bad = [(key, f) for key, f in pay.surrender_fraction.items() if not 0.0 <= f <= 1.0]
    checks.append(
        Check(
            "surrender_fraction_range",
            not frac_bad,
            None if not frac_bad else f"fraction {frac_bad[0][1]!r} for transition {frac_bad[0][0]}",
        )
    )

    disc_bad = None
    for t in ts:
        d = spec.discount(float(t))
        if not (math.isfinite(d) and abs(d) <= spec.discount.bound * (1 + 1e-12)):
            disc_bad = f"discount rate {d!r} exceeds bound {spec.discount.bound!r} at t={float(t)!r}"
            break
    checks.append(Check("discount_bounded", disc_bad is None, disc_bad))
    return ValidationReport(tuple(checks))


# --------------------------------------------------------------------------
# config ingestion

_TABLE_KEYS = ("value", "values", "coefficients", "exponential")


def _require(doc: Mapping, key: str, where: str):
    if not isinstance(doc, Mapping) or key not in doc:
        raise ContractParseError(f"{where}{key}" if where else key, "missing required key")
    return doc[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ContractParseError(where, f"expected a number, got {value!r}")
    return float(value)


def _parse_table(entry: Mapping, where: str, nonnegative: bool, time_only: bool = False) -> Table:
    argument = entry.get("argument", TIME)
    if argument not in (TIME, DURATION):
        raise ContractParseError(f"{where}.argument", f"must be 'time' or 'duration', got {argument!r}")
    if time_only and argument != TIME:
        raise ContractParseError(f"{where}.argument", "only 'time' is allowed here")
    present = [k for k in _TABLE_KEYS if k in entry]
    if len(present) != 1:
        raise ContractParseError(f"{where}.values", f"exactly one of {_TABLE_KEYS} is required")
    kind = present[0]
    breakpoints = entry.get("breakpoints", [])
    if not isinstance(breakpoints, list):
        raise ContractParseError(f"{where}.breakpoints", "expected a list")
    bps = [_number(b, f"{where}.breakpoints[{n}]") for n, b in enumerate(breakpoints)]
    try:
        if kind == "value":
            value = _number(entry["value"], f"{where}.value")
            values = [value]
            table: Table = Constant(value)
        elif kind == "values":
            raw = entry["values"]
            if not isinstance(raw, list) or not raw:
                raise ContractParseError(f"{where}.values", "expected a non-empty list")
            values = [_number(v, f"{where}.values[{n}]") for n, v in enumerate(raw)]
            table = table_from_values(bps, values, argument)
        elif kind == "coefficients":
            raw = entry["coefficients"]
            if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
                raise ContractParseError(f"{where}.coefficients", "expected a list of lists")
            rows = [[_number(c, f"{where}.coefficients[{n}]") for c in r] for n, r in enumerate(raw)]
            table = PiecewisePolynomial(tuple(bps), tuple(tuple(r) for r in rows), argument)
            values = [c for r in rows for c in r]
        else:
            spec = entry["exponential"]
            scale = _number(_require(spec, "scale", f"{where}.exponential."), f"{where}.exponential.scale")
            slope = _number(_require(spec, "slope", f"{where}.exponential."), f"{where}.exponential.slope")
            table = Exponential(scale, slope, argument)
            values = [scale]
    except ValueError as exc:
        raise ContractParseError(where, str(exc)) from None
    # polynomial signs are left to validate_assumptions, which samples them
    if nonnegative and kind != "coefficients" and any(v < 0 for v in values):
        raise ContractValidationError(f"{where}: negative rate")
    return table


def _select(doc: Mapping, key: str, space, where: str) -> list[int]:
    """Indices named by an optional ``state``/``mode`` key; absent means all."""
    if key not in doc or doc[key] is None:
        return list(range(len(space)))
    try:
        return [space.index(doc[key])]
    except KeyError:
        raise ContractParseError(f"{where}.{key}", f"unknown label {doc[key]!r}") from None


def _label(doc: Mapping, key: str, space, where: str) -> int:
    value = _require(doc, key, f"{where}.")
    try:
        return space.index(value)
    except KeyError:
        raise ContractParseError(f"{where}.{key}", f"unknown label {value!r}") from None


def _space(doc: Any, where: str, cls, default_initial_key: str):
    if not isinstance(doc, Mapping):
        raise ContractParseError(where, "expected a mapping with 'labels'")
    labels = _require(doc, "labels", f"{where}.")
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ContractParseError(f"{where}.labels", "expected a list of names")
    initial = doc.get("initial", labels[0] if labels else None)
    if initial not in labels:
        raise ContractParseError(f"{where}.initial", f"unknown label {initial!r}")
    return cls(tuple(labels), labels.index(initial))


def _total_bound(n_s, n_m, state_tables, mode_tables, horizon) -> float:
    worst = 0.0
    for i in range(n_s):
        for k in range(n_m):
            total = sum(t.sup(horizon) for (a, _, m), t in state_tables.items() if a == i and m == k)
            total += sum(t.sup(horizon) for (m, _, a), t in mode_tables.items() if a == i and m == k)
            worst = max(worst, total)
    return worst


def contract_from_dict(doc: Mapping[str, Any]) -> ContractSpec:
    """Build a contract from an already parsed document."""
    if not isinstance(doc, Mapping):
        raise ContractParseError("document", "top level must be a mapping")
    horizon = _number(_require(doc, "horizon", ""), "horizon")
    if not (math.isfinite(horizon) and horizon > 0):
        raise ContractValidationError(f"horizon must be > 0, got {horizon!r}")
    kind = doc.get("kind", MARKOV)
    if kind not in (MARKOV, SEMI_MARKOV):
        raise ContractParseError("kind", f"must be {MARKOV!r} or {SEMI_MARKOV!r}")
    states = _space(_require(doc, "states", ""), "states", StateSpace, "initial")
    modes = _space(doc.get("modes", {"labels": ["standard"]}), "modes", ModeSpace, "initial")

    state_tables: dict = {}
    mode_tables: dict = {}
    for n, entry in enumerate(doc.get("intensities", []) or []):
        where = f"intensities[{n}]"
        if not isinstance(entry, Mapping):
            raise ContractParseError(where, "expected a mapping")
        table = _parse_table(entry, where, nonnegative=True)
        if "from_state" in entry or "to_state" in entry:
            i = _label(entry, "from_state", states, where)
            j = _label(entry, "to_state", states, where)
            for k in _select(entry, "mode", modes, where):
                if (i, j, k) in state_tables:
                    raise ContractParseError(where, f"duplicate intensity {i}->{j} in mode {k}")
                state_tables[(i, j, k)] = table
        elif "from_mode" in entry or "to_mode" in entry:
            k = _label(entry, "from_mode", modes, where)
            l = _label(entry, "to_mode", modes, where)
            for i in _select(entry, "state", states, where):
                if (k, l, i) in mode_tables:
                    raise ContractParseError(where, f"duplicate mode intensity {k}->{l} in state {i}")
                mode_tables[(k, l, i)] = table
        else:
            raise ContractParseError(f"{where}.from_state", "need from_state/to_state or from_mode/to_mode")
        if kind == MARKOV and table.duration_dependent:
            raise ContractValidationError(f"{where}: duration-dependent rate in a markov contract")

    pay_doc = doc.get("payments", {}) or {}
    if not isinstance(pay_doc, Mapping):
        raise ContractParseError("payments", "expected a mapping")
    sojourn: dict = {}
    for n, entry in enumerate(pay_doc.get("sojourn", []) or []):
        where = f"payments.sojourn[{n}]"
        table = _parse_table(entry, where, nonnegative=False)
        i = _label(entry, "state", states, where)
        for k in _select(entry, "mode", modes, where):
            sojourn[(i, k)] = table
    lumps: dict = {}
    for n, entry in enumerate(pay_doc.get("lumps", []) or []):
        where = f"payments.lumps[{n}]"
        t = _number(_require(entry, "time", f"{where}."), f"{where}.time")
        amount = _number(_require(entry, "amount", f"{where}."), f"{where}.amount")
        i = _label(entry, "state", states, where)
        if not 0.0 <= t <= horizon:
            raise ContractValidationError(f"{where}: lump time {t} outside [0, horizon]")
        for k in _select(entry, "mode", modes, where):
            lumps[(t, i, k)] = lumps.get((t, i, k), 0.0) + amount
    transitions: dict = {}
    for n, entry in enumerate(pay_doc.get("transitions", []) or []):
        where = f"payments.transitions[{n}]"
        table = _parse_table(entry, where, nonnegative=False)
        i = _label(entry, "from_state", states, where)
        j = _label(entry, "to_state", states, where)
        for k in _select(entry, "mode", modes, where):
            transitions[(i, j, k)] = table
    mode_transitions: dict = {}
    for n, entry in enumerate(pay_doc.get("mode_transitions", []) or []):
        where = f"payments.mode_transitions[{n}]"
        table = _parse_table(entry, where, nonnegative=False)
        k = _label(entry, "from_mode", modes, where)
        l = _label(entry, "to_mode", modes, where)
        for i in _select(entry, "state", states, where):
            mode_transitions[(k, l, i)] = table
    surrender: dict = {}
    for n, entry in enumerate(pay_doc.get("surrender_fraction", []) or []):
        where = f"payments.surrender_fraction[{n}]"
        i = _label(entry, "from_state", states, where)
        j = _label(entry, "to_state", states, where)
        surrender[(i, j)] = _number(_require(entry, "fraction", f"{where}."), f"{where}.fraction")

    disc_doc = _require(doc, "discount", "")
    if isinstance(disc_doc, (int, float)) and not isinstance(disc_doc, bool):
        disc_doc = {"value": disc_doc}
    if not isinstance(disc_doc, Mapping):
        raise ContractParseError("discount", "expected a mapping or a number")
    disc_table = _parse_table(disc_doc, "discount", nonnegative=False, time_only=True)
    discount = DiscountModel(disc_table, disc_table.sup(horizon))

    bound = doc.get("rate_bound")
    if bound is None:
        bound = _total_bound(len(states), len(modes), state_tables, mode_tables, horizon)
    else:
        bound = _number(bound, "rate_bound")

    return ContractSpec(
        states=states,
        modes=modes,
        intensities=IntensityModel(state_tables, mode_tables, kind, float(bound)),
        payments=PaymentModel(horizon, sojourn, lumps, transitions, mode_transitions, surrender),
        discount=discount,
        horizon=horizon,
        duration_resets_on_mode_jump=bool(doc.get("duration_resets_on_mode_jump", False)),
        name=str(doc.get("name", "contract")),
    )


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` style floats (YAML 1.2)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_contract(config_text: str) -> ContractSpec:
    """Parse a YAML or JSON contract document."""
    try:
        doc = yaml.load(config_text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ContractParseError("document", f"not valid YAML/JSON: {exc}") from None
    return contract_from_dict(doc)


def load_contract_file(path: str | Path) -> ContractSpec:
    return load_contract(Path(path).read_text())


def dump_contract_doc(doc: Mapping[str, Any]) -> str:
    """Serialize a contract document deterministically (JSON)."""
    return json.dumps(doc, indent=2, sort_keys=True)
