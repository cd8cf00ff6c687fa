"""Reserves with payments that depend on the reserve itself.

The driver ``gamma_(i,k)(t, y, z)`` replaces the payment rate
``alpha + sum lambda beta`` of the linear Thiele system, with ``y`` the
candidate reserve in the current cell and ``z`` the candidate jump
coefficients (reserve differences to the other states and modes).  Each
backward step uses the implicit three-stage Lobatto IIIA rule (order 4) and
solves its stage equations by fixed-point iteration; under the Lipschitz
assumptions the step map is a contraction for small ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssumptionError, ConfigurationError, ConvergenceError
from .model import MARKOV, ContractSpec
from .reserve_linear import MarkovCoefficients, ValueFunction, make_grid, march_backward


@dataclass(frozen=True)
class JumpCoefficients:
    """Candidate jump coefficients seen from cell ``(i, k)``.

    ``state[j] = y(j, k) - y(i, k)`` and ``mode[l] = y(i, l) - y(i, k)``.
    """

    state: np.ndarray
    mode: np.ndarray


DriverFn = Callable[[float, int, int, float, float, JumpCoefficients], float]


@dataclass(frozen=True)
class NonlinearDriver:
    """Reserve-dependent payment rate and lump with declared Lipschitz constants.

    Attributes:
        gamma: ``(t, i, k, u, y, z) -> rate``.
        lump: ``(t, i, k, u, y, z) -> amount`` at the lump atoms, or ``None``
            to use the contract's fixed lumps.
        C: Lipschitz constant of ``gamma`` in ``(y, z)``.
        C1: Squared-Lipschitz constant of the lump in ``y``; must be < 1.
        C2: Squared-Lipschitz constant of the lump in ``z``.
    """

    gamma: DriverFn
    lump: DriverFn | None = None
    C: float = 0.0
    C1: float = 0.0
    C2: float = 0.0

    def __post_init__(self):
        for name in ("C", "C1", "C2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise AssumptionError(f"{name} must be finite and >= 0, got {value!r}")


def contract_driver(spec: ContractSpec) -> NonlinearDriver:
    """Driver of the contract's own payments.

    Surrender transitions paying ``(1 - kappa) y`` contribute
    ``-kappa * lambda * y``; the value-neutral remainder stays in the linear
    part of the solver.  Without surrender the driver ignores ``(y, z)``.
    """
    pay = spec.payments
    ints = spec.intensities
    by_cell: dict[tuple[int, int], list] = {}
    kappas: dict[tuple[int, int], list] = {}
    for (i, j, k), fn in ints.state_tables.items():
        frac = pay.surrender_fraction.get((i, j))
        if frac is None:
            by_cell.setdefault((i, k), []).append((fn, lambda t, u, i=i, j=j, k=k: pay.state_transition_payment(t, i, j, k, u)))
        else:
            kappas.setdefault((i, k), []).append((fn, 1.0 - frac))
    for (k, l, i), fn in ints.mode_tables.items():
        by_cell.setdefault((i, k), []).append((fn, lambda t, u, i=i, k=k, l=l: pay.mode_transition_payment(t, k, l, i, u)))

    def gamma(t, i, k, u, y, z):
        out = float(pay.sojourn_rate(t, i, k, u))
        for fn, beta in by_cell.get((i, k), ()):
            out += float(fn(t, u)) * float(beta(t, u))
        for fn, kappa in kappas.get((i, k), ()):
            out -= kappa * float(fn(t, u)) * y
        return out

    C = max((sum(kappa * fn.sup(spec.horizon) for fn, kappa in items) for items in kappas.values()), default=0.0)
    return NonlinearDriver(gamma, None, C, 0.0, 0.0)


# --------------------------------------------------------------------------
# solver

_A21, _A22, _A23 = 5.0 / 24.0, 1.0 / 3.0, -1.0 / 24.0
_B1, _B2, _B3 = 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0


def solve_nonlinear_markov(
    spec: ContractSpec,
    driver: NonlinearDriver,
    step: float,
    picard_tol: float = 1e-13,
    max_iters: int = 50,
) -> ValueFunction:
    """Backward solve ``dV/dt = delta V - gamma(t, V, Z) - A V`` with ``V(T) = 0``.

    ``A`` is the generator of the contract's intensities, with surrender
    transitions treated as value neutral.  Each step's stage equations are
    iterated until the update is below ``picard_tol``.

    Raises:
        AssumptionError: declared ``C1 >= 1``.
        ConvergenceError: a step or lump needs more than ``max_iters`` sweeps.
    """
    if spec.kind != MARKOV:
        raise ConfigurationError("solve_nonlinear_markov needs a markov contract")
    if driver.C1 >= 1.0:
        raise AssumptionError(f"lump Lipschitz constant C1 = {driver.C1!r} must be < 1")
    if not (picard_tol > 0 and max_iters >= 1):
        raise ConfigurationError("picard_tol must be > 0 and max_iters >= 1")
    grid = make_grid(spec, step)
    coeffs = MarkovCoefficients(spec, surrender="neutral")
    S, J = spec.n_states, spec.n_modes
    stats = {"max_iterations": 0, "max_contraction": 0.0}

    def driver_vec(t, y):
        Y = y.reshape(S, J)
        out = np.empty(S * J)
        for i in range(S):
            for k in range(J):
                z = JumpCoefficients(Y[:, k] - Y[i, k], Y[i, :] - Y[i, k])
                out[i * J + k] = driver.gamma(t, i, k, 0.0, Y[i, k], z)
        return out

    def F(t, y):
        delta, A, _ = coeffs(t)
        return delta * y - driver_vec(t, y) - A @ y

    def advance(hi, lo, y0):
        dt = lo - hi
        mid = 0.5 * (hi + lo)
        t1 = math.nextafter(hi, lo)
        f1 = F(t1, y0)
        y2 = y0 + 0.5 * dt * f1
        y3 = y0 + dt * f1
        prev = None
        for it in range(1, max_iters + 1):
            f2, f3 = F(mid, y2), F(lo, y3)
            n2 = y0 + dt * (_A21 * f1 + _A22 * f2 + _A23 * f3)
            n3 = y0 + dt * (_B1 * f1 + _B2 * f2 + _B3 * f3)
            res = max(float(np.max(np.abs(n2 - y2))), float(np.max(np.abs(n3 - y3))))
            y2, y3 = n2, n3
            if prev is not None and prev > 0 and res > 0:
                stats["max_contraction"] = max(stats["max_contraction"], res / prev)
            prev = res
            if res < picard_tol:
                stats["max_iterations"] = max(stats["max_iterations"], it)
                return y3
        raise ConvergenceError(lo, res, max_iters)

    def jump(n, y):
        t = float(grid.times[n])
        atoms = grid.atoms[n]
        if driver.lump is None:
            add = np.zeros((S, J))
            for ta in atoms:
                for i in range(S):
                    for k in range(J):
                        add[i, k] += spec.payments.lump_amount(ta, i, k)
            return y + add.ravel()
        Y = y.reshape(S, J)
        left = Y.copy()
        for it in range(1, max_iters + 1):
            new = np.empty_like(left)
            for i in range(S):
                for k in range(J):
                    z = JumpCoefficients(left[:, k] - left[i, k], left[i, :] - left[i, k])
                    new[i, k] = Y[i, k] + driver.lump(t, i, k, 0.0, left[i, k], z)
            res = float(np.max(np.abs(new - left)))
            left = new
            if res < picard_tol:
                return left.ravel()
        raise ConvergenceError(t, res, max_iters)

    right, left = march_backward(spec, grid, np.zeros(S * J), advance, jump)
    return ValueFunction(
        grid.times,
        right.reshape(-1, S, J),
        {n: v.reshape(S, J) for n, v in left.items()},
        MARKOV,
        spec.states.labels,
        spec.modes.labels,
        info=dict(stats),
    )


# --------------------------------------------------------------------------
# Lipschitz check


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    declared: float
    violations: int
    witness: str | None
    finite_at_zero: bool
    lump_max_ratio: float = 0.0
    lump_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.lump_violations == 0 and self.finite_at_zero


def _lambda_norm(spec: ContractSpec, t, i, k, u, dz: JumpCoefficients) -> float:
    total = 0.0
    for j in range(spec.n_states):
        if j != i:
            total += float(spec.intensities.state_rate(t, i, j, k, u)) * dz.state[j] ** 2
    for l in range(spec.n_modes):
        if l != k:
            total += float(spec.intensities.mode_rate(t, k, l, i, u)) * dz.mode[l] ** 2
    return math.sqrt(total)


def check_lipschitz(
    driver: NonlinearDriver,
    spec: ContractSpec,
    sample_count: int,
    seed: int = 0,
    value_range: float = 10.0,
) -> LipschitzReport:
    """Empirical Lipschitz ratios of the driver on random points.

    ``|gamma(y, z) - gamma(y', z')| / (|y - y'| + ||z - z'||_Lambda)`` is
    compared with ``C``; the lump, when present, is checked in squared form
    against ``C1 |dy|^2 + C2 ||dz||^2``.  Values are drawn from
    ``[-value_range, value_range]``.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    rng = np.random.default_rng(seed)
    S, J = spec.n_states, spec.n_modes
    T = spec.horizon
    worst, violations, witness = 0.0, 0, None
    lump_worst, lump_violations = 0.0, 0
    finite = True
    tol = 1e-9
    for _ in range(sample_count):
        t = float(rng.uniform(0.0, T))
        u = float(rng.uniform(0.0, t)) if spec.kind != MARKOV else 0.0
        i, k = int(rng.integers(S)), int(rng.integers(J))
        y, yb = (float(v) for v in rng.uniform(-value_range, value_range, 2))
        zs = rng.uniform(-value_range, value_range, (2, S))
        zm = rng.uniform(-value_range, value_range, (2, J))
        zs[:, i] = 0.0
        zm[:, k] = 0.0
        z, zb = JumpCoefficients(zs[0], zm[0]), JumpCoefficients(zs[1], zm[1])
        g0 = driver.gamma(t, i, k, u, 0.0, JumpCoefficients(np.zeros(S), np.zeros(J)))
        if not math.isfinite(g0):
            finite = False
        dz = JumpCoefficients(zs[0] - zs[1], zm[0] - zm[1])
        norm = _lambda_norm(spec, t, i, k, u, dz)
        denom = abs(y - yb) + norm
        if denom > 0:
            ratio = float(abs(driver.gamma(t, i, k, u, y, z) - driver.gamma(t, i, k, u, yb, zb))) / denom
            worst = max(worst, ratio)
            if ratio > driver.C * (1 + tol) + tol * 1e-3:
                violations += 1
                if witness is None:
                    witness = f"ratio {ratio!r} at t={t!r}, state {i}, mode {k}, y={y!r}, y'={yb!r}"
        if driver.lump is not None:
            diff = driver.lump(t, i, k, u, y, z) - driver.lump(t, i, k, u, yb, zb)
            bound = driver.C1 * (y - yb) ** 2 + driver.C2 * norm**2
            if (y - yb) ** 2 + norm**2 > 0:
                lump_worst = max(lump_worst, diff**2 / ((y - yb) ** 2 + norm**2))
            if diff**2 > bound * (1 + tol) + 1e-15:
                lump_violations += 1
    return LipschitzReport(worst, driver.C, violations, witness, finite, lump_worst, lump_violations)
