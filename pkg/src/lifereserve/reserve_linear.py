"""Backward solvers for the linear prospective reserve.

The Markov solver integrates the mode-modulated Thiele system

    d/dt V(t, i, k) = delta(t) V - gamma_(i,k)(t) - (Q0 V)(t, i, k) - (Q1 V)(t, i, k)

from ``V(T) = 0`` with classical RK4, restarting at every table breakpoint and
applying ``V(t-) = V(t) + a(t)`` at the lump atoms.  The semi-Markov solver
integrates the same balance along the characteristics ``u - t = const``.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, PathMismatchError, SolverError
from .model import MARKOV, SEMI_MARKOV, ContractSpec
from .simulate import MODE_JUMP, STATE_JUMP, Path
from .tables import Constant, PiecewiseConstant

_MAX_SEMI_MARKOV_CELLS = 250_000_000


# --------------------------------------------------------------------------
# value function


@dataclass(frozen=True)
class ValueFunction:
    """Grid-backed reserve ``V(t, i, k)`` or ``V(t, i, k, u)``.

    ``values[n]`` holds the right-continuous values at ``times[n]``; ``left``
    maps the grid index of each lump atom to the left limit there.  For
    semi-Markov functions the last axis is the duration level ``u = m * h``,
    valid for ``m <= n`` (the grid is triangular since ``U(t) <= t``).
    Queries interpolate linearly in ``t`` and ``u``.
    """

    times: np.ndarray
    values: np.ndarray
    left: Mapping[int, np.ndarray]
    kind: str
    state_labels: tuple[str, ...]
    mode_labels: tuple[str, ...]
    info: Mapping[str, float] = field(default_factory=dict)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def durations(self) -> np.ndarray | None:
        if self.kind != SEMI_MARKOV:
            return None
        return self.times.copy()

    def node(self, n: int, left: bool = False) -> np.ndarray:
        if left and n in self.left:
            return self.left[n]
        return self.values[n]

    def _locate(self, t: float) -> tuple[int, float]:
        """Cell index and weight; ``w == 0`` means ``t`` sits on node ``n``."""
        T = self.horizon
        h = self.step
        t = min(max(t, 0.0), T)
        x = t / h
        n = int(round(x))
        if abs(x - n) <= 1e-9:
            return n, 0.0
        n = int(math.floor(x))
        return n, x - n

    def _slice_u(self, arr: np.ndarray, n: int, u: float, t_node: float) -> np.ndarray:
        h = self.step
        u = min(max(u, 0.0), t_node)
        x = u / h
        m = min(int(math.floor(x + 1e-12)), n)
        w = x - m
        if m >= n or w <= 1e-12:
            return arr[..., m]
        return (1.0 - w) * arr[..., m] + w * arr[..., m + 1]

    def at(self, t: float, state: int, mode: int, duration: float = 0.0, left: bool = False) -> float:
        """``V(t, state, mode[, duration])``; ``left`` selects ``V(t-)``."""
        n, w = self._locate(t)
        if self.kind == SEMI_MARKOV:
            if duration > t + 1e-9 * max(1.0, t):
                warnings.warn(f"duration {duration!r} exceeds t={t!r}; clamped", stacklevel=2)
            duration = min(duration, t)
        if w == 0.0:
            arr = self.node(n, left)[state, mode]
            if self.kind == SEMI_MARKOV:
                return float(self._slice_u(arr, n, duration, self.times[n]))
            return float(arr)
        lo = self.values[n][state, mode]
        hi = self.node(n + 1, True)[state, mode]
        if self.kind == SEMI_MARKOV:
            # each node is interpolated along the same characteristic
            u_lo = duration - w * self.step
            lo = self._slice_u(lo, n, u_lo, self.times[n])
            hi = self._slice_u(hi, n + 1, u_lo + self.step, self.times[n + 1])
        return float((1.0 - w) * lo + w * hi)

    def initial_value(self, spec: ContractSpec) -> float:
        return self.at(0.0, spec.states.initial_state, spec.modes.initial_mode)


def export_value_function(V: ValueFunction) -> str:
    """Delimiter-separated table ``t,state,mode[,duration],value``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    semi = V.kind == SEMI_MARKOV
    writer.writerow(["t", "state", "mode", "duration", "value"] if semi else ["t", "state", "mode", "value"])
    for n, t in enumerate(V.times):
        for i, s_label in enumerate(V.state_labels):
            for k, m_label in enumerate(V.mode_labels):
                if semi:
                    for m in range(n + 1):
                        writer.writerow([repr(float(t)), s_label, m_label, repr(float(V.times[m])), repr(float(V.values[n, i, k, m]))])
                else:
                    writer.writerow([repr(float(t)), s_label, m_label, repr(float(V.values[n, i, k]))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# grid and marching


@dataclass(frozen=True)
class Grid:
    times: np.ndarray
    step: float
    atoms: Mapping[int, tuple[float, ...]]  # node -> atom times snapped to it


def make_grid(spec: ContractSpec, step: float) -> Grid:
    """Uniform grid with ``h = T / ceil(T / step)``; lump atoms snap to nodes."""
    if not (isinstance(step, (int, float)) and math.isfinite(step) and step > 0):
        raise ConfigurationError(f"step must be positive and finite, got {step!r}")
    T = spec.horizon
    N = max(1, int(math.ceil(T / step - 1e-9)))
    h = T / N
    points = (0.0,) + spec.breakpoints + (T,)
    smallest = min(b - a for a, b in zip(points, points[1:]))
    if step > smallest * (1 + 1e-9):
        raise ConfigurationError(f"step {step!r} exceeds the smallest breakpoint gap {smallest!r}")
    times = h * np.arange(N + 1)
    times[-1] = T
    atoms: dict[int, list[float]] = {}
    for t in spec.payments.lump_times:
        atoms.setdefault(int(round(t / h)), []).append(t)
    return Grid(times, h, {n: tuple(v) for n, v in atoms.items()})


def lump_vector(spec: ContractSpec, atom_times) -> np.ndarray:
    out = np.zeros((spec.n_states, spec.n_modes))
    for t in atom_times:
        for i in range(spec.n_states):
            for k in range(spec.n_modes):
                out[i, k] += spec.payments.lump_amount(t, i, k)
    return out


def cell_cuts(grid: Grid, spec: ContractSpec, n: int) -> list[float]:
    """Sub-interval ends of cell ``[t_n, t_{n+1}]`` in backward order."""
    a, b = grid.times[n], grid.times[n + 1]
    bps = spec.breakpoints
    inside = bps[bisect.bisect_right(bps, a) : bisect.bisect_left(bps, b)]
    return [b] + list(reversed(inside)) + [a]


def _eval_time(hi: float, lo: float) -> float:
    """Start-of-interval stage time nudged inside so the right piece is used."""
    return math.nextafter(hi, lo)


def rk4_backward(f: Callable, hi: float, lo: float, y: np.ndarray) -> np.ndarray:
    dt = lo - hi
    mid = 0.5 * (hi + lo)
    k1 = f(_eval_time(hi, lo), y)
    k2 = f(mid, y + 0.5 * dt * k1)
    k3 = f(mid, y + 0.5 * dt * k2)
    k4 = f(lo, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def march_backward(
    spec: ContractSpec,
    grid: Grid,
    y_terminal: np.ndarray,
    advance: Callable[[float, float, np.ndarray], np.ndarray],
    jump: Callable[[int, np.ndarray], np.ndarray],
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Backward sweep: ``advance`` crosses smooth pieces, ``jump`` handles atoms."""
    N = grid.times.size - 1
    right = np.empty((N + 1,) + y_terminal.shape)
    left: dict[int, np.ndarray] = {}
    right[N] = y_terminal
    for n in range(N, -1, -1):
        y = right[n]
        if n in grid.atoms:
            y = jump(n, y)
            left[n] = y
        if n == 0:
            break
        cuts = cell_cuts(grid, spec, n - 1)
        for hi, lo in zip(cuts, cuts[1:]):
            y = advance(hi, lo, y)
        if not np.all(np.isfinite(y)):
            raise SolverError(float(grid.times[n - 1]), "non-finite reserve value")
        right[n - 1] = y
    return right, left


# --------------------------------------------------------------------------
# Markov coefficients


def _piecewise_constant_in_time(spec: ContractSpec) -> bool:
    fns = [spec.discount.rate]
    fns += list(spec.intensities.state_tables.values()) + list(spec.intensities.mode_tables.values())
    pay = spec.payments
    fns += list(pay.sojourn.values()) + list(pay.transitions.values()) + list(pay.mode_transitions.values())
    return all(
        isinstance(fn, Constant) or (isinstance(fn, PiecewiseConstant) and fn.argument == "time")
        for fn in fns
    )


class MarkovCoefficients:
    """``delta(t)``, ``A(t)`` and ``g(t)`` with ``dV/dt = delta V - g - A V``.

    Flattened index ``x = i * |J| + k``.  With ``surrender="linear"`` a
    surrender transition paying ``(1 - kappa) V_i`` enters ``A`` exactly;
    with ``surrender="neutral"`` it enters as a value-neutral transition and
    the ``-kappa * lambda * y`` part is left to a nonlinear driver.
    """

    def __init__(self, spec: ContractSpec, surrender: str = "linear"):
        self.spec = spec
        self.surrender = surrender
        self.J = spec.n_modes
        self.n = spec.n_states * spec.n_modes
        self._cache: dict | None = {} if _piecewise_constant_in_time(spec) else None

    def __call__(self, t: float):
        if self._cache is not None:
            key = bisect.bisect_right(self.spec.breakpoints, t) + (1 if t > self.spec.horizon else 0)
            hit = self._cache.get(key)
            if hit is None:
                hit = self._cache[key] = self._build(t)
            return hit
        return self._build(t)

    def _build(self, t: float):
        spec, J = self.spec, self.J
        pay = spec.payments
        A = np.zeros((self.n, self.n))
        g = np.zeros(self.n)
        for (i, j, k), fn in spec.intensities.state_tables.items():
            r = float(fn(t, 0.0))
            x, y = i * J + k, j * J + k
            A[x, y] += r
            A[x, x] -= r
            frac = pay.surrender_fraction.get((i, j))
            if frac is None:
                g[x] += r * pay.state_transition_payment(t, i, j, k)
            elif self.surrender == "linear":
                A[x, x] += frac * r
            else:
                A[x, x] += r
        for (k, l, i), fn in spec.intensities.mode_tables.items():
            r = float(fn(t, 0.0))
            x, y = i * J + k, i * J + l
            A[x, y] += r
            A[x, x] -= r
            g[x] += r * pay.mode_transition_payment(t, k, l, i)
        for i in range(spec.n_states):
            for k in range(J):
                g[i * J + k] += pay.sojourn_rate(t, i, k)
        return float(spec.discount(t)), A, g


def solve_thiele_markov(spec: ContractSpec, step: float) -> ValueFunction:
    """Solve the modulated Thiele system on a uniform grid.

    Args:
        spec: Markov contract.
        step: Requested step ``h``; the grid uses ``T / ceil(T / h)``.

    Returns:
        ValueFunction with ``values`` of shape ``(N + 1, |S|, |J|)``.
    """
    if spec.kind != MARKOV:
        raise ConfigurationError("solve_thiele_markov needs a markov contract")
    grid = make_grid(spec, step)
    coeffs = MarkovCoefficients(spec, surrender="linear")
    S, J = spec.n_states, spec.n_modes

    def f(t, y):
        delta, A, g = coeffs(t)
        return delta * y - g - A @ y

    def advance(hi, lo, y):
        return rk4_backward(f, hi, lo, y)

    def jump(n, y):
        return y + lump_vector(spec, grid.atoms[n]).ravel()

    right, left = march_backward(spec, grid, np.zeros(S * J), advance, jump)
    return ValueFunction(
        grid.times,
        right.reshape(-1, S, J),
        {n: v.reshape(S, J) for n, v in left.items()},
        MARKOV,
        spec.states.labels,
        spec.modes.labels,
    )


# --------------------------------------------------------------------------
# semi-Markov


def _semi_markov_rhs(spec: ContractSpec, s: float, u: np.ndarray, w: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Time derivative along characteristics; ``g[j, k] = V(s, j, k, 0)``."""
    pay = spec.payments
    out = spec.discount(s) * w
    for i in range(spec.n_states):
        for k in range(spec.n_modes):
            out[i, k] -= pay.sojourn_rate(s, i, k, u)
    for (i, j, k), fn in spec.intensities.state_tables.items():
        r = fn(s, u)
        frac = pay.surrender_fraction.get((i, j))
        beta = frac * w[i, k] if frac is not None else pay.state_transition_payment(s, i, j, k, u)
        out[i, k] -= r * (beta + g[j, k] - w[i, k])
    resets = spec.duration_resets_on_mode_jump
    for (k, l, i), fn in spec.intensities.mode_tables.items():
        r = fn(s, u)
        target = g[i, l] if resets else w[i, l]
        out[i, k] -= r * (pay.mode_transition_payment(s, k, l, i, u) + target - w[i, k])
    return out


def _lagrange(points: list[tuple[float, np.ndarray]], s: float) -> np.ndarray:
    total = 0.0
    for a, (ta, ga) in enumerate(points):
        weight = 1.0
        for b, (tb, _) in enumerate(points):
            if a != b:
                weight *= (s - tb) / (ta - tb)
        total = total + weight * ga
    return total


def solve_thiele_semimarkov(
    spec: ContractSpec, step: float, duration_step: float | None = None
) -> ValueFunction:
    """Solve the semi-Markov Thiele equation on a triangular ``(t, u)`` grid.

    Every characteristic ``u - t = const`` is integrated with RK4 over one
    cell at a time.  The coupling term ``V(t, j, k, 0)`` on the cell is
    predicted by extrapolation and then corrected with the freshly computed
    ``u = 0`` value, which makes the step implicit in that single column.

    Args:
        spec: Markov or semi-Markov contract.
        step: Time step ``h``.
        duration_step: Duration step; must equal the time step so that the
            characteristics pass through grid nodes (``None`` means ``step``).
    """
    grid = make_grid(spec, step)
    h = grid.step
    if duration_step is not None and not math.isclose(duration_step, step, rel_tol=1e-12):
        raise ConfigurationError("duration_step must equal step on the characteristic grid")
    N = grid.times.size - 1
    S, J = spec.n_states, spec.n_modes
    if (N + 1) ** 2 * S * J > _MAX_SEMI_MARKOV_CELLS:
        raise ConfigurationError(f"semi-Markov grid with {N + 1} nodes is too large; increase step")
    values = np.zeros((N + 1, S, J, N + 1))
    left: dict[int, np.ndarray] = {}
    times = grid.times
    g_next2: tuple[float, np.ndarray] | None = None  # right-side g at t_{n+2}

    def start_values(n: int) -> np.ndarray:
        v = values[n]
        if n in grid.atoms:
            v = v + lump_vector(spec, grid.atoms[n])[:, :, None]
            left[n] = v
        return v

    start = start_values(N)
    for n in range(N - 1, -1, -1):
        t_lo, t_hi = times[n], times[n + 1]
        w0 = start[:, :, 1 : n + 2].copy()
        m_dur = h * np.arange(n + 1)
        g1 = start[:, :, 0].copy()
        known = [(t_hi, g1)]
        if g_next2 is not None and (n + 1) not in grid.atoms:
            known.append(g_next2)
        g0 = g1 if len(known) == 1 else g1 + (g1 - known[1][1])
        cuts = cell_cuts(grid, spec, n)
        for _ in range(4):
            pts = known + [(t_lo, g0)]

            def f(s, w, pts=pts):
                return _semi_markov_rhs(spec, s, m_dur + (s - t_lo), w, _lagrange(pts, s))

            w = w0
            for hi, lo in zip(cuts, cuts[1:]):
                w = rk4_backward(f, hi, lo, w)
            g_new = w[:, :, 0].copy()
            change = float(np.max(np.abs(g_new - g0))) if g_new.size else 0.0
            g0 = g_new
            if change <= 1e-15 * (1.0 + float(np.max(np.abs(g0)))):
                break
        if not np.all(np.isfinite(w)):
            raise SolverError(float(t_lo), "non-finite reserve value")
        values[n, :, :, : n + 1] = w
        g_next2 = (t_hi, g1)
        start = start_values(n)
    return ValueFunction(times, values, left, SEMI_MARKOV, spec.states.labels, spec.modes.labels)


# --------------------------------------------------------------------------
# sum at risk


@dataclass(frozen=True)
class SumAtRisk:
    """``R_ij(t, k) = beta_ij + V(t, j, k, 0) - V(t, i, k, u)`` and the mode analogue."""

    V: ValueFunction
    spec: ContractSpec

    def _beta(self, t, i, j, k, u, left):
        frac = self.spec.payments.surrender_fraction.get((i, j))
        if frac is not None:
            return frac * self.V.at(t, i, k, u, left=True)
        return float(self.spec.payments.state_transition_payment(t, i, j, k, u))

    def state(self, t: float, i: int, j: int, k: int, duration: float = 0.0, left: bool = False) -> float:
        return (
            self._beta(t, i, j, k, duration, left)
            + self.V.at(t, j, k, 0.0, left=left)
            - self.V.at(t, i, k, duration, left=left)
        )

    def mode(self, t: float, k: int, l: int, i: int, duration: float = 0.0, left: bool = False) -> float:
        target_u = 0.0 if self.spec.duration_resets_on_mode_jump else duration
        beta = float(self.spec.payments.mode_transition_payment(t, k, l, i, duration))
        return beta + self.V.at(t, i, l, target_u, left=left) - self.V.at(t, i, k, duration, left=left)

    def state_grid(self, i: int, j: int, k: int) -> np.ndarray:
        return np.array([self.state(float(t), i, j, k) for t in self.V.times])

    def mode_grid(self, k: int, l: int, i: int) -> np.ndarray:
        return np.array([self.mode(float(t), k, l, i) for t in self.V.times])


def sum_at_risk(V: ValueFunction, spec: ContractSpec) -> SumAtRisk:
    return SumAtRisk(V, spec)


# --------------------------------------------------------------------------
# pathwise BSDE residual


@dataclass(frozen=True)
class BsdeResidual:
    drift: float
    jump: float

    @property
    def total(self) -> float:
        return self.drift + self.jump


def _drift(spec: ContractSpec, V: ValueFunction, R: SumAtRisk, s, i, k, u, y) -> float:
    """``delta Y - alpha - sum lambda R`` at ``(s, i, k, u)`` with ``Y = y``."""
    ints, pay = spec.intensities, spec.payments
    out = spec.discount(s) * y - float(pay.sojourn_rate(s, i, k, u))
    for (a, j, m), fn in ints.state_tables.items():
        if a == i and m == k:
            out -= float(fn(s, u)) * R.state(s, i, j, k, u)
    for (m, l, a), fn in ints.mode_tables.items():
        if a == i and m == k:
            out -= float(fn(s, u)) * R.mode(s, k, l, i, u)
    return out


def pathwise_bsde_residual(
    path: Path, V: ValueFunction, spec: ContractSpec, step: float | None = None
) -> BsdeResidual:
    """Discrete BSDE residual of ``Y(t) = V(t, X(t), J(t)[, U(t)])`` along a path.

    On every grid cell free of jumps the increment of ``Y`` is compared with
    the trapezoidal drift ``(delta Y - gamma + lambda Z) dt``; at every jump
    the increment is compared with the sum at risk minus the payment made.
    Lump atoms are checked against ``-a``.
    """
    if not math.isclose(path.horizon, spec.horizon, rel_tol=1e-12):
        raise PathMismatchError(f"path horizon {path.horizon!r} differs from contract horizon {spec.horizon!r}")
    h = V.step if step is None else step
    T = spec.horizon
    N = max(1, int(math.ceil(T / h - 1e-9)))
    h = T / N
    R = SumAtRisk(V, spec)
    drift_res = 0.0
    jump_res = 0.0
    segments = path.segments()
    atom_nodes = {n: float(V.times[n]) for n in V.left}
    atom_amounts = {
        n: lump_vector(spec, [t for t in spec.payments.lump_times if int(round(t / V.step)) == n])
        for n in V.left
    }
    for seg in segments:
        i, k = seg.state, seg.mode
        n_a = int(math.floor(seg.start / h))
        n_b = int(math.ceil(seg.end / h - 1e-12))
        edges = sorted({seg.start, seg.end} | {c * h for c in range(n_a + 1, n_b) if seg.start < c * h < seg.end})
        for a, b in zip(edges, edges[1:]):
            ya = V.at(a, i, k, a - seg.anchor)
            yb = V.at(b, i, k, b - seg.anchor, left=True)
            fa = _drift(spec, V, R, a, i, k, a - seg.anchor, ya)
            fb = _drift(spec, V, R, b, i, k, b - seg.anchor, yb)
            drift_res = max(drift_res, abs((yb - ya) - 0.5 * (b - a) * (fa + fb)))
        for n, t_atom in atom_nodes.items():
            if seg.start < t_atom <= seg.end:
                u = t_atom - seg.anchor
                y_left = V.at(t_atom, i, k, u, left=True)
                y_right = V.at(t_atom, i, k, u)
                jump_res = max(jump_res, abs((y_right - y_left) + atom_amounts[n][i, k]))
    pay = spec.payments
    for ev, seg in zip(path.events, segments):
        s = ev.time
        u = s - seg.anchor
        i, k = seg.state, seg.mode
        y_before = V.at(s, i, k, u, left=True)
        if ev.kind == STATE_JUMP:
            j = ev.target
            y_after = V.at(s, j, k, 0.0)
            frac = pay.surrender_fraction.get((i, j))
            paid = frac * y_before if frac is not None else float(pay.state_transition_payment(s, i, j, k, u))
            expected = R.state(s, i, j, k, u, left=True) - paid
        else:
            l = ev.target
            u_after = 0.0 if spec.duration_resets_on_mode_jump else u
            y_after = V.at(s, i, l, u_after)
            paid = float(pay.mode_transition_payment(s, k, l, i, u))
            expected = R.mode(s, k, l, i, u, left=True) - paid
        jump_res = max(jump_res, abs((y_after - y_before) - expected))
    return BsdeResidual(drift_res, jump_res)
