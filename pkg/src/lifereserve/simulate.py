"""Exact simulation of the bivariate jump process (state, mode).

Paths are drawn by thinning against the contract's ``rate_bound``.  Each
path owns a counter-based Philox stream keyed by ``(seed, path_index)``, so
any subset of paths can be regenerated independently and in any order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import SimulationError
from .model import ContractSpec

STATE_JUMP = "state_jump"
MODE_JUMP = "mode_jump"

_MASK64 = (1 << 64) - 1
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """Independent stream for one path; Philox is keyed, not sequentially seeded."""
    key = (int(seed) & _MASK64) | ((int(path_index) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    source: int
    target: int


@dataclass(frozen=True)
class Segment:
    """Maximal interval ``[start, end)`` without jumps.

    ``anchor`` is the time of the last state jump, so the duration at ``s``
    is ``s - anchor``.
    """

    start: float
    end: float
    state: int
    mode: int
    anchor: float


@dataclass(frozen=True)
class Path:
    events: tuple[Event, ...]
    initial_state: int
    initial_mode: int
    horizon: float
    duration_resets_on_mode_jump: bool = False

    def segments(self) -> list[Segment]:
        out = []
        t, i, k, anchor = 0.0, self.initial_state, self.initial_mode, 0.0
        for ev in self.events:
            out.append(Segment(t, ev.time, i, k, anchor))
            t = ev.time
            if ev.kind == STATE_JUMP:
                i, anchor = ev.target, ev.time
            else:
                k = ev.target
                if self.duration_resets_on_mode_jump:
                    anchor = ev.time
        out.append(Segment(t, self.horizon, i, k, anchor))
        return out

    def state_at(self, t: float) -> tuple[int, int, float]:
        """``(state, mode, duration)`` at time ``t`` (right-continuous)."""
        i, k, anchor = self.initial_state, self.initial_mode, 0.0
        for ev in self.events:
            if ev.time > t:
                break
            if ev.kind == STATE_JUMP:
                i, anchor = ev.target, ev.time
            else:
                k = ev.target
                if self.duration_resets_on_mode_jump:
                    anchor = ev.time
        return i, k, t - anchor

    @property
    def mode_jumps(self) -> tuple[Event, ...]:
        return tuple(ev for ev in self.events if ev.kind == MODE_JUMP)

    def check(self) -> None:
        """Raise ``ValueError`` unless the path invariants hold."""
        i, k, last = self.initial_state, self.initial_mode, 0.0
        for ev in self.events:
            if not last < ev.time <= self.horizon:
                raise ValueError(f"event time {ev.time!r} not in ({last!r}, {self.horizon!r}]")
            if ev.kind == STATE_JUMP:
                if ev.source != i or ev.target == i:
                    raise ValueError(f"state jump {ev} inconsistent with state {i}")
                i = ev.target
            elif ev.kind == MODE_JUMP:
                if ev.source != k or ev.target == k:
                    raise ValueError(f"mode jump {ev} inconsistent with mode {k}")
                k = ev.target
            else:
                raise ValueError(f"unknown event kind {ev.kind!r}")
            last = ev.time


def simulate_path(
    spec: ContractSpec,
    seed: int,
    mode_jump_limit: int | None = None,
    path_index: int = 0,
) -> Path:
    """Draw one path of ``(X, J)`` on ``[0, T]``.

    With ``mode_jump_limit = m`` the mode intensities are switched off after
    the ``m``-th mode jump, which simulates the measure allowing at most ``m``
    contract modifications.
    """
    T = spec.horizon
    bound = spec.intensities.rate_bound
    i, k = spec.states.initial_state, spec.modes.initial_mode
    events: list[Event] = []
    if bound > 0:
        rng = path_rng(seed, path_index)
        exits = spec.exits
        atoms = set(spec.payments.lump_times)
        resets = spec.duration_resets_on_mode_jump
        limit = math.inf if mode_jump_limit is None else mode_jump_limit
        t, anchor, n_mode = 0.0, 0.0, 0
        scale = 1.0 / bound
        ceiling = bound * (1.0 + 1e-12)
        while True:
            t_new = t + rng.standard_exponential() * scale
            if t_new <= t:
                t_new = math.nextafter(t, math.inf)
            t = t_new
            if t > T:
                break
            if t in atoms:
                t = math.nextafter(t, math.inf)
                if t > T:
                    break
            u = t - anchor
            cell = exits[(i, k)]
            rates = []
            total = 0.0
            modes_open = n_mode < limit
            for tr in cell:
                r = float(tr.rate(t, u)) if (modes_open or not tr.is_mode) else 0.0
                rates.append(r)
                total += r
            if total > ceiling:
                raise SimulationError(
                    f"total exit rate {total!r} exceeds rate_bound {bound!r} "
                    f"at t={t!r}, state {i}, mode {k}, duration {u!r}"
                )
            v = rng.random() * bound
            if v >= total:
                continue
            acc = 0.0
            chosen = None
            for tr, r in zip(cell, rates):
                acc += r
                if r > 0 and v < acc:
                    chosen = tr
                    break
            if chosen is None:  # rounding at the top of the cumulative sum
                chosen = next(tr for tr, r in zip(reversed(cell), reversed(rates)) if r > 0)
            if chosen.is_mode:
                events.append(Event(t, MODE_JUMP, k, chosen.target))
                k = chosen.target
                n_mode += 1
                if resets:
                    anchor = t
            else:
                events.append(Event(t, STATE_JUMP, i, chosen.target))
                i = chosen.target
                anchor = t
    return Path(
        tuple(events),
        spec.states.initial_state,
        spec.modes.initial_mode,
        T,
        spec.duration_resets_on_mode_jump,
    )


def simulate_paths(
    spec: ContractSpec,
    path_count: int,
    seed: int,
    mode_jump_limit: int | None = None,
) -> Iterator[Path]:
    for p in range(path_count):
        yield simulate_path(spec, seed, mode_jump_limit, path_index=p)


# --------------------------------------------------------------------------
# quadrature helpers shared with the cash-flow valuation


def _cuts(a: float, b: float, anchor: float, fns: Iterable) -> list[float]:
    """Split ``[a, b]`` at calendar and duration breakpoints of ``fns``."""
    points = {a, b}
    for fn in fns:
        bps = getattr(fn, "breakpoints_", None)
        if bps is None:
            bps = getattr(fn, "breakpoints", ())
            arg = "time"
        else:
            arg = getattr(fn, "argument", "time")
        for bp in bps:
            s = bp if arg == "time" else anchor + bp
            if a < s < b:
                points.add(s)
    return sorted(points)


def integrate_on_segment(fn, a: float, b: float, anchor: float, weight=None) -> float:
    """``int_a^b weight(s) * fn(s, s - anchor) ds`` by piecewise Gauss-Legendre.

    Pieces are split at the breakpoints of ``fn``; each piece is smooth, so
    eight nodes are exact to rounding for the tables used here.
    """
    if b <= a:
        return 0.0
    total = 0.0
    cuts = _cuts(a, b, anchor, [fn])
    for lo, hi in zip(cuts, cuts[1:]):
        half = 0.5 * (hi - lo)
        s = 0.5 * (hi + lo) + half * _GL_NODES
        vals = np.asarray(fn(s, s - anchor), dtype=float)
        if weight is not None:
            vals = vals * weight(s)
        total += half * float(np.dot(_GL_WEIGHTS, np.broadcast_to(vals, s.shape)))
    return total


# --------------------------------------------------------------------------
# martingale diagnostics


@dataclass(frozen=True)
class MartingaleStat:
    kind: str  # "state" or "mode"
    source: int
    target: int
    mean: float
    stderr: float
    z: float


@dataclass(frozen=True)
class CovarianceStat:
    first: tuple[str, int, int]
    second: tuple[str, int, int]
    covariance: float
    stderr: float
    z: float


@dataclass(frozen=True)
class MartingaleReport:
    path_count: int
    seed: int
    means: tuple[MartingaleStat, ...]
    covariances: tuple[CovarianceStat, ...]

    def mean_for(self, kind: str, source: int, target: int) -> MartingaleStat:
        for m in self.means:
            if (m.kind, m.source, m.target) == (kind, source, target):
                return m
        raise KeyError((kind, source, target))

    def covariance_for(self, first, second) -> CovarianceStat:
        for c in self.covariances:
            if {c.first, c.second} == {tuple(first), tuple(second)}:
                return c
        raise KeyError((first, second))


def _zscore(value: float, stderr: float) -> float:
    if stderr > 0:
        return value / stderr
    return 0.0 if value == 0 else math.copysign(math.inf, value)


def compensated_martingales(
    path: Path, spec: ContractSpec, pairs: Sequence[tuple[str, int, int]]
) -> np.ndarray:
    """Terminal values ``M(T) = N(T) - int_0^T I(s-) lambda(s) ds`` for ``pairs``."""
    index = {p: n for n, p in enumerate(pairs)}
    out = np.zeros(len(pairs))
    for ev in path.events:
        key = ("state" if ev.kind == STATE_JUMP else "mode", ev.source, ev.target)
        if key in index:
            out[index[key]] += 1.0
    ints = spec.intensities
    for seg in path.segments():
        if seg.end <= seg.start:
            continue
        for (i, j, k), fn in ints.state_tables.items():
            if i == seg.state and k == seg.mode and ("state", i, j) in index:
                out[index[("state", i, j)]] -= integrate_on_segment(fn, seg.start, seg.end, seg.anchor)
        for (k, l, i), fn in ints.mode_tables.items():
            if i == seg.state and k == seg.mode and ("mode", k, l) in index:
                out[index[("mode", k, l)]] -= integrate_on_segment(fn, seg.start, seg.end, seg.anchor)
    return out


def transition_pairs(spec: ContractSpec) -> list[tuple[str, int, int]]:
    pairs = {("state", i, j) for (i, j, _k) in spec.intensities.state_tables}
    pairs |= {("mode", k, l) for (k, l, _i) in spec.intensities.mode_tables}
    return sorted(pairs)


def martingale_diagnostics(spec: ContractSpec, path_count: int, seed: int) -> MartingaleReport:
    """Empirical means and pairwise covariances of the terminal martingales."""
    if path_count < 100:
        raise ValueError("path_count must be >= 100")
    pairs = transition_pairs(spec)
    samples = np.zeros((path_count, len(pairs)))
    for p in range(path_count):
        path = simulate_path(spec, seed, path_index=p)
        samples[p] = compensated_martingales(path, spec, pairs)
    n = float(path_count)
    means = []
    for c, (kind, a, b) in enumerate(pairs):
        col = samples[:, c]
        mean = float(np.mean(col))
        se = float(np.std(col, ddof=1) / math.sqrt(n))
        means.append(MartingaleStat(kind, a, b, mean, se, _zscore(mean, se)))
    covs = []
    for c1 in range(len(pairs)):
        for c2 in range(c1 + 1, len(pairs)):
            prod = samples[:, c1] * samples[:, c2]
            cov = float(np.mean(prod))
            se = float(np.std(prod, ddof=1) / math.sqrt(n))
            covs.append(CovarianceStat(pairs[c1], pairs[c2], cov, se, _zscore(cov, se)))
    return MartingaleReport(path_count, seed, tuple(means), tuple(covs))


# --------------------------------------------------------------------------
# path dump


def dump_paths(paths: Iterable[Path], spec: ContractSpec | None = None) -> str:
    """Delimiter-separated dump: ``path_id,time,kind,from,to``.

    Times are written with ``repr`` so the dump round-trips bit for bit.
    Labels are used for ``from``/``to`` when ``spec`` is given.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path_id", "time", "kind", "from", "to"])
    for pid, path in enumerate(paths):
        for ev in path.events:
            if spec is not None:
                labels = spec.states.labels if ev.kind == STATE_JUMP else spec.modes.labels
                src, dst = labels[ev.source], labels[ev.target]
            else:
                src, dst = ev.source, ev.target
            writer.writerow([pid, repr(ev.time), ev.kind, src, dst])
    return buf.getvalue()
