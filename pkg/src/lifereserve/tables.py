"""Rate and payment tables used as the functional fields of a contract.

Every table is a picklable callable ``f(t, u)`` of calendar time ``t`` (a
float) and duration ``u`` (a float or a numpy array).  Array input for ``u``
returns an array of the same shape, which the semi-Markov solver relies on.

Piecewise tables are right-continuous: at a breakpoint the value of the piece
starting there is returned.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TIME = "time"
DURATION = "duration"


def _shape_like(value: float, u):
    if isinstance(u, np.ndarray):
        return np.full(u.shape, value, dtype=float)
    return value


class Table:
    """Common interface: call, time breakpoints and a bound on ``|f|``."""

    argument: str = TIME

    def __call__(self, t: float, u=0.0):  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Calendar-time points where the table may jump."""
        return ()

    def sup(self, horizon: float) -> float:
        """Upper bound of ``|f(t, u)|`` over ``0 <= u <= t <= horizon``."""
        raise NotImplementedError  # pragma: no cover

    @property
    def duration_dependent(self) -> bool:
        return self.argument == DURATION

    def integral(self, a: float, b: float) -> float:
        """Exact integral over calendar time; only for time-argument tables."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Table):
    value: float

    def __call__(self, t, u=0.0):
        return _shape_like(self.value, u)

    def sup(self, horizon):
        return abs(self.value)

    def integral(self, a, b):
        return self.value * (b - a)


@dataclass(frozen=True)
class PiecewiseConstant(Table):
    """``values[m]`` applies on ``[breakpoints[m-1], breakpoints[m])``.

    ``len(values) == len(breakpoints) + 1``; the first piece starts at -inf
    and the last one extends to +inf.
    """

    breakpoints_: tuple[float, ...]
    values: tuple[float, ...]
    argument: str = TIME
    _bp_array: np.ndarray = field(init=False, repr=False, compare=False)
    _val_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints_)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bps) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints_", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_bp_array", np.asarray(bps, dtype=float))
        object.__setattr__(self, "_val_array", np.asarray(vals, dtype=float))

    def __call__(self, t, u=0.0):
        x = t if self.argument == TIME else u
        if isinstance(x, np.ndarray):
            idx = np.searchsorted(self._bp_array, x, side="right")
            out = self._val_array[idx]
            if isinstance(u, np.ndarray) and out.shape != u.shape:
                out = np.broadcast_to(out, u.shape).copy()
            return out
        value = self.values[bisect.bisect_right(self.breakpoints_, x)]
        return _shape_like(value, u)

    @property
    def breakpoints(self):
        return self.breakpoints_ if self.argument == TIME else ()

    def sup(self, horizon):
        lo = bisect.bisect_right(self.breakpoints_, 0.0)
        hi = bisect.bisect_right(self.breakpoints_, horizon)
        return max(abs(v) for v in self.values[lo : hi + 1])

    def integral(self, a, b):
        if self.argument != TIME:
            raise ValueError("integral is defined for time tables only")
        if b <= a:
            return 0.0
        total = 0.0
        cuts = [a] + [bp for bp in self.breakpoints_ if a < bp < b] + [b]
        for lo, hi in zip(cuts, cuts[1:]):
            total += self(lo) * (hi - lo)
        return total


@dataclass(frozen=True)
class PiecewisePolynomial(Table):
    """Polynomial ``sum_p c[m][p] * x**p`` on each piece (absolute argument)."""

    breakpoints_: tuple[float, ...]
    coefficients: tuple[tuple[float, ...], ...]
    argument: str = TIME

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints_)
        coeffs = tuple(tuple(float(c) for c in row) for row in self.coefficients)
        if len(coeffs) != len(bps) + 1:
            raise ValueError("need exactly one more coefficient row than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints_", bps)
        object.__setattr__(self, "coefficients", coeffs)

    def __call__(self, t, u=0.0):
        x = t if self.argument == TIME else u
        if isinstance(x, np.ndarray):
            idx = np.searchsorted(np.asarray(self.breakpoints_), x, side="right")
            out = np.zeros(x.shape)
            for m, row in enumerate(self.coefficients):
                mask = idx == m
                if mask.any():
                    out[mask] = np.polynomial.polynomial.polyval(x[mask], row)
            return out
        row = self.coefficients[bisect.bisect_right(self.breakpoints_, x)]
        value = float(np.polynomial.polynomial.polyval(x, row))
        return _shape_like(value, u)

    @property
    def breakpoints(self):
        return self.breakpoints_ if self.argument == TIME else ()

    def sup(self, horizon):
        reach = max(abs(horizon), 1.0)
        return max(
            sum(abs(c) * reach**p for p, c in enumerate(row)) for row in self.coefficients
        )


@dataclass(frozen=True)
class Exponential(Table):
    """``scale * exp(slope * x)``; e.g. a recovery rate decaying in duration."""

    scale: float
    slope: float
    argument: str = TIME

    def __call__(self, t, u=0.0):
        x = t if self.argument == TIME else u
        if isinstance(x, np.ndarray):
            return self.scale * np.exp(self.slope * x)
        return _shape_like(self.scale * math.exp(self.slope * x), u)

    def sup(self, horizon):
        return abs(self.scale) * max(1.0, math.exp(self.slope * horizon))


def table_from_values(
    breakpoints: Sequence[float] | None,
    values: Sequence[float],
    argument: str = TIME,
) -> Table:
    """Build the cheapest table representing a piecewise-constant schedule."""
    if not breakpoints and len(values) == 1:
        return Constant(float(values[0]))
    return PiecewiseConstant(tuple(breakpoints or ()), tuple(values), argument)
