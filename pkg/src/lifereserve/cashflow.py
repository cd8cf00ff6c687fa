"""Discounted value at time 0 of the cash flow realized along one path."""

from __future__ import annotations

import bisect
import math
from typing import Callable, Sequence

from .errors import ConfigurationError
from .model import ContractSpec
from .simulate import STATE_JUMP, Path, integrate_on_segment
from .tables import Constant

# (t, state, mode, duration) -> unscaled reserve just before t
ReserveLookup = Callable[[float, int, int, float], float]


class ScaleSchedule:
    """Scaling in force: 1 on ``(0, tau_1]`` and ``rho_m`` on ``(tau_m, tau_{m+1}]``."""

    def __init__(self, taus: Sequence[float] = (), rhos: Sequence[float] = ()):
        self.taus = list(taus)
        self.rhos = [1.0] + list(rhos)

    def __call__(self, t: float) -> float:
        return self.rhos[bisect.bisect_left(self.taus, t)]


def _sojourn_value(spec: ContractSpec, fn, a: float, b: float, anchor: float) -> float:
    rate = spec.discount.rate
    if isinstance(fn, Constant) and isinstance(rate, Constant):
        d = rate.value
        if d == 0.0:
            return fn.value * (b - a)
        return fn.value * (math.exp(-d * a) - math.exp(-d * b)) / d
    return integrate_on_segment(fn, a, b, anchor, weight=spec.discount.factor)


def path_cashflow_value(
    path: Path,
    spec: ContractSpec,
    scale: ScaleSchedule | None = None,
    reserve: ReserveLookup | None = None,
) -> float:
    """``int_(0,T] e^{-int_0^s delta} c(s) dA(s)`` along ``path``.

    ``c`` is the scaling in force (1 for the plain cash flow).  A surrender
    pays ``(1 - kappa) c(s) reserve(s-)``, so ``reserve`` is needed only when
    the path surrenders.  Lumps at time 0 are excluded, matching ``V(0)``.
    """
    scale = scale or ScaleSchedule()
    pay = spec.payments
    disc = spec.discount
    T = spec.horizon
    segments = path.segments()
    total = 0.0
    for seg in segments:
        a, b = seg.start, min(seg.end, T)
        c = scale(b) if b > a else scale(a)
        part = 0.0
        fn = pay.sojourn.get((seg.state, seg.mode))
        if fn is not None and b > a:
            part += _sojourn_value(spec, fn, a, b, seg.anchor)
        for t in pay.lump_times:
            if a < t <= b:
                part += disc.factor(t) * pay.lump_amount(t, seg.state, seg.mode)
        total += c * part
    for ev, seg in zip(path.events, segments):
        s = ev.time
        u = s - seg.anchor
        i, k = seg.state, seg.mode
        c = scale(s)
        if ev.kind == STATE_JUMP:
            frac = pay.surrender_fraction.get((i, ev.target))
            if frac is not None:
                if reserve is None:
                    raise ConfigurationError("surrender payments need reserve values")
                amount = frac * reserve(s, i, k, u)
            else:
                amount = float(pay.state_transition_payment(s, i, ev.target, k, u))
        else:
            amount = float(pay.mode_transition_payment(s, k, ev.target, i, u))
        if amount != 0.0:
            total += c * disc.factor(s) * amount
    return total
