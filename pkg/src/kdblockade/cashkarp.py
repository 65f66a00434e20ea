"""Adaptive Cash-Karp 4(5) Runge-Kutta integrator for complex state vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError

# Cash & Karp (1990) tableau
_C = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))

SAFETY = 0.9
MAX_GROW = 5.0
MIN_SHRINK = 0.1


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    min_step: float = np.inf
    max_step: float = 0.0

    def as_dict(self):
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "evaluations": self.evaluations,
            "min_step": float(self.min_step),
            "max_step": float(self.max_step),
        }


@dataclass
class CashKarp:
    """Embedded 5th-order stepper with 4th-order error estimate.

    The error norm is the maximum over components of
    ``|err_i| / (atol + rtol * max(|y_i|, |y_new_i|))``; a step is accepted
    when that norm is at most one.
    """

    rhs: callable
    rtol: float = 1e-9
    atol: float = 1e-12
    dt_min: float = 1e-6
    stats: StepStats = field(default_factory=StepStats)

    def attempt(self, t, y, h, k0):
        ks = [k0]
        for s in range(1, 6):
            acc = y.copy()
            for a, k in zip(_A[s], ks):
                if a:
                    acc += (h * a) * k
            ks.append(self.rhs(t + _C[s] * h, acc))
        self.stats.evaluations += 5
        y_new = y.copy()
        err = np.zeros_like(y)
        for b, e, k in zip(_B5, _E, ks):
            if b:
                y_new += (h * b) * k
            if e:
                err += (h * e) * k
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, float(np.max(np.abs(err) / scale))

    def advance(self, t, y, t_stop, h, on_step=None):
        """Integrate from ``t`` to exactly ``t_stop``; returns ``(y, h_next)``.

        ``on_step(t, y)`` is called after every accepted step.
        """
        k0 = self.rhs(t, y)
        self.stats.evaluations += 1
        while t < t_stop:
            h_try = min(h, t_stop - t)
            last = h_try == t_stop - t
            y_new, err = self.attempt(t, y, h_try, k0)
            if err <= 1.0:
                t = t_stop if last else t + h_try
                y = y_new
                self.stats.accepted += 1
                self.stats.min_step = min(self.stats.min_step, h_try)
                self.stats.max_step = max(self.stats.max_step, h_try)
                grow = MAX_GROW if err == 0 else min(MAX_GROW, SAFETY * err ** -0.2)
                # a step shortened to hit t_stop should not shrink the next one
                h = max(h, h_try * grow) if last else h_try * grow
                if on_step is not None:
                    on_step(t, y)
                if t < t_stop:
                    k0 = self.rhs(t, y)
                    self.stats.evaluations += 1
            else:
                self.stats.rejected += 1
                h = h_try * max(MIN_SHRINK, SAFETY * err ** -0.25)
                if h < self.dt_min:
                    raise IntegrationError(
                        "step size underflow",
                        t=t,
                        step=h,
                        dt_min=self.dt_min,
                        error_norm=err,
                        accepted=self.stats.accepted,
                        rejected=self.stats.rejected,
                    )
        return y, h
