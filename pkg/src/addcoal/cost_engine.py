"""Per-merge costs, cumulative traces, and checkpoint curves.

Six cost functionals are tracked per merge event.  Naming convention
(used consistently across the package): the *predator* is the size-biased
first pick, whose size is the event's L; the *prey* is the uniformly
chosen second cluster, whose size is R = s + S - L.

    QF           s or S by a fair coin (the event's u)
    QFW          s, the smaller side
    QFB          R, the non-size-biased side
    Prey         R  (identical to QFB event by event)
    Predator     L
    Displacement D, uniform on {0, ..., L-1} given L

Conditional means given merged sizes {x, y}:

    QF (x+y)/2 | QFW min(x,y) | Prey = QFB 2xy/(x+y)
    Predator (x^2+y^2)/(x+y) | Displacement ((x^2+y^2)/(x+y) - 1)/2

The displacement mean carries a -1/2 relative to the idealized table
value (x^2+y^2)/(2(x+y)) because D lives on {0, ..., L-1}; at the
partial-cost scale this shifts the limit curve by -alpha/2 (see
smoluchowski.phi_closed_form's conventions).
"""

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .process_core import EventBatch, MergeEvent


class Functional(str, enum.Enum):
    QF = "qf"
    QFW = "qfw"
    QFB = "qfb"
    PREY = "prey"
    PREDATOR = "predator"
    DISPLACEMENT = "displacement"


ALL_FUNCTIONALS = tuple(Functional)

DEFAULT_ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
DEFAULT_BETA_GRID = tuple(0.25 * i for i in range(17))


@dataclass(frozen=True)
class ConditionalCost:
    """A conditional merge cost c(x, y) with a declared bound A * x^p * y^q."""

    name: str
    mean: Callable[[float, float], float]
    bound: tuple[float, int, int]


def instantaneous_cost(functional: Functional, event: MergeEvent) -> int:
    """Realized cost of one event; deterministic given (event, functional)."""
    functional = Functional(functional)
    if functional is Functional.QF:
        return event.s if event.u < 0.5 else event.S
    if functional is Functional.QFW:
        return event.s
    if functional in (Functional.QFB, Functional.PREY):
        return event.R
    if functional is Functional.PREDATOR:
        return event.L
    return event.D


def event_costs(functional: Functional, batch: EventBatch) -> np.ndarray:
    """Vectorized realized costs for a whole run (int64)."""
    functional = Functional(functional)
    if functional is Functional.QF:
        return np.where(batch.u < 0.5, batch.s, batch.S)
    if functional is Functional.QFW:
        return batch.s
    if functional in (Functional.QFB, Functional.PREY):
        return batch.R
    if functional is Functional.PREDATOR:
        return batch.L
    return batch.D


def conditional_mean(functional: Functional, x, y):
    """Exact conditional mean of the realized cost given merged sizes {x, y}.

    Returns a Fraction when x and y are ints.
    """
    functional = Functional(functional)
    if functional is Functional.QF:
        return Fraction(x + y, 2)
    if functional is Functional.QFW:
        return Fraction(min(x, y))
    if functional in (Functional.QFB, Functional.PREY):
        return Fraction(2 * x * y, x + y)
    if functional is Functional.PREDATOR:
        return Fraction(x * x + y * y, x + y)
    return (Fraction(x * x + y * y, x + y) - 1) / 2


#: Conditional-mean costs with polynomial bounds, for limit-curve quadrature.
CONDITIONAL_COSTS = {
    Functional.QF: ConditionalCost("qf", lambda x, y: 0.5 * (x + y), (1.0, 1, 1)),
    Functional.QFW: ConditionalCost("qfw", lambda x, y: min(x, y), (1.0, 1, 0)),
    Functional.QFB: ConditionalCost("qfb", lambda x, y: 2.0 * x * y / (x + y), (1.0, 1, 0)),
    Functional.PREY: ConditionalCost("prey", lambda x, y: 2.0 * x * y / (x + y), (1.0, 1, 0)),
    Functional.PREDATOR: ConditionalCost(
        "predator", lambda x, y: (x * x + y * y) / (x + y), (2.0, 1, 1)
    ),
    Functional.DISPLACEMENT: ConditionalCost(
        "displacement", lambda x, y: 0.5 * ((x * x + y * y) / (x + y) - 1.0), (1.0, 1, 1)
    ),
}

#: The idealized displacement cost from the mean-field cost table (no -1/2).
DISPLACEMENT_TABLE_COST = ConditionalCost(
    "displacement-table", lambda x, y: (x * x + y * y) / (2.0 * (x + y)), (1.0, 1, 1)
)


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < 1e-9 * (1.0 + abs(x)) else x


def alpha_step(n: int, alpha: float) -> int:
    """Checkpoint step ceil(alpha * n), clamped to [0, n-1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    m = int(math.ceil(_snap(alpha * n)))
    return min(max(m, 0), n - 1)


def beta_step(n: int, beta: float) -> int:
    """Checkpoint step floor(n - beta * sqrt(n)), clamped to [0, n-1]."""
    if beta < 0.0:
        raise ValueError("beta must be >= 0")
    m = int(math.floor(_snap(n - beta * math.sqrt(n))))
    return min(max(m, 0), n - 1)


class CostTrace:
    """Cumulative cost of one functional along one run, with checkpoints.

    The running total is an exact Python integer.  Checkpoints record the
    cumulative cost at steps ceil(alpha*n) (alpha grid) and
    floor(n - beta*sqrt(n)) (beta grid).
    """

    def __init__(self, functional, n, alpha_grid=DEFAULT_ALPHA_GRID, beta_grid=DEFAULT_BETA_GRID):
        self.functional = Functional(functional)
        self.n = n
        self.alpha_grid = tuple(alpha_grid)
        self.beta_grid = tuple(beta_grid)
        self._alpha_steps = [alpha_step(n, a) for a in self.alpha_grid]
        self._beta_steps = [beta_step(n, b) for b in self.beta_grid]
        self.cumulative = 0
        self._next_k = 1
        self._at_step = {0: 0}
        need = set(self._alpha_steps) | set(self._beta_steps) | {n - 1}
        self._watch = {m for m in need if m > 0}

    @property
    def complete(self) -> bool:
        return self._next_k == self.n

    def accumulate(self, event: MergeEvent) -> None:
        if event.k != self._next_k:
            raise ValueError(f"out-of-order event: expected step {self._next_k}, got {event.k}")
        self.cumulative += instantaneous_cost(self.functional, event)
        if event.k in self._watch:
            self._at_step[event.k] = self.cumulative
        self._next_k += 1

    def extend(self, events) -> "CostTrace":
        for event in events:
            self.accumulate(event)
        return self

    @classmethod
    def from_batch(cls, functional, batch: EventBatch, alpha_grid=DEFAULT_ALPHA_GRID,
                   beta_grid=DEFAULT_BETA_GRID) -> "CostTrace":
        """Fast columnar path; totals stay exact (sums fit in int64 for n <= 1e6)."""
        trace = cls(functional, batch.n, alpha_grid, beta_grid)
        csum = np.cumsum(event_costs(trace.functional, batch))
        for m in trace._watch:
            trace._at_step[m] = int(csum[m - 1])
        trace.cumulative = int(csum[-1])
        trace._next_k = batch.n
        return trace

    def value_at_step(self, m: int) -> int:
        if m == 0:
            return 0
        try:
            return self._at_step[m]
        except KeyError:
            raise ValueError(f"step {m} is not a recorded checkpoint") from None

    @property
    def total(self) -> int:
        if not self.complete:
            raise ValueError("trace is not complete")
        return self._at_step[self.n - 1]


def partial_cost_curve(trace: CostTrace):
    """[(alpha, C_{n, ceil(alpha n)} / n)] on the trace's alpha grid."""
    if not trace.complete:
        raise ValueError("trace is not complete")
    n = trace.n
    return [
        (a, trace.value_at_step(m) / n)
        for a, m in zip(trace.alpha_grid, trace._alpha_steps)
    ]


def w_curve(trace: CostTrace):
    """[(beta, n^{-3/2} C_{n, floor(n - beta sqrt n)})] on the beta grid."""
    if not trace.complete:
        raise ValueError("trace is not complete")
    scale = trace.n ** 1.5
    return [
        (b, trace.value_at_step(m) / scale)
        for b, m in zip(trace.beta_grid, trace._beta_steps)
    ]
