"""One-parameter sweeps with branch tracking, and first-order jump detection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .models import ModelSpec
from .optimize import OptimizerOpts, multistart, rng_for
from .product import ProductProblem, VariationalResult

# axis name -> (derivative column, sign)
DERIVATIVES = {"g": ("chi", 1.0), "h": ("kappa", -1.0)}


@dataclass
class SweepTable:
    """Global-minimum curve plus the tracked up/down branches it was selected from."""

    axis: str
    values: np.ndarray
    results: list[VariationalResult]
    up: list[VariationalResult] = field(default_factory=list)
    down: list[VariationalResult] = field(default_factory=list)
    order_name: str = "n_up"

    @property
    def order(self) -> np.ndarray:
        return np.array([r.order for r in self.results])

    @property
    def norm(self) -> np.ndarray:
        return np.array([r.norm for r in self.results])

    @property
    def derivative_name(self) -> str:
        return DERIVATIVES.get(self.axis, ("d" + self.order_name + "_d" + self.axis, 1.0))[0]

    @property
    def derivative(self) -> np.ndarray:
        if len(self.values) < 2:
            return np.zeros(len(self.values))
        sign = DERIVATIVES.get(self.axis, ("", 1.0))[1]
        return sign * np.gradient(self.order, self.values)

    def rows(self) -> list[dict]:
        deriv = self.derivative
        out = []
        for k, v in enumerate(self.values):
            out.append(
                {
                    self.axis: float(v),
                    self.order_name: self.results[k].order,
                    "norm": self.results[k].norm,
                    self.derivative_name: float(deriv[k]),
                }
            )
        return out


def _model_at(m: ModelSpec, axis: str, value: float) -> ModelSpec:
    return m.with_params(**{axis: float(value)})


def sweep(
    m: ModelSpec,
    axis: str,
    values: Sequence[float],
    opts: OptimizerOpts = OptimizerOpts(),
    problem: Callable[[ModelSpec], object] = ProductProblem,
    fresh: int | None = None,
) -> SweepTable:
    """Minimize along ``axis`` tracking both sweep directions.

    Three candidates compete at every grid point: the minimizer continued from
    the previous point of the upward pass, the one continued from the downward
    pass, and ``fresh`` new starts (default ``opts.restarts``). The lowest
    objective wins.
    """
    values = np.asarray(values, dtype=float)
    if len(values) > 1 and not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise ValueError("sweep values must be strictly monotone")
    fresh = opts.restarts if fresh is None else fresh
    problems = [problem(_model_at(m, axis, v)) for v in values]

    def track(order):
        out = {}
        prev = None
        for k in order:
            prob = problems[k]
            if prev is None:
                starts = prob.fresh_starts(rng_for(opts.seed, values[k]), max(fresh, 1))
            else:
                starts = [prev]
            best, _ = multistart(prob, starts, opts)
            out[k] = prob.result(best)
            prev = best.x
        return out

    n = len(values)
    up = track(range(n))
    down = track(reversed(range(n)))
    results = []
    for k in range(n):
        cands = [up[k], down[k]]
        if fresh and 0 < k < n - 1:
            prob = problems[k]
            best, _ = multistart(prob, prob.fresh_starts(rng_for(opts.seed, values[k]), fresh), opts)
            cands.append(prob.result(best))
        results.append(min(cands, key=lambda r: r.norm))
    order_name = "n_up" if m.kind == "ising" else "n"
    return SweepTable(axis, values, results, [up[k] for k in range(n)], [down[k] for k in range(n)], order_name)


@dataclass(frozen=True)
class Jump:
    location: float
    magnitude: float


def find_jump(values: Sequence[float], order: Sequence[float], ratio: float = 5.0, window: int = 3) -> Jump | None:
    """Largest single-step change of ``order`` if it stands out from its neighborhood.

    The step is a jump when it exceeds ``ratio`` times the median absolute step
    among up to ``window`` grid intervals on either side of it.
    """
    values = np.asarray(values, dtype=float)
    order = np.asarray(order, dtype=float)
    if len(values) < 3:
        return None
    steps = np.abs(np.diff(order))
    k = int(np.argmax(steps))
    if steps[k] <= 1e-12:
        return None
    neighbors = np.concatenate([steps[max(0, k - window) : k], steps[k + 1 : k + 1 + window]])
    if neighbors.size and steps[k] <= ratio * np.median(neighbors):
        return None
    return Jump(0.5 * (values[k] + values[k + 1]), float(steps[k]))


def locate_jump(table: SweepTable) -> float | None:
    j = find_jump(table.values, table.order)
    return None if j is None else j.location
