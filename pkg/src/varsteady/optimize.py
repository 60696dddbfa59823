"""Multi-start Nelder-Mead minimization shared by the variational solvers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import minimize

DEFAULT_SEED = 20140201


@dataclass(frozen=True)
class OptimizerOpts:
    fatol: float = 1e-9
    xatol: float = 1e-7
    maxiter: int = 5000
    restarts: int = 8
    polish: int = 3
    seed: int = DEFAULT_SEED
    min_step: float = 0.01
    # objectives are norms; a start below this is already an exact zero to working precision
    zero: float = 1e-8


@dataclass
class OptimizerInfo:
    iterations: int = 0
    evaluations: int = 0
    restarts: int = 0
    converged: bool = False

    def merge(self, other: "OptimizerInfo") -> "OptimizerInfo":
        return OptimizerInfo(
            self.iterations + other.iterations,
            self.evaluations + other.evaluations,
            self.restarts + other.restarts,
            self.converged or other.converged,
        )


@dataclass
class LocalMin:
    x: np.ndarray
    fun: float
    info: OptimizerInfo = field(default_factory=OptimizerInfo)


def initial_simplex(x0: np.ndarray, min_step: float) -> np.ndarray:
    """Simplex with 5% relative edges, but never shorter than ``min_step``.

    The stock simplex moves zero coordinates by only 2.5e-4, which strands
    starts that sit exactly on a kink of the objective.
    """
    step = np.maximum(0.05 * np.abs(x0), min_step)
    return np.vstack([x0, x0 + np.diag(step)])


def nelder_mead(fun: Callable[[np.ndarray], float], x0: np.ndarray, opts: OptimizerOpts) -> LocalMin:
    """Adaptive Nelder-Mead, re-launched from its own optimum until it stops improving.

    The re-launch resets a collapsed simplex, which matters for the trace norm
    whose kinks stall a single run.
    """
    x = np.asarray(x0, dtype=float)
    f0 = float(fun(x))
    if f0 < opts.zero:
        return LocalMin(x, f0, OptimizerInfo(evaluations=1, converged=True))
    best: LocalMin | None = None
    info = OptimizerInfo()
    for _ in range(1 + opts.polish):
        res = minimize(
            fun,
            x,
            method="Nelder-Mead",
            options=dict(
                xatol=opts.xatol,
                fatol=opts.fatol,
                maxiter=opts.maxiter,
                adaptive=True,
                initial_simplex=initial_simplex(x, opts.min_step),
            ),
        )
        info.iterations += int(res.nit)
        info.evaluations += int(res.nfev)
        info.converged = info.converged or bool(res.success)
        improved = best is None or res.fun < best.fun - opts.fatol
        if best is None or res.fun < best.fun:
            best = LocalMin(np.asarray(res.x), float(res.fun))
        if not improved:
            break
        x = best.x
    assert best is not None
    best.info = info
    return best


def multistart(
    fun: Callable[[np.ndarray], float],
    starts: Iterable[np.ndarray],
    opts: OptimizerOpts,
) -> tuple[LocalMin, list[LocalMin]]:
    """Run :func:`nelder_mead` from every start; return the best and all local minima."""
    found = [nelder_mead(fun, x0, opts) for x0 in starts]
    if not found:
        raise ValueError("no starting points given")
    best = min(found, key=lambda r: r.fun)
    total = OptimizerInfo(restarts=len(found))
    for r in found:
        total = total.merge(OptimizerInfo(r.info.iterations, r.info.evaluations, 0, r.info.converged))
    return LocalMin(best.x, best.fun, total), found


def rng_for(seed: int, *keys: float) -> np.random.Generator:
    """Deterministic generator keyed on the seed and (rounded) grid coordinates."""
    words = [seed] + [int(round(k * 1e6)) % (2**32) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))
