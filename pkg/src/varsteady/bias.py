"""Schatten norms with p > 1 favor the maximally mixed state on large systems.

For a uniform product state on an open chain the full N-site time derivative
is assembled exactly and its Schatten norm compared between the maximally
mixed state and a fixed non-mixed comparator. Upper and lower bounds on the
norm both decay like ``c**(N - 2)``; for the mixed state ``c = d**(1 - p)``,
which is the smaller base, so for ``p > 1`` the mixed state eventually wins.
The trace norm (``p = 1``) has no such decay for the mixed state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exact import MatrixFreeLiouvillian, SmallLattice
from .models import ModelSpec
from .operators import DomainError, Operator, schatten_norm
from .optimize import OptimizerOpts
from .product import ProductAnsatz, minimize_product

MAX_DIM = 4096


def product_state(rho_site: np.ndarray, n_sites: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(n_sites):
        out = np.kron(out, rho_site)
    return out


def global_product_norm(m: ModelSpec, a: ProductAnsatz, n_sites: int, p: float) -> float:
    """``schatten_norm(rho_dot, p)`` of the uniform product state on an open ``n_sites`` chain."""
    d = m.local_dim
    if n_sites < 1 or d**n_sites > MAX_DIM:
        raise DomainError(f"chain of {n_sites} sites exceeds the dense cap d**N <= {MAX_DIM}")
    lat = SmallLattice.chain(n_sites) if n_sites > 1 else SmallLattice(1, ())
    rho = product_state(a.rho(), n_sites)
    rho_dot = MatrixFreeLiouvillian(m, lat)(rho.astype(complex))
    return schatten_norm(Operator(rho_dot), p)


def maximally_mixed(m: ModelSpec) -> ProductAnsatz:
    return ProductAnsatz.from_rho(np.eye(m.local_dim) / m.local_dim)


@dataclass
class BiasReport:
    n_values: list[int]
    p_values: list[float]
    mixed: dict[float, list[float]]
    optimized: dict[float, list[float]]
    comparator: ProductAnsatz
    crossover: dict[float, int | None] = field(default_factory=dict)

    def decay_base(self, p: float) -> float:
        """Fitted base ``c`` of ``mixed_norm / N ~ c**N`` (least squares in log space)."""
        n = np.asarray(self.n_values, dtype=float)
        vals = np.asarray(self.mixed[p])
        slope = np.polyfit(n, np.log(vals / n), 1)[0]
        return float(np.exp(slope))

    def rows(self) -> list[dict]:
        out = []
        for p in self.p_values:
            for k, n in enumerate(self.n_values):
                out.append({"p": p, "N": n, "mixed_norm": self.mixed[p][k], "optimized_norm": self.optimized[p][k]})
        return out


def _crossover(n_values: Sequence[int], mixed: Sequence[float], optimized: Sequence[float]) -> int | None:
    """Smallest N from which the mixed state stays strictly below the comparator."""
    below = [mv < ov for mv, ov in zip(mixed, optimized)]
    for k in range(len(below)):
        if all(below[k:]):
            return int(n_values[k])
    return None


def bias_demo(
    m: ModelSpec,
    n_range: Sequence[int],
    p_values: Sequence[float] = (1.0, 2.0),
    opts: OptimizerOpts = OptimizerOpts(restarts=4),
) -> BiasReport:
    """Mixed state vs. the trace-norm-optimal bare-bond product state for every ``(N, p)``."""
    n_values = sorted(int(n) for n in n_range)
    comparator = minimize_product(m, opts, env=0).ansatz
    mixed_state = maximally_mixed(m)
    mixed, optimized = {}, {}
    for p in p_values:
        mixed[p] = [global_product_norm(m, mixed_state, n, p) for n in n_values]
        optimized[p] = [global_product_norm(m, comparator, n, p) for n in n_values]
    report = BiasReport(n_values, list(p_values), mixed, optimized, comparator)
    report.crossover = {p: _crossover(n_values, mixed[p], optimized[p]) for p in p_values}
    return report
