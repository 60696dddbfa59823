"""Nearest-neighbor correlated ansatz evaluated on an open three-site chain.

The pair state of every bond is ``sigma (x) sigma + C`` with one shared,
doubly traceless correlation matrix ``C``. The objective is the trace norm of
the reduced three-site time derivative. Neighbors outside the cluster enter at
mean-field level plus the first-order correlation they share with the cluster
site they touch.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .models import ClusterModel, ClusterSpec, ModelSpec, bond_terms
from .operators import DomainError, Operator, embed, kron_arrays, trace_norm_array, traceless_basis
from .optimize import LocalMin, OptimizerOpts, multistart, rng_for
from .product import (
    ProductAnsatz,
    ProductProblem,
    VariationalResult,
    minimize_product,
    site_observables,
    spin_rho,
)
from .sweep import Jump, find_jump, sweep

PENALTY_WEIGHT = 1e6


@dataclass(frozen=True)
class CorrelationMatrix:
    """``C = sum_ab c_ab lambda_a (x) lambda_b / 4`` in a traceless Hermitian basis.

    With this normalization ``c_ab`` is the connected correlator
    ``<lambda_a lambda_b> - <lambda_a><lambda_b>`` of the pair state.
    """

    coeffs: np.ndarray
    d: int = 2

    @classmethod
    def zero(cls, d: int = 2) -> "CorrelationMatrix":
        k = d * d - 1
        return cls(np.zeros((k, k)), d)

    def matrix(self) -> np.ndarray:
        return np.tensordot(np.ravel(self.coeffs), _pair_basis(self.d), 1)

    def operator(self) -> Operator:
        return Operator(self.matrix(), (self.d, self.d))


@lru_cache(maxsize=8)
def _pair_basis(d: int) -> np.ndarray:
    lam = traceless_basis(d)
    k = len(lam)
    out = np.einsum("aij,bkl->abikjl", lam, lam).reshape(k * k, d * d, d * d) * 0.25
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CorrelatedAnsatz:
    site: ProductAnsatz
    corr: CorrelationMatrix


def assemble_pair_state(a: CorrelatedAnsatz) -> Operator:
    s = a.site.rho()
    return Operator(kron_arrays(s, s) + a.corr.matrix(), (a.site.d, a.site.d))


def open_chain_cluster(z: int) -> ClusterSpec:
    return ClusterSpec.open_chain(3, z)


def _penalty(pair: np.ndarray) -> float:
    lam = np.linalg.eigvalsh(pair)[0]
    return PENALTY_WEIGHT * max(0.0, -lam) ** 2


class CorrelatedProblem:
    """Objective over ``[bloch (3), c (9)]`` for spin models.

    ``cross_products`` also keeps the second-order terms ``C_il C_jk`` that
    arise when an environment bond and the opposite in-cluster bond are
    disjoint; by default they are dropped.
    """

    def __init__(self, m: ModelSpec, cluster: ClusterSpec | None = None, cross_products: bool = False):
        if m.kind != "ising":
            raise DomainError("the correlated ansatz is implemented for spin-1/2 models only")
        self.model = m
        self.d = d = 2
        self.cluster = cluster or open_chain_cluster(m.z)
        self.cluster.check_embedding(m.z) if m.lattice.geometry != "custom" else None
        self.cm = ClusterModel(m, self.cluster)
        self.n_sites = self.cluster.n_sites
        self.cross_products = cross_products
        self.n_params = 3 + 9
        self.basis = traceless_basis(d)
        self.pair_basis = _pair_basis(d)
        self._pair_flat = self.pair_basis.reshape(9, -1)
        self._basis_flat = self.basis.reshape(3, -1)
        dims = self.cm.site_dims
        # per bond term: (env-weighted A on each site, contraction vector for B)
        self.terms = []
        for a, b in bond_terms(m):
            a_sites = [self.cluster.env_fields[s] * embed(a, s, dims) for s in range(self.n_sites)]
            t_b = 0.25 * np.real(np.einsum("aij,ji->a", self.basis, b))
            self.terms.append((a_sites, t_b))
        self._free_ends = self._disjoint_partners()
        self._fast = tuple(self.cluster.bonds) == ((0, 1), (1, 2))
        if self._fast:
            self._build_superoperators()

    def _build_superoperators(self):
        """Row-major superoperators so one matrix product yields the whole generator.

        Blocks: fixed generator on rho, then per bond term the mean-field
        shift on rho, then the correlation shift on each site's placed ``Y``.
        """
        cm = self.cm
        eye = np.eye(cm.dim)

        def ad(a):
            return -1j * (np.kron(a, eye) - np.kron(eye, a.T))

        h_eff = cm.h_fixed - 0.5j * cm.decay
        blocks = [-1j * (np.kron(h_eff, eye) - np.kron(eye, h_eff.conj()))]
        blocks[0] = blocks[0] + sum(np.kron(c, c.conj()) for c in cm.jumps)
        self._b_ops = []
        for (a_sum, b), (a_sites, _) in zip(cm.shift_terms, self.terms):
            blocks.append(ad(a_sum))
            self._b_ops.append(b)
        for a_sites, _ in self.terms:
            blocks.extend(ad(a) for a in a_sites)
        self._super = np.hstack(blocks)

    def _disjoint_partners(self) -> list[tuple[int, tuple[int, int]]]:
        """(site, in-cluster bond not touching it) pairs; only used for ``cross_products``."""
        out = []
        if self.n_sites != 3:
            return out
        for s in range(3):
            for bond in self.cluster.bonds:
                if s not in bond:
                    out.append((s, bond))
        return out

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return spin_rho(x[:3]), np.asarray(x[3:]).reshape(3, 3)

    def corr_matrix(self, c: np.ndarray) -> np.ndarray:
        return (c.ravel() @ self._pair_flat).reshape(4, 4)

    def pair_state(self, x: np.ndarray) -> np.ndarray:
        s, c = self.split(x)
        return kron_arrays(s, s) + self.corr_matrix(c)

    def cluster_state(self, s: np.ndarray, C: np.ndarray) -> np.ndarray:
        n = self.n_sites
        rho = s
        for _ in range(n - 1):
            rho = kron_arrays(rho, s)
        for i, j in self.cluster.bonds:
            rho = rho + self._place_pair(C, s, i, j)
        return rho

    def _place_pair(self, C: np.ndarray, s: np.ndarray, i: int, j: int) -> np.ndarray:
        n = self.n_sites
        if j == i + 1:
            left = np.eye(1)
            for _ in range(i):
                left = kron_arrays(left, s)
            right = np.eye(1)
            for _ in range(j + 1, n):
                right = kron_arrays(right, s)
            return kron_arrays(kron_arrays(left, C), right)
        raise DomainError("correlation placement needs adjacent cluster indices")

    def _place_single(self, Y: np.ndarray, s: np.ndarray, site: int) -> np.ndarray:
        out = np.eye(1)
        for k in range(self.n_sites):
            out = kron_arrays(out, Y if k == site else s)
        return out

    def rhs(self, x: np.ndarray) -> np.ndarray:
        if not self._fast:
            return self.rhs_direct(x)
        s, c = self.split(x)
        C = self.corr_matrix(c)
        ss = kron_arrays(s, s)
        rho = kron_arrays(ss, s) + kron_arrays(C, s) + kron_arrays(s, C)
        parts = [rho.ravel()]
        parts.extend(np.trace(b @ s) * parts[0] for b in self._b_ops)
        csym = 0.5 * (c + c.T)
        for _, t_b in self.terms:
            y = (csym @ t_b @ self._basis_flat).reshape(2, 2)
            x0, x2 = kron_arrays(y, ss), kron_arrays(ss, y)
            if self.cross_products:
                x0, x2 = x0 + kron_arrays(y, C), x2 + kron_arrays(C, y)
            parts.extend([x0.ravel(), kron_arrays(kron_arrays(s, y), s).ravel(), x2.ravel()])
        dim = self.cm.dim
        return (self._super @ np.concatenate(parts)).reshape(dim, dim)

    def rhs_direct(self, x: np.ndarray) -> np.ndarray:
        """Reference evaluation that assembles every operator explicitly."""
        s, c = self.split(x)
        C = np.tensordot(c.ravel(), self.pair_basis, 1)
        rho = self.cluster_state(s, C)
        out = self.cm.rhs(rho, s)
        csym = 0.5 * (c + c.T)
        for a_sites, t_b in self.terms:
            y = np.tensordot(csym @ t_b, self.basis, 1)
            for site, a in enumerate(a_sites):
                if not self.cluster.env_fields[site]:
                    continue
                X = self._place_single(y, s, site)
                if self.cross_products:
                    for s2, bond in self._free_ends:
                        if s2 == site:
                            X = X + (kron_arrays(y, C) if site == 0 else kron_arrays(C, y))
                out = out - 1j * (a @ X - X @ a)
        return out

    def penalty(self, x: np.ndarray) -> float:
        return _penalty(self.pair_state(x))

    def __call__(self, x: np.ndarray) -> float:
        return trace_norm_array(self.rhs(x)) + self.penalty(x)

    def product_problem(self) -> ProductProblem:
        return ProductProblem(self.model)

    def fresh_starts(self, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        """Product-state minimizers with ``C = 0``, then small random correlations."""
        prod = minimize_product(self.model, OptimizerOpts(restarts=4, seed=int(rng.integers(2**31))))
        base = np.concatenate([prod.params, np.zeros(9)])
        out = [base]
        while len(out) < n:
            out.append(base + np.concatenate([np.zeros(3), 0.02 * rng.normal(size=9)]))
        return out

    def result(self, best: LocalMin) -> VariationalResult:
        s, c = self.split(best.x)
        ansatz = CorrelatedAnsatz(ProductAnsatz.spin(best.x[:3]), CorrelationMatrix(c.copy()))
        obs = site_observables(self.model, s)
        obs["zz_connected"] = float(c[2, 2])
        obs["lambda_min_pair"] = float(np.linalg.eigvalsh(self.pair_state(best.x))[0])
        return VariationalResult(ansatz, float(self(best.x)), obs, best.info, np.array(best.x))


def _params(a: CorrelatedAnsatz) -> np.ndarray:
    return np.concatenate([a.site.params, np.ravel(a.corr.coeffs)])


def three_site_rhs(m: ModelSpec, a: CorrelatedAnsatz) -> Operator:
    prob = CorrelatedProblem(m)
    return Operator(prob.rhs(_params(a)), prob.cm.site_dims)


def correlated_objective(m: ModelSpec, a: CorrelatedAnsatz) -> float:
    return CorrelatedProblem(m)(_params(a))


def minimize_correlated(
    m: ModelSpec, opts: OptimizerOpts = OptimizerOpts(restarts=3), extra_starts: Sequence[np.ndarray] = ()
) -> VariationalResult:
    prob = CorrelatedProblem(m)
    starts = list(extra_starts) + prob.fresh_starts(rng_for(opts.seed), opts.restarts)
    best, _ = multistart(prob, starts, opts)
    return prob.result(best)


JUMP_THRESHOLD = 0.05
V_RESOLUTION = 0.02


class NoTransitionError(RuntimeError):
    pass


class CriticalPoint(NamedTuple):
    g: float
    V: float


# sweeper(m, g_grid) -> n_up along the grid
Sweeper = Callable[[ModelSpec, np.ndarray], np.ndarray]


def correlated_sweeper(opts: OptimizerOpts = OptimizerOpts(restarts=1)) -> Sweeper:
    """Global-minimum ``n_up(g)`` of the correlated ansatz, from tracked branches only."""

    def run(m: ModelSpec, g_grid: np.ndarray) -> np.ndarray:
        return sweep(m, "g", g_grid, opts, problem=CorrelatedProblem, fresh=0).order

    return run


def jump_at(m_base: ModelSpec, V: float, g_grid: Sequence[float], sweeper: Sweeper) -> Jump | None:
    g_grid = np.asarray(g_grid, dtype=float)
    return find_jump(g_grid, sweeper(m_base.with_params(V=float(V)), g_grid))


def critical_point_scan(
    m_base: ModelSpec,
    g_grid: Sequence[float],
    V_grid: Sequence[float],
    threshold: float = JUMP_THRESHOLD,
    resolution: float = V_RESOLUTION,
    sweeper: Sweeper | None = None,
) -> CriticalPoint:
    """Endpoint of the first-order line in the (g, V) plane at ``h = 0``.

    Each V gets a g-sweep; a V counts as first order when the located jump in
    ``n_up`` exceeds ``threshold``. The smallest such grid V is then refined by
    bisection against its lower neighbor until the bracket is ``resolution``
    wide. Returns the jump location and V at the upper end of the bracket.
    """
    if m_base.kind != "ising" or m_base.params.h != 0:
        raise DomainError("critical_point_scan needs an Ising model with h = 0")
    g_grid = np.asarray(g_grid, dtype=float)
    V_grid = np.asarray(V_grid, dtype=float)
    for name, grid in (("g_grid", g_grid), ("V_grid", V_grid)):
        if len(grid) == 0 or (len(grid) > 1 and not np.all(np.diff(grid) > 0)):
            raise DomainError(f"{name} must be nonempty and increasing")
    sweeper = sweeper or correlated_sweeper()

    def first_order(V):
        j = jump_at(m_base, V, g_grid, sweeper)
        return j if j is not None and j.magnitude > threshold else None

    lo = None
    for V in V_grid:
        hit = first_order(V)
        if hit is not None:
            hi, hi_jump = float(V), hit
            break
        lo = float(V)
    else:
        raise NoTransitionError("no first-order line found")
    if lo is not None:
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            hit = first_order(mid)
            if hit is None:
                lo = mid
            else:
                hi, hi_jump = mid, hit
    return CriticalPoint(hi_jump.location, hi)
