"""Variational product states: minimize the trace norm of the reduced two-site dynamics.

For a translation-invariant product state every bond contributes the same
reduced time derivative, so it suffices to evaluate one bond embedded in a
mean-field environment of ``z - 1`` further neighbors per site.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .models import ClusterModel, ClusterSpec, ModelSpec, PAULI, occupation
from .operators import Operator, kron_arrays, trace_norm, trace_norm_array
from .optimize import LocalMin, OptimizerInfo, OptimizerOpts, multistart, rng_for

BLOCH_RADIUS = 1 - 1e-9
TOP_LEVEL_LIMIT = 1e-3


class TruncationWarning(UserWarning):
    """The highest retained Fock level is populated enough to bias the result."""


def spin_rho(r: Sequence[float]) -> np.ndarray:
    """Density matrix ``(1 + r.sigma) / 2`` with the Bloch vector clamped into the ball."""
    x, y, z = r
    n = np.sqrt(x * x + y * y + z * z)
    if n > BLOCH_RADIUS:
        x, y, z = np.array([x, y, z]) * (BLOCH_RADIUS / n)
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("aij,ji->a", PAULI, rho))


def _tril(d: int):
    return np.tril_indices(d)


def boson_rho(x: Sequence[float], d: int) -> np.ndarray:
    """``T T^dag / tr(T T^dag)`` for lower-triangular ``T`` with real diagonal.

    ``x`` holds the ``d(d+1)/2`` real parts of the lower triangle followed by the
    ``d(d-1)/2`` imaginary parts of the strictly lower triangle.
    """
    x = np.asarray(x, dtype=float)
    rows, cols = _tril(d)
    nl = len(rows)
    t = np.zeros((d, d), dtype=complex)
    t[rows, cols] = x[:nl]
    strict = rows > cols
    t[rows[strict], cols[strict]] += 1j * x[nl:]
    rho = t @ t.conj().T
    tr = np.real(np.trace(rho))
    if tr < 1e-300:
        return np.eye(d, dtype=complex) / d
    return rho / tr


def boson_params(rho: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Inverse of :func:`boson_rho` (Cholesky factor of a slightly regularized ``rho``)."""
    d = rho.shape[0]
    reg = 0.5 * (rho + rho.conj().T) + floor * np.eye(d)
    t = np.linalg.cholesky(reg)
    rows, cols = _tril(d)
    strict = rows > cols
    return np.concatenate([t[rows, cols].real, t[rows[strict], cols[strict]].imag])


@dataclass(frozen=True)
class ProductAnsatz:
    """Uniform single-site state: Bloch vector for spins, Cholesky-type factor for bosons."""

    kind: str
    params: np.ndarray
    d: int = 2

    @classmethod
    def spin(cls, r: Sequence[float]) -> "ProductAnsatz":
        return cls("spin", np.asarray(r, dtype=float), 2)

    @classmethod
    def boson(cls, x: Sequence[float], d: int) -> "ProductAnsatz":
        return cls("boson", np.asarray(x, dtype=float), d)

    @classmethod
    def from_rho(cls, rho: np.ndarray) -> "ProductAnsatz":
        d = rho.shape[0]
        if d == 2:
            return cls.spin(bloch_vector(rho))
        return cls.boson(boson_params(rho), d)

    @classmethod
    def for_model(cls, m: ModelSpec, params: Sequence[float]) -> "ProductAnsatz":
        if m.kind == "ising":
            return cls.spin(params)
        return cls.boson(params, m.local_dim)

    def rho(self) -> np.ndarray:
        if self.kind == "spin":
            return spin_rho(self.params)
        return boson_rho(self.params, self.d)

    @property
    def bloch(self) -> np.ndarray:
        return bloch_vector(self.rho())


@dataclass
class VariationalResult:
    ansatz: object
    norm: float
    observables: dict[str, float]
    optimizer_info: OptimizerInfo = field(default_factory=OptimizerInfo)
    params: np.ndarray | None = None

    @property
    def order(self) -> float:
        return self.observables["n_up"] if "n_up" in self.observables else self.observables["n"]


def site_observables(m: ModelSpec, rho: np.ndarray) -> dict[str, float]:
    if m.kind == "ising":
        sx, sy, sz = bloch_vector(rho)
        return {"n_up": float(np.real(rho[0, 0])), "sx": float(sx), "sy": float(sy), "sz": float(sz)}
    d = m.local_dim
    b = np.diag(np.sqrt(np.arange(1, d)), k=1)
    mean_b = np.trace(b @ rho)
    top = float(np.real(rho[d - 1, d - 1]))
    if top > TOP_LEVEL_LIMIT:
        warnings.warn(f"top Fock level holds {top:.1e} > {TOP_LEVEL_LIMIT}; raise n_max", TruncationWarning, stacklevel=2)
    return {
        "n": occupation(m, rho),
        "b_re": float(mean_b.real),
        "b_im": float(mean_b.imag),
        "top_level": top,
    }


def decoupled_steady_state(m: ModelSpec) -> np.ndarray:
    """Steady state of one site without any coupling to its neighbors."""
    cm = ClusterModel(m, ClusterSpec(1, (), (0,)))
    d = m.local_dim
    # row-major superoperator of the single-site generator, then its null vector
    L = np.column_stack([cm.rhs(e.reshape(d, d), None).ravel() for e in np.eye(d * d)])
    rho = np.linalg.svd(L)[2][-1].conj().reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


@lru_cache(maxsize=256)
def bond_cluster(m: ModelSpec, env: int | None = None) -> ClusterModel:
    """One bond with ``env`` mean-field neighbors per site (default ``z - 1``)."""
    env = m.z - 1 if env is None else env
    return ClusterModel(m, ClusterSpec(2, ((0, 1),), (env, env)))


class ProductProblem:
    """Objective ``x -> ||rho_dot_ij||_1`` over product-ansatz parameters ``x``.

    ``env=0`` gives the bare two-site system without any environment.
    """

    def __init__(self, m: ModelSpec, env: int | None = None):
        self.model = m
        self.d = m.local_dim
        self.cluster = bond_cluster(m, env)
        self.n_params = 3 if m.kind == "ising" else self.d * self.d

    def site_rho(self, x: np.ndarray) -> np.ndarray:
        if self.model.kind == "ising":
            return spin_rho(x)
        return boson_rho(x, self.d)

    def params_from_rho(self, rho: np.ndarray) -> np.ndarray:
        if self.model.kind == "ising":
            return bloch_vector(rho)
        return boson_params(rho)

    def rhs(self, x: np.ndarray) -> np.ndarray:
        s = self.site_rho(x)
        return self.cluster.rhs(kron_arrays(s, s), s)

    def __call__(self, x: np.ndarray) -> float:
        return trace_norm_array(self.rhs(x))

    def fixed_starts(self) -> list[np.ndarray]:
        # the decoupled single site is exact without bonds and a good seed nearby
        m = self.model
        site = self.params_from_rho(decoupled_steady_state(m))
        if m.kind == "ising":
            # a site in the field of fully polarized neighbors seeds each density branch
            polarized = [
                self.params_from_rho(decoupled_steady_state(m.with_params(h=m.params.h + sign * m.z * m.params.V / 2)))
                for sign in (-1, 1)
            ]
            return [site, *polarized, np.array([0.0, 0.0, -0.95]), np.array([0.1, -0.1, 0.0])]
        d = self.d
        vac = np.zeros((d, d), dtype=complex)
        vac[0, 0] = 1
        mixed = np.eye(d) / d
        return [site, self.params_from_rho(0.9 * vac + 0.1 * mixed), self.params_from_rho(mixed)]

    def random_starts(self, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        out = []
        for _ in range(n):
            if self.model.kind == "ising":
                v = rng.normal(size=3)
                out.append(v / np.linalg.norm(v) * rng.uniform() ** (1 / 3))
            else:
                out.append(rng.normal(size=self.n_params))
        return out

    def fresh_starts(self, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        """Every fixed seed, topped up with random ones to ``n`` starts."""
        fixed = self.fixed_starts()
        return fixed + self.random_starts(rng, max(0, n - len(fixed)))

    def result(self, best: LocalMin) -> VariationalResult:
        ansatz = ProductAnsatz.for_model(self.model, best.x)
        rho = ansatz.rho()
        return VariationalResult(
            ansatz, float(self(best.x)), site_observables(self.model, rho), best.info, np.array(best.x)
        )


def two_site_rhs(m: ModelSpec, a: ProductAnsatz, env: int | None = None) -> Operator:
    """Reduced time derivative of one bond for the uniform product state ``a``."""
    s = a.rho()
    cm = bond_cluster(m, env)
    return Operator(cm.rhs(kron_arrays(s, s), s), cm.site_dims)


def product_objective(m: ModelSpec, a: ProductAnsatz, env: int | None = None) -> float:
    return trace_norm(two_site_rhs(m, a, env))


def minimize_product(
    m: ModelSpec,
    opts: OptimizerOpts = OptimizerOpts(),
    extra_starts: Iterable[np.ndarray] = (),
    env: int | None = None,
) -> VariationalResult:
    """Multi-start minimization of the single-bond trace norm."""
    prob = ProductProblem(m, env)
    starts = list(extra_starts) + prob.fresh_starts(rng_for(opts.seed), opts.restarts)
    best, _ = multistart(prob, starts, opts)
    return prob.result(best)
