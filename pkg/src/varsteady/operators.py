"""Dense complex operator algebra on tensor-product Hilbert spaces.

Everything here works on small dense matrices (at most a few thousand rows).
An :class:`Operator` is a thin immutable wrapper that remembers how its Hilbert
space factorizes into sites so that partial traces can be taken by index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10


class DomainError(ValueError):
    """Raised when an operation receives input outside its mathematical domain."""


@dataclass(frozen=True)
class Operator:
    """Square complex matrix together with its per-site dimensions."""

    data: np.ndarray
    site_dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DomainError(f"operator must be square, got shape {data.shape}")
        dims = tuple(int(d) for d in self.site_dims) or (data.shape[0],)
        if int(np.prod(dims)) != data.shape[0]:
            raise DomainError(f"site_dims {dims} do not multiply to {data.shape[0]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "site_dims", dims)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermitian_defect() < tol

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.site_dims)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.data + other.data, self.site_dims)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.data - other.data, self.site_dims)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(scalar * self.data, self.site_dims)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.data @ other.data, self.site_dims)


@dataclass(frozen=True)
class Spectrum:
    """Real eigenvalues in descending order."""

    eigenvalues: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _check_same_space(a: Operator, b: Operator) -> None:
    if a.site_dims != b.site_dims:
        raise DomainError(f"site dimensions differ: {a.site_dims} vs {b.site_dims}")


def as_operator(o, site_dims: Sequence[int] | None = None) -> Operator:
    if isinstance(o, Operator):
        return o
    return Operator(np.asarray(o, dtype=complex), tuple(site_dims or ()))


def kron_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two square matrices; faster than ``np.kron`` for tiny inputs."""
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(
        a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    )


def kron(a: Operator, b: Operator, *more: Operator) -> Operator:
    """Tensor product; the left factor carries the slow index."""
    ops = (a, b) + more
    data = reduce(kron_arrays, (o.data for o in ops))
    dims = sum((o.site_dims for o in ops), ())
    return Operator(data, dims)


def embed(local: np.ndarray, site: int, site_dims: Sequence[int]) -> np.ndarray:
    """Lift a single-site matrix to the full space (identity elsewhere)."""
    left = int(np.prod(site_dims[:site]))
    right = int(np.prod(site_dims[site + 1 :]))
    return np.kron(np.kron(np.eye(left), local), np.eye(right))


def embed_pair(pair: np.ndarray, i: int, j: int, site_dims: Sequence[int]) -> np.ndarray:
    """Lift a two-site matrix acting on sites ``(i, j)`` (in that order) to the full space."""
    if i == j:
        raise DomainError("pair sites must differ")
    n = len(site_dims)
    dims = list(site_dims)
    rest = [k for k in range(n) if k not in (i, j)]
    order = [i, j] + rest
    full = np.kron(pair, np.eye(int(np.prod([dims[k] for k in rest]))))
    # full acts on the permuted ordering (i, j, rest...); permute back.
    pdims = [dims[k] for k in order]
    t = full.reshape(pdims + pdims)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + k for k in inv])
    D = int(np.prod(dims))
    return t.reshape(D, D)


def partial_trace(o: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every site not listed in ``keep``; kept sites retain their order."""
    keep = sorted(set(keep))
    n = o.n_sites
    if not keep:
        raise DomainError("keep must be nonempty")
    if any(k < 0 or k >= n for k in keep):
        raise DomainError(f"site indices {keep} invalid for {n} sites")
    dims = list(o.site_dims)
    t = o.data.reshape(dims + dims)
    # contract traced sites from the highest index down so axis labels stay valid
    traced = [k for k in range(n) if k not in keep]
    cur = n
    for k in reversed(traced):
        t = np.trace(t, axis1=k, axis2=k + cur)
        cur -= 1
    kept_dims = [dims[k] for k in keep]
    D = int(np.prod(kept_dims))
    return Operator(t.reshape(D, D), tuple(kept_dims))


def hermitian_spectrum(o: Operator | np.ndarray, tol: float = HERMITIAN_TOL) -> Spectrum:
    data = o.data if isinstance(o, Operator) else np.asarray(o, dtype=complex)
    defect = float(np.max(np.abs(data - data.conj().T), initial=0.0))
    if defect > tol:
        raise DomainError(f"operator is not Hermitian (defect {defect:.3e})")
    evals = np.linalg.eigvalsh(0.5 * (data + data.conj().T))
    return Spectrum(evals[::-1].copy())


def trace_norm(o: Operator | np.ndarray) -> float:
    return float(np.sum(np.abs(hermitian_spectrum(o).eigenvalues)))


def schatten_norm(o: Operator | np.ndarray, p: float) -> float:
    """Schatten ``p``-norm without the final ``1/p`` root: ``sum |lambda|**p``."""
    if p < 1:
        raise DomainError(f"p must be >= 1 (triangle inequality fails otherwise), got {p}")
    lam = np.abs(hermitian_spectrum(o).eigenvalues)
    if np.isinf(p):
        return float(lam.max(initial=0.0))
    return float(np.sum(lam**p))


def trace_norm_array(a: np.ndarray) -> float:
    """Unchecked trace norm of a matrix that is Hermitian up to rounding; hot-path helper."""
    return float(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T))).sum())


def traceless_basis(d: int) -> np.ndarray:
    """Generalized Gell-Mann matrices, shape ``(d*d - 1, d, d)``, normalized to ``tr(a b) = 2 delta``.

    For ``d = 2`` this is ``(sigma_x, sigma_y, sigma_z)``.
    """
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j, 1j
            mats.append(m)
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[np.arange(l), np.arange(l)] = 1
        m[l, l] = -l
        mats.append(m * np.sqrt(2.0 / (l * (l + 1))))
    return np.array(mats)
