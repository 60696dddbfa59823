"""Exact steady states of small lattices, used as an independent reference.

Two routes: the dense superoperator and its null space for tiny systems, and
time evolution for lattices up to 3x3 spins. Evolution runs either on the
full density matrix with a matrix-free generator or, for symmetric lattices,
inside the sector of operators invariant under all lattice automorphisms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .models import ModelSpec, bond_hamiltonian, jump_operators, local_hamiltonian
from .operators import DomainError, Operator, trace_norm_array

DENSE_MAX_DIM = 64
EVOLVE_MAX_DIM = 512


@dataclass(frozen=True)
class SmallLattice:
    n_sites: int
    bonds: tuple[tuple[int, int], ...]
    periodic: bool = False
    name: str = "custom"

    def __post_init__(self):
        seen = set()
        for i, j in self.bonds:
            if i == j or not (0 <= i < self.n_sites and 0 <= j < self.n_sites):
                raise DomainError(f"invalid bond {(i, j)}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise DomainError(f"duplicate bond {key}")
            seen.add(key)

    @classmethod
    def chain(cls, n: int, periodic: bool = False) -> "SmallLattice":
        bonds = [(i, i + 1) for i in range(n - 1)]
        if periodic and n > 2:
            bonds.append((n - 1, 0))
        return cls(n, tuple(bonds), periodic, f"chain-{n}")

    @classmethod
    def plaquette(cls) -> "SmallLattice":
        """2x2 square: four sites on a ring."""
        return cls(4, ((0, 1), (1, 3), (3, 2), (2, 0)), False, "plaquette-2x2")

    @classmethod
    def torus(cls, L: int) -> "SmallLattice":
        if L < 3:
            raise DomainError("torus needs L >= 3 to avoid doubled bonds")
        idx = lambda x, y: (x % L) * L + (y % L)
        bonds = []
        for x in range(L):
            for y in range(L):
                bonds.append((idx(x, y), idx(x + 1, y)))
                bonds.append((idx(x, y), idx(x, y + 1)))
        return cls(L * L, tuple(bonds), True, f"torus-{L}x{L}")

    def automorphisms(self) -> np.ndarray:
        """Site permutations that map the bond set onto itself, identity first.

        Found by backtracking over partial assignments, which is instant for
        the lattice sizes handled here.
        """
        n = self.n_sites
        adj = [set() for _ in range(n)]
        for i, j in self.bonds:
            adj[i].add(j)
            adj[j].add(i)
        found = []

        def extend(perm):
            k = len(perm)
            if k == n:
                found.append(list(perm))
                return
            used = set(perm)
            for t in range(n):
                if t in used or len(adj[t]) != len(adj[k]):
                    continue
                if all((perm[j] in adj[t]) == (j in adj[k]) for j in range(k)):
                    extend(perm + [t])

        extend([])
        found.sort(key=lambda p: p != list(range(n)))
        return np.array(found, dtype=int)

    def coordination(self) -> list[int]:
        deg = [0] * self.n_sites
        for i, j in self.bonds:
            deg[i] += 1
            deg[j] += 1
        return deg


def _site_op(local, site: int, n: int, d: int) -> sp.csr_matrix:
    return sp.kron(sp.kron(sp.identity(d**site), sp.csr_matrix(local)), sp.identity(d ** (n - site - 1)), format="csr")


def _pair_op(pair: np.ndarray, i: int, j: int, n: int, d: int) -> sp.csr_matrix:
    # decompose the two-site operator into a sum of products via its Schmidt form
    t = pair.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    u, s, vh = np.linalg.svd(t)
    out = sp.csr_matrix((d**n, d**n), dtype=complex)
    for k in range(len(s)):
        if s[k] < 1e-14:
            continue
        a = (u[:, k] * s[k]).reshape(d, d)
        b = vh[k].reshape(d, d)
        out = out + _site_op(a, i, n, d) @ _site_op(b, j, n, d)
    return out.tocsr()


def lattice_operators(m: ModelSpec, lat: SmallLattice) -> tuple[sp.csr_matrix, list[sp.csr_matrix]]:
    """Sparse Hamiltonian and per-site jump operators of the full lattice."""
    d, n = m.local_dim, lat.n_sites
    hloc = local_hamiltonian(m).data
    hb = bond_hamiltonian(m).data
    h = sp.csr_matrix((d**n, d**n), dtype=complex)
    for s in range(n):
        h = h + _site_op(hloc, s, n, d)
    for i, j in lat.bonds:
        h = h + _pair_op(hb, i, j, n, d)
    jumps = [_site_op(c.data, s, n, d) for s in range(n) for c in jump_operators(m)]
    return h.tocsr(), jumps


def dense_liouvillian(m: ModelSpec, lat: SmallLattice) -> Operator:
    """Superoperator acting on column-stacked density matrices."""
    D = m.local_dim**lat.n_sites
    if D > DENSE_MAX_DIM:
        raise DomainError(f"Hilbert dimension {D} > {DENSE_MAX_DIM}; use evolve_steady instead")
    h, jumps = lattice_operators(m, lat)
    h = h.toarray()
    eye = np.eye(D)
    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c in jumps:
        c = c.toarray()
        cdc = c.conj().T @ c
        L += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    return Operator(L)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    D = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(D, D, order="F")


def steady_state_dense(m: ModelSpec, lat: SmallLattice, degeneracy_tol: float = 1e-10) -> Operator:
    L = dense_liouvillian(m, lat).data
    _, s, vh = np.linalg.svd(L)
    if s[-2] < degeneracy_tol:
        raise DomainError(f"steady state is degenerate (second singular value {s[-2]:.2e})")
    rho = unvec(vh[-1].conj())
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -1e-9:
        raise DomainError(f"null vector is not a positive state (min eigenvalue {lam_min:.2e})")
    return Operator(rho, (m.local_dim,) * lat.n_sites)


class MatrixFreeLiouvillian:
    """Applies the Lindblad generator to a dense Hermitian state without a superoperator.

    The Hamiltonian is split into its diagonal and off-diagonal parts. The
    diagonal part and the (diagonal) decay term act elementwise, and the
    site-local jumps act on strided views of the state.
    """

    def __init__(self, m: ModelSpec, lat: SmallLattice):
        self.model = m
        self.lattice = lat
        self.dim = m.local_dim**lat.n_sites
        h, jumps = lattice_operators(m, lat)
        decay = sum((c.conj().T @ c for c in jumps), sp.csr_matrix(h.shape, dtype=complex))
        self.h_eff = (h - 0.5j * decay).tocsr()
        self.jumps = jumps
        diag_h = h.diagonal()
        diag_k = decay.diagonal()
        off_decay = decay - sp.diags(diag_k)
        self._off = (h - sp.diags(diag_h)).tocsr()
        self._off.eliminate_zeros()
        self._elementwise = -1j * (diag_h[:, None] - diag_h[None, :]) - 0.5 * (diag_k[:, None] + diag_k[None, :])
        d, n = m.local_dim, lat.n_sites
        # site-local jumps act on the (left, d, right) x (left, d, right) view of rho
        self._local_jumps = []
        for site in range(n):
            for c in jump_operators(m):
                entries = [(i, k, c.data[i, k]) for i, k in zip(*np.nonzero(c.data))]
                shape = (d**site, d, d ** (n - site - 1))
                self._local_jumps.append((shape * 2, entries))
        self._fast = abs(off_decay).sum() < 1e-14

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if not self._fast:
            return self.apply_sparse(rho)
        a = self._off @ rho
        out = self._elementwise * rho - 1j * (a - a.conj().T)
        for shape, entries in self._local_jumps:
            r6, o6 = rho.reshape(shape), out.reshape(shape)
            for i, k, a in entries:
                for j, l, b in entries:
                    o6[:, i, :, :, j, :] += (a * np.conj(b)) * r6[:, k, :, :, l, :]
        return out

    def apply_sparse(self, rho: np.ndarray) -> np.ndarray:
        """Generic route through sparse products with every operator."""
        a = self.h_eff @ rho
        out = -1j * (a - a.conj().T)
        for c in self.jumps:
            out += c @ (c @ rho).conj().T
        return out


def sparse_liouvillian(m: ModelSpec, lat: SmallLattice) -> sp.csr_matrix:
    """Sparse superoperator on row-major ``rho.ravel()``: ``vec(A rho B) = (A kron B^T) vec(rho)``."""
    h, jumps = lattice_operators(m, lat)
    eye = sp.identity(h.shape[0], format="csr")
    decay = sum((c.conj().T @ c for c in jumps), sp.csr_matrix(h.shape, dtype=complex))
    h_eff = (h - 0.5j * decay).tocsr()
    L = -1j * (sp.kron(h_eff, eye) - sp.kron(eye, h_eff.conj()))
    for c in jumps:
        L = L + sp.kron(c, c.conj())
    return L.tocsr()


class SymmetricSector:
    """Operators invariant under every lattice automorphism.

    A permutation of sites maps ``|a><b|`` to ``|pi(a)><pi(b)|``; the orbits of
    basis pairs span the invariant operators. The generator commutes with the
    automorphisms, so it maps this sector into itself and a symmetric initial
    state (such as the maximally mixed one) never leaves it.
    """

    def __init__(self, m: ModelSpec, lat: SmallLattice):
        d, n = m.local_dim, lat.n_sites
        D = d**n
        self.dim = D
        digits = (np.arange(D)[:, None] // d ** np.arange(n - 1, -1, -1)) % d
        weights = d ** np.arange(n - 1, -1, -1)
        codes = None
        for perm in lat.automorphisms():
            moved = np.zeros_like(digits)
            moved[:, perm] = digits
            image = moved @ weights
            c = (image[:, None] * D + image[None, :]).ravel()
            codes = c if codes is None else np.minimum(codes, c)
        self.reps, self.orbit = np.unique(codes, return_inverse=True)
        self.n_orbits = len(self.reps)
        self.lift_matrix = sp.csr_matrix(
            (np.ones(D * D), (np.arange(D * D), self.orbit)), shape=(D * D, self.n_orbits)
        )
        self.generator = (sparse_liouvillian(m, lat)[self.reps] @ self.lift_matrix).tocsr()
        self.trace_weights = np.bincount(self.orbit[np.arange(D) * (D + 1)], minlength=self.n_orbits)

    def lift(self, x: np.ndarray) -> np.ndarray:
        return (self.lift_matrix @ x).reshape(self.dim, self.dim)

    def project(self, rho: np.ndarray) -> np.ndarray:
        """Orbit coefficients of ``rho``, read off at the orbit representatives."""
        return np.asarray(rho).ravel()[self.reps]

    def contains(self, rho: np.ndarray, tol: float = 1e-10) -> bool:
        return float(np.abs(self.lift(self.project(rho)) - rho).max()) < tol


@dataclass
class EvolutionResult:
    rho: Operator
    residual: float
    converged: bool
    t: float
    site_order: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def order(self) -> float:
        return float(np.mean(self.site_order))

    @property
    def spread(self) -> float:
        return float(np.ptp(self.site_order)) if self.site_order.size else 0.0


def site_occupations(m: ModelSpec, rho: np.ndarray, n_sites: int) -> np.ndarray:
    """Per-site ``n_up`` (spins) or ``<n>`` (bosons) from the diagonal of ``rho``."""
    d = m.local_dim
    weights = np.arange(d, dtype=float) if m.kind == "bh" else np.array([1.0, 0.0])
    diag = np.real(np.diagonal(rho)).reshape((d,) * n_sites)
    out = []
    for s in range(n_sites):
        marginal = diag.sum(axis=tuple(k for k in range(n_sites) if k != s))
        out.append(float(marginal @ weights))
    return np.array(out)


def evolve_steady(
    m: ModelSpec,
    lat: SmallLattice,
    t_max: float = 2000.0,
    tol: float = 1e-6,
    rho0: np.ndarray | None = None,
    chunk: float = 10.0,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    symmetric: bool | None = None,
) -> EvolutionResult:
    """Evolve from the maximally mixed state (or ``rho0``) until ``||rho_dot||_1 < tol``.

    With ``symmetric`` (default: whenever the lattice has nontrivial
    automorphisms and the initial state is invariant) the state is evolved
    in the invariant sector, which is exact and much cheaper; otherwise the
    full density matrix is propagated with the matrix-free generator. The
    residual is always measured with the full generator.
    """
    D = m.local_dim**lat.n_sites
    if D > EVOLVE_MAX_DIM:
        raise DomainError(f"Hilbert dimension {D} exceeds {EVOLVE_MAX_DIM}")
    gen = MatrixFreeLiouvillian(m, lat)
    rho = np.eye(D, dtype=complex) / D if rho0 is None else np.array(rho0, dtype=complex)
    sector = None
    if symmetric is None:
        symmetric = len(lat.automorphisms()) > 1
    if symmetric:
        sector = SymmetricSector(m, lat)
        if not sector.contains(rho):
            raise DomainError("initial state is not invariant under the lattice automorphisms")

    if sector is not None:
        Ls = sector.generator
        y0_of = sector.project
        state_of = sector.lift

        def f(_t, y):
            return Ls @ y

    else:
        y0_of = np.ravel

        def state_of(y):
            return y.reshape(D, D)

        def f(_t, y):
            return gen(y.reshape(D, D)).ravel()

    t = 0.0
    res = trace_norm_array(gen(rho))
    while res >= tol and t < t_max:
        t1 = min(t + chunk, t_max)
        sol = solve_ivp(f, (t, t1), y0_of(rho), method="DOP853", rtol=rtol, atol=atol)
        rho = state_of(sol.y[:, -1])
        rho = 0.5 * (rho + rho.conj().T)
        rho /= np.trace(rho).real
        t = t1
        res = trace_norm_array(gen(rho))
    occ = site_occupations(m, rho, lat.n_sites)
    return EvolutionResult(Operator(rho, (m.local_dim,) * lat.n_sites), float(res), bool(res < tol), t, occ)


def exact_sweep(
    m: ModelSpec,
    lat: SmallLattice,
    axis: str,
    values: Sequence[float],
    t_max: float = 2000.0,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, list[EvolutionResult]]:
    """Steady-state density along a parameter axis; returns ``(order, derivative, results)``.

    Each point starts from the previous steady state; the steady state of a
    finite lattice is unique, so this only shortens the transient.
    """
    values = np.asarray(values, dtype=float)
    results = []
    rho = None
    for v in values:
        r = evolve_steady(m.with_params(**{axis: float(v)}), lat, t_max, tol, rho0=rho)
        results.append(r)
        rho = r.rho.data
    order = np.array([r.order for r in results])
    deriv = np.gradient(order, values) if len(values) > 1 else np.zeros(1)
    return order, deriv, results
