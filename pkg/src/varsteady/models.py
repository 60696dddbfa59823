"""Lattice models: dissipative Ising and driven-dissipative Bose-Hubbard.

Energies are dimensionless. Ising runs measure everything in units of the
decay rate (``gamma = 1``), Bose-Hubbard runs in units of the chemical
potential (``mu = 1``).

Spin basis ordering is ``(up, down)`` so that ``sigma_z = diag(1, -1)`` and the
decay operator ``sigma_minus = |down><up|``. Boson basis is the Fock basis
``0..n_max``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .operators import DomainError, Operator, embed, embed_pair, kron_arrays

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SMINUS = np.array([[0, 0], [1, 0]], dtype=complex)
PAULI = np.array([SX, SY, SZ])

SPIN_UP = np.array([[1, 0], [0, 0]], dtype=complex)
SPIN_DOWN = np.array([[0, 0], [0, 1]], dtype=complex)


def annihilator(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)


@dataclass(frozen=True)
class LatticeSpec:
    z: int
    geometry: str = "custom"

    def __post_init__(self):
        if self.z < 1:
            raise DomainError(f"coordination number must be positive, got {self.z}")
        expected = {"chain": 2, "square": 4}.get(self.geometry)
        if expected is not None and self.z != expected:
            raise DomainError(f"{self.geometry} lattice has z={expected}, got z={self.z}")
        if self.geometry not in ("chain", "square", "custom"):
            raise DomainError(f"unknown geometry {self.geometry!r}")

    @classmethod
    def chain(cls) -> "LatticeSpec":
        return cls(2, "chain")

    @classmethod
    def square(cls) -> "LatticeSpec":
        return cls(4, "square")

    @classmethod
    def parse(cls, text: str) -> "LatticeSpec":
        text = text.strip()
        if text in ("chain", "square"):
            return cls(2 if text == "chain" else 4, text)
        if text.startswith("z="):
            return cls(int(text[2:]), "custom")
        raise DomainError(f"cannot parse lattice {text!r}; use chain, square or z=<int>")


@dataclass(frozen=True)
class IsingParams:
    g: float = 0.0
    h: float = 0.0
    V: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")


@dataclass(frozen=True)
class RydbergParams:
    Omega: float
    Delta: float
    C6: float
    a: float
    z: int


@dataclass(frozen=True)
class BoseHubbardParams:
    J: float = 0.0
    U: float = 0.0
    mu: float = 1.0
    F: float = 0.0
    gamma: float = 0.2
    n_max: int = 5

    def __post_init__(self):
        if self.n_max < 2:
            raise DomainError("n_max must be at least 2")
        if self.gamma <= 0:
            raise DomainError("gamma must be positive")


Params = Union[IsingParams, BoseHubbardParams]


@dataclass(frozen=True)
class ModelSpec:
    params: Params
    lattice: LatticeSpec = field(default_factory=LatticeSpec.square)

    @property
    def kind(self) -> str:
        return "ising" if isinstance(self.params, IsingParams) else "bh"

    @property
    def local_dim(self) -> int:
        if isinstance(self.params, IsingParams):
            return 2
        return self.params.n_max + 1

    @property
    def z(self) -> int:
        return self.lattice.z

    def with_params(self, **changes) -> "ModelSpec":
        from dataclasses import replace

        return ModelSpec(replace(self.params, **changes), self.lattice)

    def with_lattice(self, lattice: LatticeSpec) -> "ModelSpec":
        return ModelSpec(self.params, lattice)


def ising(g=0.0, h=0.0, V=0.0, gamma=1.0, lattice: LatticeSpec | None = None) -> ModelSpec:
    return ModelSpec(IsingParams(g, h, V, gamma), lattice or LatticeSpec.square())


def bose_hubbard(J=0.0, U=0.0, F=0.0, gamma=0.2, mu=1.0, n_max=5, lattice=None) -> ModelSpec:
    return ModelSpec(BoseHubbardParams(J, U, mu, F, gamma, n_max), lattice or LatticeSpec.square())


@dataclass(frozen=True)
class ClusterSpec:
    """Sites of a finite cluster, its internal bonds, and how many neighbors each site
    has outside the cluster (treated at mean-field level)."""

    n_sites: int
    bonds: tuple[tuple[int, int], ...]
    env_fields: tuple[int, ...]

    def __post_init__(self):
        if len(self.env_fields) != self.n_sites:
            raise DomainError("env_fields needs one entry per site")
        for i, j in self.bonds:
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites) or i == j:
                raise DomainError(f"invalid bond {(i, j)}")

    def degree(self, site: int) -> int:
        return sum(site in b for b in self.bonds)

    def check_embedding(self, z: int) -> None:
        for s in range(self.n_sites):
            if self.degree(s) + self.env_fields[s] != z:
                raise DomainError(f"site {s}: bonds + env_fields != z={z}")

    @classmethod
    def single_site(cls, z: int) -> "ClusterSpec":
        return cls(1, (), (z,))

    @classmethod
    def open_chain(cls, n: int, z: int) -> "ClusterSpec":
        bonds = tuple((i, i + 1) for i in range(n - 1))
        env = tuple(z - (1 if i in (0, n - 1) else 2) if n > 1 else z for i in range(n))
        return cls(n, bonds, env)

    @classmethod
    def from_square_lattice(cls, coords: Sequence[tuple[int, int]]) -> "ClusterSpec":
        """Cluster made of the given square-lattice sites; bonds are nearest-neighbor pairs."""
        coords = [tuple(c) for c in coords]
        index = {c: k for k, c in enumerate(coords)}
        bonds = []
        env = []
        for k, (x, y) in enumerate(coords):
            outside = 0
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nb in index:
                    if index[nb] > k:
                        bonds.append((k, index[nb]))
                else:
                    outside += 1
            env.append(outside)
        return cls(len(coords), tuple(bonds), tuple(env))


def rydberg_to_ising(r: RydbergParams, gamma: float = 1.0) -> IsingParams:
    """Map laser/van-der-Waals parameters onto the Ising couplings."""
    if r.a <= 0:
        raise DomainError("lattice spacing must be positive")
    V = r.C6 / r.a**6
    return IsingParams(g=r.Omega, h=r.Delta + r.z * V / 2, V=V, gamma=gamma)


def local_hamiltonian(m: ModelSpec) -> Operator:
    p = m.params
    if isinstance(p, IsingParams):
        return Operator(0.5 * p.g * SX + 0.5 * p.h * SZ)
    b = annihilator(p.n_max)
    n = b.conj().T @ b
    return Operator(0.5 * p.U * n @ n - p.mu * n + p.F * (b + b.conj().T))


def bond_terms(m: ModelSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Operator pairs ``(A, B)`` with bond Hamiltonian ``sum_k A_k (x) B_k``.

    Both models are symmetric under exchanging the two sites of a bond, so the
    same list serves either orientation.
    """
    p = m.params
    if isinstance(p, IsingParams):
        return [(0.25 * p.V * SZ, SZ)]
    b = annihilator(p.n_max)
    return [(-p.J * b.conj().T, b), (-p.J * b, b.conj().T)]


def bond_hamiltonian(m: ModelSpec) -> Operator:
    d = m.local_dim
    data = sum(kron_arrays(a, b) for a, b in bond_terms(m))
    return Operator(data, (d, d))


def jump_operators(m: ModelSpec) -> list[Operator]:
    p = m.params
    if isinstance(p, IsingParams):
        return [Operator(np.sqrt(p.gamma) * SMINUS)]
    return [Operator(np.sqrt(p.gamma) * annihilator(p.n_max))]


def lindblad_rhs(h: np.ndarray, jumps: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Array version of the Lindblad generator."""
    out = -1j * (h @ rho - rho @ h)
    for c in jumps:
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def lindblad_apply(h: Operator, jumps: Sequence[Operator], rho: Operator) -> Operator:
    for o in [h, *jumps]:
        if o.dim != rho.dim:
            raise DomainError(f"dimension mismatch: {o.dim} vs {rho.dim}")
    return Operator(lindblad_rhs(h.data, [c.data for c in jumps], rho.data), rho.site_dims)


def mean_field_shift(m: ModelSpec, env_state: np.ndarray) -> np.ndarray:
    """Single-site Hamiltonian felt from ONE neighbor in state ``env_state``."""
    return sum(a * np.trace(b @ env_state) for a, b in bond_terms(m))


class ClusterModel:
    """Precomputed cluster operators for repeated generator evaluations.

    The environment-independent Hamiltonian and the effective non-Hermitian
    part are assembled once; :meth:`rhs` adds the mean-field shift for the
    current single-site state and applies the generator.
    """

    def __init__(self, m: ModelSpec, cluster: ClusterSpec):
        self.model = m
        self.cluster = cluster
        d = m.local_dim
        self.site_dims = (d,) * cluster.n_sites
        self.dim = d**cluster.n_sites
        dims = self.site_dims
        hloc = local_hamiltonian(m).data
        hb = bond_hamiltonian(m).data
        h = sum(embed(hloc, s, dims) for s in range(cluster.n_sites))
        for i, j in cluster.bonds:
            h = h + embed_pair(hb, i, j, dims)
        self.h_fixed = np.asarray(h, dtype=complex)
        self.jumps = [embed(c.data, s, dims) for s in range(cluster.n_sites) for c in jump_operators(m)]
        self.jumps_dag = [c.conj().T for c in self.jumps]
        self.decay = sum(cd @ c for c, cd in zip(self.jumps, self.jumps_dag))
        # env-weighted embedded A_k for the mean-field shift
        self.shift_terms = [
            (sum(cluster.env_fields[s] * embed(a, s, dims) for s in range(cluster.n_sites)), b)
            for a, b in bond_terms(m)
        ]

    def hamiltonian(self, env_state: np.ndarray | None) -> np.ndarray:
        h = self.h_fixed
        if env_state is not None and any(self.cluster.env_fields):
            for a_sum, b in self.shift_terms:
                h = h + np.trace(b @ env_state) * a_sum
        return h

    def rhs(self, rho: np.ndarray, env_state: np.ndarray | None) -> np.ndarray:
        h_eff = self.hamiltonian(env_state) - 0.5j * self.decay
        out = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
        for c, cd in zip(self.jumps, self.jumps_dag):
            out += c @ rho @ cd
        return out


def cluster_generator(
    m: ModelSpec, c: ClusterSpec, env_site_state: Operator
) -> Callable[[Operator], Operator]:
    """Return ``rho_cluster -> d rho_cluster / dt`` with a mean-field environment."""
    d = m.local_dim
    if env_site_state.dim != d:
        raise DomainError(f"environment state must be {d}x{d}")
    cm = ClusterModel(m, c)
    env = env_site_state.data

    def apply(rho: Operator) -> Operator:
        if rho.dim != cm.dim:
            raise DomainError(f"cluster state must have dim {cm.dim}, got {rho.dim}")
        return Operator(cm.rhs(rho.data, env), cm.site_dims)

    return apply


def occupation(m: ModelSpec, rho: np.ndarray) -> float:
    """Up-spin density n_up (Ising) or boson density <n> (Bose-Hubbard) of a site state."""
    if m.kind == "ising":
        return float(np.real(rho[0, 0]))
    n = np.arange(m.local_dim)
    return float(np.real(np.diag(rho) @ n))
