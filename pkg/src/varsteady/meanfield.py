"""Mean-field baseline: attractors of the self-consistent single-site master equation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import sqrtm
from scipy.optimize import root

from .models import ClusterModel, ClusterSpec, ModelSpec
from .operators import Operator, traceless_basis, trace_norm_array
from .optimize import DEFAULT_SEED


class NoFixedPointError(RuntimeError):
    pass


@dataclass
class MfFixedPoint:
    rho: Operator
    residual: float
    basin_count: int

    @property
    def order(self) -> float:
        d = self.rho.dim
        if d == 2:
            return float(np.real(self.rho.data[0, 0]))
        return float(np.real(np.diag(self.rho.data) @ np.arange(d)))


def _site_model(m: ModelSpec) -> ClusterModel:
    return ClusterModel(m, ClusterSpec.single_site(m.z))


def mf_rhs(m: ModelSpec, rho: Operator) -> Operator:
    """Right-hand side of the single-site equation with the site acting as its own environment."""
    cm = _site_model(m)
    return Operator(cm.rhs(rho.data, rho.data))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    sa = sqrtm(a)
    val = np.trace(sqrtm(sa @ b @ sa))
    return float(np.real(val) ** 2)


def initial_states(d: int, n: int, seed: int = DEFAULT_SEED) -> list[np.ndarray]:
    """Basis states, the maximally mixed state, then seeded random states, ``n`` in total."""
    states = []
    for k in range(d):
        s = np.zeros((d, d), dtype=complex)
        s[k, k] = 1
        states.append(s)
    states.append(np.eye(d, dtype=complex) / d)
    rng = np.random.default_rng(seed)
    while len(states) < n:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        s = g @ g.conj().T
        states.append(s / np.trace(s))
    return states[:n]


class _MeanFieldFlow:
    def __init__(self, m: ModelSpec):
        self.cm = _site_model(m)
        self.d = m.local_dim
        self.basis = traceless_basis(self.d)

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        return self.cm.rhs(rho, rho)

    def ode(self, _t, y):
        rho = y.reshape(self.d, self.d)
        return self.rhs(rho).ravel()

    def residual(self, rho: np.ndarray) -> float:
        return trace_norm_array(self.rhs(rho))

    def to_coords(self, rho):
        return np.real(np.einsum("aij,ji->a", self.basis, rho))

    def from_coords(self, x):
        return np.eye(self.d) / self.d + 0.5 * np.tensordot(x, self.basis, 1)

    def polish(self, rho: np.ndarray) -> np.ndarray:
        sol = root(lambda x: self.to_coords(self.rhs(self.from_coords(x))), self.to_coords(rho), method="hybr", tol=1e-14)
        return self.from_coords(sol.x)


def integrate_to_fixed_point(
    m: ModelSpec, rho0: np.ndarray, t_max: float = 200.0, tol: float = 1e-9, chunk: float = 10.0
) -> tuple[np.ndarray, float, bool]:
    """Evolve under the mean-field flow until the residual drops below ``tol``.

    Returns ``(rho, residual, converged)``. A trajectory that has stalled close
    to an attractor by ``t_max`` gets a final Newton polish; the polished state
    is accepted only if it stays on the same attractor.
    """
    flow = _MeanFieldFlow(m)
    y = np.asarray(rho0, dtype=complex).ravel()
    t = 0.0
    rho = y.reshape(flow.d, flow.d)
    res = flow.residual(rho)
    while res >= tol and t < t_max:
        t1 = min(t + chunk, t_max)
        sol = solve_ivp(flow.ode, (t, t1), y, method="RK45", rtol=1e-10, atol=1e-12)
        y = sol.y[:, -1]
        t = t1
        rho = y.reshape(flow.d, flow.d)
        # the flow conserves both; this only removes integrator drift
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
        y = rho.ravel()
        res = flow.residual(rho)
    if res < tol:
        return rho, res, True
    if res < 1e-4:
        cand = flow.polish(rho)
        cand = 0.5 * (cand + cand.conj().T)
        cand = cand / np.trace(cand).real
        cres = flow.residual(cand)
        if cres < tol and np.linalg.eigvalsh(cand)[0] > -1e-10 and fidelity(cand, rho) > 1 - 1e-6:
            return cand, cres, True
    return rho, res, False


def mf_steady_states(
    m: ModelSpec,
    n_inits: int = 16,
    t_max: float = 200.0,
    tol: float = 1e-9,
    seed: int = DEFAULT_SEED,
) -> list[MfFixedPoint]:
    """Distinct attractors reached from ``n_inits`` initial states, sorted by density."""
    if n_inits < 1:
        raise ValueError("n_inits must be >= 1")
    found: list[list] = []
    for rho0 in initial_states(m.local_dim, n_inits, seed):
        rho, res, ok = integrate_to_fixed_point(m, rho0, t_max, tol)
        if not ok:
            continue
        for entry in found:
            if fidelity(entry[0], rho) > 1 - 1e-6:
                entry[2] += 1
                break
        else:
            found.append([rho, res, 1])
    if not found:
        raise NoFixedPointError(f"no mean-field trajectory converged to tol={tol} by t={t_max}")
    points = [MfFixedPoint(Operator(r), float(res), c) for r, res, c in found]
    return sorted(points, key=lambda p: (p.order, -p.basin_count))


def closed_form_two_level(g: float, h: float, gamma: float = 1.0) -> np.ndarray:
    """Steady state of a driven, decaying two-level system, ``H = g/2 sx + h/2 sz``."""
    den = gamma**2 + 4 * h**2 + 2 * g**2
    n_up = g**2 / den
    # coherence rho_{up,down} from the optical Bloch equations
    coh = -g * (2 * h + 1j * gamma) / den
    return np.array([[n_up, coh], [np.conj(coh), 1 - n_up]], dtype=complex)
