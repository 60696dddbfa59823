import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varsteady.correlated import (
    PENALTY_WEIGHT,
    CorrelatedAnsatz,
    CorrelatedProblem,
    CorrelationMatrix,
    CriticalPoint,
    NoTransitionError,
    assemble_pair_state,
    correlated_objective,
    critical_point_scan,
    minimize_correlated,
    three_site_rhs,
)
from varsteady.meanfield import closed_form_two_level
from varsteady.models import SMINUS, SX, SZ, ClusterModel, ClusterSpec, LatticeSpec, ising
from varsteady.operators import DomainError, Operator, partial_trace
from varsteady.optimize import OptimizerOpts
from varsteady.product import ProductAnsatz, minimize_product

I2 = np.eye(2)


def place(ops: dict, n: int, s: np.ndarray) -> np.ndarray:
    """Operator on ``n`` qubits: ``ops`` maps a site or a site pair to its factor, ``s`` fills the rest."""
    order, factors = [], []
    for key, op in ops.items():
        sites = key if isinstance(key, tuple) else (key,)
        order.extend(sites)
        factors.append(op)
    rest = [k for k in range(n) if k not in order]
    order.extend(rest)
    factors.extend([s] * len(rest))
    out = np.ones((1, 1))
    for f in factors:
        out = np.kron(out, f)
    t = out.reshape((2,) * (2 * n))
    perm = np.argsort(order)
    return t.transpose(list(perm) + [n + p for p in perm]).reshape(2**n, 2**n)


def extended_cluster_oracle(g, h, V, s, C, env, cross_products=False):
    """Reduced chain generator from an explicit cluster plus its environment sites.

    Sites 0-1-2 form the chain; every environment neighbor is a real site that
    is correlated with the chain site it touches. All Lindblad terms act on the
    full register and the environment is traced out afterwards.
    """
    n = 3 + sum(env)
    env_bonds = []
    k = 3
    for site, count in enumerate(env):
        for _ in range(count):
            env_bonds.append((site, k))
            k += 1
    rho = place({}, n, s) + place({(0, 1): C}, n, s) + place({(1, 2): C}, n, s)
    for i, l in env_bonds:
        rho = rho + place({(i, l): C}, n, s)
        if cross_products:
            other = (1, 2) if i == 0 else (0, 1) if i == 2 else None
            if other:
                rho = rho + place({(i, l): C, other: C}, n, s)
    H = sum(place({q: g / 2 * SX + h / 2 * SZ}, n, I2) for q in range(n))
    for i, j in [(0, 1), (1, 2), *env_bonds]:
        H = H + place({(i, j): V / 4 * np.kron(SZ, SZ)}, n, I2)
    out = -1j * (H @ rho - rho @ H)
    for q in range(n):
        c = place({q: SMINUS}, n, I2)
        cdc = c.T @ c
        out += c @ rho @ c.T - 0.5 * (cdc @ rho + rho @ cdc)
    return partial_trace(Operator(out, (2,) * n), {0, 1, 2}).data


def random_feasible(rng, scale=0.05):
    r = rng.normal(size=3)
    r *= 0.8 * rng.uniform() / np.linalg.norm(r)
    return np.concatenate([r, scale * rng.normal(size=9)])


def test_pair_state_example():
    c = np.zeros((3, 3))
    c[2, 2] = 0.5  # 1/8 sz(x)sz after the 1/4 normalization
    a = CorrelatedAnsatz(ProductAnsatz.spin([0, 0, 0]), CorrelationMatrix(c))
    pair = assemble_pair_state(a).data
    assert np.allclose(a.corr.matrix(), np.kron(SZ, SZ) / 8)
    assert np.linalg.eigvalsh(pair)[0] >= 0
    zz = np.trace(pair @ np.kron(SZ, SZ)).real
    z1 = np.trace(pair @ np.kron(SZ, I2)).real
    assert np.isclose(zz - z1**2, 0.5)
    zero = CorrelatedAnsatz(ProductAnsatz.spin([0.1, 0.2, 0.3]), CorrelationMatrix.zero())
    s = zero.site.rho()
    assert np.allclose(assemble_pair_state(zero).data, np.kron(s, s))


@pytest.mark.properties
@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_correlations_are_doubly_traceless_and_keep_marginals(seed):
    rng = np.random.default_rng(seed)
    x = random_feasible(rng, 1.0)
    corr = CorrelationMatrix(x[3:].reshape(3, 3))
    C = corr.operator()
    assert np.max(np.abs(partial_trace(C, {0}).data)) < 1e-12
    assert np.max(np.abs(partial_trace(C, {1}).data)) < 1e-12
    assert C.hermitian_defect() < 1e-12
    pair = assemble_pair_state(CorrelatedAnsatz(ProductAnsatz.spin(x[:3]), corr))
    s = ProductAnsatz.spin(x[:3]).rho()
    assert np.max(np.abs(partial_trace(pair, {0}).data - s)) < 1e-12
    assert np.max(np.abs(partial_trace(pair, {1}).data - s)) < 1e-12


def test_coefficients_are_connected_correlators(rng):
    x = random_feasible(rng, 0.3)
    pair = CorrelatedProblem(ising()).pair_state(x)
    s = ProductAnsatz.spin(x[:3]).rho()
    lam = [SX, np.array([[0, -1j], [1j, 0]]), SZ]
    for a in range(3):
        for b in range(3):
            conn = np.trace(pair @ np.kron(lam[a], lam[b])) - np.trace(s @ lam[a]) * np.trace(s @ lam[b])
            assert np.isclose(conn.real, x[3 + 3 * a + b])


@pytest.mark.parametrize("z", [2, 3])
@pytest.mark.parametrize("cross", [False, True])
def test_matches_explicit_environment_oracle(z, cross, rng):
    g, h, V = 1.7, -0.4, 3.0
    m = ising(g, h, V, lattice=LatticeSpec(z))
    prob = CorrelatedProblem(m, cross_products=cross)
    x = random_feasible(rng, 0.2)
    c = x[3:].reshape(3, 3)
    # symmetric coefficients make the orientation of environment bonds irrelevant
    x[3:] = (0.5 * (c + c.T)).ravel()
    s, C = spin_state(x), prob.corr_matrix(x[3:].reshape(3, 3))
    ref = extended_cluster_oracle(g, h, V, s, C, (z - 1, z - 2, z - 1), cross)
    assert np.max(np.abs(prob.rhs(x) - ref)) < 1e-12


def spin_state(x):
    return ProductAnsatz.spin(x[:3]).rho()


@given(st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=25, deadline=None)
def test_fast_and_reference_paths_agree(seed, cross):
    rng = np.random.default_rng(seed)
    m = ising(*rng.uniform(-4, 4, size=3))
    prob = CorrelatedProblem(m, cross_products=cross)
    x = random_feasible(rng, 0.3)
    fast, ref = prob.rhs(x), prob.rhs_direct(x)
    assert np.max(np.abs(fast - ref)) < 1e-12
    assert abs(np.trace(fast)) < 1e-12
    assert np.max(np.abs(fast - fast.conj().T)) < 1e-12


def test_uncorrelated_ansatz_is_product_cluster(rng):
    m = ising(1.3, 0.2, 5)
    x = np.concatenate([random_feasible(rng)[:3], np.zeros(9)])
    s = spin_state(x)
    cm = ClusterModel(m, ClusterSpec.open_chain(3, 4))
    ref = cm.rhs(np.kron(np.kron(s, s), s), s)
    assert np.max(np.abs(CorrelatedProblem(m).rhs(x) - ref)) < 1e-12


def test_exact_cases_vanish():
    zero = CorrelationMatrix.zero()
    dark = CorrelatedAnsatz(ProductAnsatz.spin([0, 0, -1]), zero)
    assert np.max(np.abs(three_site_rhs(ising(g=0, V=5), dark).data)) < 1e-8
    for g, h in ((1, 0), (2, -1)):
        a = CorrelatedAnsatz(ProductAnsatz.from_rho(closed_form_two_level(g, h)), zero)
        assert np.max(np.abs(three_site_rhs(ising(g=g, h=h, V=0), a).data)) < 1e-10


def test_objective_is_eigenvalue_sum(rng):
    m = ising(2, 0, 5)
    x = random_feasible(rng, 0.05)
    prob = CorrelatedProblem(m)
    assert prob.penalty(x) == 0
    a = CorrelatedAnsatz(ProductAnsatz.spin(x[:3]), CorrelationMatrix(x[3:].reshape(3, 3)))
    ref = np.abs(np.linalg.eigvalsh(prob.rhs_direct(x))).sum()
    assert np.isclose(correlated_objective(m, a), ref, rtol=1e-12)


def test_penalty_example():
    # sigma = I/2 and C = -1.4 sz(x)sz / 4 give a pair eigenvalue 1/4 - 0.35 = -0.1
    x = np.zeros(12)
    x[3 + 8] = -1.4
    prob = CorrelatedProblem(ising(g=1, V=5))
    lam = np.linalg.eigvalsh(prob.pair_state(x))[0]
    assert np.isclose(lam, -0.1)
    assert np.isclose(prob.penalty(x), PENALTY_WEIGHT * 0.01)
    assert prob(x) > 1e4


def test_bent_and_straight_clusters_agree(rng):
    m = ising(1.1, 0.3, 4)
    bent = ClusterSpec.from_square_lattice([(0, 0), (1, 0), (1, 1)])
    straight = ClusterSpec.from_square_lattice([(0, 0), (1, 0), (2, 0)])
    x = random_feasible(rng, 0.2)
    a, b = CorrelatedProblem(m, bent), CorrelatedProblem(m, straight)
    assert np.max(np.abs(a.rhs(x) - b.rhs(x))) < 1e-14
    assert np.max(np.abs(a.rhs_direct(x) - b.rhs_direct(x))) < 1e-14


def test_rejects_boson_models():
    from varsteady.models import bose_hubbard

    with pytest.raises(DomainError):
        CorrelatedProblem(bose_hubbard())


def test_zero_drive_minimum_is_dark():
    res = minimize_correlated(ising(g=0, V=5), OptimizerOpts(restarts=1))
    assert res.norm < 1e-8 and res.order < 1e-8
    assert abs(res.observables["zz_connected"]) < 1e-6


def test_correlated_minimum_beats_uncorrelated_product_point():
    m = ising(g=3, V=5)
    prod = minimize_product(m, OptimizerOpts(restarts=2))
    x0 = np.concatenate([prod.params, np.zeros(9)])
    res = minimize_correlated(m, OptimizerOpts(restarts=1))
    assert CorrelatedProblem(m)(x0) >= res.norm - 1e-9
    assert res.observables["lambda_min_pair"] > -1e-4


def _injected(V_c, g_c):
    """Sweeper whose jump line ends at ``V_c``; the jump shrinks linearly to zero there."""

    def run(m, g_grid):
        size = 0.3 if m.params.V >= V_c else 0.0
        return 0.2 * g_grid / g_grid[-1] + size * (g_grid > g_c)

    return run


def test_scan_recovers_injected_endpoint():
    g = np.linspace(1, 4, 31)
    cp = critical_point_scan(ising(), g, [0.5, 1.0, 1.5, 2.0, 2.5], sweeper=_injected(1.37, 2.3))
    assert isinstance(cp, CriticalPoint)
    assert abs(cp.V - 1.37) <= 0.02
    assert abs(cp.g - 2.3) <= g[1] - g[0]


def test_scan_without_line_raises():
    with pytest.raises(NoTransitionError):
        critical_point_scan(ising(), np.linspace(0, 3, 31), [0.1, 0.5], sweeper=_injected(5.0, 2.0))


def test_scan_validates_inputs():
    with pytest.raises(DomainError):
        critical_point_scan(ising(h=1), [1, 2], [1, 2])
    with pytest.raises(DomainError):
        critical_point_scan(ising(), [2, 1], [1, 2])
    with pytest.raises(DomainError):
        critical_point_scan(ising(), [1, 2], [])


def test_weak_interaction_has_no_first_order_line():
    g = np.linspace(0, 4, 11)
    with pytest.raises(NoTransitionError):
        critical_point_scan(ising(), g, [0.5, 0.9])
