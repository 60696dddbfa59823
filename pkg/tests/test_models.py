import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_state
from varsteady.meanfield import mf_rhs
from varsteady.models import (
    SMINUS,
    SPIN_DOWN,
    SPIN_UP,
    SX,
    SZ,
    ClusterModel,
    ClusterSpec,
    LatticeSpec,
    RydbergParams,
    annihilator,
    bond_hamiltonian,
    bose_hubbard,
    cluster_generator,
    ising,
    jump_operators,
    lindblad_apply,
    local_hamiltonian,
    rydberg_to_ising,
)
from varsteady.operators import DomainError, Operator

I2 = np.eye(2)


@pytest.mark.parametrize(
    "r, expected",
    [
        (RydbergParams(1, 0, 0, 1, 4), (1, 0, 0)),
        (RydbergParams(2, -10, 5, 1, 4), (2, 0, 5)),
        (RydbergParams(0, 3, 64, 2, 2), (0, 4, 1)),
    ],
)
def test_rydberg_mapping(r, expected):
    p = rydberg_to_ising(r)
    assert np.allclose((p.g, p.h, p.V), expected)


def test_rydberg_rejects_nonpositive_spacing():
    with pytest.raises(DomainError):
        rydberg_to_ising(RydbergParams(1, 0, 1, 0, 4))


def test_local_hamiltonian_examples():
    assert np.allclose(local_hamiltonian(ising(h=2)).data, SZ)
    assert np.allclose(local_hamiltonian(ising(g=2)).data, SX)
    bh = local_hamiltonian(bose_hubbard(U=2, mu=1, F=0, n_max=2)).data
    assert np.allclose(bh, np.diag([0, 0, 2]))


def test_bond_hamiltonian_examples():
    assert np.allclose(bond_hamiltonian(ising(V=4)).data, np.kron(SZ, SZ))
    assert np.allclose(bond_hamiltonian(ising(V=0)).data, 0)
    b = np.array([[0, 1], [0, 0]])
    # n_max = 1 is below the model's cutoff floor, so build it from n_max = 2 restricted
    full = bond_hamiltonian(bose_hubbard(J=1, n_max=2)).data.reshape(3, 3, 3, 3)[:2, :2, :2, :2].reshape(4, 4)
    assert np.allclose(full, -(np.kron(b.T, b) + np.kron(b, b.T)))


def test_jump_operators():
    assert np.allclose(jump_operators(ising(gamma=1))[0].data, SMINUS)
    assert np.allclose(jump_operators(ising(gamma=4))[0].data, 2 * SMINUS)
    c = jump_operators(bose_hubbard(gamma=1, n_max=2))[0].data
    assert np.allclose(c, [[0, 1, 0], [0, 0, np.sqrt(2)], [0, 0, 0]])


def test_two_site_ising_hamiltonian_brute_force():
    g, h, V = 1.3, -0.7, 2.1
    cm = ClusterModel(ising(g, h, V), ClusterSpec(2, ((0, 1),), (0, 0)))
    brute = (
        g / 2 * (np.kron(SX, I2) + np.kron(I2, SX))
        + h / 2 * (np.kron(SZ, I2) + np.kron(I2, SZ))
        + V / 4 * np.kron(SZ, SZ)
    )
    assert np.allclose(cm.hamiltonian(None), brute)


def test_lindblad_examples():
    zero, sm = Operator(np.zeros((2, 2))), Operator(SMINUS)
    assert np.allclose(lindblad_apply(zero, [sm], Operator(SPIN_UP)).data, SPIN_DOWN - SPIN_UP)
    assert np.allclose(lindblad_apply(zero, [sm], Operator(SPIN_DOWN)).data, 0)
    with pytest.raises(DomainError):
        lindblad_apply(Operator(np.zeros((4, 4))), [sm], Operator(SPIN_UP))


@pytest.mark.properties
@given(st.integers(0, 2**32 - 1), st.sampled_from(["ising", "bh"]), st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_cluster_generator_preserves_trace_and_hermiticity(seed, kind, n):
    rng = np.random.default_rng(seed)
    if kind == "ising":
        m = ising(*rng.uniform(-3, 3, size=3))
    else:
        m = bose_hubbard(J=rng.uniform(0, 1), U=rng.uniform(0, 2), F=rng.uniform(0, 1), n_max=2)
    if m.local_dim**n > 27:
        n = 2
    d = m.local_dim
    spec = ClusterSpec.open_chain(n, m.z)
    gen = cluster_generator(m, spec, Operator(random_state(rng, d)))
    out = gen(Operator(random_state(rng, d**n), (d,) * n)).data
    assert abs(np.trace(out)) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12


def test_one_site_cluster_matches_mean_field_rhs(rng):
    for m in (ising(1.2, 0.3, 5), bose_hubbard(J=0.1, U=1, F=0.4, n_max=3)):
        sigma = Operator(random_state(rng, m.local_dim))
        gen = cluster_generator(m, ClusterSpec.single_site(m.z), sigma)
        assert np.max(np.abs(gen(sigma).data - mf_rhs(m, sigma).data)) < 1e-14


def test_uncoupled_pair_generator_factorizes(rng):
    m = ising(g=1.1, h=0.4, V=0)
    a, b = random_state(rng, 2), random_state(rng, 2)
    pair = cluster_generator(m, ClusterSpec(2, ((0, 1),), (0, 0)), Operator(a))
    single = cluster_generator(m, ClusterSpec(1, (), (0,)), Operator(a))
    expected = np.kron(single(Operator(a)).data, b) + np.kron(a, single(Operator(b)).data)
    assert np.allclose(pair(Operator(np.kron(a, b), (2, 2))).data, expected, atol=1e-14)


def test_mixed_environment_has_no_shift(rng):
    m = ising(g=1, h=0, V=5, lattice=LatticeSpec.chain())
    rho = Operator(random_state(rng, 4), (2, 2))
    with_env = cluster_generator(m, ClusterSpec.open_chain(2, 2), Operator(I2 / 2))(rho)
    bare = cluster_generator(m, ClusterSpec(2, ((0, 1),), (0, 0)), Operator(I2 / 2))(rho)
    assert np.allclose(with_env.data, bare.data, atol=1e-14)


def test_lattice_and_param_validation():
    assert LatticeSpec.parse("chain").z == 2
    assert LatticeSpec.parse("square").z == 4
    assert LatticeSpec.parse("z=200").z == 200
    for bad in ("hex", "z=0"):
        with pytest.raises(DomainError):
            LatticeSpec.parse(bad)
    with pytest.raises(DomainError):
        LatticeSpec(3, "square")
    with pytest.raises(DomainError):
        ising(gamma=0)
    with pytest.raises(DomainError):
        bose_hubbard(n_max=1)
    assert bose_hubbard(n_max=5).local_dim == 6
    assert ising().local_dim == 2


def test_cluster_embedding_checks():
    ClusterSpec.open_chain(3, 4).check_embedding(4)
    with pytest.raises(DomainError):
        ClusterSpec(2, ((0, 1),), (1, 1)).check_embedding(4)
    with pytest.raises(DomainError):
        ClusterSpec(2, ((0, 0),), (3, 3))
    with pytest.raises(DomainError):
        ClusterSpec(2, ((0, 1),), (3,))


def test_bent_square_cluster_has_chain_structure():
    bent = ClusterSpec.from_square_lattice([(0, 0), (1, 0), (1, 1)])
    assert bent == ClusterSpec.open_chain(3, 4)
    bent.check_embedding(4)


def test_annihilator():
    b = annihilator(3)
    assert np.allclose(np.diag(b.conj().T @ b), [0, 1, 2, 3])
