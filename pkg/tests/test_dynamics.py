"""Unitary propagation, Lindblad dephasing and the fault-injection hook."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import spinlab as sl
from spinlab.dynamics import dephasing_kernel, fault_injection


def _two_site_xx(coupling=1.0):
    basis = sl.FullBasis(n_sites=2, spin=sl.Spin(1))
    ops = sl.spin_matrices(sl.Spin(1))
    h = np.zeros((4, 4), dtype=complex)
    for component in ("sx", "sy"):
        site = getattr(ops, component)
        h += sl.embed_site(site, 1, basis).matrix @ sl.embed_site(site, 2, basis).matrix
    return sl.Operator(matrix=coupling * h, basis=basis, hermitian=True), basis


def _single_site(gamma=0.0):
    basis = sl.FullBasis(n_sites=1, spin=sl.Spin(1))
    ham = sl.Operator(matrix=np.zeros((2, 2)), basis=basis, hermitian=True)
    return ham, basis


def test_quantum_state_validation():
    basis = sl.FullBasis(n_sites=1, spin=sl.Spin(1))
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.array([1.0, 0.0, 0.0]), basis=basis)
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.array([1.0, 1.0]), basis=basis)
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.array([[0.5, 0.5j], [0.5j, 0.5]]), basis=basis)
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.diag([0.7, 0.7]), basis=basis)
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.diag([1.2, -0.2]), basis=basis)
    with pytest.raises(ValueError):
        sl.QuantumState(data=np.zeros((2, 2, 2)), basis=basis)
    psi = sl.QuantumState(data=np.array([1.0, 0.0]), basis=basis)
    assert psi.kind == "pure" and psi.dim == 2
    rho = psi.to_density()
    assert rho.kind == "density"
    assert_allclose(rho.data, np.diag([1.0, 0.0]))
    assert rho.to_density() is rho


def test_trajectory_validation():
    basis = sl.FullBasis(n_sites=1, spin=sl.Spin(1))
    with pytest.raises(ValueError):
        sl.Trajectory(times=np.array([0.0, 1.0, 1.0]), basis=basis)
    with pytest.raises(ValueError):
        sl.Trajectory(times=np.array([]), basis=basis)
    with pytest.raises(ValueError):
        sl.Trajectory(times=np.array([0.0, 1.0]), basis=basis, states=np.zeros((3, 2)))
    traj = sl.Trajectory(times=np.array([0.0, 1.0]), basis=basis)
    assert traj.n_times == 2


def test_two_site_rabi_transfer():
    ham, basis = _two_site_xx()
    psi0 = sl.QuantumState(data=np.eye(4)[1], basis=basis)  # excitation on site 1
    times = np.linspace(0.0, 4.0 * np.pi, 257)
    traj = sl.evolve_unitary(ham, psi0, times)
    transferred = np.abs(traj.states[:, 2]) ** 2
    assert_allclose(transferred, np.sin(times / 2.0) ** 2, atol=1e-8)
    assert_allclose(traj.states[0], psi0.data, atol=1e-12)  # t = 0 exact
    at_pi = sl.evolve_unitary(ham, psi0, np.array([0.0, np.pi])).states[-1]
    assert_allclose(np.abs(at_pi[2]) ** 2, 1.0, atol=1e-10)  # full swap


def test_unitary_norm_preserved_long_time():
    spec = sl.ChainSpec(N=7, protocol="P1", spin="1/2", Delta=10.0)
    traj = sl.evolve_unitary(
        sl.sector_hamiltonian(spec), sl.initial_state(spec), np.array([0.0, 100.0])
    )
    norms = np.linalg.norm(traj.states, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-10


def test_propagator_refusals():
    basis = sl.FullBasis(n_sites=1, spin=sl.Spin(1))
    lowering = sl.Operator(matrix=np.array([[0.0, 0.0], [1.0, 0.0]]), basis=basis)
    with pytest.raises(ValueError):
        sl.UnitaryPropagator.from_hamiltonian(lowering)
    big = sl.build_hamiltonian(sl.ChainSpec(N=7, protocol="P2", spin="3/2"))
    assert big.dim == 16384
    with pytest.raises(ValueError):
        sl.UnitaryPropagator.from_hamiltonian(big)


def test_evolve_input_checks():
    ham, basis = _two_site_xx()
    prop = sl.UnitaryPropagator.from_hamiltonian(ham)
    rho = sl.QuantumState(data=np.eye(4) / 4.0, basis=basis)
    with pytest.raises(ValueError):
        prop.evolve(rho, np.array([0.0, 1.0]))
    other = sl.QuantumState(
        data=np.array([1.0, 0.0]), basis=sl.FullBasis(n_sites=1, spin=sl.Spin(1))
    )
    with pytest.raises(ValueError):
        prop.evolve(other, np.array([0.0, 1.0]))


def test_state_at_matches_grid_evolution():
    ham, basis = _two_site_xx(coupling=0.7)
    psi0 = sl.QuantumState(data=np.eye(4)[1], basis=basis)
    prop = sl.UnitaryPropagator.from_hamiltonian(ham)
    times = np.linspace(0.0, 5.0, 11)
    traj = prop.evolve(psi0, times)
    for k in (0, 4, 10):
        assert_allclose(prop.state_at(psi0, times[k]), traj.states[k], atol=1e-12)


def test_dephasing_kernel_single_qubit():
    _, basis = _single_site()
    kernel = dephasing_kernel(basis, gamma=0.8)
    assert_allclose(kernel, [[0.0, -0.4], [-0.4, 0.0]], atol=1e-15)


def test_dephasing_kernel_site_subset():
    _, _ = _single_site()
    basis = sl.FullBasis(n_sites=2, spin=sl.Spin(1))
    kernel = dephasing_kernel(basis, gamma=2.0, dephasing_sites=(2,))
    # states ordered (o1, o2) = 00, 01, 10, 11; only site 2 dephases
    assert kernel[0, 1] == pytest.approx(-1.0)
    assert kernel[0, 2] == pytest.approx(0.0)
    assert kernel[1, 3] == pytest.approx(0.0)
    assert_allclose(np.diag(kernel), 0.0, atol=1e-15)
    assert_allclose(kernel, kernel.T, atol=1e-15)


def test_dephasing_kernel_validation():
    _, basis = _single_site()
    with pytest.raises(ValueError):
        dephasing_kernel(basis, gamma=-0.1)
    with pytest.raises(ValueError):
        dephasing_kernel(basis, gamma=1.0, dephasing_sites=())
    with pytest.raises(ValueError):
        dephasing_kernel(basis, gamma=1.0, dephasing_sites=(2,))


def test_lindblad_rhs_properties():
    spec = sl.ChainSpec(N=7, protocol="P1", spin="1/2", Delta=10.0)
    ham = sl.sector_hamiltonian(spec)
    dim = ham.dim
    # maximally mixed state is stationary at gamma = 0
    assert np.max(np.abs(sl.lindblad_rhs(ham, np.eye(dim) / dim, 0.0))) < 1e-14
    # rhs is traceless for a generic density matrix
    rng = np.random.default_rng(5)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    out = sl.lindblad_rhs(ham, rho, 0.7)
    assert abs(np.trace(out)) < 1e-12
    assert_allclose(out, out.conj().T, atol=1e-12)
    # diagonal states are untouched by the dissipator
    diag = np.diag(rng.random(dim))
    diag = diag / np.trace(diag)
    assert np.array_equal(sl.lindblad_rhs(ham, diag, 4.0), sl.lindblad_rhs(ham, diag, 0.0))


def test_single_qubit_coherence_decay():
    ham, basis = _single_site()
    plus = sl.QuantumState(data=np.full((2, 2), 0.5), basis=basis)
    gamma = 0.3
    times = np.linspace(0.0, 10.0, 21)
    traj = sl.evolve_lindblad(ham, plus, gamma, times)
    coherence = traj.states[:, 0, 1].real
    assert_allclose(coherence, 0.5 * np.exp(-0.5 * gamma * times), atol=1e-6)
    assert_allclose(traj.states[:, 0, 0].real, 0.5, atol=1e-8)  # populations frozen


def test_lindblad_matches_unitary_at_zero_gamma():
    spec = sl.ChainSpec(N=7, protocol="P2", spin="1/2", Delta=10.0, boundary_field=3.7)
    ham = sl.sector_hamiltonian(spec)
    psi0 = sl.initial_state(spec)
    times = np.linspace(0.0, 8.0, 17)
    pure = sl.evolve_unitary(ham, psi0, times).states
    projectors = np.einsum("ti,tj->tij", pure, pure.conj())
    mixed = sl.evolve_lindblad(ham, psi0, 0.0, times).states
    assert np.max(np.abs(mixed - projectors)) < 1e-6


def test_lindblad_refuses_large_dimension():
    spec = sl.ChainSpec(N=7, protocol="P2", spin=1)
    ham = sl.build_hamiltonian(spec)  # dim 2187
    vec = np.zeros(ham.dim)
    vec[0] = 1.0
    state = sl.QuantumState(data=vec, basis=ham.basis)
    with pytest.raises(ValueError):
        sl.evolve_lindblad(ham, state, 0.1, np.array([0.0, 1.0]))


def test_lindblad_input_checks():
    ham, basis = _single_site()
    psi = sl.QuantumState(data=np.array([1.0, 0.0]), basis=basis)
    with pytest.raises(ValueError):
        sl.evolve_lindblad(ham, psi, 0.1, np.array([0.0]))
    other_ham, _ = _two_site_xx()
    with pytest.raises(ValueError):
        sl.evolve_lindblad(other_ham, psi, 0.1, np.array([0.0, 1.0]))


def test_fault_injection_scoped():
    _, basis = _single_site()
    with pytest.raises(ValueError):
        with fault_injection("no-such-fault"):
            pass
    clean = dephasing_kernel(basis, gamma=1.0)
    with fault_injection("dissipator-sign"):
        flipped = dephasing_kernel(basis, gamma=1.0)
        assert flipped[0, 1] == pytest.approx(0.5)  # coherences now grow
    assert_allclose(dephasing_kernel(basis, gamma=1.0), clean, atol=1e-15)


def test_interpolant_matches_grid():
    ham, basis = _two_site_xx()
    psi0 = sl.QuantumState(data=np.eye(4)[1], basis=basis)
    times = np.linspace(0.0, 6.0, 13)
    traj = sl.evolve_lindblad(ham, psi0, 0.05, times, dense_output=True)
    assert traj.interpolant is not None
    assert_allclose(traj.interpolant(times[7]), traj.states[7], atol=1e-8)
    mid = traj.interpolant(0.5 * (times[6] + times[7]))
    assert np.trace(mid).real == pytest.approx(1.0, abs=1e-7)
    plain = sl.evolve_lindblad(ham, psi0, 0.05, times)
    assert plain.interpolant is None
