"""Time evolution: exact unitary propagation and Lindblad dephasing.

Closed-system dynamics uses a Hermitian eigendecomposition of the
Hamiltonian, which is numerically exact on any time grid.  Open-system
dynamics integrates the Lindblad master equation

    drho/dt = -i [H, rho] + gamma * sum_j (Sz_j rho Sz_j
                                           - 1/2 {Sz_j^2, rho})

with pure dephasing jump operators ``Sz_j`` on a configurable site set.
Because every ``Sz_j`` is diagonal in the product basis, the dissipator
reduces to an elementwise kernel ``K_ik = -gamma/2 * sum_j (m_j(i) -
m_j(k))^2`` acting on the density matrix, and the equation preserves each
total-magnetization block.  The two engines double as cross-checks: at
``gamma = 0`` they must agree to solver accuracy.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .qcore import FullBasis, Operator, SectorBasis, site_m_table

__all__ = [
    "QuantumState",
    "Trajectory",
    "UnitaryPropagator",
    "evolve_unitary",
    "evolve_lindblad",
    "lindblad_rhs",
    "dephasing_kernel",
    "fault_injection",
]

# Active fault-injection tags.  Used by the validation suite as a negative
# control; must stay empty in production code paths.
_ACTIVE_FAULTS: set[str] = set()

_KNOWN_FAULTS = {"dissipator-sign"}


@contextmanager
def fault_injection(name: str):
    """Temporarily enable a deliberate defect (testing hook).

    The only supported tag is ``"dissipator-sign"``, which flips the sign of
    the dephasing dissipator so that coherences grow instead of decaying.
    The validation suite uses it to prove its checks can fail.
    """
    if name not in _KNOWN_FAULTS:
        raise ValueError(f"unknown fault {name!r}; known: {sorted(_KNOWN_FAULTS)}")
    _ACTIVE_FAULTS.add(name)
    try:
        yield
    finally:
        _ACTIVE_FAULTS.discard(name)


@dataclass(frozen=True)
class QuantumState:
    """State vector or density matrix tied to a basis.

    ``data`` with one axis is a pure state (validated to unit norm); with two
    axes it is a density matrix (validated Hermitian, unit trace and positive
    semidefinite up to construction tolerance).
    """

    data: np.ndarray
    basis: FullBasis | SectorBasis

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=complex)
        if arr.ndim == 1:
            if arr.shape[0] != self.basis.dim:
                raise ValueError(
                    f"state length {arr.shape[0]} does not match basis dimension {self.basis.dim}"
                )
            norm = np.linalg.norm(arr)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"pure state norm deviates from 1 by {abs(norm - 1.0):.3e}")
        elif arr.ndim == 2:
            if arr.shape != (self.basis.dim, self.basis.dim):
                raise ValueError(
                    f"density matrix shape {arr.shape} does not match basis dimension {self.basis.dim}"
                )
            if not np.allclose(arr, arr.conj().T, rtol=0.0, atol=1e-10):
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(arr).real
            if abs(tr - 1.0) > 1e-10:
                raise ValueError(f"density matrix trace deviates from 1 by {abs(tr - 1.0):.3e}")
            if arr.shape[0] <= 1024:
                lo = np.linalg.eigvalsh(arr)[0]
                if lo < -1e-10:
                    raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        else:
            raise ValueError("state data must have 1 (pure) or 2 (density) axes")
        object.__setattr__(self, "data", arr)

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "density"

    @property
    def dim(self) -> int:
        return self.basis.dim

    def to_density(self) -> "QuantumState":
        """Promote a pure state to its projector; density states pass through."""
        if self.kind == "density":
            return self
        rho = np.outer(self.data, self.data.conj())
        return QuantumState(data=rho, basis=self.basis)


@dataclass
class Trajectory:
    """Time series produced by an evolution engine.

    ``states`` has shape (T, dim) for pure evolution and (T, dim, dim) for
    density-matrix evolution, aligned with ``times`` (strictly increasing).
    Derived observables are attached by the measurement layer after the run;
    ``interpolant``, when present, maps an arbitrary time inside the solver
    span to a density matrix and supports peak refinement between grid
    points.  ``basis`` is None for abstract model spaces (e.g. the trimer).
    """

    times: np.ndarray
    basis: FullBasis | SectorBasis | None
    states: np.ndarray | None = None
    negativity: np.ndarray | None = None
    fidelity: np.ndarray | None = None
    populations: np.ndarray | None = None
    interpolant: Callable[[float], np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a nonempty 1-D array")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        self.times = t
        if self.states is not None and self.states.shape[0] != t.size:
            raise ValueError("states and times are misaligned")

    @property
    def n_times(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class UnitaryPropagator:
    """Cached eigendecomposition ``H = V diag(E) V^dag`` of a Hamiltonian."""

    energies: np.ndarray
    vectors: np.ndarray
    basis: FullBasis | SectorBasis

    @classmethod
    def from_hamiltonian(cls, ham: Operator) -> "UnitaryPropagator":
        if not ham.hermitian:
            raise ValueError("unitary propagation requires a Hermitian operator")
        if ham.dim > 8192:
            raise ValueError(
                f"dense eigendecomposition refused for dimension {ham.dim}; "
                "project to a magnetization sector first"
            )
        energies, vectors = np.linalg.eigh(ham.toarray())
        return cls(energies=energies, vectors=vectors, basis=ham.basis)

    def _coefficients(self, psi0: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ psi0

    def evolve(self, psi0: QuantumState, times: np.ndarray) -> Trajectory:
        """Propagate a pure state over a time grid.

        Returns a Trajectory whose ``states`` row t is ``exp(-i H t) psi0``.
        """
        if psi0.kind != "pure":
            raise ValueError("UnitaryPropagator.evolve expects a pure state")
        if psi0.basis != self.basis:
            raise ValueError("state and propagator bases differ")
        times = np.asarray(times, dtype=float)
        coeff = self._coefficients(psi0.data)
        phases = np.exp(-1j * np.outer(times, self.energies)) * coeff
        states = phases @ self.vectors.T
        return Trajectory(times=times, basis=self.basis, states=states)

    def state_at(self, psi0: QuantumState, t: float) -> np.ndarray:
        """Single-time propagation, used by peak refinement."""
        coeff = self._coefficients(psi0.data)
        return self.vectors @ (np.exp(-1j * t * self.energies) * coeff)


def evolve_unitary(ham: Operator, psi0: QuantumState, times: np.ndarray) -> Trajectory:
    """Exact closed-system evolution of a pure state.

    Parameters
    ----------
    ham : Operator
        Hermitian Hamiltonian; basis must match the state.
    psi0 : QuantumState
        Initial pure state.
    times : array_like
        Strictly increasing output grid.

    Returns
    -------
    Trajectory
        Pure-state trajectory with ``states`` of shape (T, dim).
    """
    return UnitaryPropagator.from_hamiltonian(ham).evolve(psi0, np.asarray(times, float))


def _resolve_sites(basis, dephasing_sites) -> np.ndarray:
    if dephasing_sites is None:
        return np.arange(basis.n_sites)
    sites = np.asarray(sorted(set(int(s) for s in dephasing_sites)), dtype=np.int64)
    if sites.size == 0:
        raise ValueError("dephasing site set must not be empty; pass None for all sites")
    if sites.min() < 1 or sites.max() > basis.n_sites:
        raise ValueError(f"dephasing sites must lie in 1..{basis.n_sites}")
    return sites - 1


def dephasing_kernel(
    basis: FullBasis | SectorBasis,
    gamma: float,
    dephasing_sites=None,
) -> np.ndarray:
    """Elementwise dissipator kernel for diagonal ``Sz`` dephasing.

    For jump operators ``sqrt(gamma) Sz_j`` the dissipator acts on each
    density-matrix element as multiplication by

        K_ik = -gamma/2 * sum_j (m_j(i) - m_j(k))^2

    where j runs over the dephasing sites.  The diagonal of K vanishes, so
    populations and the trace are untouched.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    cols = _resolve_sites(basis, dephasing_sites)
    m = site_m_table(basis)[:, cols]
    sq = np.sum(m * m, axis=1)
    kernel = -0.5 * gamma * (sq[:, None] + sq[None, :] - 2.0 * (m @ m.T))
    if "dissipator-sign" in _ACTIVE_FAULTS:
        kernel = -kernel
    return kernel


def lindblad_rhs(
    ham: Operator,
    rho: np.ndarray,
    gamma: float,
    dephasing_sites=None,
    kernel: np.ndarray | None = None,
) -> np.ndarray:
    """Right-hand side ``-i[H, rho] + D(rho)`` of the dephasing master equation.

    The result is traceless for any input and maps Hermitian matrices to
    Hermitian matrices.  ``kernel`` may be supplied to avoid recomputing the
    dephasing kernel inside integration loops.
    """
    h = ham.toarray()
    if kernel is None:
        kernel = dephasing_kernel(ham.basis, gamma, dephasing_sites)
    comm = h @ rho - rho @ h
    return -1j * comm + kernel * rho


def evolve_lindblad(
    ham: Operator,
    state0: QuantumState,
    gamma: float,
    times: np.ndarray,
    dephasing_sites=None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    dense_output: bool = False,
    check_positivity: bool = True,
) -> Trajectory:
    """Integrate the Lindblad dephasing equation over a time grid.

    Parameters
    ----------
    ham : Operator
        Hermitian Hamiltonian (same basis as the state).
    state0 : QuantumState
        Initial state; a pure state is promoted to its projector.
    gamma : float
        Dephasing rate, must be nonnegative.  ``gamma = 0`` reproduces the
        unitary engine to solver accuracy.
    times : array_like
        Strictly increasing output grid starting at the initial time.
    dephasing_sites : sequence of int, optional
        1-based sites carrying dephasing; None means every site.
    rtol, atol : float
        Solver tolerances.
    dense_output : bool
        Attach a continuous interpolant for peak refinement.
    check_positivity : bool
        Verify trace preservation (1e-7) and positivity (eigenvalues above
        -1e-6) of every output state, aborting with diagnostics otherwise.

    Returns
    -------
    Trajectory
        Density-matrix trajectory with ``states`` of shape (T, dim, dim).
    """
    if not ham.hermitian:
        raise ValueError("Lindblad evolution requires a Hermitian Hamiltonian")
    if state0.basis != ham.basis:
        raise ValueError("state and Hamiltonian bases differ")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("times must contain at least two points")
    rho0 = state0.to_density().data
    dim = rho0.shape[0]
    if dim > 2048:
        raise ValueError(
            f"density-matrix integration refused for dimension {dim}; "
            "project to a magnetization sector first"
        )
    h = ham.toarray().astype(complex)
    kernel = dephasing_kernel(ham.basis, gamma, dephasing_sites)

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = -1j * (h @ rho - rho @ h) + kernel * rho
        return out.ravel()

    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        rho0.ravel(),
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
        dense_output=dense_output,
    )
    if not sol.success:
        raise RuntimeError(f"Lindblad integration failed: {sol.message}")
    states = sol.y.T.reshape(times.size, dim, dim)
    if check_positivity:
        _check_physical(states, times)
    interp = None
    if dense_output:
        def interp(t, _sol=sol.sol, _dim=dim):
            return np.asarray(_sol(t)).reshape(_dim, _dim)
    return Trajectory(times=times, basis=ham.basis, states=states, interpolant=interp)


def _check_physical(states: np.ndarray, times: np.ndarray) -> None:
    traces = np.einsum("tii->t", states).real
    drift = np.abs(traces - 1.0)
    worst = int(np.argmax(drift))
    if drift[worst] > 1e-7:
        raise RuntimeError(
            f"trace drift {drift[worst]:.3e} at t={times[worst]:.6g} exceeds 1e-7"
        )
    herm = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    lows = np.linalg.eigvalsh(herm)[:, 0]
    worst = int(np.argmin(lows))
    if lows[worst] < -1e-6:
        raise RuntimeError(
            f"density matrix eigenvalue {lows[worst]:.3e} at t={times[worst]:.6g} "
            "below -1e-6; integration is unphysical"
        )
