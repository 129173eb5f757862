"""Closed-form effective models for the two protocols.

Dispersive model (dual-port): in the single-excitation block the bulk of
the chain is a uniform hopping wire with modes

    E_k = Omega + 2 * Delta_hop * cos(k pi / (N_chain + 1)),
    lambda_bar_k = lambda_hop * sqrt(2 / (N_chain + 1)) * sin(k pi / (N_chain + 1)),
    zeta_k = omega - E_k,                      k = 1 .. N_chain.

Far off resonance the boundary spins acquire a mediated flip-flop coupling
chi = sum_k lambda_bar_k^2 / zeta_k, an effective decay Gamma = gamma *
sum_k lambda_bar_k^2 / zeta_k^2 under bulk dephasing, and leak only
N_chain (pi delta / (2 Delta))^2 excitation into the wire.

Trimer model (staggered): each strongly coupled pair forms a dimer whose
odd superposition mediates an effective end-to-end coupling

    eta = (Delta_hop / 2) * sqrt(1 + 3 x^2 - sqrt(1 + 6 x^2 + x^4)),
    x = delta_hop / Delta_hop,

giving an entanglement peak at t_E = pi / (2 sqrt(2) eta) and full state
revival at t_F = 2 t_E.

A convention factor (default 1/2) maps main-text couplings J to hopping
amplitudes J/2, because the XX exchange term moves one excitation with
amplitude J/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import Trajectory
from .measures import negativity_series
from .qcore import FullBasis, Spin

__all__ = [
    "DispersiveParams",
    "TrimerParams",
    "dispersive_params",
    "chi",
    "gamma_eff",
    "mean_bulk_excitation",
    "validity_margin",
    "entangling_time",
    "evolve_effective_pair",
    "trimer_eta",
    "trimer_evolve",
]


@dataclass(frozen=True)
class DispersiveParams:
    """Mode data of the dispersive boundary-boundary model.

    All quantities are in hopping units.  ``mode_energies``,
    ``mode_couplings`` and ``detunings`` hold ``E_k``, ``lambda_bar_k`` and
    ``zeta_k`` for k = 1..N_chain.
    """

    n_chain: int
    Delta_hop: float
    lambda_hop: float
    omega: float
    Omega: float
    mode_energies: np.ndarray
    mode_couplings: np.ndarray
    detunings: np.ndarray

    def __post_init__(self) -> None:
        if self.n_chain < 1:
            raise ValueError(f"n_chain must be at least 1, got {self.n_chain}")
        if np.min(np.abs(self.detunings)) <= 1e-9:
            k = int(np.argmin(np.abs(self.detunings))) + 1
            raise ValueError(
                f"resonance guard: |zeta_{k}| = {abs(self.detunings[k - 1]):.3e} <= 1e-9; "
                "the dispersive expansion is invalid on resonance"
            )

    def chi_terms(self) -> np.ndarray:
        """Per-mode contributions ``lambda_bar_k^2 / zeta_k`` to chi."""
        return self.mode_couplings**2 / self.detunings

    def gamma_terms(self) -> np.ndarray:
        """Per-mode contributions ``lambda_bar_k^2 / zeta_k^2`` to Gamma/gamma."""
        return (self.mode_couplings / self.detunings) ** 2


@dataclass(frozen=True)
class TrimerParams:
    """Effective coupling and characteristic times of the dimerized trimer."""

    Delta_hop: float
    delta_hop: float
    eta: float
    t_entangle: float
    t_revival: float

    def __post_init__(self) -> None:
        if self.eta < 0.0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if math.isfinite(self.t_entangle):
            if abs(self.t_revival - 2.0 * self.t_entangle) > 1e-12 * max(1.0, self.t_revival):
                raise ValueError("t_revival must equal 2 * t_entangle")

    @property
    def diverges(self) -> bool:
        """True when eta = 0 and the characteristic times are infinite."""
        return not math.isfinite(self.t_entangle)


def dispersive_params(
    n_chain: int,
    Delta: float,
    delta: float,
    B: float,
    convention_factor: float = 0.5,
    Omega: float = 0.0,
) -> DispersiveParams:
    """Mode energies, couplings and detunings of the dispersive model.

    Parameters
    ----------
    n_chain : int
        Number of bulk sites between the two boundary spins (N - 2).
    Delta, delta : float
        Main-text strong and weak couplings.
    B : float
        Boundary field; the boundary splitting is ``omega = B`` exactly.
    convention_factor : float
        Conversion from couplings to hopping amplitudes; the XX term gives
        single-excitation hopping J/2, hence the default 1/2.
    Omega : float
        Bulk on-site energy (the main-text bulk field, default 0).

    Returns
    -------
    DispersiveParams
        Raises if any mode is resonant with the boundary (|zeta| <= 1e-9).
    """
    if n_chain < 1:
        raise ValueError(f"n_chain must be at least 1, got {n_chain}")
    d_hop = convention_factor * Delta
    l_hop = convention_factor * delta
    k = np.arange(1, n_chain + 1)
    energies = Omega + 2.0 * d_hop * np.cos(k * np.pi / (n_chain + 1))
    couplings = l_hop * np.sqrt(2.0 / (n_chain + 1)) * np.sin(k * np.pi / (n_chain + 1))
    omega = float(B)
    return DispersiveParams(
        n_chain=n_chain,
        Delta_hop=d_hop,
        lambda_hop=l_hop,
        omega=omega,
        Omega=float(Omega),
        mode_energies=energies,
        mode_couplings=couplings,
        detunings=omega - energies,
    )


def chi(params: DispersiveParams) -> float:
    """Mediated boundary-boundary coupling ``chi = sum_k lambda_bar_k^2 / zeta_k``."""
    return float(params.chi_terms().sum())


def gamma_eff(params: DispersiveParams, gamma: float) -> float:
    """Effective boundary decay ``Gamma = gamma sum_k lambda_bar_k^2 / zeta_k^2``."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return float(gamma * params.gamma_terms().sum())


def mean_bulk_excitation(n_chain: int, delta: float, Delta: float) -> float:
    """Leading-order bulk excitation leakage ``N_chain (pi delta / (2 Delta))^2``."""
    if Delta <= 0.0:
        raise ValueError(f"Delta must be positive, got {Delta}")
    return n_chain * (np.pi * delta / (2.0 * Delta)) ** 2


def validity_margin(params: DispersiveParams, n_chain: int | None = None) -> float:
    """Dispersive trust indicator ``min_k(|zeta_k| / lambda_bar_k) / N_chain``.

    Third-order corrections to the effective model scale with
    ``N_chain * lambda_bar / zeta``; a margin above 1 marks the regime where
    the dispersive picture is quantitatively reliable.
    """
    if n_chain is None:
        n_chain = params.n_chain
    with np.errstate(divide="ignore"):  # zero coupling -> infinite margin
        ratios = np.abs(params.detunings) / params.mode_couplings
    return float(ratios.min() / n_chain)


def entangling_time(chi_value: float) -> float:
    """Time ``pi / (4 |chi|)`` at which the effective pair is maximally entangled."""
    if chi_value == 0.0:
        raise ValueError("chi = 0: the effective model generates no entanglement")
    return np.pi / (4.0 * abs(chi_value))


_QUBIT_SP = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_QUBIT_SM = _QUBIT_SP.T.copy()


def evolve_effective_pair(
    chi_value: float,
    Gamma: float,
    rho0: np.ndarray,
    times: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> Trajectory:
    """Integrate the effective two-qubit master equation.

    Dynamics: ``H = chi (S+_e S-_r + S-_e S+_r)`` with decay channels
    ``sqrt(Gamma) S-_j`` on both qubits,

        drho/dt = -i[H, rho] + Gamma sum_j (S-_j rho S+_j
                                            - 1/2 {S+_j S-_j, rho}).

    With ``Gamma = 0`` and ``rho0 = |10><10|`` the normalized negativity
    reaches 1 at ``t = pi/(4 |chi|)``.  Returns a Trajectory over the
    two-qubit basis with the negativity series attached.
    """
    if Gamma < 0.0:
        raise ValueError(f"Gamma must be nonnegative, got {Gamma}")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (4, 4):
        raise ValueError(f"rho0 must be 4x4, got {rho0.shape}")
    times = np.asarray(times, dtype=float)
    ham = chi_value * (np.kron(_QUBIT_SP, _QUBIT_SM) + np.kron(_QUBIT_SM, _QUBIT_SP))
    jumps = [np.kron(_QUBIT_SM, np.eye(2)), np.kron(np.eye(2), _QUBIT_SM)]
    rates = [(lo, lo.conj().T @ lo) for lo in jumps]

    def rhs(_t, y):
        rho = y.reshape(4, 4)
        out = -1j * (ham @ rho - rho @ ham)
        if Gamma > 0.0:
            for lo, num in rates:
                out += Gamma * (lo @ rho @ lo.conj().T - 0.5 * (num @ rho + rho @ num))
        return out.ravel()

    sol = solve_ivp(
        rhs, (times[0], times[-1]), rho0.ravel(),
        method="DOP853", t_eval=times, rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"effective-pair integration failed: {sol.message}")
    states = sol.y.T.reshape(times.size, 4, 4)
    traj = Trajectory(times=times, basis=FullBasis(n_sites=2, spin=Spin(1)), states=states)
    traj.negativity = negativity_series(states, d=2)
    return traj


def trimer_eta(Delta: float, delta: float, convention_factor: float = 0.5) -> TrimerParams:
    """Effective end-to-end coupling of the strongly dimerized trimer.

    Evaluates, in hopping units (primes = convention factor applied),

        eta = (Delta'/2) sqrt(1 + 3 x^2 - sqrt(1 + 6 x^2 + x^4)),  x = delta'/Delta'

    together with the entanglement time ``t_E = pi / (2 sqrt(2) eta)`` and
    the revival time ``t_F = 2 t_E``.  For ``delta = 0`` the coupling
    vanishes and both times are infinite (flagged via ``diverges``).
    """
    if Delta <= 0.0:
        raise ValueError(f"Delta must be positive, got {Delta}")
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    d_hop = convention_factor * Delta
    l_hop = convention_factor * delta
    x2 = (l_hop / d_hop) ** 2
    inner = math.sqrt(1.0 + 6.0 * x2 + x2 * x2)
    eta = 0.5 * d_hop * math.sqrt(max(1.0 + 3.0 * x2 - inner, 0.0))
    if eta > 0.0:
        t_entangle = math.pi / (2.0 * math.sqrt(2.0) * eta)
    else:
        t_entangle = math.inf
    return TrimerParams(
        Delta_hop=d_hop, delta_hop=l_hop, eta=eta,
        t_entangle=t_entangle, t_revival=2.0 * t_entangle,
    )


def trimer_evolve(eta: float, psi0: np.ndarray, times: np.ndarray) -> Trajectory:
    """Exact evolution under the trimer Hamiltonian [[0,eta,0],[eta,0,eta],[0,eta,0]].

    The matrix has eigenvalues ``{-sqrt(2) eta, 0, +sqrt(2) eta}``; starting
    from ``|A> = (1,0,0)`` the transfer probability to ``|C>`` is
    ``sin^4(eta t / sqrt(2))``.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (3,):
        raise ValueError(f"psi0 must be a 3-vector, got {psi0.shape}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"psi0 norm deviates from 1 by {abs(norm - 1.0):.3e}")
    times = np.asarray(times, dtype=float)
    ham = eta * np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    energies, vectors = np.linalg.eigh(ham)
    coeff = vectors.conj().T @ psi0
    phases = np.exp(-1j * np.outer(times, energies)) * coeff
    states = phases @ vectors.T
    return Trajectory(times=times, basis=None, states=states)
