"""Entanglement and population observables.

The central quantity is the normalized negativity of the reduced state of
the two chain ends,

    N(rho) = [sum_i (|eps_i| - eps_i) / 2] / [(d - 1)/2]

where ``eps_i`` are the eigenvalues of the partial transpose and ``(d-1)/2``
is the negativity of a maximally entangled pair of d-level systems, so the
returned value lies in [0, 1] for every spin.  The partial transpose is
taken on the site-1 factor; the spectrum is the same for either choice.

Fidelity is the square-root (Uhlmann) form ``F = tr sqrt(sqrt(rho) sigma
sqrt(rho))``, with the shortcut ``F = sqrt(<psi|rho|psi>)`` for pure
targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import QuantumState, Trajectory
from .qcore import FullBasis, SectorBasis, site_m_table

__all__ = [
    "EndPairState",
    "PeakRecord",
    "bell_state",
    "reduce_end_pair",
    "end_pair_series",
    "negativity",
    "negativity_series",
    "fidelity",
    "rz_correct",
    "populations",
    "populations_series",
    "bulk_population_series",
    "peak_scan",
    "golden_section_max",
]


@dataclass(frozen=True)
class EndPairState:
    """Reduced density matrix of sites (1, N) of a chain.

    ``rho`` is (d*d, d*d) over the pair product basis with site 1 as the
    slow factor; local levels are ordered by descending m, so index 0 is the
    excited level |1>.
    """

    rho: np.ndarray
    d: int

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=complex)
        dd = self.d * self.d
        if rho.shape != (dd, dd):
            raise ValueError(f"pair state must be ({dd}, {dd}), got {rho.shape}")
        if abs(np.trace(rho).real - 1.0) > 1e-7:
            raise ValueError(f"pair state trace deviates from 1 by {abs(np.trace(rho).real - 1.0):.3e}")
        if not np.allclose(rho, rho.conj().T, rtol=0.0, atol=1e-7):
            raise ValueError("pair state is not Hermitian")
        lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if lo < -1e-7:
            raise ValueError(f"pair state has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class PeakRecord:
    """Location of the maximum of a negativity time series.

    ``refined`` records whether golden-section refinement between grid
    points ran; the value is never below the raw grid maximum.
    """

    value: float
    time: float
    refined: bool = False

    def __post_init__(self) -> None:
        if not -1e-9 <= self.value <= 1.0 + 1e-9:
            raise ValueError(f"peak value {self.value} outside [0, 1]")


def bell_state(d: int = 2) -> np.ndarray:
    """Pair state (|10> + |01>)/sqrt(2) as a vector in the pair basis.

    |1> is the excited local level (index 0) and |0> the ground level
    (index d-1), matching the chain conventions.
    """
    vec = np.zeros(d * d, dtype=complex)
    vec[0 * d + (d - 1)] = 1.0 / np.sqrt(2.0)
    vec[(d - 1) * d + 0] = 1.0 / np.sqrt(2.0)
    return vec


# -- end-pair reduction ------------------------------------------------------

_GROUP_CACHE: dict[tuple[int, int, int], list[tuple[np.ndarray, np.ndarray]]] = {}


def _sector_groups(basis: SectorBasis) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sector indices grouped by bulk configuration.

    Returns a list of (sector index array, pair-basis position array); two
    sector states contribute coherently to the reduced pair state iff their
    bulk configurations coincide.
    """
    key = (basis.n_sites, basis.spin.two_s, basis.two_total_m)
    hit = _GROUP_CACHE.get(key)
    if hit is not None:
        return hit
    d = basis.spin.dim
    groups: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for i, st in enumerate(basis.states):
        groups.setdefault(st[1:-1], []).append((i, st[0] * d + st[-1]))
    out = []
    for members in groups.values():
        idx = np.array([m[0] for m in members], dtype=np.int64)
        pos = np.array([m[1] for m in members], dtype=np.int64)
        out.append((idx, pos))
    _GROUP_CACHE[key] = out
    return out


def _pair_series_from_arrays(states: np.ndarray, basis) -> np.ndarray:
    """Reduced end-pair density matrices for a stack of states.

    ``states`` is (T, dim) for pure or (T, dim, dim) for density input;
    returns (T, d*d, d*d).
    """
    d = basis.spin.dim
    n = basis.n_sites
    t_len = states.shape[0]
    if isinstance(basis, FullBasis):
        bulk = d ** (n - 2)
        if states.ndim == 2:
            psi = states.reshape(t_len, d, bulk, d)
            pair = np.einsum("taki,tbkj->taibj", psi, psi.conj())
        else:
            rho = states.reshape(t_len, d, bulk, d, d, bulk, d)
            pair = np.einsum("takibkj->taibj", rho)
        return pair.reshape(t_len, d * d, d * d)
    pair = np.zeros((t_len, d * d, d * d), dtype=complex)
    # pair positions are unique within a bulk group, so fancy += is exact
    if states.ndim == 2:
        for idx, pos in _sector_groups(basis):
            block = states[:, idx]
            pair[:, pos[:, None], pos[None, :]] += np.einsum("ta,tb->tab", block, block.conj())
    else:
        for idx, pos in _sector_groups(basis):
            pair[:, pos[:, None], pos[None, :]] += states[:, idx[:, None], idx[None, :]]
    return pair


def reduce_end_pair(state: QuantumState, n_sites: int | None = None, d: int | None = None) -> EndPairState:
    """Partial trace over the bulk, keeping sites (1, N).

    Sector-basis states are reduced directly by grouping over bulk
    configurations; no full-space embedding is performed.

    Parameters
    ----------
    state : QuantumState
        Pure or density state over the chain (full or sector basis).
    n_sites, d : int, optional
        Expected chain length and local dimension; validated against the
        state's basis when given.

    Returns
    -------
    EndPairState
    """
    basis = state.basis
    if basis.n_sites < 3:
        raise ValueError(f"end-pair reduction needs N >= 3, got N={basis.n_sites}")
    if n_sites is not None and n_sites != basis.n_sites:
        raise ValueError(f"state has N={basis.n_sites}, caller expected N={n_sites}")
    if d is not None and d != basis.spin.dim:
        raise ValueError(f"state has d={basis.spin.dim}, caller expected d={d}")
    arr = state.data[None, ...]
    pair = _pair_series_from_arrays(arr, basis)[0]
    return EndPairState(rho=pair, d=basis.spin.dim)


def end_pair_series(traj: Trajectory) -> np.ndarray:
    """Reduced end-pair density matrix at every trajectory time, (T, d*d, d*d)."""
    if traj.states is None:
        raise ValueError("trajectory carries no states")
    return _pair_series_from_arrays(traj.states, traj.basis)


# -- negativity and fidelity -------------------------------------------------

def _partial_transpose(pair_rhos: np.ndarray, d: int) -> np.ndarray:
    """Partial transpose on the site-1 factor of a (T, d*d, d*d) stack."""
    t_len = pair_rhos.shape[0]
    arr = pair_rhos.reshape(t_len, d, d, d, d)
    # rho[(a,i),(b,j)] -> rho[(b,i),(a,j)]
    arr = arr.transpose(0, 3, 2, 1, 4)
    return arr.reshape(t_len, d * d, d * d)


def negativity_series(pair_rhos: np.ndarray, d: int) -> np.ndarray:
    """Normalized negativity of a (T, d*d, d*d) stack of pair states."""
    pt = _partial_transpose(np.asarray(pair_rhos, dtype=complex), d)
    eigs = np.linalg.eigvalsh(pt)
    neg = np.where(eigs < -1e-12, -eigs, 0.0).sum(axis=1)
    return neg / ((d - 1) / 2.0)


def negativity(pair: EndPairState | np.ndarray, d: int | None = None) -> float:
    """Normalized negativity of an end-pair state.

    The raw negativity ``sum_i (|eps_i| - eps_i)/2`` over the partial
    transpose spectrum is divided by ``(d-1)/2``, its value on a maximally
    entangled d x d pair; eigenvalues in [-1e-12, 0) count as zero.
    """
    if isinstance(pair, EndPairState):
        rho, d = pair.rho, pair.d
    else:
        rho = np.asarray(pair, dtype=complex)
        if d is None:
            d = round(np.sqrt(rho.shape[0]))
            if d * d != rho.shape[0]:
                raise ValueError(f"cannot infer local dimension from shape {rho.shape}")
    return float(negativity_series(rho[None, ...], d)[0])


def _as_density(x) -> np.ndarray:
    if isinstance(x, EndPairState):
        return x.rho
    if isinstance(x, QuantumState):
        return x.to_density().data
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return arr


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``F = tr sqrt(sqrt(rho) sigma sqrt(rho))``.

    Accepts density matrices, pure-state vectors, QuantumState or
    EndPairState inputs of equal dimension.  Symmetric in its arguments; for
    a pure ``sigma`` the shortcut ``F = sqrt(<psi|rho|psi>)`` is used.
    Eigenvalues are clipped at -1e-10 before square roots to absorb
    numerical noise.
    """
    a = _as_density(rho)
    b = _as_density(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    for name, mat in (("rho", a), ("sigma", b)):
        if not np.allclose(mat, mat.conj().T, rtol=0.0, atol=1e-8):
            raise ValueError(f"{name} is not Hermitian")
    # pure-state shortcut on whichever argument is (numerically) rank one
    for first, second in ((a, b), (b, a)):
        purity = np.trace(first @ first).real
        if purity > 1.0 - 1e-10:
            w, v = np.linalg.eigh(first)
            psi = v[:, -1]
            val = np.real(psi.conj() @ second @ psi)
            return float(np.sqrt(max(val, 0.0)))
    w, v = np.linalg.eigh(a)
    w = np.clip(w, -1e-10, None)
    sqrt_a = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_a @ b @ sqrt_a
    eigs = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    eigs = np.clip(eigs, -1e-10, None)
    return float(np.sqrt(np.clip(eigs, 0.0, None)).sum())


def rz_correct(pair: EndPairState, angle: float = -np.pi / 2) -> EndPairState:
    """Apply ``U = exp(-i angle sigma_z / 2)`` to the site-N qubit.

    ``sigma_z`` is diagonal (+1 on the excited level, -1 on the ground
    level).  Restores the phase of the dual-port protocol's output so that
    its fidelity against (|10> + |01>)/sqrt(2) becomes meaningful.  Only
    defined for d = 2.
    """
    if pair.d != 2:
        raise ValueError(f"rz_correct requires qubit pairs (d=2), got d={pair.d}")
    u1 = np.diag([np.exp(-0.5j * angle), np.exp(+0.5j * angle)])
    u = np.kron(np.eye(2), u1)
    return EndPairState(rho=u @ pair.rho @ u.conj().T, d=2)


# -- populations -------------------------------------------------------------

def populations_series(traj: Trajectory) -> np.ndarray:
    """Per-site excitation numbers ``n_j = <Sz_j> + s`` over time, (T, N)."""
    if traj.states is None:
        raise ValueError("trajectory carries no states")
    weights = site_m_table(traj.basis) + traj.basis.spin.s
    if traj.states.ndim == 2:
        probs = np.abs(traj.states) ** 2
    else:
        probs = np.einsum("tii->ti", traj.states).real
    return probs @ weights


def bulk_population_series(traj: Trajectory) -> np.ndarray:
    """Total excitation in sites 2..N-1 over time, shape (T,)."""
    pops = populations_series(traj)
    return pops[:, 1:-1].sum(axis=1)


def populations(state: QuantumState, n_sites: int | None = None, d: int | None = None):
    """Per-site excitation numbers and their bulk sum.

    Returns ``(n, bulk)`` where ``n[j]`` is the excitation of site j+1 in
    quanta above the ``m = -s`` ground level and ``bulk = sum(n[1:-1])``.
    """
    basis = state.basis
    if n_sites is not None and n_sites != basis.n_sites:
        raise ValueError(f"state has N={basis.n_sites}, caller expected N={n_sites}")
    if d is not None and d != basis.spin.dim:
        raise ValueError(f"state has d={basis.spin.dim}, caller expected d={d}")
    traj = Trajectory(times=np.array([0.0]), basis=basis, states=state.data[None, ...])
    pops = populations_series(traj)[0]
    return pops, float(pops[1:-1].sum())


# -- peak detection ----------------------------------------------------------

def golden_section_max(f: Callable[[float], float], a: float, b: float, xtol: float):
    """Golden-section search for the maximum of a unimodal function.

    Returns ``(x, f(x))`` for the best point found once the bracket width
    drops below ``xtol``.
    """
    if b < a:
        a, b = b, a
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while (b - a) > xtol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    if fc >= fe:
        return c, fc
    return e, fe


def peak_scan(
    traj: Trajectory,
    refine: Callable[[float], float] | None = None,
    time_tol: float = 1e-3,
) -> PeakRecord:
    """Locate the maximum of a trajectory's negativity series.

    The grid maximum is found first (ties broken toward the earliest time).
    When ``refine`` is given and the maximum is interior, a golden-section
    search over the bracketing interval sharpens the location to ``time_tol``;
    the refined value is kept only if it beats the grid maximum, so the
    result is never below it.

    Parameters
    ----------
    traj : Trajectory
        Must carry a ``negativity`` series.
    refine : callable, optional
        Re-evaluates the normalized negativity at an arbitrary time.
    time_tol : float
        Bracket width at which refinement stops (same units as ``times``).
    """
    if traj.negativity is None:
        raise ValueError("trajectory carries no negativity series; compute it first")
    values = np.asarray(traj.negativity, dtype=float)
    if values.size == 0:
        raise ValueError("empty trajectory")
    i = int(np.argmax(values))
    grid_value = float(values[i])
    grid_time = float(traj.times[i])
    if refine is None or i == 0 or i == values.size - 1:
        return PeakRecord(value=grid_value, time=grid_time, refined=False)
    t_ref, v_ref = golden_section_max(refine, float(traj.times[i - 1]), float(traj.times[i + 1]), time_tol)
    if v_ref > grid_value:
        return PeakRecord(value=float(v_ref), time=float(t_ref), refined=True)
    return PeakRecord(value=grid_value, time=grid_time, refined=True)
