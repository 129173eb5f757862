"""Chain specification, coupling patterns, Hamiltonians and disorder.

Two entanglement-generation protocols on an open XX chain of N spins are
supported:

* ``P1`` (staggered): mirror-symmetric alternation of weak (``delta``) and
  strong (``Delta``) couplings, ``[delta, Delta, delta, delta, Delta,
  delta]`` for N = 7, requiring ``N = 3 (mod 4)``.  Both end spins start
  excited.
* ``P2`` (dual-port): weak end bonds, uniform strong bulk, ``[delta, Delta,
  ..., Delta, delta]``, with a tunable magnetic field ``boundary_field`` on
  sites 1 and N.  Only the left end spin starts excited.

The Hamiltonian is

    H = sum_i J_i (Sx_i Sx_{i+1} + Sy_i Sy_{i+1}) + sum_j B_j Sz_j

which conserves total magnetization; production runs live in the sector
selected by the protocol's initial state.

Static disorder enters in two ways, both scaled by a dimensionless strength
E and the weak coupling ``delta``:

* diagonal: ``B_j -> B_j + E * delta * d_j`` on a configurable site set
  (default: the two boundary sites).  By default the same draw ``d`` is
  applied to every disordered site, modelling a common miscalibration of the
  single tuned boundary field; per-site independent draws are available via
  the broadcast rule described in :func:`fields_with_disorder`.
* off-diagonal: ``J_i -> J_i + E * delta * d_i`` independently on every bond.

Draws ``d`` are i.i.d. uniform on [-1/2, 1/2] from a counter-based
(Philox) generator, so realizations are reproducible from ``(seed, shape)``
alone regardless of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sparse

from .dynamics import QuantumState
from .qcore import (
    FullBasis,
    Operator,
    SectorBasis,
    Spin,
    sector_basis,
    site_m_table,
    spin_matrices,
)

__all__ = [
    "ChainSpec",
    "DisorderRealization",
    "DISORDER_MODES",
    "coupling_pattern",
    "field_profile",
    "couplings_with_disorder",
    "fields_with_disorder",
    "build_hamiltonian",
    "sector_hamiltonian",
    "working_sector",
    "initial_state",
    "stream_seed",
    "draw_disorder",
]

PROTOCOLS = ("P1", "P2")
DISORDER_MODES = ("none", "diag", "offdiag", "both")

_CONFIG_FIELDS = (
    "N",
    "spin",
    "protocol",
    "delta",
    "Delta",
    "boundary_field",
    "bulk_field",
    "gamma",
    "dephasing_sites",
)


@dataclass(frozen=True)
class ChainSpec:
    """Complete static description of a chain experiment.

    Field names double as the keys of the ``[chain]`` section of CLI config
    files.  ``delta`` is the weak coupling that sets the time unit (peak
    times scale as 1/delta), ``Delta`` the strong coupling; ``delta <=
    Delta`` with equality allowed for uniform-chain validation runs.
    ``dephasing_sites`` limits Lindblad dephasing to a subset of sites
    (None means all sites).
    """

    N: int
    protocol: str
    spin: Spin = Spin(1)
    delta: float = 1.0
    Delta: float = 10.0
    boundary_field: float = 0.0
    bulk_field: float = 0.0
    gamma: float = 0.0
    dephasing_sites: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "spin", Spin.from_value(self.spin))
        proto = str(self.protocol).upper()
        if proto not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        object.__setattr__(self, "protocol", proto)
        if self.N < 3:
            raise ValueError(f"N must be at least 3, got {self.N}")
        if proto == "P1" and self.N % 4 != 3:
            raise ValueError(f"P1 requires N = 3 (mod 4), got N={self.N}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.Delta < self.delta:
            raise ValueError(
                f"Delta must be at least delta, got Delta={self.Delta} < delta={self.delta}"
            )
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if self.dephasing_sites is not None:
            sites = tuple(sorted(set(int(s) for s in self.dephasing_sites)))
            if not sites or sites[0] < 1 or sites[-1] > self.N:
                raise ValueError(f"dephasing_sites must lie in 1..{self.N}")
            object.__setattr__(self, "dephasing_sites", sites)

    @property
    def n_bonds(self) -> int:
        return self.N - 1

    @property
    def site_dim(self) -> int:
        return self.spin.dim

    def with_updates(self, **kwargs) -> "ChainSpec":
        return replace(self, **kwargs)

    def to_config_dict(self) -> dict:
        """Serialize for the ``[chain]`` config section."""
        out = {
            "N": self.N,
            "spin": self.spin.label,
            "protocol": self.protocol,
            "delta": self.delta,
            "Delta": self.Delta,
            "boundary_field": self.boundary_field,
            "bulk_field": self.bulk_field,
            "gamma": self.gamma,
        }
        if self.dephasing_sites is not None:
            out["dephasing_sites"] = list(self.dephasing_sites)
        return out

    @classmethod
    def from_config_dict(cls, cfg: dict) -> "ChainSpec":
        """Deserialize a ``[chain]`` config section, rejecting unknown keys."""
        unknown = set(cfg) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown chain config keys: {sorted(unknown)}")
        missing = {"N", "protocol"} - set(cfg)
        if missing:
            raise ValueError(f"chain config requires keys: {sorted(missing)}")
        kwargs = dict(cfg)
        if "dephasing_sites" in kwargs and kwargs["dephasing_sites"] is not None:
            kwargs["dephasing_sites"] = tuple(kwargs["dephasing_sites"])
        return cls(**kwargs)


@dataclass(frozen=True)
class DisorderRealization:
    """One static disorder draw.

    ``diag_d`` holds one entry per disordered site (a single entry is
    broadcast to all disordered sites, the default correlated mode) and
    ``offdiag_d`` one entry per bond; all entries lie in [-1/2, 1/2].  The
    physical perturbations are ``strength * delta * d``.
    """

    seed: int
    strength: float
    diag_d: np.ndarray
    offdiag_d: np.ndarray

    def __post_init__(self) -> None:
        if self.strength < 0.0:
            raise ValueError(f"disorder strength must be nonnegative, got {self.strength}")
        diag = np.atleast_1d(np.asarray(self.diag_d, dtype=float))
        off = np.atleast_1d(np.asarray(self.offdiag_d, dtype=float))
        for name, arr in (("diag_d", diag), ("offdiag_d", off)):
            if arr.size and (arr.min() < -0.5 or arr.max() > 0.5):
                raise ValueError(f"{name} entries must lie in [-1/2, 1/2]")
        object.__setattr__(self, "diag_d", diag)
        object.__setattr__(self, "offdiag_d", off)


_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    """SplitMix64 finalizer; a bijective avalanche on 64-bit words."""
    z = (z + _GOLDEN64) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_seed(master_seed: int, *indices: int) -> int:
    """Derive an independent child seed from a master seed and index path.

    Deterministic and collision-resistant in practice: distinct index paths
    give unrelated Philox keys, so Monte Carlo results are independent of
    how realizations are distributed over threads or processes.
    """
    h = _mix64(int(master_seed) & _MASK64)
    for ix in indices:
        h = _mix64(h ^ ((int(ix) + 1) * _GOLDEN64 & _MASK64))
    return h


def draw_disorder(seed: int, strength: float, n_diag: int, n_bonds: int) -> DisorderRealization:
    """Draw one disorder realization from a counter-based generator.

    Parameters
    ----------
    seed : int
        Philox key, typically from :func:`stream_seed`.
    strength : float
        Dimensionless disorder strength E.
    n_diag : int
        Number of diagonal entries to draw (1 for the correlated default).
    n_bonds : int
        Number of bond entries to draw.

    Returns
    -------
    DisorderRealization
        Uniform i.i.d. entries in [-1/2, 1/2]; identical for identical
        ``(seed, n_diag, n_bonds)``.
    """
    rng = np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
    u = rng.random(n_diag + n_bonds) - 0.5
    return DisorderRealization(
        seed=int(seed), strength=float(strength), diag_d=u[:n_diag], offdiag_d=u[n_diag:]
    )


def coupling_pattern(protocol: str, n_sites: int, Delta: float, delta: float) -> np.ndarray:
    """Bond couplings ``J_1 .. J_{N-1}`` for a protocol.

    P1 alternates weak/strong outward from weak end bonds with a weak-weak
    pair at the center, e.g. ``[d, D, d, d, D, d]`` for N = 7; P2 is
    ``[d, D, ..., D, d]``.  Both patterns are mirror symmetric.
    """
    proto = str(protocol).upper()
    if proto == "P1":
        if n_sites % 4 != 3:
            raise ValueError(f"P1 requires N = 3 (mod 4), got N={n_sites}")
        half = [delta] + [Delta, delta] * ((n_sites - 3) // 4)
        return np.array(half + half[::-1], dtype=float)
    if proto == "P2":
        if n_sites < 3:
            raise ValueError(f"P2 requires N >= 3, got N={n_sites}")
        return np.array([delta] + [Delta] * (n_sites - 3) + [delta], dtype=float)
    raise ValueError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")


def field_profile(spec: ChainSpec) -> np.ndarray:
    """Clean on-site fields: ``boundary_field`` at the ends, ``bulk_field`` inside."""
    fields = np.full(spec.N, spec.bulk_field, dtype=float)
    fields[0] = spec.boundary_field
    fields[-1] = spec.boundary_field
    return fields


def _default_diag_sites(spec: ChainSpec) -> tuple[int, ...]:
    return (1, spec.N)


def _check_disorder_args(mode: str, realization: DisorderRealization | None) -> None:
    if mode not in DISORDER_MODES:
        raise ValueError(f"disorder_mode must be one of {DISORDER_MODES}, got {mode!r}")
    if mode != "none" and realization is None:
        raise ValueError(f"disorder_mode={mode!r} requires a DisorderRealization")


def couplings_with_disorder(
    spec: ChainSpec,
    realization: DisorderRealization | None = None,
    disorder_mode: str = "none",
) -> np.ndarray:
    """Bond couplings including off-diagonal disorder ``J_i + E*delta*d_i``."""
    _check_disorder_args(disorder_mode, realization)
    couplings = coupling_pattern(spec.protocol, spec.N, spec.Delta, spec.delta)
    if disorder_mode in ("offdiag", "both"):
        if realization.offdiag_d.size != spec.n_bonds:
            raise ValueError(
                f"offdiag_d has {realization.offdiag_d.size} entries, chain has {spec.n_bonds} bonds"
            )
        couplings = couplings + realization.strength * spec.delta * realization.offdiag_d
    return couplings


def fields_with_disorder(
    spec: ChainSpec,
    realization: DisorderRealization | None = None,
    disorder_mode: str = "none",
    diag_sites: Sequence[int] | None = None,
) -> np.ndarray:
    """On-site fields including diagonal disorder ``B_j + E*delta*d_j``.

    ``diag_sites`` defaults to the two boundary sites.  A single ``diag_d``
    entry is broadcast to every disordered site (correlated draw, the
    default produced by the sweep layer); otherwise one entry per site is
    required.
    """
    _check_disorder_args(disorder_mode, realization)
    fields = field_profile(spec)
    if disorder_mode in ("diag", "both"):
        sites = tuple(diag_sites) if diag_sites is not None else _default_diag_sites(spec)
        if not sites or min(sites) < 1 or max(sites) > spec.N:
            raise ValueError(f"diag sites must lie in 1..{spec.N}, got {sites}")
        d = realization.diag_d
        if d.size == 1:
            d = np.full(len(sites), d[0])
        elif d.size != len(sites):
            raise ValueError(
                f"diag_d has {d.size} entries but {len(sites)} sites are disordered"
            )
        idx = np.asarray(sites, dtype=int) - 1
        np.add.at(fields, idx, realization.strength * spec.delta * d)
    return fields


def build_hamiltonian(
    spec: ChainSpec,
    realization: DisorderRealization | None = None,
    disorder_mode: str = "none",
    diag_sites: Sequence[int] | None = None,
) -> Operator:
    """Assemble the full-space XX Hamiltonian.

    Returns a Hermitian Operator in the full product basis, dense for
    dimensions up to 1024 and sparse CSR above.  Entry values are assembled
    in a fixed order, so identical inputs give bitwise-identical matrices.
    """
    basis = FullBasis(n_sites=spec.N, spin=spec.spin)
    couplings = couplings_with_disorder(spec, realization, disorder_mode)
    fields = fields_with_disorder(spec, realization, disorder_mode, diag_sites)
    ops = spin_matrices(spec.spin)
    d = spec.site_dim
    # bond block 1/2 (S+ S- + S- S+) acting on two adjacent sites, real
    pair = 0.5 * (np.kron(ops.sp, ops.sm) + np.kron(ops.sm, ops.sp)).real
    ham = sparse.csr_matrix((basis.dim, basis.dim))
    for b in range(spec.n_bonds):
        left = sparse.identity(d**b, format="csr")
        right = sparse.identity(d ** (spec.N - b - 2), format="csr")
        term = sparse.kron(sparse.kron(left, sparse.csr_matrix(pair)), right, format="csr")
        ham = ham + couplings[b] * term
    diag = site_m_table(basis) @ fields
    ham = ham + sparse.diags(diag, format="csr")
    if basis.dim <= 1024:
        return Operator(matrix=ham.toarray(), basis=basis, hermitian=True)
    return Operator(matrix=ham, basis=basis, hermitian=True)


_TEMPLATE_CACHE: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}


def sector_templates(basis: SectorBasis) -> tuple[np.ndarray, np.ndarray]:
    """Unit-coupling bond matrices and site magnetization table for a sector.

    Returns ``(bonds, m_table)`` where ``bonds[b]`` is the sector matrix of
    ``1/2 (S+_b S-_{b+1} + h.c.)`` for bond b (real symmetric, shape
    (dim, dim)) and ``m_table`` has shape (dim, n_sites).  Any sector
    Hamiltonian is then ``einsum('b,bij->ij', J, bonds) + diag(m_table @ B)``,
    which is what the Monte Carlo layer vectorizes over realizations.
    """
    key = (basis.n_sites, basis.spin.two_s, basis.two_total_m)
    hit = _TEMPLATE_CACHE.get(key)
    if hit is not None:
        return hit
    dim = basis.dim
    two_s = basis.spin.two_s
    s = basis.spin.s
    n_bonds = basis.n_sites - 1
    bonds = np.zeros((n_bonds, dim, dim))
    for i, st in enumerate(basis.states):
        for b in range(n_bonds):
            o_p, o_q = st[b], st[b + 1]
            # S+ on site b+1 (o_p -> o_p - 1), S- on site b+2 (o_q -> o_q + 1)
            if o_p >= 1 and o_q <= two_s - 1:
                m_p = s - o_p
                m_q = s - o_q
                amp = np.sqrt(s * (s + 1) - m_p * (m_p + 1)) * np.sqrt(
                    s * (s + 1) - m_q * (m_q - 1)
                )
                dst = st[:b] + (o_p - 1, o_q + 1) + st[b + 2 :]
                bonds[b, basis.index_of(dst), i] += 0.5 * amp
    bonds = bonds + np.swapaxes(bonds, 1, 2)
    m_table = basis.site_m_values()
    _TEMPLATE_CACHE[key] = (bonds, m_table)
    return bonds, m_table


def working_sector(spec: ChainSpec) -> SectorBasis:
    """Magnetization sector containing the protocol's initial state.

    P1 starts with both end spins fully excited, P2 with only the left end,
    all other sites in the ground level ``m = -s``.
    """
    n_excited = 2 if spec.protocol == "P1" else 1
    two_m = spec.spin.two_s * (2 * n_excited - spec.N)
    return sector_basis(spec.N, spec.spin, two_m / 2.0)


def initial_state(spec: ChainSpec) -> QuantumState:
    """Protocol initial product state as a sector-basis pure state."""
    sector = working_sector(spec)
    config = [spec.spin.two_s] * spec.N
    config[0] = 0
    if spec.protocol == "P1":
        config[-1] = 0
    vec = np.zeros(sector.dim, dtype=complex)
    vec[sector.index_of(tuple(config))] = 1.0
    return QuantumState(data=vec, basis=sector)


def sector_hamiltonian(
    spec: ChainSpec,
    realization: DisorderRealization | None = None,
    disorder_mode: str = "none",
    diag_sites: Sequence[int] | None = None,
    sector: SectorBasis | None = None,
) -> Operator:
    """Assemble the Hamiltonian directly in a magnetization sector.

    Much cheaper than building the full-space operator and projecting; the
    two routes agree exactly and the equivalence is covered by tests.
    ``sector`` defaults to the protocol's working sector.
    """
    if sector is None:
        sector = working_sector(spec)
    bonds, m_table = sector_templates(sector)
    couplings = couplings_with_disorder(spec, realization, disorder_mode)
    fields = fields_with_disorder(spec, realization, disorder_mode, diag_sites)
    ham = np.einsum("b,bij->ij", couplings, bonds)
    ham[np.diag_indices_from(ham)] += m_table @ fields
    return Operator(matrix=ham, basis=sector, hermitian=True)
