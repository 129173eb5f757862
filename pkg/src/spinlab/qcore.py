"""Spin operators, tensor-product embedding and magnetization sectors.

Conventions used throughout the package:

* Sites are numbered 1..N.  Site 1 is the leftmost tensor factor, i.e. the
  slowest-varying index of the product basis.
* Within a site the local basis is ordered by decreasing magnetic quantum
  number, ``m = s, s-1, ..., -s``.  Local index 0 is therefore the fully
  excited level ``|1> = |m=+s>`` and the last index is the ground level
  ``|0> = |m=-s>``.
* A magnetization sector collects all product states with a fixed total
  ``sum_i m_i``.  Sector states are the local-index tuples sorted in
  ascending lexicographic order, which coincides with ascending full-space
  index order.

Half-integer magnetizations are stored internally as the integer ``2*m`` so
sector bookkeeping stays exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import NamedTuple

import numpy as np
import scipy.sparse as sparse

__all__ = [
    "Spin",
    "FullBasis",
    "SectorBasis",
    "Operator",
    "SpinOperators",
    "spin_matrices",
    "embed_site",
    "sector_basis",
    "project_to_sector",
    "site_m_table",
]


@dataclass(frozen=True)
class Spin:
    """Spin quantum number, stored as the integer ``2s``."""

    two_s: int

    def __post_init__(self) -> None:
        if self.two_s < 1:
            raise ValueError(f"spin must be positive, got 2s={self.two_s}")

    @staticmethod
    def from_value(value) -> "Spin":
        """Build from ``0.5``, ``1``, ``'1/2'``, ``'3/2'`` or a Spin."""
        if isinstance(value, Spin):
            return value
        frac = Fraction(value)
        snapped = frac.limit_denominator(2)  # absorb float fuzz only
        if abs(float(snapped - frac)) > 1e-9:
            raise ValueError(f"spin must be integer or half-integer, got {value}")
        two_s = snapped * 2
        return Spin(int(two_s))

    @property
    def s(self) -> float:
        return self.two_s / 2.0

    @property
    def dim(self) -> int:
        """Local Hilbert-space dimension ``2s + 1``."""
        return self.two_s + 1

    @property
    def label(self) -> str:
        """Human-readable value, e.g. ``'1/2'`` or ``'1'``."""
        return str(Fraction(self.two_s, 2))

    def m_values(self) -> np.ndarray:
        """Magnetic quantum numbers in local basis order (descending)."""
        return self.s - np.arange(self.dim)


@dataclass(frozen=True)
class FullBasis:
    """Full tensor-product basis of ``n_sites`` identical spins."""

    n_sites: int
    spin: Spin

    def __post_init__(self) -> None:
        if self.n_sites < 1:
            raise ValueError("n_sites must be at least 1")

    @property
    def site_dim(self) -> int:
        return self.spin.dim

    @property
    def dim(self) -> int:
        return self.site_dim**self.n_sites


@dataclass(frozen=True)
class SectorBasis:
    """Fixed total-magnetization subspace of a spin chain.

    ``states`` holds one local-index tuple per basis vector, in ascending
    lexicographic (equivalently ascending full-space index) order.
    """

    n_sites: int
    spin: Spin
    two_total_m: int
    states: tuple[tuple[int, ...], ...]
    _index: dict = field(repr=False, compare=False, default=None)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def total_m(self) -> float:
        return self.two_total_m / 2.0

    @property
    def quanta(self) -> int:
        """Total excitation number ``sum_i (s - m_i)`` above the all-up state
        measured from the fully excited end, i.e. ``sum_i (m_i + s)`` counted
        from the ground state ``|m=-s>^N``."""
        return (self.n_sites * self.spin.two_s + self.two_total_m) // 2

    def index_of(self, config: tuple[int, ...]) -> int:
        """Sector index of a local-index tuple."""
        lut = object.__getattribute__(self, "_index")
        if lut is None:
            lut = {st: i for i, st in enumerate(self.states)}
            object.__setattr__(self, "_index", lut)
        return lut[config]

    def full_indices(self) -> np.ndarray:
        """Full-space index of every sector state (strictly increasing)."""
        d = self.spin.dim
        weights = d ** np.arange(self.n_sites - 1, -1, -1)
        return np.asarray(self.states, dtype=np.int64) @ weights

    def site_m_values(self) -> np.ndarray:
        """Array of shape (dim, n_sites): ``m_j`` for every state and site."""
        occ = np.asarray(self.states, dtype=np.float64)
        return self.spin.s - occ

    def occupations(self) -> np.ndarray:
        """Array of shape (dim, n_sites): excitation number ``m_j + s``."""
        occ = np.asarray(self.states, dtype=np.int64)
        return self.spin.two_s - occ


@dataclass(frozen=True)
class Operator:
    """Matrix together with the basis it acts on.

    The matrix may be a dense ndarray or a scipy sparse matrix; large
    full-space Hamiltonians are kept sparse.  ``hermitian=True`` is verified
    at construction time, so downstream code may rely on the flag instead of
    re-checking.
    """

    matrix: np.ndarray
    basis: FullBasis | SectorBasis
    hermitian: bool = False

    def __post_init__(self) -> None:
        mat = self.matrix
        if sparse.issparse(mat):
            mat = mat.tocsr()
        else:
            mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got {mat.shape}")
        if mat.shape[0] != self.basis.dim:
            raise ValueError(
                f"matrix dimension {mat.shape[0]} does not match basis dimension {self.basis.dim}"
            )
        if self.hermitian:
            diff = mat - mat.conj().T
            err = abs(diff).max() if sparse.issparse(diff) and diff.nnz else (
                0.0 if sparse.issparse(diff) else np.abs(diff).max(initial=0.0)
            )
            if err > 1e-12:
                raise ValueError("operator flagged hermitian but matrix is not")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        """Dense copy of the matrix."""
        if self.is_sparse:
            return self.matrix.toarray()
        return np.array(self.matrix)


class SpinOperators(NamedTuple):
    """Single-site spin matrices in the local basis (m descending)."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray


def spin_matrices(spin) -> SpinOperators:
    """Return the (2s+1)-dimensional matrices Sx, Sy, Sz, S+, S-.

    Matrix elements follow the standard ladder convention
    ``S+|s,m> = sqrt(s(s+1) - m(m+1)) |s,m+1>`` with the local basis ordered
    by descending m, so S+ has its nonzero entries on the superdiagonal.

    Parameters
    ----------
    spin : Spin or number or str
        Spin quantum number (``0.5``, ``'3/2'``, ...).

    Returns
    -------
    SpinOperators
        Named tuple of complex ndarrays ``(sx, sy, sz, sp, sm)``.
    """
    sp_obj = Spin.from_value(spin)
    s = sp_obj.s
    m = sp_obj.m_values()
    # amplitude for raising the state at column j (m[j]) up to row j-1
    amp = np.sqrt(s * (s + 1.0) - m[1:] * (m[1:] + 1.0))
    plus = np.zeros((sp_obj.dim, sp_obj.dim), dtype=complex)
    plus[np.arange(sp_obj.dim - 1), np.arange(1, sp_obj.dim)] = amp
    minus = plus.conj().T
    sx = 0.5 * (plus + minus)
    sy = -0.5j * (plus - minus)
    sz = np.diag(m.astype(complex))
    return SpinOperators(sx=sx, sy=sy, sz=sz, sp=plus, sm=minus)


def embed_site(site_op: np.ndarray, site: int, basis: FullBasis) -> Operator:
    """Embed a single-site matrix into the full chain Hilbert space.

    Builds ``1 x ... x A x ... x 1`` with ``A`` at position ``site``
    (1-based, site 1 being the slowest tensor factor).

    Parameters
    ----------
    site_op : ndarray
        Local ``(d, d)`` matrix.
    site : int
        Target site in 1..n_sites.
    basis : FullBasis
        Target full basis.

    Returns
    -------
    Operator
        Embedded operator in ``basis``.
    """
    site_op = np.asarray(site_op)
    d = basis.site_dim
    if site_op.shape != (d, d):
        raise ValueError(f"site operator must be ({d}, {d}), got {site_op.shape}")
    if not 1 <= site <= basis.n_sites:
        raise ValueError(f"site must lie in 1..{basis.n_sites}, got {site}")
    left = d ** (site - 1)
    right = d ** (basis.n_sites - site)
    mat = np.kron(np.kron(np.eye(left), site_op), np.eye(right))
    herm = bool(np.allclose(site_op, site_op.conj().T, rtol=0.0, atol=1e-12))
    return Operator(matrix=mat, basis=basis, hermitian=herm)


_SECTOR_CACHE: dict[tuple[int, int, int], SectorBasis] = {}


def sector_basis(n_sites: int, spin, total_m) -> SectorBasis:
    """Enumerate the fixed total-magnetization sector of a chain.

    Parameters
    ----------
    n_sites : int
        Chain length.
    spin : Spin or number or str
        Local spin.
    total_m : number or Fraction
        Desired total magnetization ``sum_i m_i``.  Must be attainable, i.e.
        ``|total_m| <= n_sites * s`` with the correct half-integer parity.

    Returns
    -------
    SectorBasis
        States sorted in ascending lexicographic order over local indices,
        which matches ascending full-space index order.
    """
    sp_obj = Spin.from_value(spin)
    two_m = Fraction(total_m) * 2
    if two_m.denominator != 1:
        raise ValueError(f"total_m must be integer or half-integer, got {total_m}")
    two_m = int(two_m)
    max_two_m = n_sites * sp_obj.two_s
    quanta2 = max_two_m + two_m
    if quanta2 < 0 or quanta2 > 2 * max_two_m or quanta2 % 2 != 0:
        raise ValueError(
            f"total_m={total_m} is not attainable for {n_sites} spin-{sp_obj.label} sites"
        )
    key = (n_sites, sp_obj.two_s, two_m)
    hit = _SECTOR_CACHE.get(key)
    if hit is not None:
        return hit
    # local index o relates to m by o = s - m, so the sector constraint is
    # sum_i o_i = n_sites*s - total_m
    target = (max_two_m - two_m) // 2
    states = tuple(
        cfg
        for cfg in product(range(sp_obj.dim), repeat=n_sites)
        if sum(cfg) == target
    )
    basis = SectorBasis(
        n_sites=n_sites, spin=sp_obj, two_total_m=two_m, states=states
    )
    _SECTOR_CACHE[key] = basis
    return basis


def site_m_table(basis: FullBasis | SectorBasis) -> np.ndarray:
    """Per-basis-state magnetic quantum numbers, shape (dim, n_sites).

    Row i gives ``m_j`` for every site j of basis state i, in either the full
    product basis (mixed-radix decomposition of the index) or a sector basis.
    """
    if isinstance(basis, SectorBasis):
        return basis.site_m_values()
    d = basis.site_dim
    idx = np.arange(basis.dim)
    digits = np.empty((basis.dim, basis.n_sites), dtype=np.int64)
    for j in range(basis.n_sites - 1, -1, -1):
        digits[:, j] = idx % d
        idx = idx // d
    return basis.spin.s - digits


def project_to_sector(op: Operator, sector: SectorBasis) -> Operator:
    """Restrict a full-space operator to a magnetization sector.

    The projection simply selects the rows and columns of the sector states;
    it preserves hermiticity.  It is exact for operators that commute with
    total ``S^z`` and a lossy truncation otherwise.
    """
    if not isinstance(op.basis, FullBasis):
        raise ValueError("project_to_sector expects an operator in the full basis")
    if op.basis.n_sites != sector.n_sites or op.basis.spin != sector.spin:
        raise ValueError("operator and sector describe different chains")
    idx = sector.full_indices()
    if op.is_sparse:
        sub = op.matrix[idx][:, idx].toarray()
    else:
        sub = op.matrix[np.ix_(idx, idx)]
    return Operator(matrix=sub, basis=sector, hermitian=op.hermitian)
