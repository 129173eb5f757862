"""Experiment engine: disorder Monte Carlo, dephasing sweeps, field scans.

Determinism contract: every sweep output is a pure function of its
configuration and master seed.  Each (grid point, realization) pair gets an
independent counter-based RNG stream derived from ``(master_seed, grid
index, realization index)``, and aggregation happens in fixed realization
order, so results are bit-identical for any thread count.

Per grid point the Monte Carlo loop is vectorized: all realization
Hamiltonians are assembled from cached sector bond templates, diagonalized
as one stacked eigenproblem, and propagated in chunks.  Peak negativities
are then refined per realization by golden-section search between the
bracketing grid times.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import (
    ChainSpec,
    couplings_with_disorder,
    draw_disorder,
    fields_with_disorder,
    initial_state,
    sector_hamiltonian,
    sector_templates,
    stream_seed,
    working_sector,
)
from .dynamics import UnitaryPropagator, evolve_lindblad
from .effective import trimer_eta
from .measures import (
    PeakRecord,
    _pair_series_from_arrays,
    bulk_population_series,
    end_pair_series,
    golden_section_max,
    negativity_series,
    peak_scan,
)

__all__ = [
    "SweepConfig",
    "SweepResult",
    "FieldScanResult",
    "AXES",
    "default_horizon",
    "negativity_trajectory",
    "clean_peak",
    "run_disorder_sweep",
    "run_dephasing_sweep",
    "scan_boundary_field",
    "optimize_boundary_field",
    "resolve_threads",
]

AXES = (
    "disorder_diag",
    "disorder_offdiag",
    "disorder_both",
    "dephasing_gamma",
    "boundary_field",
)

_DISORDER_AXES = AXES[:3]
_AXIS_TO_MODE = {
    "disorder_diag": "diag",
    "disorder_offdiag": "offdiag",
    "disorder_both": "both",
}


@dataclass(frozen=True)
class SweepConfig:
    """One sweep experiment: a chain, an axis, a grid and sampling settings.

    ``t_max`` of None selects a per-axis default (see
    :func:`default_horizon`); ``diag_correlated`` selects a single shared
    diagonal draw for all disordered sites (the default, modelling a common
    miscalibration of the tuned boundary field) versus independent per-site
    draws.  ``realizations`` is forced to 1 on the deterministic axes.
    """

    base: ChainSpec
    axis: str
    grid: tuple[float, ...]
    realizations: int = 1000
    master_seed: int = 0
    t_max: float | None = None
    dt: float = 0.02
    record_bulk: bool = False
    diag_sites: tuple[int, ...] | None = None
    diag_correlated: bool = True
    time_tol: float = 1e-3

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.axis != "boundary_field" and grid[0] < 0.0:
            raise ValueError(f"{self.axis} grid values must be nonnegative")
        object.__setattr__(self, "grid", grid)
        if self.realizations < 1:
            raise ValueError(f"realizations must be at least 1, got {self.realizations}")
        if self.axis not in _DISORDER_AXES:
            object.__setattr__(self, "realizations", 1)
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.diag_sites is not None:
            sites = tuple(sorted(set(int(s) for s in self.diag_sites)))
            if not sites or sites[0] < 1 or sites[-1] > self.base.N:
                raise ValueError(f"diag_sites must lie in 1..{self.base.N}")
            object.__setattr__(self, "diag_sites", sites)

    def resolved_diag_sites(self) -> tuple[int, ...]:
        return self.diag_sites if self.diag_sites is not None else (1, self.base.N)

    def n_diag_draws(self) -> int:
        return 1 if self.diag_correlated else len(self.resolved_diag_sites())

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form of the configuration."""
        payload = {
            "chain": self.base.to_config_dict(),
            "axis": self.axis,
            "grid": list(self.grid),
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "t_max": self.t_max,
            "dt": self.dt,
            "record_bulk": self.record_bulk,
            "diag_sites": list(self.diag_sites) if self.diag_sites is not None else None,
            "diag_correlated": self.diag_correlated,
            "time_tol": self.time_tol,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class SweepResult:
    """Per-grid-point Monte Carlo statistics of the peak negativity.

    ``std_peak`` is the population standard deviation (matching error bars
    quoted as "standard deviation from the mean"), exactly 0 for a single
    realization or zero disorder.  ``counts`` is realizations minus
    exclusions.  ``max_bulk`` is present when bulk tracking was requested.
    """

    axis: str
    grid: np.ndarray
    mean_peak: np.ndarray
    std_peak: np.ndarray
    mean_peak_time: np.ndarray
    counts: np.ndarray
    max_bulk: np.ndarray | None
    master_seed: int
    config_hash: str


@dataclass(frozen=True)
class FieldScanResult:
    """Negativity over a (time, boundary field) grid; columns follow ``grid``."""

    times: np.ndarray
    grid: np.ndarray
    matrix: np.ndarray
    config_hash: str


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else SPINLAB_THREADS, else 1.

    A value of 0 requests one worker per CPU.  Thread count never affects
    results, only wall time.
    """
    if threads is None:
        env = os.environ.get("SPINLAB_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ValueError(f"threads must be nonnegative, got {threads}")
    return threads


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def default_horizon(spec: ChainSpec, purpose: str = "evolve") -> float:
    """Default peak-search horizon in 1/coupling units.

    ``evolve``: four times the expected peak time (trimer prediction for P1,
    fallback 60/delta for P2).  Disorder and dephasing sweeps instead use
    twice the clean-chain peak time, computed by the callers.
    """
    if purpose == "scan":
        return 30.0 / spec.delta
    if spec.protocol == "P1":
        t_exp = trimer_eta(spec.Delta, spec.delta, 0.5).t_entangle
        if math.isfinite(t_exp):
            return 4.0 * t_exp
    return 60.0 / spec.delta


def _time_grid(t_max: float, dt: float) -> np.ndarray:
    return np.arange(0.0, t_max + 0.5 * dt, dt)


def negativity_trajectory(
    spec: ChainSpec,
    times: np.ndarray,
    realization=None,
    disorder_mode: str = "none",
    diag_sites=None,
):
    """Sector-blocked unitary evolution with the negativity series attached.

    Returns ``(trajectory, refine)`` where ``refine(t)`` re-evaluates the
    normalized negativity at an arbitrary time for peak refinement.
    """
    ham = sector_hamiltonian(spec, realization, disorder_mode, diag_sites)
    prop = UnitaryPropagator.from_hamiltonian(ham)
    psi0 = initial_state(spec)
    traj = prop.evolve(psi0, np.asarray(times, float))
    d = spec.site_dim
    traj.negativity = negativity_series(end_pair_series(traj), d)
    basis = ham.basis

    def refine(t: float) -> float:
        psi = prop.state_at(psi0, t)
        pair = _pair_series_from_arrays(psi[None, :], basis)
        return float(negativity_series(pair, d)[0])

    return traj, refine


def clean_peak(
    spec: ChainSpec,
    t_max: float | None = None,
    dt: float = 0.02,
    time_tol: float = 1e-3,
) -> PeakRecord:
    """Peak normalized negativity of the clean chain (refined)."""
    horizon = t_max if t_max is not None else default_horizon(spec)
    traj, refine = negativity_trajectory(spec, _time_grid(horizon, dt))
    return peak_scan(traj, refine=refine, time_tol=time_tol)


# -- disorder Monte Carlo ----------------------------------------------------

def _negativity_of_pair(pair: np.ndarray, d: int) -> float:
    return float(negativity_series(pair[None, ...], d)[0])


def _pair_of_vector(psi: np.ndarray, basis) -> np.ndarray:
    return _pair_series_from_arrays(psi[None, :], basis)[0]


def _peak_of_realization(
    energies: np.ndarray,
    vectors: np.ndarray,
    coeff: np.ndarray,
    negs: np.ndarray,
    times: np.ndarray,
    basis,
    d: int,
    time_tol: float,
) -> tuple[float, float]:
    """Grid peak of one realization plus golden-section refinement."""
    i = int(np.argmax(negs))
    value = float(negs[i])
    t_peak = float(times[i])
    if 0 < i < negs.size - 1:
        def refine(t: float) -> float:
            psi = vectors @ (np.exp(-1j * t * energies) * coeff)
            return _negativity_of_pair(_pair_of_vector(psi, basis), d)

        t_ref, v_ref = golden_section_max(refine, float(times[i - 1]), float(times[i + 1]), time_tol)
        if v_ref > value:
            value, t_peak = float(v_ref), float(t_ref)
    return value, t_peak


def _disorder_point(cfg: SweepConfig, gi: int, strength: float, times: np.ndarray):
    """All realizations of one disorder grid point, vectorized.

    Returns (peaks, peak_times, max_bulks, n_excluded), each array holding
    only the successful realizations in realization order.
    """
    spec = cfg.base
    mode = _AXIS_TO_MODE[cfg.axis]
    sector = working_sector(spec)
    bonds, m_table = sector_templates(sector)
    dim = sector.dim
    d = spec.site_dim
    psi0_idx = int(np.argmax(np.abs(initial_state(spec).data)))
    diag_sites = cfg.resolved_diag_sites()
    n_diag = cfg.n_diag_draws() if mode in ("diag", "both") else 0
    n_bonds = spec.n_bonds if mode in ("offdiag", "both") else 0

    reals = []
    for r in range(cfg.realizations):
        seed = stream_seed(cfg.master_seed, gi, r)
        reals.append(draw_disorder(seed, strength, n_diag, n_bonds))
    j_stack = np.empty((cfg.realizations, spec.n_bonds))
    b_stack = np.empty((cfg.realizations, spec.N))
    for r, real in enumerate(reals):
        j_stack[r] = couplings_with_disorder(spec, real, mode)
        b_stack[r] = fields_with_disorder(spec, real, mode, diag_sites)

    peaks, peak_times, max_bulks = [], [], []
    excluded = 0
    bulk_w = (m_table + spec.spin.s)[:, 1:-1].sum(axis=1)
    # chunk the realization batch so the (chunk, T, dim) state stacks stay small
    chunk = max(1, min(64, int(6e7 // (times.size * dim * 16))))
    for lo in range(0, cfg.realizations, chunk):
        hi = min(lo + chunk, cfg.realizations)
        ham = np.einsum("rb,bij->rij", j_stack[lo:hi], bonds)
        idx = np.arange(dim)
        ham[:, idx, idx] += b_stack[lo:hi] @ m_table.T
        try:
            energies, vectors = np.linalg.eigh(ham)
        except np.linalg.LinAlgError:
            excluded += hi - lo
            continue
        coeff = vectors[:, psi0_idx, :].conj()
        phases = np.exp(-1j * times[None, :, None] * energies[:, None, :]) * coeff[:, None, :]
        psis = np.einsum("rtk,rdk->rtd", phases, vectors)
        if cfg.record_bulk:
            bulk = (np.abs(psis) ** 2) @ bulk_w
        # pair reduction per realization keeps the (T, d^2, d^2) stacks small
        for rr in range(hi - lo):
            negs = negativity_series(_pair_series_from_arrays(psis[rr], sector), d)
            value, t_peak = _peak_of_realization(
                energies[rr], vectors[rr], coeff[rr], negs,
                times, sector, d, cfg.time_tol,
            )
            peaks.append(value)
            peak_times.append(t_peak)
            if cfg.record_bulk:
                max_bulks.append(float(bulk[rr].max()))
    return np.array(peaks), np.array(peak_times), np.array(max_bulks), excluded


def run_disorder_sweep(cfg: SweepConfig, threads: int | None = None) -> SweepResult:
    """Monte Carlo peak-negativity statistics along a disorder axis.

    For each grid strength E and realization r an independent stream seeded
    from ``(master_seed, grid index, r)`` draws the disorder, the sector
    Hamiltonian is diagonalized, and the refined peak negativity within the
    horizon is recorded.  The horizon defaults to twice the clean-chain peak
    time.  Realizations whose eigensolve fails are excluded (the run aborts
    if more than 1% are lost).
    """
    if cfg.axis not in _DISORDER_AXES:
        raise ValueError(f"run_disorder_sweep needs a disorder axis, got {cfg.axis!r}")
    threads = resolve_threads(threads)
    clean = clean_peak(cfg.base, dt=cfg.dt, time_tol=cfg.time_tol)
    horizon = cfg.t_max if cfg.t_max is not None else 2.0 * clean.time
    times = _time_grid(horizon, cfg.dt)

    def one_point(item):
        gi, strength = item
        if strength == 0.0:
            return (
                np.array([clean.value]), np.array([clean.time]),
                np.array([_clean_max_bulk(cfg, times)]) if cfg.record_bulk else np.array([]),
                0, True,
            )
        peaks, ptimes, bulks, excluded = _disorder_point(cfg, gi, strength, times)
        return peaks, ptimes, bulks, excluded, False

    results = _parallel_map(one_point, list(enumerate(cfg.grid)), threads)

    n_pts = len(cfg.grid)
    mean = np.empty(n_pts)
    std = np.empty(n_pts)
    mean_time = np.empty(n_pts)
    counts = np.empty(n_pts, dtype=np.int64)
    bulk_out = np.full(n_pts, np.nan) if cfg.record_bulk else None
    total_requested = total_excluded = 0
    for gi, (peaks, ptimes, bulks, excluded, is_clean) in enumerate(results):
        if peaks.size == 0:
            raise RuntimeError(f"all realizations failed at grid point {gi}")
        mean[gi] = peaks.mean()
        # a deterministic point counts as the full requested sample with zero spread
        std[gi] = 0.0 if is_clean else peaks.std()
        mean_time[gi] = ptimes.mean()
        counts[gi] = cfg.realizations if is_clean else peaks.size
        if cfg.record_bulk and bulks.size:
            bulk_out[gi] = bulks.mean()
        if not is_clean:
            total_requested += cfg.realizations
            total_excluded += excluded
    if total_requested and total_excluded > 0.01 * total_requested:
        raise RuntimeError(
            f"{total_excluded}/{total_requested} realizations excluded (> 1%); aborting"
        )
    return SweepResult(
        axis=cfg.axis, grid=np.array(cfg.grid), mean_peak=mean, std_peak=std,
        mean_peak_time=mean_time, counts=counts, max_bulk=bulk_out,
        master_seed=cfg.master_seed, config_hash=cfg.config_hash(),
    )


def _clean_max_bulk(cfg: SweepConfig, times: np.ndarray) -> float:
    traj, _ = negativity_trajectory(cfg.base, times)
    return float(bulk_population_series(traj).max())


# -- dephasing sweep ---------------------------------------------------------

def run_dephasing_sweep(cfg: SweepConfig, threads: int | None = None) -> SweepResult:
    """Peak negativity versus dephasing rate (one deterministic run per point).

    Evolves the sector-blocked Lindblad equation for every grid gamma,
    refining the peak through the solver's dense output.  With
    ``record_bulk`` the time-maximum of the bulk population is tracked.
    The horizon defaults to twice the clean-chain peak time.
    """
    if cfg.axis != "dephasing_gamma":
        raise ValueError(f"run_dephasing_sweep needs axis 'dephasing_gamma', got {cfg.axis!r}")
    threads = resolve_threads(threads)
    spec = cfg.base
    clean = clean_peak(spec, dt=cfg.dt, time_tol=cfg.time_tol)
    horizon = cfg.t_max if cfg.t_max is not None else 2.0 * clean.time
    times = _time_grid(horizon, cfg.dt)
    ham = sector_hamiltonian(spec)
    sector = ham.basis
    d = spec.site_dim
    rho0 = initial_state(spec)

    def one_point(gamma: float):
        traj = evolve_lindblad(
            ham, rho0, gamma, times,
            dephasing_sites=spec.dephasing_sites, dense_output=True,
        )
        traj.negativity = negativity_series(end_pair_series(traj), d)

        def refine(t: float) -> float:
            pair = _pair_series_from_arrays(traj.interpolant(t)[None, ...], sector)
            return float(negativity_series(pair, d)[0])

        rec = peak_scan(traj, refine=refine, time_tol=cfg.time_tol)
        bulk = float(bulk_population_series(traj).max()) if cfg.record_bulk else np.nan
        return rec, bulk

    results = _parallel_map(one_point, list(cfg.grid), threads)
    mean = np.array([r.value for r, _ in results])
    mean_time = np.array([r.time for r, _ in results])
    bulk_out = np.array([b for _, b in results]) if cfg.record_bulk else None
    n_pts = len(cfg.grid)
    return SweepResult(
        axis=cfg.axis, grid=np.array(cfg.grid), mean_peak=mean,
        std_peak=np.zeros(n_pts), mean_peak_time=mean_time,
        counts=np.ones(n_pts, dtype=np.int64), max_bulk=bulk_out,
        master_seed=cfg.master_seed, config_hash=cfg.config_hash(),
    )


# -- boundary-field scan and optimization ------------------------------------

def scan_boundary_field(cfg: SweepConfig, threads: int | None = None) -> FieldScanResult:
    """Negativity on a (time, boundary field) grid for the dual-port protocol.

    Column j is the negativity time series of the clean chain with
    ``boundary_field = grid[j]``; the time grid spans ``t_max`` (default
    30/delta) in steps of ``dt``.
    """
    if cfg.axis != "boundary_field":
        raise ValueError(f"scan_boundary_field needs axis 'boundary_field', got {cfg.axis!r}")
    if cfg.base.protocol != "P2":
        raise ValueError("boundary-field scans apply to the dual-port protocol (P2)")
    threads = resolve_threads(threads)
    horizon = cfg.t_max if cfg.t_max is not None else default_horizon(cfg.base, "scan")
    times = _time_grid(horizon, cfg.dt)

    def one_column(b_value: float) -> np.ndarray:
        traj, _ = negativity_trajectory(cfg.base.with_updates(boundary_field=b_value), times)
        return traj.negativity

    columns = _parallel_map(one_column, list(cfg.grid), threads)
    return FieldScanResult(
        times=times, grid=np.array(cfg.grid),
        matrix=np.column_stack(columns), config_hash=cfg.config_hash(),
    )


def optimize_boundary_field(
    cfg: SweepConfig,
    b_range: tuple[float, float],
    tol: float = 1e-3,
    threads: int | None = None,
) -> tuple[float, PeakRecord]:
    """Best boundary field for the dual-port protocol.

    A coarse scan of at least 40 points over ``b_range`` is followed by
    golden-section refinement of B on the peak-over-time negativity
    objective.  Ties break toward smaller B; a flat objective (spread below
    1e-6) is reported with a warning and the smallest B returned.
    """
    if cfg.base.protocol != "P2":
        raise ValueError("boundary-field optimization applies to the dual-port protocol (P2)")
    b_lo, b_hi = float(b_range[0]), float(b_range[1])
    if not (math.isfinite(b_lo) and math.isfinite(b_hi)):
        raise ValueError(f"b_range must be finite, got {b_range}")
    if b_hi < b_lo:
        b_lo, b_hi = b_hi, b_lo
    threads = resolve_threads(threads)
    horizon = cfg.t_max if cfg.t_max is not None else default_horizon(cfg.base, "scan")
    times = _time_grid(horizon, cfg.dt)

    def evaluate(b_value: float) -> PeakRecord:
        traj, refine = negativity_trajectory(cfg.base.with_updates(boundary_field=b_value), times)
        return peak_scan(traj, refine=refine, time_tol=cfg.time_tol)

    if b_hi == b_lo:
        return b_lo, evaluate(b_lo)

    coarse_b = np.linspace(b_lo, b_hi, 41)
    coarse = _parallel_map(evaluate, list(coarse_b), threads)
    values = np.array([rec.value for rec in coarse])
    if values.max() - values.min() < 1e-6:
        warnings.warn("boundary-field objective is flat; returning smallest B")
        return float(coarse_b[0]), coarse[0]
    i = int(np.argmax(values))
    lo = coarse_b[max(i - 1, 0)]
    hi = coarse_b[min(i + 1, coarse_b.size - 1)]
    b_ref, v_ref = golden_section_max(lambda b: evaluate(b).value, float(lo), float(hi), tol)
    if v_ref > values[i] or (v_ref == values[i] and b_ref < coarse_b[i]):
        b_star = float(b_ref)
    else:
        b_star = float(coarse_b[i])
    return b_star, evaluate(b_star)
