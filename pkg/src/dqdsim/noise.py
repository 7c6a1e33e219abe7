"""Quasi-static charge-noise sampling and parameter-fluctuation statistics.

A noise realization is one i.i.d. zero-mean Gaussian energy offset per grid
cell, drawn from a counter-based generator keyed by (seed, sample_index) so
any sample is reproducible in isolation and sweeps parallelize without
sequence coupling. The same standard-normal field scaled by sigma serves a
whole sigma sweep (common random numbers), which keeps fidelity-vs-sigma
curves smooth sample by sample.

Each sample re-solves the single-particle eigenproblem on the frozen
converged potential plus the noise field (no self-consistent re-loop: the
noise scale is micro-eV against a many-meV landscape, and re-running the
loop for every sample would dominate the Monte Carlo cost), then recomputes
the Zeeman splittings and the exchange coupling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .device import DeviceBiases, DeviceSpec, Grid, MaterialParams, build_grid
from .dots import (
    DEFAULT_COULOMB_LENGTH_NM,
    MagnetFieldMap,
    exchange_energy,
    zeeman_splittings,
)
from .errors import ConfigurationError, NumericalError
from .params import SpinParams
from .schrodinger import ConvergedSolution, self_consistent_solve, solve_eigenstates

UEV_EV = 1e-6


@dataclass(frozen=True)
class NoiseConfig:
    sigma_uev: float
    seed: int
    n_samples: int = 1

    def __post_init__(self):
        if self.sigma_uev < 0:
            raise ConfigurationError("noise sigma must be >= 0")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")


@dataclass
class NoiseField:
    values_ev: np.ndarray
    seed: int
    sample_index: int
    sigma_uev: float


def standard_normal_field(grid: Grid, seed: int, sample_index: int) -> np.ndarray:
    """Unit-variance field for (seed, sample_index); independent per key."""
    bits = np.random.Philox(key=[np.uint64(seed & (2**64 - 1)),
                                 np.uint64(sample_index)])
    return np.random.Generator(bits).standard_normal((grid.ny, grid.nx))


def sample_noise(grid: Grid, cfg: NoiseConfig, sample_index: int) -> NoiseField:
    """One noise realization in eV; sigma = 0 yields the exact zero field."""
    if cfg.sigma_uev == 0.0:
        vals = np.zeros((grid.ny, grid.nx))
    else:
        vals = (cfg.sigma_uev * UEV_EV) * standard_normal_field(
            grid, cfg.seed, sample_index
        )
    return NoiseField(values_ev=vals, seed=cfg.seed,
                      sample_index=sample_index, sigma_uev=cfg.sigma_uev)


def perturbed_spin_params(solution: ConvergedSolution, noise: NoiseField,
                          field_map: MagnetFieldMap, grid: Grid,
                          mat: MaterialParams,
                          coulomb_length_nm: float = DEFAULT_COULOMB_LENGTH_NM
                          ) -> SpinParams:
    """Spin parameters of the noise-disturbed potential."""
    if noise.values_ev.shape != solution.potential_ev.shape:
        raise ConfigurationError("noise field shape does not match the grid")
    u = solution.potential_ev + noise.values_ev
    try:
        spectrum = solve_eigenstates(u, grid, mat,
                                     solution.spectrum.n_states)
    except NumericalError as exc:
        exc.diagnostics["sample_index"] = noise.sample_index
        raise
    sol = replace(solution, potential_ev=u, spectrum=spectrum)
    e_zl, e_zr = zeeman_splittings(sol, field_map, grid)
    j_hz = exchange_energy(sol, grid, mat, coulomb_length_nm)
    return SpinParams(e_zl_hz=e_zl, e_zr_hz=e_zr, j_hz=j_hz,
                      v_m_mv=solution.biases.v_m * 1e3)


@dataclass
class FluctStats:
    sigma_uev: float
    v_m_mv: float
    n_samples: int
    n_failures: int
    stats: dict            # quantity -> {mean, std, min, max} in Hz
    samples: np.ndarray    # (n_ok, 3) columns E_ZL, E_ZR, J in Hz

    def to_csv_rows(self):
        rows = []
        for q in ("E_ZL", "E_ZR", "J"):
            s = self.stats[q]
            rows.append((self.sigma_uev, q, s["mean"], s["std"],
                         self.n_samples - self.n_failures))
        return rows


def _aggregate(sigma_uev, v_m_mv, n_samples, n_failures, rows) -> FluctStats:
    arr = np.asarray(rows, dtype=float)
    stats = {}
    for j, q in enumerate(("E_ZL", "E_ZR", "J")):
        col = arr[:, j]
        stats[q] = {
            "mean": float(col.mean()),
            "std": float(col.std(ddof=1)) if col.size > 1 else 0.0,
            "min": float(col.min()),
            "max": float(col.max()),
        }
    return FluctStats(sigma_uev=sigma_uev, v_m_mv=v_m_mv, n_samples=n_samples,
                      n_failures=n_failures, stats=stats, samples=arr)


def fluctuation_stats(spec: DeviceSpec, mat: MaterialParams,
                      biases: DeviceBiases, field_map: MagnetFieldMap,
                      cfg: NoiseConfig, *, grid: Grid | None = None,
                      solution: ConvergedSolution | None = None,
                      coulomb_length_nm: float = DEFAULT_COULOMB_LENGTH_NM,
                      max_failure_fraction: float = 0.01,
                      **solve_kwargs) -> FluctStats:
    """Per-quantity {mean, std, min, max} over n noise samples.

    Per-sample failures are counted and skipped; more than
    `max_failure_fraction` failing aborts with diagnostics. Deterministic
    for a fixed (seed, n_samples).
    """
    if cfg.n_samples < 2:
        raise ConfigurationError("fluctuation statistics need n_samples >= 2")
    grid = grid or build_grid(spec)
    if solution is None:
        solution = self_consistent_solve(spec, mat, biases, grid=grid,
                                         **solve_kwargs)
    rows = []
    failures = 0
    for i in range(1, cfg.n_samples + 1):
        noise = sample_noise(grid, cfg, i)
        try:
            p = perturbed_spin_params(solution, noise, field_map, grid, mat,
                                      coulomb_length_nm)
        except NumericalError:
            failures += 1
            if failures > max_failure_fraction * cfg.n_samples:
                raise
            continue
        rows.append((p.e_zl_hz, p.e_zr_hz, p.j_hz))
    return _aggregate(cfg.sigma_uev, biases.v_m * 1e3, cfg.n_samples,
                      failures, rows)
