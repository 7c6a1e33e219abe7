"""Effective-mass eigenstates in the quantum well and the self-consistent loop.

The eigenproblem H = -(hbar^2/2) div(1/m* grad) + V is restricted to the
Quantum region (the buried Si well), with a hard wall on the region boundary.
Masses are anisotropic: `mass_lateral` acts along x, `mass_vertical` along
the growth direction. The well is a single rectangular block of cells, so the
discrete operator is assembled once per grid and reused with new potentials.

Occupation statistics treat each 2D eigenstate as a 1D subband that is free
along the long [001] axis of the device; the resulting line density times
|psi|^2 is the 3D electron density fed back into the Poisson solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import HBAR2_OVER_2M0, K_B_EV
from .device import (
    NM3_PER_CM3,
    DeviceBiases,
    DeviceSpec,
    Grid,
    MaterialParams,
    build_grid,
    bulk_charge,
    fermi_minus_half,
    solve_poisson,
)
from .errors import ConfigurationError, NonConvergenceError, NumericalError


@dataclass
class Spectrum:
    """Lowest eigenpairs on the Quantum region.

    wavefunctions[i] is a full-grid (ny, nx) real array, zero outside the
    region, normalized so sum(|psi|^2) dx dy = 1 (units nm^-1).
    """

    energies_ev: np.ndarray
    wavefunctions: np.ndarray          # (n_states, ny, nx)
    n_states: int

    def check_orthonormal(self, dx: float, dy: float, tol: float = 1e-10) -> float:
        flat = self.wavefunctions.reshape(self.n_states, -1)
        gram = flat @ flat.T * dx * dy
        err = float(np.max(np.abs(gram - np.eye(self.n_states))))
        if err > tol:
            raise NumericalError(f"eigenvectors not orthonormal: {err:.2e}")
        return err


def well_rows(grid: Grid) -> tuple[int, int]:
    """Row range [j0, j1) of the Quantum region."""
    rows = np.nonzero(grid.quantum_mask.any(axis=1))[0]
    if rows.size == 0:
        raise ConfigurationError("grid has no Quantum region")
    return int(rows[0]), int(rows[-1]) + 1


def _well_kinetic(grid: Grid, mat: MaterialParams) -> sp.csr_matrix:
    """Hard-wall kinetic operator on the well block (cached per grid)."""
    key = ("kinetic", mat.mass_lateral, mat.mass_vertical)
    if key in grid._cache:
        return grid._cache[key]
    j0, j1 = well_rows(grid)
    nr, nx = j1 - j0, grid.nx
    tx = HBAR2_OVER_2M0 / (mat.mass_lateral * grid.dx**2)
    ty = HBAR2_OVER_2M0 / (mat.mass_vertical * grid.dy**2)

    def idx(r, i):
        return r * nx + i

    n = nr * nx
    diag = np.full(n, 2.0 * tx + 2.0 * ty)  # interior + mirror wall terms
    rows, cols, vals = [], [], []
    rr, ii = np.meshgrid(np.arange(nr), np.arange(nx - 1), indexing="ij")
    a, b = idx(rr, ii).ravel(), idx(rr, ii + 1).ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [np.full(a.size, -tx)] * 2
    rr, ii = np.meshgrid(np.arange(nr - 1), np.arange(nx), indexing="ij")
    a, b = idx(rr, ii).ravel(), idx(rr + 1, ii).ravel()
    rows += [a, b]
    cols += [b, a]
    vals += [np.full(a.size, -ty)] * 2
    # mirror-ghost wall: boundary cells get an extra +t toward the wall face
    diag2 = diag.copy().reshape(nr, nx)
    diag2[:, 0] += tx
    diag2[:, -1] += tx
    diag2[0, :] += ty
    diag2[-1, :] += ty
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag2.ravel())
    kin = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    grid._cache[key] = kin
    return kin


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector sign: largest-magnitude entry positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        imax = int(np.argmax(np.abs(out[:, k])))
        if out[imax, k] < 0:
            out[:, k] = -out[:, k]
    return out


def solve_eigenstates(potential_ev: np.ndarray, grid: Grid, mat: MaterialParams,
                      n_states: int, method: str = "auto") -> Spectrum:
    """Lowest eigenpairs of the effective-mass Hamiltonian on the well.

    Parameters
    ----------
    potential_ev : full-grid (ny, nx) electron potential energy, eV.
    method : "auto" | "sparse" | "dense". The dense branch is the test
        oracle for small problems and the fallback for tiny grids.
    """
    if n_states < 2:
        raise ConfigurationError("n_states must be >= 2")
    if not np.all(np.isfinite(potential_ev)):
        raise ConfigurationError("potential contains non-finite entries")
    j0, j1 = well_rows(grid)
    v = potential_ev[j0:j1, :].ravel()
    kin = _well_kinetic(grid, mat)
    n = v.size
    if n_states >= n:
        raise ConfigurationError("n_states exceeds the Quantum-region size")
    h = kin + sp.diags(v)

    if method == "auto":
        method = "dense" if n <= 400 else "sparse"
    if method == "dense":
        w, vecs = np.linalg.eigh(h.toarray())
        w, vecs = w[:n_states], vecs[:, :n_states]
    elif method == "sparse":
        sigma = float(v.min()) - 5e-3
        v0 = np.full(n, 1.0 / np.sqrt(n))  # fixed start vector: determinism
        try:
            w, vecs = spla.eigsh(h, k=n_states, sigma=sigma, which="LM",
                                 v0=v0, tol=0, maxiter=1000)
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(
                "eigensolver did not converge",
                diagnostics={"converged": len(getattr(exc, "eigenvalues", [])),
                             "requested": n_states},
            ) from exc
        order = np.argsort(w)
        w, vecs = w[order], vecs[:, order]
    else:
        raise ConfigurationError(f"unknown eigensolver method {method!r}")

    vecs = _fix_signs(vecs)
    vecs /= np.sqrt(grid.dx * grid.dy)  # continuum normalization, nm^-1
    full = np.zeros((n_states, grid.ny, grid.nx))
    full[:, j0:j1, :] = vecs.T.reshape(n_states, j1 - j0, grid.nx)
    return Spectrum(energies_ev=w, wavefunctions=full, n_states=n_states)


def localized_pair_from(wavefunctions: np.ndarray, energies_ev: np.ndarray,
                        grid: Grid):
    """Maximally localized combinations of the two lowest well states.

    Diagonalizes the lateral position operator in the two-state subspace;
    returns (phi_left, phi_right, h2) with phi on the well block and h2 the
    effective 2x2 Hamiltonian (eV) in the localized basis, ordered left to
    right.
    """
    j0, j1 = well_rows(grid)
    psi = [wavefunctions[k][j0:j1, :] for k in (0, 1)]
    da = grid.dx * grid.dy
    x_op = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            x_op[a, b] = (psi[a] * psi[b] * grid.x[None, :]).sum() * da
    pos, w = np.linalg.eigh(0.5 * (x_op + x_op.T))
    order = np.argsort(pos)
    w = w[:, order]
    phi = [w[0, c] * psi[0] + w[1, c] * psi[1] for c in range(2)]
    h2 = w.T @ np.diag(energies_ev[:2]) @ w
    return phi[0], phi[1], h2


def pinned_quantum_charge(spectrum: Spectrum, grid: Grid,
                          occupations: tuple[float, float],
                          length_nm: float) -> np.ndarray:
    """Quantum charge with Coulomb-blockade-pinned dot occupation, cm^-3.

    In the (1,1) operating regime the electron number per dot is locked by
    the addition energy; each dot's charge is its occupation spread over the
    localized ground orbital and over the [001] dot extent. Grand-canonical
    filling (quantum_charge) is still what detects the regime boundaries in
    bias sweeps.
    """
    phi_l, phi_r, _ = localized_pair_from(spectrum.wavefunctions,
                                          spectrum.energies_ev, grid)
    j0, j1 = well_rows(grid)
    n_nm3 = np.zeros((grid.ny, grid.nx))
    n_nm3[j0:j1, :] = (occupations[0] * phi_l**2
                       + occupations[1] * phi_r**2) / length_nm
    return n_nm3 / NM3_PER_CM3


def subband_line_density(energies_ev: np.ndarray, e_fermi_ev: float,
                         temperature_k: float, mat: MaterialParams) -> np.ndarray:
    """Electrons per nm of [001] length in each 2D subband.

    N_i = g sqrt(2 m_t kT) / (2 sqrt(pi) hbar) * F_{-1/2}((E_F - E_i)/kT),
    g = spin x valley degeneracy.
    """
    kt = K_B_EV * temperature_k
    eta = (e_fermi_ev - np.asarray(energies_ev)) / kt
    g = 2.0 * mat.valley_degeneracy
    k_th = np.sqrt(mat.mass_transport * kt / HBAR2_OVER_2M0)  # sqrt(2mkT)/hbar
    return g * k_th / (2.0 * np.sqrt(np.pi)) * fermi_minus_half(eta)


def quantum_charge(spectrum: Spectrum, e_fermi_ev: float, temperature_k: float,
                   grid: Grid, mat: MaterialParams) -> np.ndarray:
    """Quantum-region electron density (cm^-3) from occupied subbands."""
    occ = subband_line_density(spectrum.energies_ev, e_fermi_ev,
                               temperature_k, mat)
    n_nm3 = np.tensordot(occ, spectrum.wavefunctions**2, axes=(0, 0))
    return n_nm3 / NM3_PER_CM3


@dataclass
class ConvergedSolution:
    potential_ev: np.ndarray
    charge_cm3: np.ndarray
    spectrum: Spectrum
    biases: DeviceBiases
    iterations: int
    final_update_norm_ev: float
    occupancies_per_nm: np.ndarray     # line density per eigenstate


def _scf_fixed_t(grid: Grid, mat: MaterialParams, biases: DeviceBiases,
                 t_k: float, u0: np.ndarray, n_states: int, mixing: float,
                 tol_ev: float, max_iter: int, eig_method: str,
                 pin_occupation=None, pin_length_nm=60.0):
    """One damped fixed-point stage at a fixed temperature.

    The update norm is the undamped residual max|G(u) - u| with
    G(u) = poisson(charge(u)), so the stopping point does not depend on the
    mixing factor.
    """
    u = u0
    history = []
    beta = mixing
    best = np.inf
    for it in range(1, max_iter + 1):
        spectrum = solve_eigenstates(u, grid, mat, n_states, method=eig_method)
        if pin_occupation is None:
            qcharge = quantum_charge(spectrum, mat.fermi_level_ev, t_k, grid, mat)
        else:
            qcharge = pinned_quantum_charge(spectrum, grid, pin_occupation,
                                            pin_length_nm)
        charge = bulk_charge(u, grid, mat, t_k) + qcharge
        u_new = solve_poisson(grid, mat, biases, charge)
        resid = float(np.max(np.abs(u_new - u)))
        history.append(resid)
        if resid <= tol_ev:
            return u, charge, spectrum, it, resid, history
        # adaptive safeguard: shrink the step while the residual grows
        if resid > 1.5 * best and beta > 0.01:
            beta = max(beta * 0.5, 0.01)
        best = min(best, resid)
        u = u + beta * (u_new - u)
    return None, u, None, max_iter, history[-1], history


def self_consistent_solve(spec: DeviceSpec, mat: MaterialParams,
                          biases: DeviceBiases, *, grid: Grid | None = None,
                          n_states: int = 6, mixing: float = 0.1,
                          tol_ev: float = 1e-6, max_iter: int = 600,
                          start_potential: np.ndarray | None = None,
                          eig_method: str = "auto",
                          pin_occupation: tuple[float, float] | None = None,
                          pin_length_nm: float = 60.0) -> ConvergedSolution:
    """Alternate Poisson and charge models with damped potential mixing.

    A cold start descends through a short temperature continuation
    (40 K -> 8 K -> T): occupations are steep at 1.5 K and the hot stages
    provide a well-behaved warm start. The final stage always runs at the
    device temperature with exact Fermi-Dirac occupation and the 1 ueV
    max-norm tolerance. Raises NonConvergenceError with the residual history
    when an iteration cap is hit.

    With `pin_occupation` = (n_left, n_right) the quantum charge is the
    Coulomb-blockade-pinned model (fixed electron number per dot, spread
    over the localized ground orbitals and the [001] extent `pin_length_nm`)
    instead of the grand-canonical reservoir filling. Operating-point solves
    in the (1,1) regime use this; bias-sweep occupancy detection does not.
    """
    if not 0.0 < mixing <= 0.5:
        raise ConfigurationError("mixing factor must lie in (0, 0.5]")
    grid = grid or build_grid(spec)
    t_dev = spec.temperature_k
    zero_charge = np.zeros((grid.ny, grid.nx))
    total_iters = 0
    if start_potential is not None:
        u = start_potential
    else:
        u = solve_poisson(grid, mat, biases, zero_charge)
        for t_stage in (40.0, 8.0):
            if t_stage <= t_dev:
                continue
            u_stage, _, _, its, _, _ = _scf_fixed_t(
                grid, mat, biases, t_stage, u, n_states, mixing,
                max(tol_ev, 2e-5), max_iter, eig_method,
                pin_occupation, pin_length_nm,
            )
            total_iters += its
            if u_stage is not None:
                u = u_stage

    u_fin, second, spectrum, its, resid, history = _scf_fixed_t(
        grid, mat, biases, t_dev, u, n_states, mixing, tol_ev, max_iter,
        eig_method, pin_occupation, pin_length_nm,
    )
    charge = second
    total_iters += its
    if u_fin is None and max_iter >= 50:
        # oscillating filling transitions: one retry with heavy damping,
        # warm-started from the last iterate
        u_fin, charge, spectrum, its, resid, history2 = _scf_fixed_t(
            grid, mat, biases, t_dev, second, n_states, 0.02,
            tol_ev, 3 * max_iter, eig_method, pin_occupation, pin_length_nm,
        )
        total_iters += its
        history = history + history2
    if u_fin is None:
        raise NonConvergenceError(
            f"self-consistent loop hit the iteration cap "
            f"(last update {resid:.3e} eV)",
            diagnostics={"update_history_ev": history},
        )
    occ = subband_line_density(spectrum.energies_ev, mat.fermi_level_ev,
                               t_dev, mat)
    return ConvergedSolution(
        potential_ev=u_fin, charge_cm3=charge, spectrum=spectrum,
        biases=biases, iterations=total_iters, final_update_norm_ev=resid,
        occupancies_per_nm=occ,
    )


# ---------------------------------------------------------------------------
# Snapshot serialization
# ---------------------------------------------------------------------------

SNAPSHOT_VERSION = 1


def save_snapshot(path, solution: ConvergedSolution, spec: DeviceSpec,
                  mat: MaterialParams, extra: dict | None = None) -> None:
    """Versioned binary snapshot a downstream run can reload without re-solving."""
    import os
    import tempfile

    from .device import save_device_config

    # reuse the text schema for geometry metadata
    with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
        name = fh.name
    save_device_config(name, spec, mat, solution.biases, extra)
    with open(name) as fh:
        cfg_text = fh.read()
    os.unlink(name)

    np.savez_compressed(
        path,
        version=np.int64(SNAPSHOT_VERSION),
        potential_ev=solution.potential_ev,
        charge_cm3=solution.charge_cm3,
        energies_ev=solution.spectrum.energies_ev,
        wavefunctions=solution.spectrum.wavefunctions,
        occupancies_per_nm=solution.occupancies_per_nm,
        biases=np.array([solution.biases.v_b, solution.biases.v_l,
                         solution.biases.v_m, solution.biases.v_r,
                         solution.biases.drain_bias_v]),
        iterations=np.int64(solution.iterations),
        final_update_norm_ev=np.float64(solution.final_update_norm_ev),
        device_config=np.array(cfg_text),
    )


def load_snapshot(path):
    """Returns (solution, spec, mat, extra) from a snapshot file."""
    import os
    import tempfile

    from .device import load_device_config

    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != SNAPSHOT_VERSION:
            raise ConfigurationError(
                f"snapshot version {int(z['version'])} not supported"
            )
        cfg_text = str(z["device_config"])
        with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
            fh.write(cfg_text)
            name = fh.name
        spec, mat, biases, extra = load_device_config(name)
        os.unlink(name)
        vb, vl, vm, vr, eps = z["biases"]
        biases = DeviceBiases(v_b=float(vb), v_l=float(vl), v_m=float(vm),
                              v_r=float(vr), drain_bias_v=float(eps))
        spectrum = Spectrum(
            energies_ev=z["energies_ev"].copy(),
            wavefunctions=z["wavefunctions"].copy(),
            n_states=int(z["energies_ev"].shape[0]),
        )
        solution = ConvergedSolution(
            potential_ev=z["potential_ev"].copy(),
            charge_cm3=z["charge_cm3"].copy(),
            spectrum=spectrum,
            biases=biases,
            iterations=int(z["iterations"]),
            final_update_norm_ev=float(z["final_update_norm_ev"]),
            occupancies_per_nm=z["occupancies_per_nm"].copy(),
        )
    return solution, spec, mat, extra
