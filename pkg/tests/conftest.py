import numpy as np
import pytest

from dqdsim.device import DeviceBiases, DeviceSpec, Layer, MaterialParams, build_grid
from dqdsim.params import SpinParams, paper_table
from dqdsim.schrodinger import ConvergedSolution, solve_eigenstates, subband_line_density


@pytest.fixture(scope="session")
def flat_well():
    """Bare quantum-well stack with no electrodes (for synthetic potentials)."""
    layers = (Layer("SiGe", 10.0), Layer("Si", 8.0), Layer("SiGe", 10.0))
    spec = DeviceSpec(layers=layers, electrodes=(), width_nm=240.0,
                      dx_nm=1.0, dy_nm=1.0)
    return spec, build_grid(spec), MaterialParams()


def quartic_double_well(grid, barrier_mev, a_nm=40.0, tilt_uev=0.0):
    """Analytic double-well potential over the full grid (eV)."""
    xc = grid.spec.width_nm / 2.0
    q = ((grid.x - xc) ** 2 - a_nm**2) ** 2 / a_nm**4
    u = (barrier_mev * 1e-3) * np.tile(q, (grid.ny, 1))
    u += (tilt_uev * 1e-6) * np.tile((grid.x - xc) / a_nm, (grid.ny, 1))
    return u


def synthetic_solution(grid, mat, potential, n_states=4, temperature_k=1.5):
    spectrum = solve_eigenstates(potential, grid, mat, n_states)
    occ = subband_line_density(spectrum.energies_ev, mat.fermi_level_ev,
                               temperature_k, mat)
    return ConvergedSolution(
        potential_ev=potential, charge_cm3=np.zeros_like(potential),
        spectrum=spectrum, biases=DeviceBiases(), iterations=1,
        final_update_norm_ev=0.0, occupancies_per_nm=occ,
    )


@pytest.fixture(scope="session")
def table():
    return paper_table()


@pytest.fixture(scope="session")
def p400(table):
    return table(400.0)


@pytest.fixture(scope="session")
def p408(table):
    return table(408.0)
