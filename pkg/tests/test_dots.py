import numpy as np
import pytest

from dqdsim.constants import ZEEMAN_HZ_PER_T
from dqdsim.dots import (
    MagnetFieldMap,
    assign_orbitals,
    exchange_energy,
    find_dots,
    localized_pair,
    zeeman_splittings,
)
from dqdsim.errors import ConfigurationError, GeometryError, ModelValidityError

from conftest import quartic_double_well, synthetic_solution

from oracles import ci_singlet_triplet_j


class TestFieldMap:
    def test_linear_gradient_interpolates_exactly(self):
        fm = MagnetFieldMap.from_gradient(0.65, 5e-5, 0.0, 240.0)
        x = np.array([10.3, 100.0, 233.3])
        assert np.allclose(fm(x), 0.65 + 5e-5 * x, rtol=0, atol=1e-12)

    def test_file_roundtrip(self, tmp_path):
        fm = MagnetFieldMap.from_gradient(0.6, 4e-5, 0.0, 100.0, n=11)
        path = tmp_path / "bz.txt"
        fm.to_file(path)
        fm2 = MagnetFieldMap.from_file(path)
        assert np.allclose(fm2(np.linspace(0, 100, 7)),
                           fm(np.linspace(0, 100, 7)))

    def test_nonpositive_field_rejected(self):
        with pytest.raises(ConfigurationError):
            MagnetFieldMap([0.0, 1.0], [0.5, -0.1])


class TestFindDots:
    def test_symmetric_two_dots(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 8.0))
        reg = find_dots(sol, grid)
        assert reg.n_dots == 2
        xc = grid.spec.width_nm / 2
        assert reg.minima_x_nm[0] + reg.minima_x_nm[1] == pytest.approx(
            2 * xc, abs=2 * grid.dx)
        assert reg.barrier_x_nm == pytest.approx(xc, abs=grid.dx)

    def test_single_deep_valley(self, flat_well):
        _, grid, mat = flat_well
        xc = grid.spec.width_nm / 2
        u = np.tile(1e-5 * (grid.x - xc) ** 2, (grid.ny, 1))
        sol = synthetic_solution(grid, mat, u)
        assert find_dots(sol, grid).n_dots == 1

    def test_orbital_assignment_tilted(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(
            grid, mat, quartic_double_well(grid, 10.0, tilt_uev=400.0))
        reg = find_dots(sol, grid)
        assign = assign_orbitals(sol, grid, reg)
        # tilt lowers the left side: ground state left, first excited right
        assert assign[0] == 0
        assert assign[1] == 1


class TestZeeman:
    def test_uniform_field_identity(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 6.0))
        b0 = 0.6585
        fm = MagnetFieldMap.from_gradient(b0, 0.0, -1.0, 241.0)
        e_zl, e_zr = zeeman_splittings(sol, fm, grid)
        expect = ZEEMAN_HZ_PER_T * b0
        assert e_zl == pytest.approx(expect, rel=1e-12)
        assert e_zr == pytest.approx(expect, rel=1e-12)

    def test_gradient_orders_and_bounds(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 6.0))
        fm = MagnetFieldMap.from_gradient(0.64, 6e-5, -1.0, 241.0)
        e_zl, e_zr = zeeman_splittings(sol, fm, grid)
        assert e_zl < e_zr
        b = fm(grid.x)
        assert ZEEMAN_HZ_PER_T * b.min() <= e_zl <= ZEEMAN_HZ_PER_T * b.max()
        assert ZEEMAN_HZ_PER_T * b.min() <= e_zr <= ZEEMAN_HZ_PER_T * b.max()

    def test_uncovered_map_rejected(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 6.0))
        fm = MagnetFieldMap.from_gradient(0.65, 0.0, 50.0, 150.0)
        with pytest.raises(ConfigurationError):
            zeeman_splittings(sol, fm, grid)

    def test_single_dot_rejected(self, flat_well):
        _, grid, mat = flat_well
        xc = grid.spec.width_nm / 2
        u = np.tile(1e-5 * (grid.x - xc) ** 2, (grid.ny, 1))
        sol = synthetic_solution(grid, mat, u)
        fm = MagnetFieldMap.from_gradient(0.65, 0.0, -1.0, 241.0)
        with pytest.raises(GeometryError):
            zeeman_splittings(sol, fm, grid)


class TestExchange:
    def test_decoupled_limit(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 30.0))
        j = exchange_energy(sol, grid, mat)
        assert j < 1.0  # Hz: infinite-barrier limit, J -> 0

    def test_monotone_in_barrier(self, flat_well):
        _, grid, mat = flat_well
        js = []
        for barrier in (10.0, 12.0, 14.0, 16.0):
            sol = synthetic_solution(grid, mat, quartic_double_well(grid, barrier))
            js.append(exchange_energy(sol, grid, mat))
        assert all(a > b for a, b in zip(js, js[1:]))
        # near log-linear over the window: successive ratios within 2x
        ratios = [np.log(a / b) for a, b in zip(js, js[1:])]
        assert max(ratios) / min(ratios) < 2.0

    def test_detuning_robustness(self, flat_well):
        # micro-eV scale detuning barely moves J (it enters quadratically
        # against U - V), even though the raw splitting is dominated by it
        _, grid, mat = flat_well
        j0 = exchange_energy(
            synthetic_solution(grid, mat, quartic_double_well(grid, 14.0)),
            grid, mat)
        j1 = exchange_energy(
            synthetic_solution(grid, mat,
                               quartic_double_well(grid, 14.0, tilt_uev=60.0)),
            grid, mat)
        assert j1 == pytest.approx(j0, rel=0.05)

    def test_localized_pair_reproduces_splitting(self, flat_well):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 12.0))
        _, _, h2 = localized_pair(sol, grid)
        split = sol.spectrum.energies_ev[1] - sol.spectrum.energies_ev[0]
        eps = h2[0, 0] - h2[1, 1]
        assert np.hypot(eps, 2 * h2[0, 1]) == pytest.approx(split, rel=1e-9)

    def test_ci_oracle_within_bound_for_kinetic_exchange(self, flat_well):
        # the Hubbard estimate and the full two-orbital CI agree on the
        # kinetic (hybridization) part; compare with the CI direct-exchange
        # term removed from both sides by using the gap of the CI singlet
        # sector itself
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 12.0))
        j_hub = exchange_energy(sol, grid, mat)
        j_ci = ci_singlet_triplet_j(sol, grid, mat)
        # the CI includes the ferromagnetic direct exchange, so it lower-bounds
        # the Hubbard value; the hybridization scale must still agree
        assert j_ci < j_hub
        assert abs(j_ci - j_hub) < 10 * j_hub

    def test_negative_u_minus_v_rejected(self, flat_well, monkeypatch):
        _, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 12.0))
        import dqdsim.dots as dots_mod
        real = dots_mod.two_body_integral

        def fake(kernel, f1, f2, grid_):
            val = real(kernel, f1, f2, grid_)
            return val * (-1.0 if f1 is f2 else 1.0)

        monkeypatch.setattr(dots_mod, "two_body_integral", fake)
        with pytest.raises(ModelValidityError):
            exchange_energy(sol, grid, mat)


class TestFieldMapCalibration:
    def test_plateau_solve_hits_anchors_exactly(self, flat_well):
        from dqdsim.calibrate import ANCHOR_E_ZL_HZ, ANCHOR_E_ZR_HZ, calibrate_field_map
        spec, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 10.0))
        fmap, params = calibrate_field_map(spec, mat, grid=grid, solution=sol)
        assert params["profile"] == "plateaus"
        e_zl, e_zr = zeeman_splittings(sol, fmap, grid)
        # sampled-curve interpolation leaves a sub-kHz residual, far
        # inside the 1% anchor tolerance
        assert e_zl == pytest.approx(ANCHOR_E_ZL_HZ, abs=5e3)
        assert e_zr == pytest.approx(ANCHOR_E_ZR_HZ, abs=5e3)

    def test_config_roundtrip_through_loader(self, flat_well):
        from dqdsim.calibrate import calibrate_field_map
        from dqdsim.dots import field_map_from_config
        spec, grid, mat = flat_well
        sol = synthetic_solution(grid, mat, quartic_double_well(grid, 10.0))
        fmap, params = calibrate_field_map(spec, mat, grid=grid, solution=sol)
        fmap2 = field_map_from_config(params, spec.width_nm)
        x = np.linspace(0, spec.width_nm, 23)
        assert np.allclose(fmap(x), fmap2(x), rtol=0, atol=1e-9)
