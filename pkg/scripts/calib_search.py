"""Exploration driver for the device calibration (development tool)."""
import sys
import time

sys.path.insert(0, "src")
import numpy as np

from dqdsim.device import (DeviceBiases, DeviceSpec, Electrode, Layer,
                           MaterialParams, build_grid)
from dqdsim.dots import exchange_energy, find_dots, well_profile
from dqdsim.schrodinger import self_consistent_solve


def make(phi_b, wrs, spacer, gap, wm, wd, W=420.0, bgap=30.0, wb=40.0):
    # total stack height stays an integer multiple of dy via the buffer
    buffer_nm = float(int(2.0 + spacer + 8.0 + 22.0 + 0.999)) - (2.0 + spacer + 8.0) \
        if (spacer % 1.0) else 22.0
    c = W / 2
    m = (c - wm / 2, c + wm / 2)
    l = (c - wm / 2 - gap - wd, c - wm / 2 - gap)
    r = (c + wm / 2 + gap, c + wm / 2 + gap + wd * wrs)
    b1 = (l[0] - bgap - wb, l[0] - bgap)
    b2 = (r[1] + bgap, r[1] + bgap + wb)
    layers = (Layer("Si", 2.0), Layer("SiGe", spacer), Layer("Si", 8.0),
              Layer("SiGe", buffer_nm))
    spec = DeviceSpec(
        layers=layers,
        electrodes=(Electrode("B1", b1), Electrode("L", l), Electrode("M", m),
                    Electrode("R", r), Electrode("B2", b2)),
        width_nm=W, dx_nm=2.0, dy_nm=1.0,
    )
    return spec, MaterialParams(schottky_barrier_ev=phi_b)


def measure(phi_b, wrs, spacer, gap, wm, wd, vm=0.400, max_iter=1500, W=420.0, bgap=30.0):
    spec, mat = make(phi_b, wrs, spacer, gap, wm, wd, W=W, bgap=bgap)
    g = build_grid(spec)
    bias = DeviceBiases(v_b=0.2, v_l=0.54, v_m=vm, v_r=0.57)
    sol = self_consistent_solve(spec, mat, bias, grid=g, n_states=6,
                                max_iter=max_iter)
    reg = find_dots(sol, g)
    out = dict(nd=reg.n_dots, ne=float(sol.occupancies_per_nm.sum() * 60),
               it=sol.iterations)
    if reg.n_dots != 2:
        return out
    left = g.x < reg.barrier_x_nm
    lam = np.zeros(2)
    for k in range(sol.spectrum.n_states):
        w = (sol.spectrum.wavefunctions[k] ** 2).sum(axis=0)
        fl = w[left].sum() / w.sum()
        lam += sol.occupancies_per_nm[k] * np.array([fl, 1 - fl])
    det = exchange_energy(sol, g, mat, details=True)
    out.update(nl=float(lam[0] * 60), nr=float(lam[1] * 60),
               t=det.t_hz, eps=det.detuning_hz, umv=det.u_ev - det.v_ev,
               j=det.j_hz, dots=reg.minima_x_nm)
    return out


def fill_phib(wrs, spacer, gap, wm, wd, target_ne=1.9, p0=0.43, p1=0.42, W=420.0, bgap=30.0):
    r0 = measure(p0, wrs, spacer, gap, wm, wd, W=W, bgap=bgap)
    n0 = r0.get("ne", 0.0)
    r1 = measure(p1, wrs, spacer, gap, wm, wd, W=W, bgap=bgap)
    n1 = r1.get("ne", 0.0)
    for _ in range(5):
        if abs(n1 - target_ne) < 0.1 or n1 == n0:
            break
        p2 = min(max(p1 + (target_ne - n1) * (p1 - p0) / (n1 - n0), 0.38), 0.52)
        p0, n0 = p1, n1
        p1 = p2
        r1 = measure(p1, wrs, spacer, gap, wm, wd, W=W, bgap=bgap)
        n1 = r1.get("ne", 0.0)
    return p1, r1


if __name__ == "__main__":
    wd, gap, spacer, wrs = 44.0, 16.0, 36.0, 0.80
    for wm in (44.0, 50.0, 56.0):
        t0 = time.time()
        try:
            pb, r = fill_phib(wrs, spacer, gap, wm, wd)
            if "t" in r:
                print(f"wm={wm}: phi_b={pb:.4f} nL={r['nl']:.2f} nR={r['nr']:.2f} "
                      f"t={r['t'] / 1e6:.4g}MHz eps={r['eps'] / 2.418e8:.3g}ueV "
                      f"U-V={r['umv'] * 1e3:.2f}meV J400={r['j']:.4g}Hz "
                      f"dots={r['dots']} [{time.time() - t0:.0f}s]", flush=True)
                # V_M = 408 for the ratio
                r8 = measure(pb, wrs, spacer, gap, wm, wd, vm=0.408)
                if "j" in r8:
                    print(f"      J408={r8['j']:.4g}Hz ratio={r8['j'] / r['j']:.1f} "
                          f"t408={r8['t'] / 1e6:.4g}MHz", flush=True)
            else:
                print(f"wm={wm}: phi_b={pb:.4f} -> {r} [{time.time() - t0:.0f}s]",
                      flush=True)
        except Exception as ex:
            print(f"wm={wm}: FAILED {type(ex).__name__} {str(ex)[:80]}", flush=True)
