"""Compare the compiled and pure-Python propagator kernels.

Workload: the lab-frame integrator of a resonant pi pulse (the hot loop of
the reference integrator: ~7e5 exact 4x4 exponentials at the default step).

Run:  python benchmarks/bench_propagator.py
"""

import math
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from dqdsim import kernels
from dqdsim.dynamics import evolve
from dqdsim.params import paper_table
from dqdsim.protocols import schedule_ry


def bench_raw(n_steps=400_000):
    rng = np.random.default_rng(1)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h_base = (m + m.conj().T) / 2
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h_coef = (m + m.conj().T) / 2
    coefs = rng.normal(size=n_steps)
    out = {}
    for backend in ("python", "compiled") if kernels.HAVE_COMPILED else ("python",):
        t0 = time.perf_counter()
        u = kernels.propagate_affine(h_base, h_coef, coefs, 1e-4,
                                     backend=backend)
        dt = time.perf_counter() - t0
        out[backend] = (dt, u)
    return n_steps, out


def bench_evolve():
    table = paper_table()
    p = table(400.0)
    sched = schedule_ry("L", math.pi, p, rabi_hz=5e6)
    out = {}
    for backend in ("python", "compiled") if kernels.HAVE_COMPILED else ("python",):
        t0 = time.perf_counter()
        res = evolve(sched, table, integrator="lab", backend=backend)
        out[backend] = (time.perf_counter() - t0, res)
    return out


def main():
    print(f"active backend: {kernels.backend_name()}")
    n, raw = bench_raw()
    print(f"\nraw kernel, {n} exponentials:")
    for backend, (dt, _) in raw.items():
        print(f"  {backend:9s} {dt:7.3f} s   {dt / n * 1e6:6.2f} us/exp")
    if len(raw) == 2:
        dpy, dcy = raw["python"][0], raw["compiled"][0]
        diff = np.abs(raw["python"][1] - raw["compiled"][1]).max()
        print(f"  speedup {dpy / dcy:.2f}x   max deviation {diff:.2e}")

    ev = bench_evolve()
    print("\nlab-frame RY(pi) evolve (resonant pulse, default step):")
    for backend, (dt, res) in ev.items():
        print(f"  {backend:9s} {dt:7.3f} s   {res.n_exponentials} exponentials, "
              f"unitarity defect {res.unitarity_defect:.1e}")
    if len(ev) == 2:
        print(f"  speedup {ev['python'][0] / ev['compiled'][0]:.2f}x")


if __name__ == "__main__":
    main()
