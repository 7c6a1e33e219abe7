"""Propagator kernel selection: compiled extension with pure-Python fallback.

The hot loop of the lab-frame integrator multiplies O(10^5..10^6) exact 4x4
step exponentials per gate. `dqdsim._step_kernel` is a Cython implementation
of that loop; `dqdsim._propagate` is the NumPy fallback with identical
semantics. Selection happens once at import; `backend_name()` reports which
one is active and `propagate_affine(..., backend=...)` can force either.
"""

from __future__ import annotations

import numpy as np

from . import _propagate as _py

try:
    from . import _step_kernel as _cy

    HAVE_COMPILED = True
except ImportError:
    _cy = None
    HAVE_COMPILED = False


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "python"


def propagate_affine(h_base, h_coef, coefs, dt_s, u0=None, backend=None):
    """U = prod_k expm(-i 2 pi dt (h_base + coefs[k] h_coef)), applied in order.

    coefs[k] multiplies h_coef in the k-th exponential; index 0 acts first.
    """
    if backend is None:
        backend = backend_name()
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but not built")
        u = _cy.propagate_affine(
            np.ascontiguousarray(h_base, dtype=complex),
            np.ascontiguousarray(h_coef, dtype=complex),
            np.ascontiguousarray(coefs, dtype=float),
            float(dt_s),
        )
        return u if u0 is None else u @ u0
    if backend == "python":
        return _py.propagate_affine(h_base, h_coef, coefs, dt_s, u0=u0)
    raise ValueError(f"unknown backend {backend!r}")
