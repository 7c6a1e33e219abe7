"""Pure-Python propagator kernel.

Computes ordered products of exact 4x4 matrix exponentials
U = E_{n-1} ... E_1 E_0,  E_k = expm(-i 2 pi dt (H_base + c_k H_coef)),
via batched Hermitian eigendecomposition and a pairwise (tree) product.
Semantically identical to the compiled kernel in `_step_kernel`.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def step_exponentials(h_base: np.ndarray, h_coef: np.ndarray,
                      coefs: np.ndarray, dt_s: float) -> np.ndarray:
    """Stack of exact exponentials E_k, shape (n, 4, 4)."""
    m = h_base[None, :, :] + coefs[:, None, None] * h_coef[None, :, :]
    w, v = np.linalg.eigh(m)
    phase = np.exp(-2j * np.pi * dt_s * w)
    return np.einsum("kij,kj,klj->kil", v, phase, v.conj())


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Product mats[n-1] @ ... @ mats[0] by pairwise halving."""
    while mats.shape[0] > 1:
        n = mats.shape[0]
        half = n // 2
        paired = np.matmul(mats[1 : 2 * half : 2], mats[0 : 2 * half : 2])
        if n % 2:
            mats = np.concatenate([paired, mats[-1:]], axis=0)
        else:
            mats = paired
    return mats[0]


def propagate_affine(h_base: np.ndarray, h_coef: np.ndarray,
                     coefs: np.ndarray, dt_s: float,
                     u0: np.ndarray | None = None) -> np.ndarray:
    coefs = np.ascontiguousarray(coefs, dtype=float)
    if coefs.size == 0:
        return np.eye(4, dtype=complex) if u0 is None else u0.copy()
    exps = step_exponentials(np.asarray(h_base, dtype=complex),
                             np.asarray(h_coef, dtype=complex), coefs, dt_s)
    u = ordered_product(exps)
    return u if u0 is None else u @ u0
