# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled propagator kernel: ordered products of exact 4x4 exponentials.

Same contract as dqdsim._propagate.propagate_affine: per entry k the factor
expm(-i 2 pi dt (H_base + coefs[k] H_coef)) is applied on the left, built
from an exact LAPACK eigendecomposition per step with fixed workspaces.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

from scipy.linalg.cython_lapack cimport zheev

cnp.import_array()

BACKEND = "compiled"


def propagate_affine(cnp.ndarray[cnp.complex128_t, ndim=2] h_base,
                     cnp.ndarray[cnp.complex128_t, ndim=2] h_coef,
                     cnp.ndarray[cnp.float64_t, ndim=1] coefs,
                     double dt_s):
    cdef int n_steps = coefs.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] out = np.eye(4, dtype=complex)
    if n_steps == 0:
        return out

    cdef double complex hb[16]
    cdef double complex hc[16]
    cdef double complex m[16]      # column-major for LAPACK
    cdef double complex e[16]
    cdef double complex acc[16]
    cdef double complex tmp[16]
    cdef double complex work[68]
    cdef double rwork[10]
    cdef double w[4]
    cdef double complex ph[4]
    cdef double complex s
    cdef int i, j, l, k, info
    cdef int four = 4, lwork = 68
    cdef double c, theta, tpidt

    for j in range(4):
        for i in range(4):
            hb[i + 4 * j] = h_base[i, j]
            hc[i + 4 * j] = h_coef[i, j]

    for i in range(16):
        acc[i] = 0.0
    for i in range(4):
        acc[i + 4 * i] = 1.0

    tpidt = 2.0 * np.pi * dt_s
    info = 0
    with nogil:
        for k in range(n_steps):
            c = coefs[k]
            for i in range(16):
                m[i] = hb[i] + c * hc[i]
            zheev(b'V', b'U', &four, m, &four, w, work, &lwork, rwork, &info)
            if info != 0:
                break
            # m holds eigenvectors column-major; E = V diag(ph) V^H
            for j in range(4):
                theta = -tpidt * w[j]
                ph[j] = cos(theta) + 1j * sin(theta)
            for i in range(4):
                for l in range(4):
                    s = 0.0
                    for j in range(4):
                        s += m[i + 4 * j] * ph[j] * m[l + 4 * j].conjugate()
                    e[i + 4 * l] = s
            # acc = E @ acc
            for i in range(4):
                for l in range(4):
                    s = 0.0
                    for j in range(4):
                        s += e[i + 4 * j] * acc[j + 4 * l]
                    tmp[i + 4 * l] = s
            for i in range(16):
                acc[i] = tmp[i]
    if info != 0:
        raise RuntimeError(f"zheev failed with info={info}")

    for i in range(4):
        for j in range(4):
            out[i, j] = acc[i + 4 * j]
    return out
