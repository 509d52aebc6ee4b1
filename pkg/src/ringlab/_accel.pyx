# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: red-black relaxation sweeps, operator residuals,
AGM elliptic integrals and pairwise ring-kernel blocks.

Every function here has a NumPy twin in ``ringlab._fallback`` with the same
signature; ``ringlab.backend`` picks one set at import time.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, asinh, atan, fabs, log, sqrt

cnp.import_array()


def sor_color_sweep(double[:, ::1] psi, double[:, ::1] rhs,
                    double[:, ::1] cw, double[:, ::1] ce,
                    double[:, ::1] cs, double[:, ::1] cn,
                    double[:, ::1] diag, cnp.uint8_t[:, ::1] interior,
                    int color, double omega):
    """One SOR half-sweep over cells with (i + j) % 2 == color."""
    cdef Py_ssize_t nr = psi.shape[0]
    cdef Py_ssize_t nz = psi.shape[1]
    cdef Py_ssize_t i, j, j0
    cdef double acc
    for i in range(nr):
        j0 = (color - i) % 2
        if j0 < 0:
            j0 += 2
        for j in range(j0, nz, 2):
            if not interior[i, j]:
                continue
            acc = rhs[i, j]
            if i > 0:
                acc += cw[i, j] * psi[i - 1, j]
            if i < nr - 1:
                acc += ce[i, j] * psi[i + 1, j]
            if j > 0:
                acc += cs[i, j] * psi[i, j - 1]
            if j < nz - 1:
                acc += cn[i, j] * psi[i, j + 1]
            psi[i, j] = (1.0 - omega) * psi[i, j] + omega * acc / diag[i, j]


def operator_apply(double[:, ::1] psi, double[:, ::1] cw, double[:, ::1] ce,
                   double[:, ::1] cs, double[:, ::1] cn,
                   double[:, ::1] diag, cnp.uint8_t[:, ::1] interior,
                   double[:, ::1] out):
    """out = S(psi): diag*psi minus neighbor couplings, zero on exterior cells."""
    cdef Py_ssize_t nr = psi.shape[0]
    cdef Py_ssize_t nz = psi.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(nr):
        for j in range(nz):
            if not interior[i, j]:
                out[i, j] = 0.0
                continue
            acc = diag[i, j] * psi[i, j]
            if i > 0:
                acc -= cw[i, j] * psi[i - 1, j]
            if i < nr - 1:
                acc -= ce[i, j] * psi[i + 1, j]
            if j > 0:
                acc -= cs[i, j] * psi[i, j - 1]
            if j < nz - 1:
                acc -= cn[i, j] * psi[i, j + 1]
            out[i, j] = acc


cdef inline void _agm_pair(double k, double kprime, double* kout,
                           double* eout) noexcept nogil:
    cdef double a = 1.0
    cdef double b = kprime
    cdef double c = k
    cdef double csum = 0.5 * k * k
    cdef double pow2 = 0.5
    cdef double an
    cdef int it
    for it in range(24):
        if fabs(c) <= 1e-15:
            break
        an = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = sqrt(a * b)
        a = an
        pow2 *= 2.0
        csum += pow2 * c * c
    kout[0] = M_PI / (2.0 * a)
    eout[0] = kout[0] * (1.0 - csum)


def agm_ke(double[::1] k, double[::1] k_out, double[::1] e_out):
    """AGM complete elliptic integrals K(k), E(k) for 0 <= k < 1."""
    cdef Py_ssize_t n = k.shape[0]
    cdef Py_ssize_t i
    cdef double kv, ev
    for i in range(n):
        _agm_pair(k[i], sqrt((1.0 - k[i]) * (1.0 + k[i])), &kv, &ev)
        k_out[i] = kv
        e_out[i] = ev


cdef inline double _green_one(double r, double z, double rp, double zp) noexcept nogil:
    # complementary modulus from the separation, stable near the diagonal
    cdef double dz = z - zp
    cdef double den = (r + rp) * (r + rp) + dz * dz
    cdef double k = sqrt(4.0 * r * rp / den)
    cdef double kprime = sqrt(((r - rp) * (r - rp) + dz * dz) / den)
    cdef double kv, ev
    _agm_pair(k, kprime, &kv, &ev)
    return sqrt(r * rp) / (4.0 * M_PI * M_PI) * ((2.0 / k - k) * kv - (2.0 / k) * ev)


def green_block(double[::1] rt, double[::1] zt, double[::1] rs, double[::1] zs,
                double[:, ::1] out):
    """Pairwise ring-kernel matrix out[i, j] = G(target_i, source_j).

    Coincident pairs are the caller's responsibility; they produce inf.
    """
    cdef Py_ssize_t nt = rt.shape[0]
    cdef Py_ssize_t ns = rs.shape[0]
    cdef Py_ssize_t i, j
    for i in range(nt):
        for j in range(ns):
            out[i, j] = _green_one(rt[i], zt[i], rs[j], zs[j])
