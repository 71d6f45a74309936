# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``.

Same signatures and semantics; matrices are small (N_t x sum D_k), so plain
loops beat BLAS dispatch overhead here.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef double MU_UPPER = 1.0 - 1e-12
cdef int MAX_BISECT = 200


cpdef double bisect_mu(double gamma_trace, double target, double tol):
    cdef double lo = 0.0, hi = MU_UPPER, mid
    cdef int i
    if gamma_trace >= target:
        return 0.0
    for i in range(MAX_BISECT):
        if hi - lo <= 0.25 * tol * (1.0 - hi):
            break
        mid = 0.5 * (lo + hi)
        if gamma_trace / ((1.0 - mid) * (1.0 - mid)) >= target:
            hi = mid
        else:
            lo = mid
    return hi


cpdef double bisect_tau(double power, double p0, double tol):
    cdef double lo = 0.0, hi, mid
    cdef int i
    if power <= p0:
        return 0.0
    hi = sqrt(power / p0)
    for i in range(MAX_BISECT):
        if hi - lo <= 0.25 * tol * (1.0 + lo):
            break
        mid = 0.5 * (lo + hi)
        if power / ((1.0 + mid) * (1.0 + mid)) <= p0:
            hi = mid
        else:
            lo = mid
    return hi


cdef inline double abs2(double complex z) nogil:
    return z.real * z.real + z.imag * z.imag


def penalty_inner(double complex[:, ::1] psi_inv, double complex[:, ::1] rhs_const,
                  double complex[:, ::1] v, double complex[:, ::1] b,
                  double complex[:, ::1] x, double complex[:, ::1] y,
                  double inv_rho, double target, double p0, double bisect_tol,
                  int max_inner, double tol_inner):
    cdef Py_ssize_t n = b.shape[0], m = b.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double complex acc
    cdef double gtr, pw, diff, nrm, mu = 0.0, tau = 0.0, scale
    cdef int it = 0
    cdef double complex[:, ::1] t = np.empty((n, m), dtype=np.complex128)
    cdef double complex[:, ::1] bn = np.empty((n, m), dtype=np.complex128)
    cdef double complex[:, ::1] vb = np.empty((n, m), dtype=np.complex128)

    for it in range(1, max_inner + 1):
        # t = inv_rho * (x + V^H y) + rhs_const
        for i in range(n):
            for j in range(m):
                acc = x[i, j]
                for l in range(n):
                    acc = acc + v[l, i].conjugate() * y[l, j]
                t[i, j] = inv_rho * acc + rhs_const[i, j]
        gtr = 0.0
        pw = 0.0
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for l in range(n):
                    acc = acc + psi_inv[i, l] * t[l, j]
                bn[i, j] = acc
                pw += abs2(acc)
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for l in range(n):
                    acc = acc + v[i, l] * bn[l, j]
                vb[i, j] = acc
                gtr += abs2(acc)
        if target > 0.0:
            mu = bisect_mu(gtr, target, bisect_tol)
        else:
            mu = 0.0
        tau = bisect_tau(pw, p0, bisect_tol)
        diff = 0.0
        scale = 1.0 / (1.0 - mu)
        for i in range(n):
            for j in range(m):
                y[i, j] = vb[i, j] * scale
                x[i, j] = bn[i, j] / (1.0 + tau)
                diff += abs2(bn[i, j] - b[i, j])
                b[i, j] = bn[i, j]
        nrm = sqrt(pw)
        if sqrt(diff) <= tol_inner * (nrm if nrm > 1.0 else 1.0):
            break
    return it, mu, tau


def score_candidates(double complex[:, ::1] xi, double complex[::1] z,
                     double complex[:, ::1] m_sum, double complex[:, ::1] cands):
    cdef Py_ssize_t L = cands.shape[0], nc = cands.shape[1]
    cdef Py_ssize_t a, c, q
    cdef double complex s_xi, s_m, lin
    cdef double complex ca
    cdef cnp.ndarray[cnp.float64_t, ndim=1] obj = np.empty(nc)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] surr = np.empty(nc)
    cdef double complex qx, qm
    for q in range(nc):
        s_xi = 0.0
        s_m = 0.0
        lin = 0.0
        for a in range(L):
            qx = 0.0
            qm = 0.0
            for c in range(L):
                qx = qx + xi[a, c] * cands[c, q]
                qm = qm + m_sum[a, c] * cands[c, q]
            ca = cands[a, q].conjugate()
            s_xi = s_xi + ca * qx
            s_m = s_m + ca * qm
            lin = lin + z[a].conjugate() * cands[a, q]
        obj[q] = s_xi.real + 2.0 * lin.real
        surr[q] = 2.0 * s_m.real
    return obj, surr
