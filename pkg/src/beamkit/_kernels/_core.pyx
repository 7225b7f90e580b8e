# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
# cython: initializedcheck=False
"""Compiled hot kernels; signatures mirror beamkit._kernels._numpy."""

from libc.math cimport log, sqrt

import numpy as np

ctypedef double complex cplx

DEF MAX_DIM = 16


def accumulate_weighted_outer(y, weights):
    """Per-bin weighted sum of outer products: sum_t w[f,t] * y[:,f,t] y[:,f,t]^H."""
    y_arr = np.ascontiguousarray(y, dtype=np.complex128)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    if y_arr.ndim != 3 or w_arr.shape != y_arr.shape[1:]:
        raise ValueError("weights shape does not match the spectrum")
    cdef cplx[:, :, ::1] yv = y_arr
    cdef double[:, ::1] wv = w_arr
    cdef Py_ssize_t m = yv.shape[0], nf = yv.shape[1], nt = yv.shape[2]
    out = np.zeros((nf, m, m), dtype=np.complex128)
    cdef cplx[:, :, ::1] ov = out
    cdef Py_ssize_t f, t, i, j
    cdef double wt
    cdef cplx yi
    with nogil:
        for f in range(nf):
            for t in range(nt):
                wt = wv[f, t]
                if wt == 0.0:
                    continue
                for i in range(m):
                    yi = wt * yv[i, f, t]
                    for j in range(i, m):
                        ov[f, i, j] = ov[f, i, j] + yi * yv[j, f, t].conjugate()
            for i in range(m):
                for j in range(i + 1, m):
                    ov[f, j, i] = ov[f, i, j].conjugate()
    return out


def quad_forms(y, mats):
    """Real quadratic forms y^H A y per bin and frame for Hermitian A."""
    y_arr = np.ascontiguousarray(y, dtype=np.complex128)
    a_arr = np.ascontiguousarray(mats, dtype=np.complex128)
    if y_arr.ndim != 3 or a_arr.shape != (y_arr.shape[1], y_arr.shape[0], y_arr.shape[0]):
        raise ValueError("matrix stack shape does not match the spectrum")
    cdef cplx[:, :, ::1] yv = y_arr
    cdef cplx[:, :, ::1] av = a_arr
    cdef Py_ssize_t m = yv.shape[0], nf = yv.shape[1], nt = yv.shape[2]
    out = np.empty((nf, nt), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t f, t, i, j
    cdef double acc
    cdef cplx zi, s
    with nogil:
        for f in range(nf):
            for t in range(nt):
                acc = 0.0
                for i in range(m):
                    zi = yv[i, f, t]
                    acc += av[f, i, i].real * (zi.real * zi.real + zi.imag * zi.imag)
                    s = 0.0
                    for j in range(i + 1, m):
                        s = s + av[f, i, j] * yv[j, f, t]
                    s = zi.conjugate() * s
                    acc += 2.0 * s.real
                ov[f, t] = acc
    return out


cdef int _inverse_logdet_one(
    cplx* a, cplx* lmat, cplx* wmat, cplx* out, double* logdet, Py_ssize_t m
) nogil:
    """Cholesky-based inverse of one Hermitian PD matrix; -1 when not PD."""
    cdef Py_ssize_t i, j, k
    cdef cplx s
    cdef double d, acc
    for i in range(m):
        for j in range(i + 1):
            lmat[i * m + j] = a[i * m + j]
    acc = 0.0
    for j in range(m):
        d = lmat[j * m + j].real
        for k in range(j):
            d -= (lmat[j * m + k] * lmat[j * m + k].conjugate()).real
        if d <= 0.0:
            return -1
        d = sqrt(d)
        acc += log(d)
        lmat[j * m + j] = d
        for i in range(j + 1, m):
            s = lmat[i * m + j]
            for k in range(j):
                s = s - lmat[i * m + k] * lmat[j * m + k].conjugate()
            lmat[i * m + j] = s / d
    logdet[0] = 2.0 * acc
    # W = L^{-1} by forward substitution, one column at a time.
    for k in range(m):
        for i in range(m):
            if i < k:
                wmat[i * m + k] = 0.0
            else:
                s = 1.0 if i == k else 0.0
                for j in range(k, i):
                    s = s - lmat[i * m + j] * wmat[j * m + k]
                wmat[i * m + k] = s / lmat[i * m + i]
    # A^{-1} = W^H W; only the rows k >= max(i, j) of W contribute.
    for i in range(m):
        for j in range(i, m):
            s = 0.0
            for k in range(j, m):
                s = s + wmat[k * m + i].conjugate() * wmat[k * m + j]
            out[i * m + j] = s
            if j > i:
                out[j * m + i] = s.conjugate()
    return 0


def chol_inverse_logdet(mats):
    """Inverse and log-determinant of a stack of Hermitian PD matrices."""
    a_arr = np.ascontiguousarray(mats, dtype=np.complex128)
    if a_arr.ndim != 3 or a_arr.shape[1] != a_arr.shape[2]:
        raise ValueError("expected a stack of square matrices")
    cdef Py_ssize_t n = a_arr.shape[0], m = a_arr.shape[1]
    if m > MAX_DIM:
        raise ValueError(f"matrix dimension {m} exceeds the compiled limit {MAX_DIM}")
    inv = np.empty((n, m, m), dtype=np.complex128)
    logdet = np.empty(n, dtype=np.float64)
    cdef cplx[:, :, ::1] av = a_arr
    cdef cplx[:, :, ::1] iv = inv
    cdef double[::1] lv = logdet
    cdef cplx lmat[MAX_DIM * MAX_DIM]
    cdef cplx wmat[MAX_DIM * MAX_DIM]
    cdef Py_ssize_t f
    cdef Py_ssize_t bad = -1
    with nogil:
        for f in range(n):
            if _inverse_logdet_one(&av[f, 0, 0], lmat, wmat, &iv[f, 0, 0], &lv[f], m) != 0:
                bad = f
                break
    if bad >= 0:
        raise np.linalg.LinAlgError(f"matrix at index {bad} is not positive definite")
    return inv, logdet
