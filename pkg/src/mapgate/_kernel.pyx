# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernel.

Same contract as _kernel_py.propagate_chain: ordered products of Hermitian
matrix exponentials, one zheevd + two zgemm per step, with all work buffers
allocated once per call.  Matrices are handled in Fortran (column-major)
layout throughout so LAPACK/BLAS see them natively.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zheevd

cnp.import_array()


def propagate_chain(h0, vx, vy, x, y, dt, u0=None):
    """Ordered product exp(-i H_m dt_m) ... exp(-i H_1 dt_1) @ u0 with
    H_j = h0 + x[j] vx + y[j] vy.  See _kernel_py.propagate_chain."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] h0_f = \
        np.asfortranarray(h0, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] vx_f = \
        np.asfortranarray(vx, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] vy_f = \
        np.asfortranarray(vy, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dts = np.ascontiguousarray(dt, dtype=np.float64)

    cdef int n = h0_f.shape[0]
    cdef int m = xs.shape[0]
    if h0_f.shape[1] != n or vx_f.shape[0] != n or vy_f.shape[0] != n:
        raise ValueError("operator matrices must be square and same-sized")
    if ys.shape[0] != m or dts.shape[0] != m:
        raise ValueError("x, y, dt must have equal lengths")

    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] u_f
    if u0 is None:
        u_f = np.eye(n, dtype=np.complex128, order="F")
    else:
        u_f = np.asfortranarray(u0, dtype=np.complex128).copy(order="F")
    if m == 0:
        return np.ascontiguousarray(u_f)

    # Work buffers: mat is overwritten by zheevd with eigenvectors.
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] mat = \
        np.empty((n, n), dtype=np.complex128, order="F")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] scaled = \
        np.empty((n, n), dtype=np.complex128, order="F")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] ustep = \
        np.empty((n, n), dtype=np.complex128, order="F")
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="fortran"] unew = \
        np.empty((n, n), dtype=np.complex128, order="F")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.empty(n, dtype=np.float64)

    # zheevd workspace query.
    cdef int lwork = -1, lrwork = -1, liwork = -1, info = 0
    cdef double complex wkopt
    cdef double rwkopt
    cdef int iwkopt
    zheevd("V", "L", &n, &mat[0, 0], &n, &w[0], &wkopt, &lwork,
           &rwkopt, &lrwork, &iwkopt, &liwork, &info)
    lwork = <int> wkopt.real
    lrwork = <int> rwkopt
    liwork = iwkopt
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] work = np.empty(lwork, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rwork = np.empty(lrwork, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] iwork = np.empty(liwork, dtype=np.int32)

    cdef double complex one = 1.0, zero = 0.0
    cdef double xj, yj, dtj, ph
    cdef double complex phase
    cdef Py_ssize_t j, r, c
    cdef int ierr = 0

    with nogil:
        for j in range(m):
            xj = xs[j]
            yj = ys[j]
            dtj = dts[j]
            for c in range(n):
                for r in range(n):
                    mat[r, c] = h0_f[r, c] + xj * vx_f[r, c] + yj * vy_f[r, c]
            zheevd("V", "L", &n, &mat[0, 0], &n, &w[0], &work[0], &lwork,
                   &rwork[0], &lrwork, <int*> &iwork[0], &liwork, &info)
            if info != 0:
                ierr = info
                break
            # scaled = V diag(exp(-i w dt));  ustep = scaled V^H
            for c in range(n):
                ph = -w[c] * dtj
                phase = cos(ph) + 1j * sin(ph)
                for r in range(n):
                    scaled[r, c] = mat[r, c] * phase
            zgemm("N", "C", &n, &n, &n, &one, &scaled[0, 0], &n,
                  &mat[0, 0], &n, &zero, &ustep[0, 0], &n)
            zgemm("N", "N", &n, &n, &n, &one, &ustep[0, 0], &n,
                  &u_f[0, 0], &n, &zero, &unew[0, 0], &n)
            for c in range(n):
                for r in range(n):
                    u_f[r, c] = unew[r, c]
    if ierr != 0:
        raise np.linalg.LinAlgError(f"zheevd failed with info={ierr}")
    return np.ascontiguousarray(u_f)
