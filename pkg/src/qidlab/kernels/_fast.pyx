# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Cython implementation of the count-vector moment kernels.

Same contract as qidlab.kernels._ref.count_stats; plain C loops per row.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def count_stats(counts, p_in, double mu, ov_in, tri_in):
    m_arr = np.ascontiguousarray(counts, dtype=np.float64)
    if m_arr.ndim == 1:
        m_arr = m_arr[None, :]
    cdef const double[:, ::1] m = m_arr
    cdef const double[::1] p = np.ascontiguousarray(p_in, dtype=np.float64)
    cdef const double[:, ::1] ov = np.ascontiguousarray(ov_in, dtype=np.float64)
    cdef const double[:, :, ::1] tri = np.ascontiguousarray(tri_in, dtype=np.float64)

    cdef Py_ssize_t nb = m.shape[0]
    cdef Py_ssize_t n = m.shape[1]
    out_mean = np.empty(nb)
    out_var = np.empty(nb)
    cdef double[::1] mean = out_mean
    cdef double[::1] var = out_var

    cdef double inv2 = 1.0 / (mu * mu)
    cdef double inv4 = inv2 * inv2
    cdef Py_ssize_t b, i, j, k
    cdef double g, v, mi, mj, mk, a2i, a3i, qi, t2i, t3i

    for b in range(nb):
        g = 0.0
        v = 0.0
        for i in range(n):
            mi = m[b, i]
            a2i = mi * (mi - 1.0)
            a3i = a2i * (mi - 2.0)
            qi = (1.0 - p[i]) / p[i]
            t2i = ov[i, i]
            t3i = tri[i, i, i]
            g += 2.0 * inv2 * qi * a2i * t2i
            v += inv4 * 4.0 * qi * qi * (
                2.0 * a2i * (1.0 - t2i * t2i) + 4.0 * a3i * (t3i - t2i * t2i)
            )
            for j in range(n):
                if j == i:
                    continue
                mj = m[b, j]
                # pair terms, once per unordered pair
                if j > i:
                    g -= 4.0 * inv2 * mi * mj * ov[i, j]
                    v += 16.0 * inv4 * mi * mj * (
                        1.0
                        + (1.0 - mi - mj) * ov[i, j] * ov[i, j]
                        + (mi - 1.0) * tri[i, i, j]
                        + (mj - 1.0) * tri[i, j, j]
                    )
                v -= 32.0 * inv4 * qi * a2i * mj * (tri[i, i, j] - t2i * ov[i, j])
                for k in range(j + 1, n):
                    if k == i:
                        continue
                    mk = m[b, k]
                    v += 32.0 * inv4 * mi * mj * mk * (
                        tri[i, j, k] - ov[i, j] * ov[i, k]
                    )
        mean[b] = g
        var[b] = v

    return out_mean, out_var
