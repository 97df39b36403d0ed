"""NumPy reference implementation of the count-vector moment kernels.

For a batch of count vectors m (shape (B, N)) and an instance described by
weights p, Poissonization mean mu, pair overlaps ov[i,j] = Tr[rho_i rho_j]
and the symmetric triple table tri[i,j,k] = Re Tr[rho_i rho_j rho_k], this
computes per row

  mean[b] = conditional mean of the estimator given the counts,
  var[b]  = intra-measurement variance of the estimator given the counts,

with every closed form arranged so that insufficient counts contribute
exactly zero (the m(m-1) / m_i m_j prefactors are kept multiplied through,
never divided out).
"""

import numpy as np


def count_stats(counts, p, mu, ov, tri):
    m = np.asarray(counts, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    p = np.asarray(p, dtype=float)
    n = p.size
    t2 = np.diag(ov).copy()
    t3 = np.array([tri[i, i, i] for i in range(n)])
    q = (1.0 - p) / p
    inv2 = 1.0 / (mu * mu)
    inv4 = inv2 * inv2

    a2 = m * (m - 1.0)
    a3 = a2 * (m - 2.0)

    # conditional mean: 2 sum_i (1-p_i)/p_i a2_i t2_i / mu^2
    #                   - 4/mu^2 sum_{i<j} m_i m_j ov_ij
    mean = 2.0 * inv2 * (a2 @ (q * t2))
    cross = np.einsum("bi,ij,bj->b", m, ov, m) - (m * m) @ t2
    mean -= 2.0 * inv2 * cross  # cross already counts ordered pairs

    # variance, single-block terms
    c_a1 = 4.0 * q * q * 2.0 * (1.0 - t2 * t2)
    c_a2 = 4.0 * q * q * 4.0 * (t3 - t2 * t2)
    var = inv4 * (a2 @ c_a1 + a3 @ c_a2)

    for i in range(n):
        mi = m[:, i]
        for j in range(i + 1, n):
            mj = m[:, j]
            var += 16.0 * inv4 * mi * mj * (
                1.0
                + (1.0 - mi - mj) * ov[i, j] ** 2
                + (mi - 1.0) * tri[i, i, j]
                + (mj - 1.0) * tri[i, j, j]
            )

    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            var -= 32.0 * inv4 * q[i] * a2[:, i] * m[:, j] * (
                tri[i, i, j] - ov[i, i] * ov[i, j]
            )

    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            for k in range(j + 1, n):
                if k == i:
                    continue
                var += 32.0 * inv4 * m[:, i] * m[:, j] * m[:, k] * (
                    tri[i, j, k] - ov[i, j] * ov[i, k]
                )

    return mean, var
