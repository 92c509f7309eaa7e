"""Numba kernels for the batched Lanczos engine and tridiagonal quadrature.

The tridiagonal eigensolver is an implicit-shift QL iteration that accumulates
only the first row of the eigenvector matrix; squared first components are the
Gauss weights, so full eigenvectors are never formed (O(m^2) instead of
O(m^3) per rule).
"""

import numpy as np
from numba import njit, prange

_EPS = 2.220446049250313e-16


@njit(cache=True, nogil=True, inline="always")
def _dot(u, v, n):
    # 4-way unrolled so LLVM keeps independent accumulators
    c0 = 0.0
    c1 = 0.0
    c2 = 0.0
    c3 = 0.0
    t = 0
    while t + 4 <= n:
        c0 += u[t] * v[t]
        c1 += u[t + 1] * v[t + 1]
        c2 += u[t + 2] * v[t + 2]
        c3 += u[t + 3] * v[t + 3]
        t += 4
    c = (c0 + c1) + (c2 + c3)
    while t < n:
        c += u[t] * v[t]
        t += 1
    return c


@njit(cache=True, nogil=True, parallel=True)
def lanczos_step(V, W, j, bprev, scale, active, alphas, betas, nsteps, last):
    """One step of the three-term recurrence for a block of start vectors.

    V is the (steps, B, n) basis tensor, W the (B, n) block A @ V[j] (rows are
    vectors).  Computes alpha, subtracts the recurrence terms, runs one full
    modified Gram-Schmidt pass against V[:j+1] (with a second pass when the
    norm drops sharply), then normalizes into V[j+1].  Breakdown is declared
    when beta <= 1e-12 * scale, where scale is max(lambda_max hint, running
    Gershgorin bound).
    """
    S, B, n = V.shape
    for b in prange(B):
        if not active[b]:
            continue
        w = np.empty(n)
        for t in range(n):
            w[t] = W[b, t]
        a = _dot(V[j, b], w, n)
        alphas[b, j] = a
        nsteps[b] = j + 1
        if last:
            continue
        bp = bprev[b]
        if j > 0:
            for t in range(n):
                w[t] -= a * V[j, b, t] + bp * V[j - 1, b, t]
        else:
            for t in range(n):
                w[t] -= a * V[j, b, t]
        norm_before = np.sqrt(_dot(w, w, n))
        for i in range(j + 1):
            c = _dot(V[i, b], w, n)
            for t in range(n):
                w[t] -= c * V[i, b, t]
        beta = np.sqrt(_dot(w, w, n))
        if beta < 0.7071067811865475 * norm_before:
            # severe cancellation: one more full pass (twice is enough)
            for i in range(j + 1):
                c = _dot(V[i, b], w, n)
                for t in range(n):
                    w[t] -= c * V[i, b, t]
            beta = np.sqrt(_dot(w, w, n))
        g = abs(a) + bp + beta
        if g > scale[b]:
            scale[b] = g
        if beta <= 1e-12 * scale[b]:
            active[b] = False
            bprev[b] = 0.0
        else:
            betas[b, j] = beta
            bprev[b] = beta
            inv = 1.0 / beta
            for t in range(n):
                V[j + 1, b, t] = w[t] * inv


@njit(cache=True, nogil=True, inline="always")
def _tql_first_row(d, e, z, m):
    """Implicit-shift QL on a symmetric tridiagonal (d, e), rotating only the
    first eigenvector row z.  Returns 0 on convergence, -1 on failure."""
    for l in range(m):
        it = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            it += 1
            if it > 80:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.sqrt(g * g + 1.0)
            if g < 0.0:
                r = -r
            g = d[mm] - d[l] + e[l] / (g + r)
            s = 1.0
            c = 1.0
            p = 0.0
            broke = False
            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                h = c * e[i]
                r = np.sqrt(f * f + g * g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    broke = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * h
                p = s * r
                d[i + 1] = g + p
                g = c * r - h
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
            if not broke:
                d[l] -= p
                e[l] = g
                e[mm] = 0.0
    return 0


@njit(cache=True, nogil=True)
def tridiag_nodes_weights(alpha, beta, nodes, weights):
    """Gauss rule of one Jacobi matrix: ascending nodes, squared first
    eigenvector components as weights.  Returns 0, or -1 on QL failure."""
    m = alpha.shape[0]
    d = alpha.copy()
    e = np.zeros(m)
    for i in range(m - 1):
        e[i] = beta[i]
    z = np.zeros(m)
    z[0] = 1.0
    if _tql_first_row(d, e, z, m) != 0:
        return -1
    idx = np.argsort(d)
    for i in range(m):
        nodes[i] = d[idx[i]]
        weights[i] = z[idx[i]] * z[idx[i]]
    return 0


@njit(cache=True, nogil=True, parallel=True)
def batch_quad_log(alphas, betas, nsteps, out):
    """Per-row Gauss quadrature of log: out[b] = sum_k tau_k * log(theta_k).

    Rows with a non-positive node yield -inf (log domain violation); QL
    failure yields nan.  Rows with nsteps == 0 yield 0.
    """
    B = alphas.shape[0]
    S = alphas.shape[1]
    for b in prange(B):
        m = nsteps[b]
        if m == 0:
            out[b] = 0.0
            continue
        d = np.empty(S)
        e = np.empty(S)
        z = np.empty(S)
        for i in range(m):
            d[i] = alphas[b, i]
            z[i] = 0.0
        z[0] = 1.0
        for i in range(m - 1):
            e[i] = betas[b, i]
        e[m - 1] = 0.0
        if _tql_first_row(d, e, z, m) != 0:
            out[b] = np.nan
            continue
        acc = 0.0
        bad = False
        for i in range(m):
            if d[i] <= 0.0:
                bad = True
                break
            acc += z[i] * z[i] * np.log(d[i])
        out[b] = -np.inf if bad else acc
