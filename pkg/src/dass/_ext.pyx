# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: greedy worst-out elimination and monotone FISTA.

Both mirror ``dass._pykernels`` operation for operation so the two backends
agree bit-for-bit on the elimination order.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def greedy_eliminate(const double[:, ::1] G2, double[::1] rowsum, const double[::1] sqnorm,
                     double fp, double trace, Py_ssize_t M, int pair_rule, int mode):
    """Eliminate rows until ``M`` remain; returns (kept, removal_order).

    ``G2[i, j] = <psi_i, psi_j>**2``, ``rowsum`` its row sums (consumed),
    ``sqnorm`` the squared row norms, ``fp``/``trace`` their totals.
    ``mode``: 0 keep the largest remaining FP, 1 the smallest, 2 the
    smallest FP / trace**2.  ``pair_rule``: 0 no pair step, 1 most coherent
    pair, 2 the pair whose joint removal best serves ``mode``.
    """
    cdef Py_ssize_t N = G2.shape[0]
    cdef Py_ssize_t i, j, k, best_i = -1, best_j = -1, n_alive = N, n_removed = 0
    cdef double best = 0.0, score, den
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] alive_arr = np.ones(N, dtype=np.uint8)
    cdef cnp.uint8_t[::1] alive = alive_arr
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.empty(N - M, dtype=np.intp)
    cdef double[::1] drop = np.empty(N)

    if pair_rule != 0 and N - M >= 2:
        for i in range(N):
            drop[i] = 2.0 * rowsum[i] - G2[i, i]
        for i in range(N):
            for j in range(i + 1, N):
                if pair_rule == 1:
                    score = G2[i, j]
                else:
                    # remaining FP after removing both rows, negated when minimising
                    score = fp - (drop[i] + drop[j]) + 2.0 * G2[i, j]
                    if mode == 2:
                        den = trace - (sqnorm[i] + sqnorm[j])
                        score = -score / (den * den) if den > 0.0 else -INFINITY
                    elif mode == 1:
                        score = -score
                if best_i < 0 or score > best:
                    best = score
                    best_i = i
                    best_j = j
        alive[best_i] = 0
        alive[best_j] = 0
        fp = fp - (drop[best_i] + drop[best_j]) + 2.0 * G2[best_i, best_j]
        trace = trace - (sqnorm[best_i] + sqnorm[best_j])
        for k in range(N):
            rowsum[k] -= G2[k, best_i] + G2[k, best_j]
        order[0] = best_i
        order[1] = best_j
        n_removed = 2
        n_alive -= 2

    while n_alive > M:
        best_i = -1
        best = 0.0
        for i in range(N):
            if not alive[i]:
                continue
            score = fp - (2.0 * rowsum[i] - G2[i, i])
            if mode == 2:
                den = trace - sqnorm[i]
                score = -score / (den * den) if den > 0.0 else -INFINITY
            elif mode == 1:
                score = -score
            if best_i < 0 or score > best:
                best = score
                best_i = i
        alive[best_i] = 0
        fp = fp - (2.0 * rowsum[best_i] - G2[best_i, best_i])
        trace = trace - sqnorm[best_i]
        for k in range(N):
            rowsum[k] -= G2[k, best_i]
        order[n_removed] = best_i
        n_removed += 1
        n_alive -= 1

    return np.flatnonzero(alive_arr).astype(np.intp), order


cdef double _objective(const double[:, ::1] Q, const double[::1] q, double half_bb,
                       double mu, double[::1] s, double[::1] tmp) nogil:
    cdef Py_ssize_t K = Q.shape[0], i, j
    cdef double quad = 0.0, lin = 0.0, l1 = 0.0, acc
    for i in range(K):
        acc = 0.0
        for j in range(K):
            acc += Q[i, j] * s[j]
        tmp[i] = acc
    for i in range(K):
        quad += s[i] * tmp[i]
        lin += q[i] * s[i]
        l1 += fabs(s[i])
    return 0.5 * quad - lin + half_bb + mu * l1


def fista_lasso(const double[:, ::1] Q, const double[::1] q, double bb, double mu,
                double lipschitz, double[::1] s0, Py_ssize_t max_iter, double tol):
    """Monotone FISTA with restart for ``0.5 s'Qs - q's + 0.5 bb + mu |s|_1``.

    Returns (s, iterations, converged, objective_history).
    """
    cdef Py_ssize_t K = Q.shape[0], i, j, it = 0
    cdef double step = 1.0 / lipschitz, thr = mu / lipschitz
    cdef double t = 1.0, t_next, f_x, f_z, acc, v, diff, znorm, c1, c2
    cdef bint converged = False
    x_arr = np.array(s0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] x_prev = np.array(s0, dtype=np.float64, copy=True)
    cdef double[::1] y = np.array(s0, dtype=np.float64, copy=True)
    cdef double[::1] z = np.zeros(K)
    cdef double[::1] tmp = np.zeros(K)
    hist_arr = np.empty(max_iter + 1)
    cdef double[::1] hist = hist_arr
    cdef double half_bb = 0.5 * bb

    f_x = _objective(Q, q, half_bb, mu, x, tmp)
    hist[0] = f_x
    while it < max_iter:
        it += 1
        diff = 0.0
        znorm = 0.0
        for i in range(K):
            acc = 0.0
            for j in range(K):
                acc += Q[i, j] * y[j]
            v = y[i] - step * (acc - q[i])
            if v > thr:
                v = v - thr
            elif v < -thr:
                v = v + thr
            else:
                v = 0.0
            z[i] = v
            diff += (v - y[i]) * (v - y[i])
            znorm += v * v
        f_z = _objective(Q, q, half_bb, mu, z, tmp)
        for i in range(K):
            x_prev[i] = x[i]
        if f_z <= f_x:
            for i in range(K):
                x[i] = z[i]
            f_x = f_z
        hist[it] = f_x
        t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
        if f_z > hist[it - 1]:
            # restart momentum after a rejected step
            t_next = 1.0
            for i in range(K):
                y[i] = x[i]
        else:
            c1 = t / t_next
            c2 = (t - 1.0) / t_next
            for i in range(K):
                y[i] = x[i] + c1 * (z[i] - x[i]) + c2 * (x[i] - x_prev[i])
        t = t_next
        if sqrt(diff) <= tol * (1.0 if znorm < 1.0 else sqrt(znorm)):
            converged = True
            break
    return x_arr, it, converged, hist_arr[:it + 1].copy()
