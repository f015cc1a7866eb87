"""Pure-Python/NumPy versions of the compiled kernels in ``_ext.pyx``."""
import numpy as np


def _mode_score(fp_rem, den, mode):
    if mode == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0.0, -fp_rem / (den * den), -np.inf)
    return -fp_rem if mode == 1 else fp_rem


def greedy_eliminate(G2, rowsum, sqnorm, fp, trace, M, pair_rule, mode):
    N = G2.shape[0]
    alive = np.ones(N, dtype=bool)
    order = []
    diag = np.diag(G2)
    if pair_rule != 0 and N - M >= 2:
        if pair_rule == 1:
            score = G2.copy()
        else:
            drop = 2.0 * rowsum - diag
            rem = fp - (drop[:, None] + drop[None, :]) + 2.0 * G2
            den = trace - (sqnorm[:, None] + sqnorm[None, :])
            score = _mode_score(rem, den, mode)
        score[np.tril_indices(N)] = -np.inf
        flat = int(np.argmax(score))  # first max in row-major order = lexicographic
        i, j = divmod(flat, N)
        if not np.isfinite(score[i, j]) and pair_rule != 1:
            i, j = 0, 1
        drop_i, drop_j = 2.0 * rowsum[i] - diag[i], 2.0 * rowsum[j] - diag[j]
        alive[i] = alive[j] = False
        fp = fp - (drop_i + drop_j) + 2.0 * G2[i, j]
        trace = trace - (sqnorm[i] + sqnorm[j])
        rowsum -= G2[:, i] + G2[:, j]
        order += [i, j]
    idx = np.arange(N)
    while alive.sum() > M:
        cand = idx[alive]
        rem = fp - (2.0 * rowsum[cand] - diag[cand])
        score = _mode_score(rem, trace - sqnorm[cand], mode)
        best = int(cand[int(np.argmax(score))])
        alive[best] = False
        fp = fp - (2.0 * rowsum[best] - diag[best])
        trace = trace - sqnorm[best]
        rowsum -= G2[:, best]
        order.append(best)
    return np.flatnonzero(alive).astype(np.intp), np.array(order, dtype=np.intp)


def _objective(Q, q, half_bb, mu, s):
    return 0.5 * s @ (Q @ s) - q @ s + half_bb + mu * np.abs(s).sum()


def fista_lasso(Q, q, bb, mu, lipschitz, s0, max_iter, tol):
    step = 1.0 / lipschitz
    thr = mu / lipschitz
    half_bb = 0.5 * bb
    x = np.array(s0, dtype=float, copy=True)
    y = x.copy()
    t = 1.0
    f_x = _objective(Q, q, half_bb, mu, x)
    hist = [f_x]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        v = y - step * (Q @ y - q)
        z = np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
        diff = np.linalg.norm(z - y)
        znorm = np.linalg.norm(z)
        f_z = _objective(Q, q, half_bb, mu, z)
        x_prev = x.copy()
        if f_z <= f_x:
            x = z.copy()
            f_x = f_z
        hist.append(f_x)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if f_z > hist[-2]:
            t_next = 1.0
            y = x.copy()
        else:
            y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        if diff <= tol * max(1.0, znorm):
            converged = True
            break
    return x, it, converged, np.array(hist)
