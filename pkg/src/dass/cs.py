"""l1 reconstruction baselines over a learned dictionary.

Both the equality-constrained (noiseless) and residual-budget (noisy)
problems are solved through the penalised form
``0.5 * ||b - A s||^2 + mu * ||s||_1`` with ``A`` the measured rows of the
dictionary and ``b`` the mean-removed measurements.  The noisy problem picks
``mu`` by bisection so that ``||b - A s|| ~ xi``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import FieldBlock, Measurement, PreconditionError, SignalModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class L1Config:
    xi: float = 0.0
    max_iterations: int = 5000
    tol: float = 1e-8
    mu: float | None = None  # explicit penalty; skips the xi -> mu bisection
    budget_rtol: float = 0.02
    noiseless_mu_factor: float = 1e-6
    power_iterations: int = 20
    lipschitz_safety: float = 1.1
    bisection_steps: int = 60

    def __post_init__(self):
        if self.xi < 0:
            raise PreconditionError("xi must be >= 0")
        for name in ("tol", "budget_rtol", "noiseless_mu_factor"):
            if getattr(self, name) <= 0:
                raise PreconditionError(f"{name} must be > 0")
        if self.max_iterations < 1:
            raise PreconditionError("max_iterations must be >= 1")
        if self.mu is not None and self.mu < 0:
            raise PreconditionError("mu must be >= 0")


@dataclass(frozen=True, eq=False)
class L1Result:
    estimate: FieldBlock
    coefficients: np.ndarray
    mu: float
    residual_norm: float
    converged: bool
    iterations: int
    status: str = "ok"
    history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def power_lipschitz(Q: np.ndarray, iterations: int = 20) -> float:
    """Largest eigenvalue of the PSD matrix ``Q`` by power iteration."""
    v = np.ones(Q.shape[0]) / math.sqrt(Q.shape[0])
    lam = 0.0
    for _ in range(iterations):
        w = Q @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        lam = float(v @ w)
        v = w / nw
    return max(lam, float(v @ (Q @ v)))


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lasso_objective(A, b, s, mu) -> float:
    r = b - A @ s
    return 0.5 * float(r @ r) + mu * float(np.abs(s).sum())


def optimality_certificate(A, b, s, mu, tol: float = 1e-6) -> bool:
    """Subgradient optimality of ``s`` for the penalised problem.

    Off the support ``|A_i' r| <= mu (1 + tol)``; on it
    ``|A_i' r - mu sign(s_i)| <= tol * mu``.
    """
    g = A.T @ (b - A @ s)
    on = s != 0
    if np.any(np.abs(g[~on]) > mu * (1 + tol)):
        return False
    return bool(np.all(np.abs(g[on] - mu * np.sign(s[on])) <= tol * mu))


class _Solver:
    def __init__(self, A, b, cfg: L1Config, backend=None):
        self.A, self.b, self.cfg = A, b, cfg
        self.Q = np.ascontiguousarray(A.T @ A)
        self.q = np.ascontiguousarray(A.T @ b)
        self.bb = float(b @ b)
        lip = power_lipschitz(self.Q, cfg.power_iterations)
        if lip <= 0:
            raise PreconditionError("zero dictionary on the measured rows")
        self.lip = lip * cfg.lipschitz_safety
        self.mu_max = float(np.max(np.abs(self.q)))
        self.impl = kernels if backend is None else kernels.get_backend(backend)
        self.iterations = 0

    def _fista(self, mu, s0):
        s, it, conv, hist = self.impl.fista_lasso(self.Q, self.q, self.bb, mu, self.lip,
                                                  np.ascontiguousarray(s0, dtype=float),
                                                  self.cfg.max_iterations, self.cfg.tol)
        self.iterations += it
        return np.asarray(s), bool(conv), np.asarray(hist)

    def _objective(self, s, mu):
        return 0.5 * float(s @ (self.Q @ s)) - float(self.q @ s) + 0.5 * self.bb \
            + mu * float(np.abs(s).sum())

    def _polish(self, s, mu, max_steps=200):
        """Refine a near-optimal iterate to an exact KKT point.

        Feature-sign active-set steps: solve the signed normal equations on the
        support, line-search back to the first sign change, add the worst
        off-support violator.  Returns None if no certified point is reached.
        """
        peak = np.max(np.abs(s)) if s.size else 0.0
        x = np.where(np.abs(s) > 1e-9 * peak, s, 0.0) if peak > 0 else np.zeros_like(s)
        for _ in range(max_steps):
            g = self.q - self.Q @ x
            on = np.flatnonzero(x)
            off_mask = np.ones(x.size, dtype=bool)
            off_mask[on] = False
            theta = np.sign(x[on])
            if on.size:
                QS = self.Q[np.ix_(on, on)]
                try:
                    target = np.linalg.solve(QS, self.q[on] - mu * theta)
                except np.linalg.LinAlgError:
                    return None
                if np.any(np.sign(target) != theta):
                    cur = x[on]
                    step = target - cur
                    cands = [1.0]
                    with np.errstate(divide="ignore", invalid="ignore"):
                        ts = -cur / step
                    cands += [t for t in ts if 0 < t < 1]
                    best_t, best_f = None, math.inf
                    for t in cands:
                        trial = x.copy()
                        trial[on] = cur + t * step
                        f = self._objective(trial, mu)
                        if f < best_f:
                            best_t, best_f = t, f
                    new_on = cur + best_t * step
                    # coordinates that reached zero leave the support
                    crossed = np.sign(new_on) != theta
                    new_on[crossed] = 0.0
                    x = x.copy()
                    x[on] = new_on
                    continue
                x = np.zeros_like(x)
                x[on] = target
                g = self.q - self.Q @ x
            if not off_mask.any():
                break
            viol = np.where(off_mask, np.abs(g), 0.0)
            j = int(np.argmax(viol))
            if viol[j] <= mu * (1 + 1e-12):
                break
            x = x.copy()
            x[j] = 1e-12 * np.sign(g[j]) * max(peak, 1.0)
        if optimality_certificate(self.A, self.b, x, mu, tol=1e-9):
            return x
        return None

    def solve(self, mu, s0=None):
        """Minimise the penalised objective, continuing from larger ``mu`` when small."""
        s = np.zeros(self.Q.shape[0]) if s0 is None else s0
        if mu >= self.mu_max:
            return np.zeros_like(s), True, np.array([0.5 * self.bb])
        stage = self.mu_max
        while s0 is None and stage * 0.1 > mu:
            stage *= 0.1
            s, _, _ = self._fista(stage, s)
        s, conv, hist = self._fista(mu, s)
        polished = self._polish(s, mu)
        if polished is not None:
            return polished, True, hist
        return s, conv, hist

    def residual(self, s) -> float:
        return float(np.linalg.norm(self.b - self.A @ s))


def l1_reconstruct(dictionary: SignalModel, m: Measurement, cfg: L1Config = L1Config(),
                   backend=None) -> L1Result:
    """Sparse-code the measurements in ``dictionary`` and map back.

    ``cfg.xi == 0`` solves the noiseless problem with ``mu`` at the floor
    ``noiseless_mu_factor * max|A'b|``; otherwise ``mu`` is bisected until
    the residual norm is within ``budget_rtol`` of ``xi``.  The mean is
    removed before and restored after, as in the least-squares path.
    """
    tau = m.pattern
    if tau.block_length != dictionary.N:
        raise PreconditionError(
            f"pattern block length {tau.block_length} != dictionary length {dictionary.N}"
        )
    Pi = dictionary.basis
    if Pi.shape[1] == 0 or not np.any(Pi):
        raise PreconditionError("zero dictionary")
    A = np.ascontiguousarray(Pi[tau.indices])
    b = m.observed - dictionary.mean[tau.indices]
    xi = cfg.xi

    def _result(s, mu, conv, hist, status="ok"):
        est = FieldBlock(Pi @ s + dictionary.mean)
        res = float(np.linalg.norm(b - A @ s))
        if not conv and status == "ok":
            status = "not_converged"
        if status != "ok":
            log.warning("l1 reconstruction %s (residual %.3g, mu %.3g)", status, res, mu)
        return L1Result(est, s, mu, res, conv, solver.iterations if solver else 0, status, hist)

    solver = None
    if xi > 0 and xi >= np.linalg.norm(b) and cfg.mu is None:
        s = np.zeros(Pi.shape[1])
        return _result(s, math.inf, True, np.array([0.5 * float(b @ b)]))

    solver = _Solver(A, b, cfg, backend)
    if solver.mu_max == 0:
        s = np.zeros(Pi.shape[1])
        return _result(s, 0.0, True, np.array([0.5 * float(b @ b)]))

    if cfg.mu is not None:
        s, conv, hist = solver.solve(cfg.mu)
        return _result(s, cfg.mu, conv, hist)

    mu_floor = cfg.noiseless_mu_factor * solver.mu_max
    s, conv, hist = solver.solve(mu_floor)
    if xi == 0:
        return _result(s, mu_floor, conv, hist)
    if solver.residual(s) >= xi * (1 - cfg.budget_rtol):
        # budget below what the floor penalty already leaves: nothing to trade
        return _result(s, mu_floor, conv, hist, "budget_below_floor"
                       if solver.residual(s) > xi * (1 + cfg.budget_rtol) else "ok")

    lo, hi = math.log(mu_floor), math.log(solver.mu_max)
    s_lo = s_mid = s
    for _ in range(cfg.bisection_steps):
        mid = 0.5 * (lo + hi)
        mu = math.exp(mid)
        s_mid, conv, hist = solver.solve(mu, s_lo)
        r = solver.residual(s_mid)
        if abs(r - xi) <= cfg.budget_rtol * xi:
            return _result(s_mid, mu, conv, hist)
        if r < xi:
            lo, s_lo = mid, s_mid
        else:
            hi = mid
    return _result(s_mid, mu, conv, hist, "budget_mismatch")
