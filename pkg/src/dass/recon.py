"""Least-squares reconstruction from selected model rows, the Theta cost and
the reconstruction error bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FieldBlock, Measurement, PreconditionError, SamplingPattern, SignalModel

RANK_RTOL = 1e-10
GRAM_EIG_FLOOR = 1e-12


class UnderdeterminedError(PreconditionError):
    pass


class IllConditionedPattern(PreconditionError):
    def __init__(self, pattern: SamplingPattern, ratio: float):
        self.pattern = pattern
        super().__init__(
            f"ill-conditioned pattern (sigma_min/sigma_max={ratio:.3g}): "
            f"[{pattern.to_text()}]"
        )


@dataclass(frozen=True, eq=False)
class Reconstruction:
    estimate: FieldBlock
    coefficients: np.ndarray
    theta: float
    bound: float | None  # None when the approximation error is unknown


def thin_svd(A: np.ndarray):
    """Economy SVD that survives LAPACK non-convergence.

    Retries on the transpose, then falls back to the eigendecomposition of
    the Gram matrix (accurate enough once the ``RANK_RTOL`` cutoff applies).
    """
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    try:
        U, s, Vt = np.linalg.svd(A.T, full_matrices=False)
        return Vt.T, s, U.T
    except np.linalg.LinAlgError:
        pass
    lam, V = np.linalg.eigh(A.T @ A)
    order = np.argsort(lam)[::-1]
    s = np.sqrt(np.clip(lam[order], 0.0, None))
    V = V[:, order]
    with np.errstate(divide="ignore", invalid="ignore"):
        U = np.where(s > 0, (A @ V) / s, 0.0)
    return U, s, V.T


def _selected_rows(model: SignalModel, tau: SamplingPattern) -> np.ndarray:
    if tau.block_length != model.N:
        raise PreconditionError(
            f"pattern block length {tau.block_length} != model length {model.N}"
        )
    return model.basis[tau.indices]


def gram_eigenvalues(model: SignalModel, tau: SamplingPattern) -> np.ndarray:
    """Eigenvalues of (Phi Psi)^T (Phi Psi), sorted decreasing."""
    sub = _selected_rows(model, tau)
    lam = np.linalg.eigvalsh(sub.T @ sub)
    return lam[::-1]


def theta_cost(model: SignalModel, tau: SamplingPattern) -> float:
    """Sum of reciprocal Gram eigenvalues; ``inf`` for rank-deficient selections."""
    if tau.M < model.K:
        _selected_rows(model, tau)
        return math.inf
    lam = gram_eigenvalues(model, tau)
    if lam.size == 0:
        return 0.0
    if lam[-1] <= GRAM_EIG_FLOOR:
        return math.inf
    return float(np.sum(1.0 / lam))


def error_bound(model: SignalModel, tau: SamplingPattern, eps_a: float, sigma: float) -> float:
    """Upper bound ``eps_a**2 / lambda_K + sigma**2 * Theta`` on the squared RMSE.

    ``lambda_K`` is the smallest eigenvalue of the selected-row Gram matrix.
    """
    if eps_a < 0 or sigma < 0:
        raise PreconditionError("eps_a and sigma must be nonnegative")
    if tau.M < model.K:
        _selected_rows(model, tau)
        return math.inf
    lam = gram_eigenvalues(model, tau)
    if lam.size == 0:
        return 0.0
    if lam[-1] <= GRAM_EIG_FLOOR:
        return math.inf
    return float(eps_a ** 2 / lam[-1] + sigma ** 2 * np.sum(1.0 / lam))


def ols_reconstruct(model: SignalModel, m: Measurement, eps_a: float | None = None) -> Reconstruction:
    """Estimate the block from its measured entries by least squares in the model.

    The coefficients are ``pinv(Psi[tau]) @ (y - mean[tau])`` with the
    pseudoinverse taken through an SVD; a selection whose singular values
    fall below ``1e-10`` of the largest is rejected rather than regularised.
    """
    tau = m.pattern
    sub = _selected_rows(model, tau)
    K = model.K
    if tau.M < K:
        raise UnderdeterminedError(f"underdetermined: M={tau.M} < K={K}")
    resid = m.observed - model.mean[tau.indices]
    if K == 0:
        alpha = np.zeros(0)
    else:
        U, s, Vt = thin_svd(sub)
        ratio = s[-1] / s[0] if s[0] > 0 else 0.0
        if ratio < RANK_RTOL:
            raise IllConditionedPattern(tau, ratio)
        alpha = Vt.T @ ((U.T @ resid) / s)
    x_tilde = model.basis @ alpha + model.mean
    theta = theta_cost(model, tau)
    bound = None if eps_a is None else error_bound(model, tau, eps_a, m.noise_sigma)
    return Reconstruction(FieldBlock(x_tilde), alpha, theta, bound)


def expected_mse(model: SignalModel, tau: SamplingPattern, K: int, sigma: float) -> float:
    """Expected squared RMSE of reconstructing with the leading ``K`` components.

    Blocks are taken as ``mean + sum_k a_k psi_k`` over every component of
    ``model`` with independent ``a_k`` of variance ``lambda_k``.  Components
    past ``K`` are lost and also alias into the estimate through the
    pseudoinverse ``P`` of the selected rows, so the expectation is
    ``(sum_{k>K} lambda_k (1 + ||P psi_k[tau]||^2) + sigma^2 Theta_K) / N``.
    Energy outside the model's components is not counted.
    """
    if sigma < 0:
        raise PreconditionError("sigma must be nonnegative")
    if not 1 <= K <= model.K:
        raise PreconditionError(f"K must lie in [1, {model.K}], got {K}")
    rows = _selected_rows(model, tau)
    if tau.M < K:
        return math.inf
    U, s, Vt = thin_svd(rows[:, :K])
    if s[-1] <= RANK_RTOL * s[0]:
        return math.inf
    alias = (Vt.T / s) @ (U.T @ rows[:, K:])
    lam = np.clip(model.eigenvalues[K:], 0.0, None)
    lost = float(np.sum(lam * (1.0 + np.sum(alias * alias, axis=0))))
    return (lost + sigma ** 2 * float(np.sum(1.0 / s ** 2))) / model.N
