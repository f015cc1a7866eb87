"""Learning the signal model from incomplete blocks.

Two updaters are provided: a FIFO buffer of the most recent blocks followed
by a dense eigendecomposition, and an incremental PCA that keeps only the
leading eigenpairs.  Both consume blocks that have been filled in by linear
interpolation of the measured samples.
"""
from __future__ import annotations

import collections
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .core import FieldBlock, Measurement, PreconditionError, SignalModel

MODEL_FORMAT = "# dass-model v1"


@dataclass(frozen=True)
class LearnerConfig:
    K: int | Literal["auto"] = "auto"
    buffer_length: int = 30
    interpolation: Literal["linear"] = "linear"
    variant: Literal["as_printed", "rescaled"] = "rescaled"
    residual_tolerance: float = 1e-9
    updater: Literal["incremental", "buffer"] = "incremental"

    def __post_init__(self):
        if self.K != "auto" and (not isinstance(self.K, (int, np.integer)) or self.K < 1):
            raise PreconditionError(f"K must be a positive integer or 'auto', got {self.K!r}")
        if self.buffer_length < 1:
            raise PreconditionError("buffer_length must be >= 1")
        if self.interpolation != "linear":
            raise PreconditionError(f"unsupported interpolation {self.interpolation!r}")
        if self.variant not in ("as_printed", "rescaled"):
            raise PreconditionError(f"unknown variant {self.variant!r}")
        if self.updater not in ("incremental", "buffer"):
            raise PreconditionError(f"unknown updater {self.updater!r}")
        if self.residual_tolerance < 0:
            raise PreconditionError("residual_tolerance must be >= 0")


def interpolate_block(m: Measurement, N: int | None = None, **meta) -> FieldBlock:
    """Fill a block from its measured samples.

    Linear between consecutive measured indices; the first and last measured
    values are held constant towards the block edges.
    """
    tau = m.pattern
    N = tau.block_length if N is None else N
    if N != tau.block_length:
        raise PreconditionError(f"N={N} does not match pattern block length {tau.block_length}")
    values = np.interp(np.arange(N), tau.indices, m.observed)
    return FieldBlock(values, **meta)


def _canonical_signs(basis: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made nonnegative
    if basis.shape[1] == 0:
        return basis
    rows = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[rows, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _reorthonormalize(basis: np.ndarray) -> np.ndarray:
    if basis.shape[1] == 0:
        return basis
    if np.max(np.abs(basis.T @ basis - np.eye(basis.shape[1]))) <= 1e-13:
        return basis
    q, r = np.linalg.qr(basis)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _top_eigenpairs(sym: np.ndarray, K: int):
    lam, vec = np.linalg.eigh(sym)
    order = np.argsort(lam, kind="stable")[::-1][:K]
    lam = np.clip(lam[order], 0.0, None)
    return lam, vec[:, order]


def empty_model(first: FieldBlock) -> SignalModel:
    """A zero-dimensional model centred on the first block."""
    return SignalModel(np.zeros((first.N, 0)), first.values, np.zeros(0), sample_count=1,
                       warmup=True)


def batch_model(blocks: Iterable, K: int) -> SignalModel:
    """PCA of a set of complete blocks (covariance normalised by the count)."""
    X = np.array([b.values if isinstance(b, FieldBlock) else np.asarray(b, float)
                  for b in blocks])
    if X.ndim != 2 or X.shape[0] == 0:
        raise PreconditionError("need at least one block")
    n, N = X.shape
    if not 1 <= K <= N:
        raise PreconditionError(f"K must be in [1, {N}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    k_eff = min(K, n)
    lam, vec = _top_eigenpairs(cov, k_eff)
    degenerate = bool(lam.size == 0 or lam[0] <= 0.0)
    return SignalModel(_canonical_signs(vec), mean, lam, sample_count=n,
                       warmup=k_eff < K, degenerate=degenerate)


def update_model_buffer(buffer: collections.deque, new: FieldBlock, K: int) -> SignalModel:
    """Insert ``new`` into the FIFO ``buffer`` (a ``deque`` with ``maxlen``)
    and return the PCA model of its contents."""
    if buffer and buffer[0].N != new.N:
        raise PreconditionError(f"block length {new.N} != buffered length {buffer[0].N}")
    if not 1 <= K <= new.N:
        raise PreconditionError(f"K must be in [1, {new.N}]")
    buffer.append(new)
    return batch_model(buffer, K)


def update_model_incremental(model: SignalModel, new: FieldBlock, cfg: LearnerConfig,
                             K: int | None = None) -> SignalModel:
    """One incremental-PCA step absorbing ``new``.

    ``K`` overrides ``cfg.K`` (required when ``cfg.K == 'auto'``).  The
    memory length is ``min(sample_count, cfg.buffer_length)`` so the first
    blocks are averaged exactly.
    """
    K = cfg.K if K is None else K
    if K == "auto":
        raise PreconditionError("update_model_incremental needs an explicit K")
    if new.N != model.N:
        raise PreconditionError(f"block length {new.N} != model length {model.N}")
    if model.sample_count == 0:
        return empty_model(new)
    Psi = model.basis
    k_cur = Psi.shape[1]
    if k_cur and np.max(np.abs(Psi.T @ Psi - np.eye(k_cur))) > 1e-8:
        raise PreconditionError("model basis is not orthonormal")

    L = min(model.sample_count, cfg.buffer_length)
    w_old = 1.0 / (L + 1) if cfg.variant == "as_printed" else L / (L + 1)
    w_new = L / (L + 1) ** 2

    x = new.values
    d = x - model.mean
    a = Psi.T @ d
    b = (Psi @ a + model.mean) - x
    nb = np.linalg.norm(b)
    if nb >= cfg.residual_tolerance and nb > 0:
        b = b / nb
        c = b @ d
        coords = np.append(a, c)
        D = w_old * np.diag(np.append(model.eigenvalues, 0.0)) + w_new * np.outer(coords, coords)
        span = np.column_stack([Psi, b])
    else:
        D = w_old * np.diag(model.eigenvalues) + w_new * np.outer(a, a)
        span = Psi
    lam, R = _top_eigenpairs(D, K)
    basis = _canonical_signs(_reorthonormalize(span @ R))
    mean = (L * model.mean + x) / (L + 1)
    return SignalModel(basis, mean, lam, sample_count=model.sample_count + 1,
                       warmup=basis.shape[1] < K, degenerate=bool(lam.size == 0 or lam[0] <= 0))


class Learner:
    """Stateful wrapper choosing between the buffer and incremental updaters."""

    def __init__(self, cfg: LearnerConfig, K: int):
        self.cfg = cfg
        self.K = K
        self.model: SignalModel | None = None
        self._buffer: collections.deque = collections.deque(maxlen=cfg.buffer_length)
        self._absorbed = 0

    @property
    def absorbed(self) -> int:
        return self._absorbed

    def update(self, block: FieldBlock) -> SignalModel:
        self._absorbed += 1
        if self.cfg.updater == "buffer":
            m = update_model_buffer(self._buffer, block, self.K)
            # sample_count counts every absorbed block, not buffer occupancy
            self.model = SignalModel(m.basis, m.mean, m.eigenvalues, self._absorbed,
                                     m.warmup, m.degenerate)
        elif self.model is None:
            self.model = empty_model(block)
        else:
            self.model = update_model_incremental(self.model, block, self.cfg, K=self.K)
        return self.model


def select_dimension(spectrum, M: int, sigma: float, N: int | None = None) -> int:
    """Pick K in [1, M] minimising the estimated reconstruction error.

    The estimate is ``(N/M) * (tail(K)/N + sigma**2 * K)`` where ``tail(K)``
    is the spectrum mass beyond K and ``N/M`` stands in for the reciprocal
    smallest Gram eigenvalue of an evenly spread selection.  ``N`` defaults
    to ``len(spectrum)``; pass it when the spectrum is truncated.
    """
    spec = np.asarray(spectrum, dtype=float)
    if spec.ndim != 1 or spec.size == 0:
        raise PreconditionError("spectrum must be a non-empty vector")
    if M < 1:
        raise PreconditionError("M must be >= 1")
    if sigma < 0:
        raise PreconditionError("sigma must be >= 0")
    N = spec.size if N is None else N
    k_max = min(M, spec.size)
    spec = np.clip(spec, 0.0, None)
    tails = np.array([spec[k:].sum() for k in range(1, k_max + 1)])
    ks = np.arange(1, k_max + 1)
    cost = (N / M) * (tails / N + sigma ** 2 * ks)
    return int(ks[np.argmin(cost)])


def press_curve(model: SignalModel, m: Measurement, k_max: int) -> np.ndarray:
    """Leave-one-out prediction error of ``m``'s samples for K = 1 .. k_max.

    Each measured sample is predicted from the block's other samples through
    the leading-K model (closed form ``r_i / (1 - h_ii)`` with nested QR
    factors).  Entry ``K - 1`` is ``inf`` when K exceeds ``model.K``,
    reaches ``M`` or makes the selected rows rank deficient.
    """
    out = np.full(k_max, np.inf)
    k_hi = min(k_max, model.K, m.pattern.M - 1)
    if k_hi < 1:
        return out
    idx = m.pattern.indices
    Q, R = np.linalg.qr(model.basis[idx, :k_hi])
    r = m.observed - model.mean[idx]
    d = np.abs(np.diag(R))
    valid = np.cumprod(d > 1e-10 * max(d[0], 1e-300)).astype(bool)
    lev = np.cumsum(Q * Q, axis=1)
    resid = r[:, None] - np.cumsum(Q * (Q.T @ r), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        loo = np.where(lev < 1 - 1e-10, resid / (1 - lev), np.inf)
    cost = np.sum(loo * loo, axis=0)
    cost[~valid] = np.inf
    out[:k_hi] = cost
    return out


def holdout_dimension(curves) -> int:
    """K minimising the summed held-out PRESS curves; ties go to smaller K.

    Returns 1 when no K is valid.
    """
    total = np.sum(np.atleast_2d(np.asarray(curves, dtype=float)), axis=0)
    if total.size == 0 or not np.isfinite(total).any():
        return 1
    return int(np.argmin(total)) + 1


def residual_variance(model: SignalModel, m: Measurement, K: int) -> float:
    """Per-sample residual variance ``RSS / (M - K)`` of a K-term fit to ``m``.

    With ``K`` well below ``M`` this estimates the measurement noise
    variance plus whatever signal the K leading components miss.
    """
    K = min(K, model.K)
    M = m.pattern.M
    if not 1 <= K < M:
        raise PreconditionError(f"need 1 <= K < M, got K={K}, M={M}")
    idx = m.pattern.indices
    A = model.basis[idx, :K]
    b = m.observed - model.mean[idx]
    Q = np.linalg.qr(A)[0]
    r = b - Q @ (Q.T @ b)
    return float(r @ r) / (M - K)


def estimate_eps_a(model: SignalModel, K: int) -> float:
    """Approximation RMSE estimate from the stored spectrum beyond ``K``."""
    return float(np.sqrt(model.residual_energy(K)))


def _fmt(v: float) -> str:
    return repr(float(v))


def dump_model(model: SignalModel) -> str:
    """Text snapshot: version line, a dimension header, then row-major numbers."""
    out = io.StringIO()
    out.write(MODEL_FORMAT + "\n")
    out.write(f"N={model.N} K={model.K} sample_count={model.sample_count}\n")
    out.write("mean\n" + " ".join(map(_fmt, model.mean)) + "\n")
    out.write("eigenvalues\n" + " ".join(map(_fmt, model.eigenvalues)) + "\n")
    out.write("basis\n")
    for row in model.basis:
        out.write(" ".join(map(_fmt, row)) + "\n")
    return out.getvalue()


def load_model(text: str) -> SignalModel:
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    if not lines or lines[0].strip() != MODEL_FORMAT:
        raise ValueError(f"not a model snapshot (expected {MODEL_FORMAT!r} header)")
    header = dict(tok.split("=") for tok in lines[1].split())
    N, K, count = int(header["N"]), int(header["K"]), int(header["sample_count"])

    def _nums(s):
        return np.array([float(t) for t in s.split()]) if s.strip() else np.zeros(0)

    if lines[2] != "mean" or lines[4] != "eigenvalues" or lines[6] != "basis":
        raise ValueError("malformed model snapshot")
    mean = _nums(lines[3])
    lam = _nums(lines[5])
    rows = [_nums(s) for s in lines[7:7 + N]]
    basis = np.array(rows).reshape(N, K)
    return SignalModel(basis, mean, lam, sample_count=count)


def save_model(model: SignalModel, path) -> None:
    Path(path).write_text(dump_model(model))


def read_model(path) -> SignalModel:
    return load_model(Path(path).read_text())
