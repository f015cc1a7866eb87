"""Domain types, the row-selection operator, noise injection and RMSE."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PreconditionError(ValueError):
    """An operation was called with arguments that violate its contract."""


class ModelNotReady(RuntimeError):
    """The signal model has not absorbed enough blocks to be used."""


def make_rng(seed) -> np.random.Generator:
    """Return the generator type used throughout the package.

    ``seed`` may be an int, a sequence of ints (hashed by ``SeedSequence``)
    or an existing ``Generator``, which is returned unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(seed))


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FieldBlock:
    """One block of the discretised field, possibly several nodes concatenated
    node-major (node 0 samples first)."""

    values: np.ndarray
    block_index: int = 0
    node_count: int = 1
    per_node_length: int | None = None

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise PreconditionError("block values must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("block values must be finite")
        if self.node_count < 1:
            raise PreconditionError("node_count must be >= 1")
        per_node = self.per_node_length
        if per_node is None:
            per_node = values.size // self.node_count
        if per_node < 1 or per_node * self.node_count != values.size:
            raise PreconditionError(
                f"node_count ({self.node_count}) x per_node_length ({per_node}) "
                f"!= block length {values.size}"
            )
        if self.block_index < 0:
            raise PreconditionError("block_index must be >= 0")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "per_node_length", int(per_node))

    @property
    def N(self) -> int:
        return self.values.size

    def node(self, i: int) -> np.ndarray:
        n = self.per_node_length
        return self.values[i * n:(i + 1) * n]


@dataclass(frozen=True, eq=False)
class SamplingPattern:
    """Strictly increasing sample indices ``tau`` into a block of length N.

    The 0/1 selection matrix is never formed; the index set is the operator.
    """

    indices: np.ndarray
    block_length: int

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size == 0:
            raise PreconditionError("pattern must contain at least one index")
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(idx == np.round(idx)):
                raise PreconditionError("pattern indices must be integers")
        idx = _frozen(idx, dtype=np.intp)
        if np.any(np.diff(idx) <= 0):
            raise PreconditionError("pattern indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.block_length:
            raise PreconditionError(
                f"pattern indices must lie in [0, {self.block_length})"
            )
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "block_length", int(self.block_length))

    @property
    def M(self) -> int:
        return self.indices.size

    @property
    def rate(self) -> float:
        return self.M / self.block_length

    def __eq__(self, other):
        if not isinstance(other, SamplingPattern):
            return NotImplemented
        return (self.block_length == other.block_length
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.block_length, self.indices.tobytes()))

    def to_text(self) -> str:
        return ",".join(str(int(i)) for i in self.indices)

    @classmethod
    def from_text(cls, text: str, block_length: int) -> "SamplingPattern":
        parts = [p.strip() for p in text.strip().split(",") if p.strip()]
        return cls(np.array([int(p) for p in parts]), block_length)


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Affine K-dimensional model ``x ~ basis @ alpha + mean``.

    ``eigenvalues`` are the covariance eigenvalues attached to the basis
    columns; ``sample_count`` is the number of blocks absorbed so far.
    """

    basis: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray
    sample_count: int = 0
    warmup: bool = False
    degenerate: bool = False
    orth_tol: float = field(default=1e-8, repr=False)

    def __post_init__(self):
        basis = _frozen(self.basis)
        mean = _frozen(self.mean)
        lam = _frozen(self.eigenvalues)
        if basis.ndim != 2:
            raise PreconditionError("basis must be an N x K matrix")
        N, K = basis.shape
        if mean.shape != (N,):
            raise PreconditionError(f"mean must have length {N}")
        if lam.shape != (K,):
            raise PreconditionError(f"eigenvalues must have length {K}")
        if K and np.max(np.abs(basis.T @ basis - np.eye(K))) > self.orth_tol:
            raise PreconditionError("basis columns are not orthonormal")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise PreconditionError("eigenvalues must be nonnegative and nonincreasing")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def N(self) -> int:
        return self.basis.shape[0]

    @property
    def K(self) -> int:
        return self.basis.shape[1]

    @property
    def ready(self) -> bool:
        return self.sample_count >= 2 and self.K >= 1

    def truncated(self, K: int) -> "SignalModel":
        """The same model keeping only the leading ``K`` components."""
        if not 0 <= K <= self.K:
            raise PreconditionError(f"cannot truncate a {self.K}-dim model to K={K}")
        return SignalModel(self.basis[:, :K], self.mean, self.eigenvalues[:K],
                           self.sample_count, self.warmup, self.degenerate)

    def residual_energy(self, K: int) -> float:
        """Per-sample PCA residual energy beyond the first ``K`` stored components."""
        return float(np.sum(self.eigenvalues[K:])) / self.N


@dataclass(frozen=True, eq=False)
class Measurement:
    observed: np.ndarray
    pattern: SamplingPattern
    noise_sigma: float = 0.0

    def __post_init__(self):
        y = _frozen(self.observed)
        if y.shape != (self.pattern.M,):
            raise PreconditionError(
                f"observed length {y.size} != pattern size {self.pattern.M}"
            )
        if self.noise_sigma < 0:
            raise PreconditionError("noise_sigma must be >= 0")
        object.__setattr__(self, "observed", y)


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, FieldBlock) else np.asarray(x, dtype=float)


def apply_pattern(x, tau: SamplingPattern) -> np.ndarray:
    """Select ``x[tau]``; ``x`` is a FieldBlock or a plain vector."""
    v = _values(x)
    if v.ndim != 1 or v.size != tau.block_length:
        raise PreconditionError(
            f"pattern block length {tau.block_length} != signal length {v.size}"
        )
    return v[tau.indices].copy()


def add_noise(y, sigma: float, seed) -> np.ndarray:
    """Return ``y`` plus i.i.d. N(0, sigma^2) noise drawn from ``make_rng(seed)``."""
    if sigma < 0:
        raise PreconditionError("sigma must be >= 0")
    y = np.asarray(y, dtype=float)
    if sigma == 0:
        return y.copy()
    return y + sigma * make_rng(seed).standard_normal(y.shape)


def sense(x: FieldBlock, tau: SamplingPattern, sigma: float, seed) -> Measurement:
    return Measurement(add_noise(apply_pattern(x, tau), sigma, seed), tau, sigma)


def rmse(x, x_tilde) -> float:
    """(1/sqrt(N)) * ||x - x_tilde||_2."""
    a, b = _values(x), _values(x_tilde)
    if a.shape != b.shape:
        raise PreconditionError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b) / np.sqrt(a.size))
