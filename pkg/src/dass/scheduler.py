"""Sampling-pattern generation.

``greedy_schedule`` starts from every row of the model and removes rows
(a pair first, then one at a time) until M remain, then keeps whichever of
the greedy set and the uniform pattern has the smaller error bound.

Elimination rules:

``"normalized_fp"`` (default)
    remove the row leaving the smallest ``FP / trace**2``, where ``trace``
    is the total squared row norm.  The ratio equals
    ``sum(lam**2) / sum(lam)**2`` over the Gram eigenvalues, is at least
    ``1/K`` and reaches it only for a tight frame, so it penalises
    coherence without rewarding the removal of energetic rows.
``"max_fp"``
    remove the row leaving the largest frame potential (the row that
    contributes least); keeps high-energy rows even when they are coherent.
``"min_fp"``
    remove the row leaving the smallest frame potential; drops the most
    energetic rows first and keeps empty ones.

The pair step either follows the elimination objective
(``pair_rule="objective"``) or drops the most coherent pair of rows
(``pair_rule="coherence"``).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import kernels
from .core import ModelNotReady, PreconditionError, SamplingPattern, SignalModel, make_rng
from .recon import error_bound, theta_cost

PATTERN_FORMAT = "# dass-pattern v1"
EXHAUSTIVE_LIMIT = 10 ** 6


@dataclass(frozen=True, eq=False)
class ScheduleDecision:
    pattern: SamplingPattern
    source: Literal["greedy", "uniform_fallback", "random", "uniform"]
    theta: float
    bound: float
    removal_order: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp),
                                      repr=False)


def frame_potential(model: SignalModel, S) -> float:
    """Sum over i, j in S of <psi_i, psi_j>**2, diagonal included."""
    rows = model.basis[np.asarray(list(S), dtype=np.intp)]
    gram = rows @ rows.T
    return float(np.sum(gram * gram))


def baseline_pattern(kind: Literal["uniform", "random"], N: int, M: int, seed=0) -> SamplingPattern:
    """Uniform ``floor(j*N/M)`` or seeded random-without-replacement pattern."""
    if not 1 <= M <= N:
        raise PreconditionError(f"need 1 <= M <= N, got M={M}, N={N}")
    if kind == "uniform":
        return SamplingPattern((np.arange(M) * N) // M, N)
    if kind == "random":
        idx = make_rng(seed).choice(N, size=M, replace=False)
        return SamplingPattern(np.sort(idx), N)
    raise PreconditionError(f"unknown baseline pattern {kind!r}")


def rotated_uniform(N: int, M: int, shift: int) -> SamplingPattern:
    """The uniform pattern cyclically shifted by ``shift`` samples.

    Successive shifts ``0, 1, 2, ...`` visit every index once the shift
    reaches the largest gap of the uniform pattern.
    """
    base = baseline_pattern("uniform", N, M).indices
    return SamplingPattern(np.sort((base + shift) % N), N)


Elimination = Literal["normalized_fp", "max_fp", "min_fp"]
PairRule = Literal["objective", "coherence", "none"]
_PAIR_CODES = {"none": 0, "coherence": 1, "objective": 2}
_MODE_CODES = {"max_fp": 0, "min_fp": 1, "normalized_fp": 2}


def greedy_set(model: SignalModel, M: int, elimination: Elimination = "normalized_fp",
               pair_rule: PairRule = "objective", backend=None):
    """Worst-out greedy elimination; returns (kept indices, removal order).

    The pair step is skipped when fewer than two rows are to be removed.
    Ties go to the lowest index (lexicographically smallest pair).
    """
    N = model.N
    if not 1 <= M <= N:
        raise PreconditionError(f"need 1 <= M <= N, got M={M}, N={N}")
    if elimination not in _MODE_CODES:
        raise PreconditionError(f"unknown elimination rule {elimination!r}")
    if pair_rule not in _PAIR_CODES:
        raise PreconditionError(f"unknown pair rule {pair_rule!r}")
    impl = kernels if backend is None else kernels.get_backend(backend)
    gram = model.basis @ model.basis.T
    G2 = np.ascontiguousarray(gram * gram)
    rowsum = G2.sum(axis=1)
    sqnorm = np.ascontiguousarray(np.diag(gram))
    return impl.greedy_eliminate(G2, rowsum, sqnorm, float(rowsum.sum()), float(sqnorm.sum()),
                                 M, _PAIR_CODES[pair_rule], _MODE_CODES[elimination])


def greedy_schedule(model: SignalModel, M: int, eps_a: float, sigma: float,
                    elimination: Elimination = "normalized_fp",
                    pair_rule: PairRule = "objective") -> ScheduleDecision:
    """Choose the next block's pattern from the current model.

    The greedy set competes with the uniform pattern on
    ``eps_a**2 / lambda_K + sigma**2 * Theta``; the uniform pattern wins ties.
    """
    if not 1 <= M <= model.N:
        raise PreconditionError(f"need 1 <= M <= N, got M={M}, N={model.N}")
    if not model.ready:
        raise ModelNotReady("model has not absorbed enough blocks")
    kept, order = greedy_set(model, M, elimination, pair_rule)
    greedy = SamplingPattern(kept, model.N)
    uniform = baseline_pattern("uniform", model.N, M)
    b_greedy = error_bound(model, greedy, eps_a, sigma)
    b_uniform = error_bound(model, uniform, eps_a, sigma)
    if b_uniform <= b_greedy or (math.isinf(b_uniform) and math.isinf(b_greedy)):
        return ScheduleDecision(uniform, "uniform_fallback", theta_cost(model, uniform),
                                b_uniform, order)
    return ScheduleDecision(greedy, "greedy", theta_cost(model, greedy), b_greedy, order)


def exhaustive_oracle(model: SignalModel, M: int) -> SamplingPattern:
    """Minimum-Theta pattern by enumerating every M-subset (lexicographic ties)."""
    N = model.N
    if not 1 <= M <= N:
        raise PreconditionError(f"need 1 <= M <= N, got M={M}, N={N}")
    if math.comb(N, M) > EXHAUSTIVE_LIMIT:
        raise PreconditionError(
            f"C({N},{M}) = {math.comb(N, M)} subsets exceeds {EXHAUSTIVE_LIMIT}; shrink the instance"
        )
    best, best_theta = None, math.inf
    for combo in itertools.combinations(range(N), M):
        tau = SamplingPattern(np.array(combo), N)
        th = theta_cost(model, tau)
        if best is None or th < best_theta:
            best, best_theta = tau, th
    return best


def dump_pattern(tau: SamplingPattern) -> str:
    return f"{PATTERN_FORMAT}\nN={tau.block_length}\n{tau.to_text()}\n"


def load_pattern(text: str) -> SamplingPattern:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if lines[0] != PATTERN_FORMAT:
        raise ValueError(f"not a pattern file (expected {PATTERN_FORMAT!r} header)")
    N = int(lines[1].split("=", 1)[1])
    return SamplingPattern.from_text(lines[2], N)
