"""Block-by-block experiment engine.

For each block ``t``: sense with the current pattern plus white noise,
reconstruct with the model learned from blocks ``< t``, absorb the
interpolated measurement into the model, then choose the pattern for
``t + 1``.  Only DASS schedules adaptively; OLS_random redraws a random
pattern each block and the remaining methods keep the uniform pattern.
"""
from __future__ import annotations

import collections
import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import FieldBlock, PreconditionError, SamplingPattern, rmse, sense
from .cs import L1Config, l1_reconstruct
from .model import (Learner, LearnerConfig, estimate_eps_a, holdout_dimension, interpolate_block,
                    press_curve, residual_variance, select_dimension)
from .recon import IllConditionedPattern, error_bound, expected_mse, ols_reconstruct, theta_cost
from .scheduler import baseline_pattern, greedy_schedule, rotated_uniform
from .synth import restrict_nodes

log = logging.getLogger(__name__)

METHODS = ("DASS", "OLS_uniform", "OLS_random", "CS", "CSN")
_OLS = ("DASS", "OLS_uniform", "OLS_random")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "DASS"
    gamma: float = 0.1
    snr_db: float | None = 30.0  # None together with sigma=None means noiseless
    sigma: float | None = None  # fixed noise std; overrides snr_db
    N: int = 144  # samples per block per node
    node_count: int = 1
    learner: LearnerConfig = LearnerConfig()
    blocks: int | None = None  # None: every block of the data
    seed: int = 0
    snr_estimation_error_db: float = 0.0  # estimate minus truth
    xi: float | None = None  # CSN budget; default sigma_est * sqrt(M)
    elimination: str = "normalized_fp"
    pair_rule: str = "objective"
    power_window: int = 30
    k_selection: str = "risk"  # or "holdout", "bound"
    noise_source: str = "data"  # sigma used by k_selection="risk": "data" or "estimate"
    holdout_blocks: int = 5  # also the window of the data-driven noise estimate
    samples: int | None = None  # explicit M per block; overrides gamma

    def __post_init__(self):
        if self.method not in METHODS:
            raise PreconditionError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not 0 < self.gamma <= 1:
            raise PreconditionError("gamma must lie in (0, 1]")
        if self.N < 1 or self.node_count < 1:
            raise PreconditionError("N and node_count must be >= 1")
        if self.sigma is not None and self.sigma < 0:
            raise PreconditionError("sigma must be >= 0")
        if self.samples is not None and not 1 <= self.samples <= self.block_length:
            raise PreconditionError(f"samples must lie in [1, {self.block_length}]")
        if self.M < 1:
            raise PreconditionError(f"gamma={self.gamma} leaves no samples in a block of {self.block_length}")
        if self.method == "CSN" and self.xi is None and self.noiseless:
            raise PreconditionError("CSN needs a noise budget: set xi, sigma or snr_db")
        if self.xi is not None and self.xi < 0:
            raise PreconditionError("xi must be >= 0")
        if self.k_selection not in ("risk", "holdout", "bound"):
            raise PreconditionError(f"unknown k_selection {self.k_selection!r}")
        if self.noise_source not in ("data", "estimate"):
            raise PreconditionError(f"unknown noise_source {self.noise_source!r}")
        if self.holdout_blocks < 1:
            raise PreconditionError("holdout_blocks must be >= 1")
        if self.power_window < 1:
            raise PreconditionError("power_window must be >= 1")

    @property
    def block_length(self) -> int:
        return self.N * self.node_count

    @property
    def M(self) -> int:
        if self.samples is not None:
            return self.samples
        # the rounding guards against gamma = M/N landing a hair below M
        return int(math.floor(round(self.block_length * self.gamma, 9)))

    @property
    def noiseless(self) -> bool:
        return self.sigma is None and self.snr_db is None or self.sigma == 0

    @property
    def tracked_dimension(self) -> int:
        if self.learner.K == "auto":
            # a memory of L blocks cannot support more than L components
            return min(self.M, self.learner.buffer_length)
        return min(int(self.learner.K), self.block_length)

    @property
    def warmup(self) -> int:
        return max(self.tracked_dimension + 1, 5)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["M"] = self.M
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("M", None)
        learner = d.pop("learner", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise PreconditionError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if isinstance(learner, dict):
            learner = LearnerConfig(**learner)
        return cls(learner=learner or LearnerConfig(), **d)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    block_index: np.ndarray
    rmse: np.ndarray
    theta: np.ndarray
    theta_uniform: np.ndarray
    bound: np.ndarray
    dimension: np.ndarray
    source: tuple
    samples: np.ndarray
    warmup_blocks: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def mean_rmse(self) -> float:
        return float(np.mean(self.rmse)) if self.rmse.size else math.nan

    @property
    def total_samples(self) -> int:
        return int(np.sum(self.samples))


def noise_sigma(data: Sequence[FieldBlock], t: int, snr_db: float, window: int = 30) -> float:
    """Noise std giving ``snr_db`` against the mean power of blocks ``t-window+1 .. t``."""
    lo = max(0, t - window + 1)
    power = float(np.mean([np.mean(b.values ** 2) for b in data[lo:t + 1]]))
    return math.sqrt(power / 10 ** (snr_db / 10))


def _check_data(data, cfg: ExperimentConfig):
    if not data:
        raise PreconditionError("no data blocks")
    for b in data:
        if b.N != cfg.block_length:
            raise PreconditionError(
                f"block {b.block_index} has length {b.N}, config expects "
                f"{cfg.node_count} x {cfg.N} = {cfg.block_length}"
            )


def run_experiment(data: Sequence[FieldBlock], cfg: ExperimentConfig) -> ExperimentReport:
    """Simulate ``cfg.method`` over ``data``; warmup blocks are not reported."""
    t0 = time.perf_counter()
    data = list(data[:cfg.blocks] if cfg.blocks is not None else data)
    _check_data(data, cfg)
    Nb, M = cfg.block_length, cfg.M
    learner = Learner(cfg.learner, cfg.tracked_dimension)
    uniform = baseline_pattern("uniform", Nb, M)
    pattern, source = uniform, "uniform"
    recent = collections.deque(maxlen=cfg.holdout_blocks)
    noise = collections.deque(maxlen=cfg.holdout_blocks)
    K = None
    rows = []
    for t, block in enumerate(data):
        if cfg.sigma is not None:
            sigma = cfg.sigma
        elif cfg.snr_db is not None:
            sigma = noise_sigma(data, t, cfg.snr_db, cfg.power_window)
        else:
            sigma = 0.0
        sigma_est = sigma * 10 ** (-cfg.snr_estimation_error_db / 20)
        m = sense(block, pattern, sigma, (cfg.seed, t))
        model = learner.model
        if t >= cfg.warmup and K is not None:
            rows.append(_reconstruct_block(block, m, model, K, cfg, sigma_est, uniform, source))
        if model is not None and model.ready:
            # scored by the model that has not seen this block
            if cfg.k_selection == "holdout":
                recent.append(press_curve(model, m, M))
            elif M >= 3:
                noise.append(residual_variance(model, m, max(1, M // 2)))
        model = learner.update(interpolate_block(m, block_index=block.block_index))
        if cfg.k_selection == "risk" and cfg.noise_source == "data" and noise:
            sigma_plan = math.sqrt(float(np.median(noise)))
        else:
            sigma_plan = sigma_est
        K, pattern, source = _plan(model, cfg, sigma_est, sigma_plan, recent, uniform, t + 1)

    def col(i, dtype=float):
        return np.array([r[i] for r in rows], dtype=dtype)

    return ExperimentReport(
        cfg, col(0, int), col(1), col(2), col(3), col(4), col(5, int),
        tuple(r[6] for r in rows), col(7, int), len(data) - len(rows),
        time.perf_counter() - t0,
    )


def _dimension(model, cfg, sigma_est, recent):
    """Model dimension for the holdout and bound rules."""
    if cfg.k_selection == "holdout":
        return min(holdout_dimension(recent), model.K) if recent else min(model.K, cfg.M)
    return select_dimension(model.eigenvalues, cfg.M, sigma_est, N=model.N)


def _plan(model, cfg, sigma_est, sigma_plan, recent, uniform, t_next):
    """Dimension, pattern and pattern source for block ``t_next``."""
    if model is None or not model.ready:
        return None, *_fixed_pattern(cfg, uniform, t_next)
    if cfg.learner.K != "auto":
        ks = [min(int(cfg.learner.K), model.K, cfg.M)]
    elif cfg.k_selection == "risk":
        ks = range(1, min(model.K, cfg.M) + 1)
    else:
        ks = [_dimension(model, cfg, sigma_est, recent)]
    if t_next < cfg.warmup or cfg.method != "DASS":
        pattern, source = _fixed_pattern(cfg, uniform, t_next)
        if len(ks) == 1:
            return ks[0], pattern, source
        risks = [expected_mse(model, pattern, k, sigma_plan) for k in ks]
        return ks[int(np.argmin(risks))], pattern, source
    best = None
    for k in ks:
        dec = greedy_schedule(model.truncated(k), cfg.M, estimate_eps_a(model, k), sigma_est,
                              cfg.elimination, cfg.pair_rule)
        if len(ks) == 1:
            return k, dec.pattern, dec.source
        risk = expected_mse(model, dec.pattern, k, sigma_plan)
        if best is None or risk < best[0]:
            best = (risk, k, dec.pattern, dec.source)
    return best[1:]


def _fixed_pattern(cfg, uniform, t_next) -> tuple[SamplingPattern, str]:
    if t_next < cfg.warmup:
        # phase-rotated so the warmup blocks jointly observe every index
        return rotated_uniform(cfg.block_length, cfg.M, t_next), "warmup"
    if cfg.method == "OLS_random":
        tau = baseline_pattern("random", cfg.block_length, cfg.M, seed=(cfg.seed, t_next, 1))
        return tau, "random"
    return uniform, "uniform"


def _reconstruct_block(block, m, model, K, cfg, sigma_est, uniform, source):
    small = model.truncated(K)
    eps_a = estimate_eps_a(model, K)
    tau = m.pattern
    theta = theta_cost(small, tau)
    theta_u = theta_cost(small, uniform)
    bound = error_bound(small, tau, eps_a, sigma_est)
    status = "ok"
    if cfg.method in _OLS:
        try:
            est = ols_reconstruct(small, m).estimate
        except IllConditionedPattern:
            est, status = interpolate_block(m), "ill_conditioned"
    else:
        if cfg.method == "CS":
            l1 = L1Config()
        else:
            xi = cfg.xi if cfg.xi is not None else sigma_est * math.sqrt(tau.M)
            l1 = L1Config(xi=xi)
        res = l1_reconstruct(model, m, l1)
        est, status = res.estimate, res.status
    return (block.block_index, rmse(block, est), theta, theta_u, bound, K,
            source if status == "ok" else status, tau.M)


class TargetUnreachable(PreconditionError):
    pass


def _smallest_M(data, cfg: ExperimentConfig, target: float) -> int:
    """Smallest per-block sample count whose mean RMSE is <= target (bisection)."""
    hi = cfg.block_length
    best = run_experiment(data, dataclasses.replace(cfg, samples=hi)).mean_rmse
    if not best <= target:
        raise TargetUnreachable(
            f"target rmse {target:g} unreachable with full sampling; best achieved {best:g}"
        )
    lo = 0  # invariant: lo fails (or is zero), hi succeeds
    while hi - lo > 1:
        mid = (lo + hi) // 2
        r = run_experiment(data, dataclasses.replace(cfg, samples=mid)).mean_rmse
        if r <= target:
            hi = mid
        else:
            lo = mid
    return hi


def joint_vs_independent_ratio(data: Sequence[FieldBlock], cfg: ExperimentConfig,
                               target_rmse: float) -> dict[int, float]:
    """Joint-to-independent sample ratio at equal RMSE for the first n nodes.

    Joint operation treats the concatenated first-n-node block as one
    signal; independent operation runs every node alone.  Both sample counts
    are the smallest reaching ``target_rmse`` (mean over reported blocks).
    """
    nodes = data[0].node_count
    if nodes < 2:
        raise PreconditionError("need node_count >= 2")
    per_node = data[0].per_node_length
    single = dataclasses.replace(cfg, node_count=1, N=per_node, samples=None, gamma=1.0)
    indep = [_smallest_M(restrict_nodes(data, [i]), single, target_rmse) for i in range(nodes)]
    ratios = {1: 1.0}
    for n in range(2, nodes + 1):
        joint_cfg = dataclasses.replace(single, node_count=n)
        joint = _smallest_M(restrict_nodes(data, range(n)), joint_cfg, target_rmse)
        ratios[n] = joint / sum(indep[:n])
    return ratios


def _run_job(job):
    data, cfg = job
    return run_experiment(data, cfg)


def sweep(data: Sequence[FieldBlock], base: ExperimentConfig, methods: Sequence[str] = (),
          gammas: Sequence[float] = (), snrs: Sequence[float] = (),
          workers: int = 1) -> list[ExperimentReport]:
    """Cross methods x gamma x SNR over one dataset.

    Empty axes fall back to the base config's value.  Reports come back in
    (method, gamma, SNR) order whatever ``workers`` is.
    """
    methods = list(methods) or [base.method]
    gammas = list(gammas) or [base.gamma]
    snrs = list(snrs) or [base.snr_db]
    cfgs = [dataclasses.replace(base, method=m, gamma=g, snr_db=s)
            for m in methods for g in gammas for s in snrs]
    if workers <= 1:
        reports = [run_experiment(data, c) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_job, [(data, c) for c in cfgs]))
    budgets = {(r.config.gamma, r.config.block_length): set(r.samples.tolist()) for r in reports}
    for (g, n), used in budgets.items():
        if len(used) > 1:
            raise RuntimeError(f"unequal sample budgets at gamma={g}: {sorted(used)}")
    return reports
