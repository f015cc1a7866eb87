"""Synthetic block streams standing in for daily environmental series.

``diurnal_smooth``
    temperature-like: a level plus 2-4 daily harmonics whose amplitudes and
    phases drift from day to day, with a small AR(1) residual.
``diurnal_spiky``
    solar-like: zero outside a daytime window, a smooth bell envelope inside
    it, modulated by a per-day clearness level and narrow random bumps.
``multi_node_correlated``
    nodes on a line at ``node_spacing`` apart.  Each node mixes latent
    smooth processes anchored at every node position with weights
    ``exp(-(distance / decorrelation_distance)**2)``, plus its own residual,
    scaled by a per-node gain (sites differ in amplitude).  ``copy_factor``
    blends every node towards node 0 (1.0 = identical nodes).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FieldBlock, PreconditionError, make_rng

PROFILES = ("diurnal_smooth", "diurnal_spiky", "multi_node_correlated")


@dataclass(frozen=True)
class SynthParams:
    daytime: tuple[float, float] = (1 / 3, 2 / 3)  # fraction of the block
    node_spacing: float = 1.0
    decorrelation_distance: float = 1.0
    copy_factor: float = 0.0
    residual_level: float = 0.05  # AR(1) residual std relative to the signal swing
    drift: float = 0.1  # day-to-day relative drift of the harmonics
    gain_spread: float = 1.0  # node gains are exp(gain_spread * U(-1, 1))
    latent: str = "diurnal_smooth"  # process type behind multi-node fields

    def __post_init__(self):
        lo, hi = self.daytime
        if not 0 <= lo < hi <= 1:
            raise PreconditionError("daytime must satisfy 0 <= start < end <= 1")
        if self.node_spacing < 0 or self.decorrelation_distance <= 0:
            raise PreconditionError("node_spacing >= 0 and decorrelation_distance > 0 required")
        if not 0 <= self.copy_factor <= 1:
            raise PreconditionError("copy_factor must lie in [0, 1]")
        if self.latent not in ("diurnal_smooth", "diurnal_spiky"):
            raise PreconditionError(f"unknown latent profile {self.latent!r}")
        if self.residual_level < 0 or self.drift < 0 or self.gain_spread < 0:
            raise PreconditionError("residual_level, drift and gain_spread must be >= 0")


def _ar1(rng, n, rho, std):
    e = rng.standard_normal(n) * std * np.sqrt(1 - rho ** 2)
    out = np.empty(n)
    acc = rng.standard_normal() * std
    for i in range(n):
        acc = rho * acc + e[i]
        out[i] = acc
    return out


def _smooth_stream(rng, blocks, N, p: SynthParams):
    t = np.arange(N) / N
    H = int(rng.integers(2, 5))
    amp0 = rng.uniform(0.5, 1.0, H) * 5.0 / np.arange(1, H + 1)
    ph0 = rng.uniform(0, 2 * np.pi, H)
    level = 10.0 + rng.uniform(-5, 5)
    amp, ph = amp0.copy(), ph0.copy()
    resid = _ar1(rng, blocks * N, 0.9, p.residual_level * amp0[0]).reshape(blocks, N)
    out = np.empty((blocks, N))
    for d in range(blocks):
        # mean-reverting drift keeps the stream stationary
        amp = amp0 + 0.8 * (amp - amp0) + p.drift * amp0 * rng.standard_normal(H)
        ph = ph0 + 0.8 * (ph - ph0) + p.drift * rng.standard_normal(H)
        level = 10.0 + 0.9 * (level - 10.0) + p.drift * 5.0 * rng.standard_normal()
        out[d] = level + (amp[:, None] * np.cos(2 * np.pi * np.arange(1, H + 1)[:, None] * t
                                                + ph[:, None])).sum(axis=0) + resid[d]
    return out


def _spiky_stream(rng, blocks, N, p: SynthParams):
    lo, hi = (int(round(f * N)) for f in p.daytime)
    idx = np.arange(N)
    env = np.zeros(N)
    span = max(hi - lo, 1)
    env[lo:hi] = np.sin(np.pi * (idx[lo:hi] - lo + 0.5) / span)
    width = N / 48.0  # cloud transients of roughly half an hour at 144 samples/day
    out = np.empty((blocks, N))
    clear = 0.7
    for d in range(blocks):
        clear = float(np.clip(0.7 + 0.6 * (clear - 0.7) + 0.2 * rng.standard_normal(), 0.1, 1.0))
        bumps = np.zeros(N)
        for _ in range(int(rng.integers(3, 9))):
            c = rng.uniform(lo, hi)
            bumps += rng.uniform(-0.5, 0.5) * np.exp(-0.5 * ((idx - c) / width) ** 2)
        out[d] = 800.0 * env * np.clip(clear + bumps, 0.0, None)
    return out


def _multi_node(rng, blocks, N, nodes, p: SynthParams):
    pos = np.arange(nodes) * p.node_spacing
    gen = _smooth_stream if p.latent == "diurnal_smooth" else _spiky_stream
    latents = [gen(rng, blocks, N, p) for _ in range(nodes)]
    offset = 10.0
    if p.latent == "diurnal_smooth":
        latents = [z - z.mean() for z in latents]
    else:
        offset = 0.0
    W = np.exp(-((pos[:, None] - pos[None, :]) / p.decorrelation_distance) ** 2)
    W /= np.sqrt((W ** 2).sum(axis=1, keepdims=True))
    scale = 3.0 if p.latent == "diurnal_smooth" else 0.0
    own = [_ar1(rng, blocks * N, 0.9, p.residual_level * scale).reshape(blocks, N)
           for _ in range(nodes)]
    base = [offset + sum(W[i, f] * latents[f] for f in range(nodes)) + own[i]
            for i in range(nodes)]
    c = p.copy_factor
    gains = np.exp(p.gain_spread * rng.uniform(-1, 1, nodes))
    gains = (1 - c) * gains + c * gains[0]
    series = [gains[i] * (c * base[0] + (1 - c) * base[i]) for i in range(nodes)]
    return np.concatenate(series, axis=1)  # node-major within each block


def generate_synthetic(profile: str, blocks: int, N: int, node_count: int = 1, seed=0,
                       params: SynthParams | None = None) -> list[FieldBlock]:
    """``blocks`` blocks of ``node_count * N`` samples, deterministic per seed.

    Single-node profiles with ``node_count > 1`` produce independent
    realisations per node.
    """
    if profile not in PROFILES:
        raise PreconditionError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    if N < 8:
        raise PreconditionError("N must be >= 8")
    if blocks < 1 or node_count < 1:
        raise PreconditionError("blocks and node_count must be >= 1")
    p = params or SynthParams()
    rng = make_rng(seed)
    if profile == "multi_node_correlated":
        data = _multi_node(rng, blocks, N, node_count, p)
    else:
        gen = _smooth_stream if profile == "diurnal_smooth" else _spiky_stream
        data = np.concatenate([gen(rng, blocks, N, p) for _ in range(node_count)], axis=1)
    return [FieldBlock(row, block_index=d, node_count=node_count, per_node_length=N)
            for d, row in enumerate(data)]


def restrict_nodes(blocks, nodes) -> list[FieldBlock]:
    """Keep only the listed nodes (in the given order) of multi-node blocks."""
    nodes = list(nodes)
    out = []
    for b in blocks:
        vals = np.concatenate([b.node(i) for i in nodes])
        out.append(FieldBlock(vals, b.block_index, len(nodes), b.per_node_length))
    return out
