"""Energy cost of adaptive sparse sensing against compress-then-send collection.

Per block of N samples, with energies normalised by the radio cost of one
sample:

* traditional: sense every sample, compress by ``r_c``, send ``N / r_c``
  samples -> ``r_s + 1/r_c`` per sample;
* adaptive: sense and send ``gamma * N`` samples -> ``gamma * (r_s + 1)``.

An optional per-block overhead ``o`` (headers, wake-up, expressed as a
fraction of ``N * e_radio``) is added to both sides.  It cancels in the
break-even condition, so the zero-saving curve does not depend on it.
Compression itself is taken as free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PreconditionError

GRID_FORMAT = "# dass-energy-grid v1"


@dataclass(frozen=True)
class EnergyPlatform:
    """Per-sample sensing and radio energies (joules).

    Give any two of ``e_sensor``, ``e_radio`` and ``r_s``; the third is
    derived.  When all three are given they must agree to 1e-9.
    """

    e_sensor: float | None = None
    e_radio: float | None = None
    r_s: float | None = None
    block_overhead: float = 0.0  # joules per block, paid by both schemes
    packet_energy: float | None = None  # informational: measured cost of one packet
    packet_bytes: int | None = None
    name: str = "custom"

    def __post_init__(self):
        given = [v is not None for v in (self.e_sensor, self.e_radio, self.r_s)]
        if sum(given) < 2:
            raise PreconditionError("give at least two of e_sensor, e_radio, r_s")
        for label in ("e_sensor", "e_radio", "r_s", "block_overhead", "packet_energy"):
            v = getattr(self, label)
            if v is not None and (v < 0 or not math.isfinite(v)):
                raise PreconditionError(f"{label} must be finite and >= 0")
        if self.e_radio is None:
            if self.r_s == 0:
                raise PreconditionError("cannot derive e_radio from r_s = 0")
            object.__setattr__(self, "e_radio", self.e_sensor / self.r_s)
        elif self.e_sensor is None:
            object.__setattr__(self, "e_sensor", self.r_s * self.e_radio)
        elif self.r_s is None:
            if self.e_radio == 0:
                raise PreconditionError("e_radio must be > 0 to form r_s")
            object.__setattr__(self, "r_s", self.e_sensor / self.e_radio)
        elif abs(self.r_s * self.e_radio - self.e_sensor) > 1e-9 * max(self.e_sensor, 1e-300):
            raise PreconditionError(
                f"r_s={self.r_s} disagrees with e_sensor/e_radio={self.e_sensor / self.e_radio}"
            )

    def overhead_ratio(self, N: int) -> float:
        """Block overhead as a fraction of the radio cost of N samples."""
        if N < 1:
            raise PreconditionError("N must be >= 1")
        return self.block_overhead / (N * self.e_radio)


# Light-sensor mote: one light sample costs 7.5e-6 J and one 24-byte packet
# 6.9e-4 J; the platform ratio is reported as 0.26.  e_radio is derived from
# that ratio (the per-byte packet cost would give 0.2609).
PRESETS = {
    "tmote_sky": EnergyPlatform(e_sensor=7.5e-6, r_s=0.26, packet_energy=6.9e-4,
                                packet_bytes=24, name="tmote_sky"),
}


def preset(name: str) -> EnergyPlatform:
    try:
        return PRESETS[name]
    except KeyError:
        raise PreconditionError(f"unknown platform {name!r}; choose from {', '.join(PRESETS)}")


def _check(r_c, gamma, r_s, overhead):
    if np.any(np.asarray(r_c) < 1):
        raise PreconditionError("compression ratio r_c must be >= 1")
    if not 0 < gamma <= 1:
        raise PreconditionError("gamma must lie in (0, 1]")
    if np.any(np.asarray(r_s) < 0):
        raise PreconditionError("r_s must be >= 0")
    if overhead < 0:
        raise PreconditionError("overhead must be >= 0")


def energy_saving(r_s, r_c, gamma: float, overhead: float = 0.0):
    """Relative saving ``1 - cost_adaptive / cost_traditional`` (broadcasts)."""
    _check(r_c, gamma, r_s, overhead)
    r_s = np.asarray(r_s, dtype=float)
    r_c = np.asarray(r_c, dtype=float)
    return 1.0 - (gamma * (r_s + 1.0) + overhead) / (r_s + 1.0 / r_c + overhead)


def zero_crossing(r_c, gamma: float):
    """Platform ratio at which the saving is zero: ``(gamma - 1/r_c) / (1 - gamma)``.

    Negative values mean the adaptive scheme saves energy for every
    ``r_s >= 0``.  Undefined (NaN) at ``gamma = 1``.
    """
    _check(r_c, gamma, 0.0, 0.0)
    r_c = np.asarray(r_c, dtype=float)
    if gamma == 1:
        return np.full(r_c.shape, np.nan)
    return (gamma - 1.0 / r_c) / (1.0 - gamma)


@dataclass(frozen=True, eq=False)
class SavingGrid:
    r_s: np.ndarray
    r_c: np.ndarray
    gamma: float
    overhead: float
    saving: np.ndarray  # shape (len(r_s), len(r_c))
    crossing: np.ndarray  # zero-saving r_s for each r_c


def energy_saving_grid(r_s, r_c, gamma: float, overhead: float = 0.0) -> SavingGrid:
    r_s = np.atleast_1d(np.asarray(r_s, dtype=float))
    r_c = np.atleast_1d(np.asarray(r_c, dtype=float))
    saving = energy_saving(r_s[:, None], r_c[None, :], gamma, overhead)
    return SavingGrid(r_s, r_c, float(gamma), float(overhead), saving, zero_crossing(r_c, gamma))


def format_grid(grid: SavingGrid, decimals: int = 6) -> str:
    """Long-format table (one row per grid point) for contour plotting."""
    lines = [GRID_FORMAT, f"# gamma={grid.gamma!r} overhead={grid.overhead!r}", "r_s,r_c,saving"]
    for i, rs in enumerate(grid.r_s):
        for j, rc in enumerate(grid.r_c):
            lines.append(f"{rs:.{decimals}f},{rc:.{decimals}f},{grid.saving[i, j]:.{decimals}f}")
    lines.append("# zero-saving curve")
    lines.append("r_c,r_s_zero")
    for rc, z in zip(grid.r_c, grid.crossing):
        lines.append(f"{rc:.{decimals}f},{z:.{decimals}f}")
    return "\n".join(lines) + "\n"
