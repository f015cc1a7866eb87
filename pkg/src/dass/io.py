"""Dataset CSV files and report text.

Dataset CSV layout (one column per node, one row per sample)::

    # dass-dataset v1
    # name=<free text>
    # units=<free text>
    # coords=<node>:<x>:<y>;<node>:<x>:<y>     (optional)
    node_a,node_b
    12.5,13.1
    ,13.4          <- empty cell: missing, linearly interpolated on load

Comment lines are optional on input; a ``# dass-dataset vN`` line with an
unknown version is rejected.  Rows are consecutive samples; every
``samples_per_block`` rows form one block.

Report tables start with ``# dass-report v1`` followed by ``# key=value``
lines recording the full configuration and seed.  Numbers use fixed
decimals, and nothing time-dependent is written, so equal runs give equal
bytes.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FieldBlock, PreconditionError

log = logging.getLogger(__name__)

DATASET_FORMAT = "# dass-dataset v1"
REPORT_FORMAT = "# dass-report v1"
SUMMARY_FORMAT = "# dass-summary v1"
DECIMALS = 10

TABLE_COLUMNS = ("block", "rmse", "theta", "theta_uniform", "bound", "K", "samples", "source")
TABLE_UNITS = ("index", "field units", "1", "1", "field units^2", "count", "count", "label")
SUMMARY_COLUMNS = ("method", "gamma", "snr_db", "M", "seed", "blocks", "mean_rmse",
                   "mean_theta", "mean_theta_uniform", "total_samples")


class DatasetError(PreconditionError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    nodes: tuple[str, ...]
    values: np.ndarray  # (blocks, samples_per_block, nodes)
    samples_per_block: int = 144
    units: str = ""
    coords: dict = field(default_factory=dict)
    interpolated_cells: int = 0
    dropped_rows: int = 0

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1] != self.samples_per_block \
                or self.values.shape[2] != len(self.nodes):
            raise DatasetError("values must have shape (blocks, samples_per_block, nodes)")

    @property
    def block_count(self) -> int:
        return self.values.shape[0]

    def blocks(self, nodes: Sequence[int] | None = None) -> list[FieldBlock]:
        """Node-major concatenated blocks over the chosen node columns."""
        cols = list(range(len(self.nodes))) if nodes is None else list(nodes)
        out = []
        for d in range(self.block_count):
            vals = np.concatenate([self.values[d, :, c] for c in cols])
            out.append(FieldBlock(vals, d, len(cols), self.samples_per_block))
        return out

    @classmethod
    def from_blocks(cls, blocks: Sequence[FieldBlock], name="synthetic", units="",
                    nodes: Sequence[str] | None = None) -> "Dataset":
        if not blocks:
            raise DatasetError("no blocks")
        n, L = blocks[0].node_count, blocks[0].per_node_length
        vals = np.stack([np.stack([b.node(i) for i in range(n)], axis=1) for b in blocks])
        names = tuple(nodes) if nodes is not None else tuple(f"node{i}" for i in range(n))
        return cls(name, names, vals, L, units)


def _interpolate_column(col: np.ndarray) -> np.ndarray:
    missing = np.isnan(col)
    if not missing.any():
        return col
    known = np.flatnonzero(~missing)
    if known.size == 0:
        raise DatasetError("a column has no values")
    out = col.copy()
    # ends are held at the nearest known value
    out[missing] = np.interp(np.flatnonzero(missing), known, col[known])
    return out


def ingest_csv(path, samples_per_block: int = 144, layout: str = "one_column_per_node") -> Dataset:
    if layout != "one_column_per_node":
        raise DatasetError(f"unsupported layout {layout!r}")
    if samples_per_block < 1:
        raise DatasetError("samples_per_block must be >= 1")
    path = Path(path)
    meta = {"name": path.stem, "units": ""}
    coords = {}
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, ln in enumerate(lines):
        if not ln.startswith("#"):
            body_start = i
            break
        text = ln[1:].strip()
        if text.startswith("dass-dataset"):
            if ln.strip() != DATASET_FORMAT:
                raise DatasetError(f"unsupported dataset format line {ln.strip()!r}")
        elif "=" in text:
            k, v = text.split("=", 1)
            meta[k.strip()] = v.strip()
    else:
        raise DatasetError(f"{path}: no header row")
    if meta.get("coords"):
        for item in meta["coords"].split(";"):
            node, x, y = item.split(":")
            coords[node] = (float(x), float(y))
    reader = csv.reader(lines[body_start:])
    header = next(reader)
    if not header or any(not h.strip() for h in header):
        raise DatasetError(f"{path}: header row must name every node column")
    nodes = tuple(h.strip() for h in header)
    rows = []
    for r_off, row in enumerate(reader):
        line_no = body_start + 2 + r_off  # 1-based file line
        if not row:
            continue
        if len(row) != len(nodes):
            raise DatasetError(f"{path}: line {line_no} has {len(row)} fields, expected {len(nodes)}")
        vals = []
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "":
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: non-numeric cell {cell!r} at line {line_no}, column {nodes[c]!r}"
                ) from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}: non-finite cell at line {line_no}, column {nodes[c]!r}")
            vals.append(v)
        rows.append(vals)
    table = np.array(rows, dtype=float).reshape(len(rows), len(nodes))
    blocks = table.shape[0] // samples_per_block
    if blocks < 2:
        raise DatasetError(
            f"{path}: {table.shape[0]} rows give {blocks} complete block(s) of "
            f"{samples_per_block}; need at least 2"
        )
    dropped = table.shape[0] - blocks * samples_per_block
    if dropped:
        log.warning("%s: %d rows dropped (incomplete trailing block)", path, dropped)
    table = table[:blocks * samples_per_block]
    missing = int(np.isnan(table).sum())
    if missing:
        table = np.column_stack([_interpolate_column(table[:, c]) for c in range(len(nodes))])
        log.warning("%s: %d interpolated cells", path, missing)
    vals = table.reshape(blocks, samples_per_block, len(nodes))
    return Dataset(meta["name"], nodes, vals, samples_per_block, meta["units"], coords,
                   missing, dropped)


def write_csv(ds: Dataset, path, decimals: int = DECIMALS) -> None:
    lines = [DATASET_FORMAT, f"# name={ds.name}", f"# units={ds.units}",
             f"# samples_per_block={ds.samples_per_block}"]
    if ds.coords:
        lines.append("# coords=" + ";".join(f"{k}:{x!r}:{y!r}" for k, (x, y) in ds.coords.items()))
    lines.append(",".join(ds.nodes))
    flat = ds.values.reshape(-1, len(ds.nodes))
    for row in flat:
        lines.append(",".join(f"{v:.{decimals}f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _num(v, decimals=DECIMALS) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{decimals}f}"


def config_header(cfg_dict: dict) -> list[str]:
    """``# key=value`` lines for every config entry, sorted, JSON-encoded values."""
    return [f"# {k}={json.dumps(cfg_dict[k], sort_keys=True)}" for k in sorted(cfg_dict)]


def _mean(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.mean(a)) if a.size else math.nan


def report_table(report, decimals: int = DECIMALS, extra: dict | None = None) -> str:
    """One row per reported block; ``extra`` adds header entries (e.g. the data source)."""
    lines = [REPORT_FORMAT, *config_header({**report.config.as_dict(), **(extra or {})}),
             f"# warmup_blocks={report.warmup_blocks}",
             "# units: " + ",".join(f"{c}[{u}]" for c, u in zip(TABLE_COLUMNS, TABLE_UNITS)),
             ",".join(TABLE_COLUMNS)]
    for i in range(report.rmse.size):
        lines.append(",".join([
            str(int(report.block_index[i])), _num(report.rmse[i], decimals),
            _num(report.theta[i], decimals), _num(report.theta_uniform[i], decimals),
            _num(report.bound[i], decimals), str(int(report.dimension[i])),
            str(int(report.samples[i])), report.source[i],
        ]))
    return "\n".join(lines) + "\n"


def summary_row(report, decimals: int = DECIMALS) -> str:
    c = report.config
    return ",".join([
        c.method, repr(c.gamma), "none" if c.snr_db is None else repr(c.snr_db), str(c.M),
        str(c.seed), str(report.rmse.size), _num(report.mean_rmse, decimals),
        _num(_mean(report.theta), decimals), _num(_mean(report.theta_uniform), decimals),
        str(report.total_samples),
    ])


def summary_table(reports: Sequence, base_config: dict | None = None,
                  decimals: int = DECIMALS) -> str:
    """One row per report; an empty sequence gives the header alone."""
    lines = [SUMMARY_FORMAT]
    if base_config is not None:
        lines += config_header(base_config)
    lines.append(",".join(SUMMARY_COLUMNS))
    lines += [summary_row(r, decimals) for r in reports]
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str = "table", extra: dict | None = None) -> str:
    if fmt == "table":
        return report_table(report, extra=extra)
    if fmt == "summary":
        return summary_table([report], {**report.config.as_dict(), **(extra or {})})
    raise PreconditionError(f"unknown report format {fmt!r}")


def read_table(text: str) -> tuple[list[str], list[list[str]]]:
    """Column names and rows of a report or summary table (comments skipped)."""
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not body:
        return [], []
    return body[0].split(","), [ln.split(",") for ln in body[1:]]
