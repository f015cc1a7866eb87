"""Command-line front end: ``dass {simulate,sweep,schedule,energy,synth}``.

Settings come from an optional JSON config file (``--config``) whose keys
are experiment fields (``method``, ``gamma``, ``snr_db``, ``N``, ...) plus
``data``, ``data_blocks``, ``learner`` and ``synth``; command-line flags
override the file.  The resolved configuration and seed are printed to
stderr before anything runs.

Numeric lists accept ``start:step:stop`` (stop inclusive) or comma lists.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import energy as energy_mod
from .core import PreconditionError
from .io import Dataset, emit_report, ingest_csv, summary_table, write_csv
from .model import estimate_eps_a, read_model, select_dimension
from .scheduler import dump_pattern, greedy_schedule
from .simulator import METHODS, ExperimentConfig, run_experiment, sweep
from .synth import PROFILES, SynthParams, generate_synthetic

log = logging.getLogger("dass")

_EXPERIMENT_FLAGS = {
    "method": "method", "gamma": "gamma", "snr_db": "snr_db", "sigma": "sigma", "N": "N",
    "nodes": "node_count", "blocks": "blocks", "seed": "seed",
    "snr_error_db": "snr_estimation_error_db", "xi": "xi", "elimination": "elimination",
    "pair_rule": "pair_rule", "k_selection": "k_selection", "samples": "samples",
}


class CliError(Exception):
    pass


def parse_range(text: str) -> list[float]:
    """``a:b:c`` -> a, a+b, ..., up to c inclusive; ``x,y,z`` -> the list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"range {text!r} must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise CliError(f"range {text!r} needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise CliError(f"cannot parse number list {text!r}") from None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    return cfg


def _resolve(args) -> dict:
    """Config file values overlaid by explicit flags."""
    cfg = _load_config(args.config)
    for flag, key in _EXPERIMENT_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "K", None) is not None:
        learner = dict(cfg.get("learner", {}))
        learner["K"] = args.K if args.K == "auto" else int(args.K)
        cfg["learner"] = learner
    for flag in ("data", "data_blocks"):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[flag] = v
    return cfg


def _split(cfg: dict):
    cfg = dict(cfg)
    data_spec = cfg.pop("data", "synth:diurnal_smooth")
    data_blocks = cfg.pop("data_blocks", None)
    synth = cfg.pop("synth", {})
    learner = cfg.pop("learner", {})
    if isinstance(learner, dict) and learner.get("K") not in (None, "auto"):
        learner["K"] = int(learner["K"])
    cfg["learner"] = learner
    return data_spec, data_blocks, synth, cfg


def _load_data(spec: str, exp: dict, data_blocks, synth: dict):
    N = int(exp.get("N", 144))
    nodes = int(exp.get("node_count", 1))
    if spec.startswith("synth:"):
        profile = spec.split(":", 1)[1]
        if profile not in PROFILES:
            raise CliError(f"unknown synthetic profile {profile!r}; choose from {', '.join(PROFILES)}")
        count = data_blocks or exp.get("blocks") or 100
        params = SynthParams(**{k: tuple(v) if k == "daytime" else v for k, v in synth.items()})
        return generate_synthetic(profile, int(count), N, nodes, int(exp.get("seed", 0)), params)
    ds = ingest_csv(spec, samples_per_block=N)
    if ds.interpolated_cells:
        print(f"# data: {ds.interpolated_cells} interpolated cells", file=sys.stderr)
    if ds.dropped_rows:
        print(f"# data: {ds.dropped_rows} rows dropped", file=sys.stderr)
    exp["node_count"] = len(ds.nodes)
    return ds.blocks()


def _announce(resolved: dict):
    print("# resolved config: " + json.dumps(resolved, sort_keys=True), file=sys.stderr)
    print(f"# seed: {resolved.get('seed', 0)}", file=sys.stderr)


def _data_settings(resolved: dict) -> dict:
    out = {"data": resolved.get("data", "synth:diurnal_smooth")}
    if out["data"].startswith("synth:"):
        out["data_blocks"] = resolved.get("data_blocks")
        out["synth"] = resolved.get("synth", {})
    return out


def _write(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _experiment(resolved: dict):
    data_spec, data_blocks, synth, exp = _split(resolved)
    data = _load_data(data_spec, exp, data_blocks, synth)
    base = ExperimentConfig.from_dict(exp)
    return data, base


def cmd_simulate(args) -> int:
    resolved = _resolve(args)
    data, cfg = _experiment(resolved)
    data_info = _data_settings(resolved)
    _announce({**cfg.as_dict(), **data_info})
    report = run_experiment(data, cfg)
    _write(emit_report(report, "table", data_info), args.out)
    print(f"mean_rmse={report.mean_rmse:.10f} blocks={report.rmse.size} "
          f"samples={report.total_samples} method={cfg.method} seed={cfg.seed}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    resolved = _resolve(args)
    methods = [m.strip() for m in args.methods.split(",")] if args.methods else []
    for m in methods:
        if m not in METHODS:
            raise CliError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    gammas = parse_range(args.gamma_list) if args.gamma_list else []
    snrs = parse_range(args.snr_list) if args.snr_list else []
    data, base = _experiment(resolved)
    info = {**base.as_dict(), **_data_settings(resolved),
            "sweep_methods": methods or [base.method], "sweep_gammas": gammas or [base.gamma],
            "sweep_snr_db": snrs or [base.snr_db]}
    _announce(info)
    reports = sweep(data, base, methods, gammas, snrs, workers=args.workers)
    _write(summary_table(reports, info), args.out)
    return 0


def cmd_schedule(args) -> int:
    model = read_model(args.model)
    if args.samples is not None:
        M = args.samples
    else:
        M = int(np.floor(round(model.N * args.gamma, 9)))
    sigma = args.sigma or 0.0
    K = args.K if args.K is not None else select_dimension(model.eigenvalues, M, sigma, N=model.N)
    K = min(int(K), model.K)
    eps_a = args.eps_a if args.eps_a is not None else estimate_eps_a(model, K)
    _announce({"model": str(args.model), "M": M, "K": K, "sigma": sigma, "eps_a": eps_a,
               "elimination": args.elimination, "pair_rule": args.pair_rule, "seed": None})
    dec = greedy_schedule(model.truncated(K), M, eps_a, sigma, args.elimination, args.pair_rule)
    _write(dump_pattern(dec.pattern), args.out)
    print(f"source={dec.source} theta={dec.theta:.10g} bound={dec.bound:.10g}", file=sys.stderr)
    return 0


def cmd_energy(args) -> int:
    if args.platform:
        plat = energy_mod.preset(args.platform)
        rs = [plat.r_s]
    else:
        rs = parse_range(args.rs)
    rc = parse_range(args.rc)
    _announce({"gamma": args.gamma, "r_s": rs, "r_c": rc, "overhead": args.overhead,
               "platform": args.platform, "seed": None})
    grid = energy_mod.energy_saving_grid(rs, rc, args.gamma, args.overhead)
    _write(energy_mod.format_grid(grid), args.out)
    return 0


def cmd_synth(args) -> int:
    params = _load_config(args.config).get("synth", {})
    for flag in ("node_spacing", "decorrelation_distance", "copy_factor", "residual_level",
                 "drift", "gain_spread", "latent"):
        v = getattr(args, flag)
        if v is not None:
            params[flag] = v
    p = SynthParams(**{k: tuple(v) if k == "daytime" else v for k, v in params.items()})
    _announce({"profile": args.profile, "blocks": args.blocks, "N": args.N, "nodes": args.nodes,
               "seed": args.seed, "synth": dataclasses.asdict(p)})
    blocks = generate_synthetic(args.profile, args.blocks, args.N, args.nodes, args.seed, p)
    ds = Dataset.from_blocks(blocks, name=f"{args.profile} seed={args.seed}")
    if args.out in (None, "-"):
        raise CliError("synth needs --out FILE.csv")
    write_csv(ds, args.out)
    return 0


def _experiment_flags(p, ranges=False):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--data", help="synth:<profile> or a CSV path")
    p.add_argument("--data-blocks", type=int, help="blocks to generate for synth: data")
    if ranges:
        p.add_argument("--methods", help="comma list, e.g. DASS,OLS_uniform,CSN")
        p.add_argument("--gamma", dest="gamma_list", help="range or list of subsampling rates")
        p.add_argument("--snr-db", dest="snr_list", help="range or list of SNR values in dB")
    else:
        p.add_argument("--method", choices=METHODS)
        p.add_argument("--gamma", type=float)
        p.add_argument("--snr-db", type=float)
    p.add_argument("--sigma", type=float, help="fixed noise std (overrides --snr-db)")
    p.add_argument("--N", type=int, help="samples per block per node (default 144)")
    p.add_argument("--nodes", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--K", help="model dimension or 'auto'")
    p.add_argument("--snr-error-db", type=float, help="SNR estimate minus true SNR")
    p.add_argument("--xi", type=float)
    p.add_argument("--samples", type=int, help="explicit samples per block (overrides gamma)")
    p.add_argument("--elimination", choices=["normalized_fp", "max_fp", "min_fp"])
    p.add_argument("--pair-rule", choices=["objective", "coherence", "none"])
    p.add_argument("--k-selection", choices=["risk", "holdout", "bound"])
    p.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dass", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment, write the per-block report")
    _experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="cross methods x gamma x SNR, write a summary table")
    _experiment_flags(p, ranges=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule", help="next-block pattern for a model snapshot")
    p.add_argument("--model", required=True, help="model snapshot file")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--samples", type=int)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--K", type=int)
    p.add_argument("--eps-a", type=float)
    p.add_argument("--elimination", choices=["normalized_fp", "max_fp", "min_fp"],
                   default="normalized_fp")
    p.add_argument("--pair-rule", choices=["objective", "coherence", "none"], default="objective")
    p.add_argument("--out")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("energy", help="energy-saving grid with its zero-saving curve")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--rs", default="0:0.05:1", help="platform ratios r_s")
    p.add_argument("--rc", default="1:1:50", help="compression ratios r_c")
    p.add_argument("--overhead", type=float, default=0.0,
                   help="per-block overhead as a fraction of the radio cost of N samples")
    p.add_argument("--platform", choices=sorted(energy_mod.PRESETS),
                   help="use a preset's r_s instead of --rs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    p.add_argument("--config", help="JSON file; its 'synth' object sets generator parameters")
    p.add_argument("--profile", choices=PROFILES, default="diurnal_smooth")
    p.add_argument("--blocks", type=int, default=100)
    p.add_argument("--N", type=int, default=144)
    p.add_argument("--nodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--node-spacing", type=float)
    p.add_argument("--decorrelation-distance", type=float)
    p.add_argument("--copy-factor", type=float)
    p.add_argument("--residual-level", type=float)
    p.add_argument("--drift", type=float)
    p.add_argument("--gain-spread", type=float)
    p.add_argument("--latent", choices=["diurnal_smooth", "diurnal_spiky"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, PreconditionError, OSError, TypeError, ValueError) as exc:
        print(f"dass {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
