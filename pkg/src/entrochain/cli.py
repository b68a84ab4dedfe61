"""Command-line drivers.

Each subcommand mirrors one experiment family; flags mirror the experiment
config and ``--config FILE`` (JSON) overrides any flag.  Results land in
``--outdir`` as CSV series, a JSON summary, and SVG figures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import reports
from .drivers import (
    ExperimentConfig,
    run_beta_sweep,
    run_density,
    run_extremize,
    run_histogram,
    run_localized_entropy,
    run_pmax_sweep,
    run_size_sweep,
)
from .extremize import OptimizerConfig

SWEEP_HEADER_COMMON = ["kind", "n_seeds", "min_mean", "min_std", "ave_mean",
                       "ave_std", "max_mean", "max_std", "s_th_A", "s_th_AB",
                       "volume_law", "max_bound"]


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, default=None,
                        help="JSON config file; overrides flags")
    parser.add_argument("--L", type=int)
    parser.add_argument("--Np", dest="N_p", type=int)
    parser.add_argument("--t", type=float)
    parser.add_argument("--tprime", dest="t_prime", type=float)
    parser.add_argument("--V", type=float)
    parser.add_argument("--Vprime", dest="V_prime", type=float)
    parser.add_argument("--cut-hopping", dest="cut_hopping", type=int)
    parser.add_argument("--width", "--dx", dest="width", type=int)
    parser.add_argument("--offset", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--beta-grid", dest="beta_grid", type=_float_list)
    parser.add_argument("--L-grid", dest="L_grid", type=_int_list)
    parser.add_argument("--seeds", type=_int_list)
    parser.add_argument("--state-kind", dest="state_kind",
                        choices=("real", "complex"))
    parser.add_argument("--kinds", type=_str_list,
                        help="state kinds for the localization sweep")
    parser.add_argument("--t-max", dest="t_max", type=float)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--bins", type=int)
    parser.add_argument("--window-width", dest="window_width", type=int)
    parser.add_argument("--window-start", dest="window_start", type=int)
    parser.add_argument("--time", type=float)
    parser.add_argument("--outdir", type=str)
    parser.add_argument("--formats", type=_str_list,
                        help="any of csv,json,svg,gnuplot")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--cache-dir", dest="cache_dir", type=str)
    # optimizer knobs
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--tol-f", dest="tol_f", type=float)
    parser.add_argument("--tol-x", dest="tol_x", type=float)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--opt-seed", dest="opt_seed", type=int)
    parser.add_argument("--prescan-t-max", dest="prescan_t_max", type=float)


_OPT_KEYS = {"max_iter", "tol_f", "tol_x", "restarts", "prescan_t_max"}


def build_config(args: argparse.Namespace, **defaults) -> ExperimentConfig:
    """Merge defaults, command-line flags, and the optional config file."""
    config_fields = {f.name for f in fields(ExperimentConfig)}
    opt_fields = {f.name for f in fields(OptimizerConfig)}
    merged = dict(defaults)
    opt = dict(defaults.pop("optimizer", {})) if "optimizer" in defaults else {}
    merged.pop("optimizer", None)

    for key, value in vars(args).items():
        if value is None or key in ("config", "command"):
            continue
        if key in _OPT_KEYS:
            opt[key] = value
        elif key == "opt_seed":
            opt["seed"] = value
        elif key in config_fields:
            merged[key] = value

    if args.config:
        file_conf = json.loads(Path(args.config).read_text())
        opt.update(file_conf.pop("optimizer", {}))
        for key, value in file_conf.items():
            if key not in config_fields:
                raise SystemExit(f"unknown config key {key!r} in {args.config}")
            merged[key] = tuple(value) if isinstance(value, list) else value

    opt = {k: v for k, v in opt.items() if k in opt_fields}
    merged["optimizer"] = OptimizerConfig(**opt)
    return ExperimentConfig(**merged)


def _emit(config, tables, results, figures, gnuplots=()):
    written = reports.emit_outputs(
        config.experiment, config.to_dict(), tables, results, figures,
        config.outdir, config.formats, gnuplots,
    )
    for path in written:
        print(path)
    return written


def _density_rows(label: str, density: np.ndarray):
    return [{"series": label, "site": i + 1, "density": float(v)}
            for i, v in enumerate(density)]


def cmd_histogram(config: ExperimentConfig):
    result = run_histogram(config)
    tables = [(
        "trace", ["time", "s_ent", "s_xE"],
        [{"time": t, "s_ent": a, "s_xE": b}
         for t, a, b in zip(result.trace.times, result.trace.s_ent,
                            result.trace.s_xe)],
    )]
    figures = []
    results = {}
    density_rows = []
    for label, data in result.entropies.items():
        tables.append((
            f"histogram_{label}",
            ["bin_left", "bin_right", "count", "prob"],
            [{"bin_left": data.edges[i], "bin_right": data.edges[i + 1],
              "count": int(data.counts[i]), "prob": data.probs[i]}
             for i in range(len(data.counts))],
        ))
        for which in ("min", "max", "mean"):
            density_rows.extend(
                _density_rows(f"{label}_{which}", getattr(data, f"density_{which}")))
        figures.append((f"histogram_{label}",
                        reports.figure_histogram(data, config.beta, config.L)))
        results[label] = {
            "marker_min": data.marker_min.value,
            "marker_max": data.marker_max.value,
            "sample_min": data.sample_min,
            "sample_max": data.sample_max,
            "sample_mean": data.sample_mean,
            "tail_slope": data.tail.slope,
            "tail_r_squared": data.tail.r_squared,
            "tail_bins": data.tail.n_bins,
        }
    tables.append(("densities", ["series", "site", "density"], density_rows))
    gnuplots = [(f"histogram_{label}", {
        "csv_name": f"histogram_{label}.csv", "title": f"{label} fluctuations",
        "xlabel": "entropy (nats)", "ylabel": "probability",
        "series": [(1, 4, label)], "logy": True,
    }) for label in result.entropies]
    _emit(config, tables, results, figures, gnuplots)


def _sweep_tables(name, key, rows):
    header = [key] + SWEEP_HEADER_COMMON
    return [(name, header, rows)]


def cmd_sweep_size(config: ExperimentConfig):
    rows = run_size_sweep(config)
    figures = [(f"sweep_size_{kind}", reports.figure_sweep(rows, "L", kind))
               for kind in ("ent", "xE")]
    results = {"n_rows": len(rows)}
    gnuplots = [("sweep_size", {
        "csv_name": "sweep_size.csv", "title": "entropy vs system size",
        "xlabel": "L", "ylabel": "entropy (nats)",
        "series": [(1, 4, "min"), (1, 6, "ave"), (1, 8, "max")],
    })]
    _emit(config, _sweep_tables("sweep_size", "L", rows), results, figures,
          gnuplots)


def cmd_sweep_beta(config: ExperimentConfig):
    rows = run_beta_sweep(config)
    figures = [(f"sweep_beta_{kind}",
                reports.figure_sweep(rows, "beta", kind, logx=True))
               for kind in ("ent", "xE")]
    results = {"n_rows": len(rows)}
    _emit(config, _sweep_tables("sweep_beta", "beta", rows), results, figures)


def cmd_localize(config: ExperimentConfig):
    rows = run_localized_entropy(config)
    header = ["L", "n_seeds", "M", "N", "s_th_AB",
              "p_max_mean", "p_max_std", "s_xe_loc_mean", "s_xe_loc_std",
              "s_ent_loc_mean", "s_ent_loc_std", "s_xe_min_mean",
              "s_xe_min_std", "prediction_mean", "prediction_std",
              "bound_mean", "bound_std"]
    figures = [("localize", reports.figure_localized(rows))]
    results = {"p_max": {str(r["L"]): r["p_max_mean"] for r in rows}}
    _emit(config, [("localize", header, rows)], results, figures)


def cmd_pmax_sweep(config: ExperimentConfig):
    rows = run_pmax_sweep(config)
    header = ["L", "beta", "sqrt_beta", "kind", "p_max_mean", "p_max_std",
              "n_seeds", "M", "N"]
    figures = [("pmax_sweep", reports.figure_pmax(rows))]
    results = {"n_rows": len(rows)}
    _emit(config, [("pmax_sweep", header, rows)], results, figures)


def cmd_extremize(config: ExperimentConfig):
    result = run_extremize(config)
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "extremize_result.json"
    result.save(path)
    print(path)
    results = {
        "value": result.value, "converged": result.converged,
        "n_evals": result.n_evals, "restarts_used": result.restarts_used,
    }
    _emit(config, [], results, [])


def cmd_density(config: ExperimentConfig):
    result = run_density(config)
    rows = _density_rows("density", result["density"])
    figures = [("density", reports.figure_density(
        result["density"],
        f"L={result['L']}, beta={result['beta']:g}, t={result['time']:g}"))]
    results = {"total": float(result["density"].sum())}
    _emit(config, [("density", ["series", "site", "density"], rows)],
          results, figures)


_COMMANDS = {
    "histogram": (cmd_histogram, {
        "experiment": "histogram", "seeds": (0,), "outdir": "runs/histogram"}),
    "sweep-size": (cmd_sweep_size, {
        "experiment": "sweep-size", "outdir": "runs/sweep_size"}),
    "sweep-beta": (cmd_sweep_beta, {
        "experiment": "sweep-beta", "outdir": "runs/sweep_beta"}),
    "localize": (cmd_localize, {
        "experiment": "localize", "L_grid": (8, 12, 16, 20, 24, 28),
        "window_start": 0, "outdir": "runs/localize"}),
    "pmax-sweep": (cmd_pmax_sweep, {
        "experiment": "pmax-sweep", "L_grid": (10, 20, 30), "N_p": 3,
        "window_width": 5, "seeds": tuple(range(10)),
        "beta_grid": (0.01, 0.04, 0.16, 0.36, 0.64, 1.0, 2.25, 4.0),
        "outdir": "runs/pmax_sweep"}),
    "extremize": (cmd_extremize, {
        "experiment": "extremize", "seeds": (0,), "outdir": "runs/extremize"}),
    "density": (cmd_density, {
        "experiment": "density", "seeds": (0,), "outdir": "runs/density"}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entrochain",
        description="Entanglement and observational entropy of fermion chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "extremize":
            p.add_argument("--entropy", dest="entropy_kind",
                           choices=("ent", "xE"))
            p.add_argument("--direction", choices=("min", "max"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn, defaults = _COMMANDS[args.command]
    try:
        config = build_config(args, **dict(defaults))
        fn(config)
    except Exception as exc:  # surface a diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
