"""Delimited output, JSON summaries, and matplotlib figure rendering.

CSV and JSON bytes are a pure function of the results: fixed column order,
12 significant digits, sorted keys, no timestamps.  Figures are rendered to
SVG next to the delimited output.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "entrochain"

import matplotlib.pyplot as plt
import numpy as np

from .states import RNG_ALGORITHM

SCHEMA_VERSION = 1
FLOAT_FMT = "%.12g"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[dict]) -> Path:
    """UTF-8 comma-separated table with a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(row.get(col)) for col in header))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def content_hash(payload) -> str:
    """Content hash of a JSON-serializable object (config fingerprint)."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def write_summary_json(
    path: str | Path, experiment: str, config_dict: dict, results: dict
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "experiment": experiment,
        "rng": RNG_ALGORITHM,
        "config": config_dict,
        "input_hash": content_hash(config_dict),
        "results": results,
    }
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n",
        encoding="utf-8",
    )
    return path


def write_gnuplot(
    path: str | Path, csv_name: str, title: str, xlabel: str, ylabel: str,
    series: list[tuple[int, int, str]], logy: bool = False,
) -> Path:
    """Companion gnuplot script plotting columns of an emitted CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside",
    ]
    if logy:
        lines.append("set logscale y")
    plots = ", ".join(
        f"'{csv_name}' every ::1 using {x}:{y} with linespoints title '{label}'"
        for x, y, label in series
    )
    lines.append(f"plot {plots}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def save_figure(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format=path.suffix.lstrip("."), bbox_inches="tight")
    plt.close(fig)
    return path


def emit_outputs(
    experiment: str,
    config_dict: dict,
    tables: list,
    results: dict,
    figures: list,
    outdir: str | Path,
    formats,
    gnuplots=(),
) -> list[Path]:
    """Write every requested artifact for one driver run.

    ``tables`` holds (name, header, rows) triples, ``figures`` holds
    (name, matplotlib figure) pairs, and ``gnuplots`` holds (name, kwargs)
    pairs for ``write_gnuplot``.  Rerunning with an identical config
    reproduces the CSV and JSON bytes exactly.
    """
    outdir = Path(outdir)
    written = []
    if "csv" in formats:
        for name, header, rows in tables:
            written.append(write_csv(outdir / f"{name}.csv", header, rows))
    if "json" in formats:
        written.append(write_summary_json(
            outdir / "summary.json", experiment, config_dict, results))
    if "svg" in formats:
        for name, fig in figures:
            written.append(save_figure(fig, outdir / f"{name}.svg"))
    if "gnuplot" in formats:
        for name, kwargs in gnuplots:
            written.append(write_gnuplot(outdir / f"{name}.gp", **kwargs))
    return written


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

_ENTROPY_TITLES = {"ent": "entanglement entropy", "xE": "position-energy entropy"}


def _lattice_heatmap(ax, density: np.ndarray, title: str):
    ax.imshow(
        density[None, :], aspect="auto", cmap="viridis",
        vmin=0.0, vmax=max(1e-9, float(density.max())),
    )
    ax.set_yticks([])
    ax.set_xlabel("site")
    ax.set_title(title, fontsize=9)


def figure_histogram(data, beta: float, L: int):
    """Semi-log fluctuation histogram with extreme markers, tail fit, and
    the particle-density maps of the extreme and typical samples."""
    fig = plt.figure(figsize=(7.0, 7.5))
    grid = fig.add_gridspec(3, 1, height_ratios=[1, 4, 1], hspace=0.45)
    ax_top = fig.add_subplot(grid[0])
    ax = fig.add_subplot(grid[1])
    ax_bot = fig.add_subplot(grid[2])

    centers = 0.5 * (data.edges[:-1] + data.edges[1:])
    positive = data.probs > 0
    ax.semilogy(centers[positive], data.probs[positive],
                drawstyle="steps-mid", color="0.3")
    ax.axvline(data.marker_min.value, color="tab:blue", lw=1.5,
               label=f"min {data.marker_min.value:.3f}")
    ax.axvline(data.sample_mean, color="tab:green", lw=1.2, ls=":",
               label=f"mean {data.sample_mean:.3f}")
    ax.axvline(data.marker_max.value, color="tab:orange", lw=1.5,
               label=f"max {data.marker_max.value:.3f}")
    if np.isfinite(data.tail.slope):
        xs = centers[centers < data.tail.mode_center]
        depth = data.tail.mode_center - xs
        ax.semilogy(xs, np.exp(data.tail.intercept + data.tail.slope * depth),
                    "r--", lw=1.0,
                    label=f"tail slope {data.tail.slope:.2f}")
    ax.set_xlabel(f"{_ENTROPY_TITLES[data.label]} (nats)")
    ax.set_ylabel("probability")
    ax.set_title(f"L={L}, beta={beta:g}")
    ax.legend(fontsize=8)

    _lattice_heatmap(ax_top, data.density_max, "density at maximum")
    _lattice_heatmap(ax_bot, data.density_min, "density at minimum")
    return fig


def figure_sweep(rows: list[dict], x_key: str, kind: str, logx: bool = False):
    """Errorbar min/ave/max curves with thermal overlays for one entropy."""
    sel = [r for r in rows if r["kind"] == kind]
    x = np.array([r[x_key] for r in sel])
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for stat, color, marker in (("min", "tab:blue", "o"),
                                ("ave", "tab:green", "*"),
                                ("max", "tab:orange", "s")):
        ax.errorbar(x, [r[f"{stat}_mean"] for r in sel],
                    yerr=[r[f"{stat}_std"] for r in sel],
                    color=color, marker=marker, capsize=3, lw=1.0, label=stat)
    if sel and "s_th_AB" in sel[0]:
        ax.plot(x, [r["s_th_AB"] for r in sel], "k--", lw=1.0, label="S_th(A+B)")
    if sel and "s_th_A" in sel[0]:
        ax.plot(x, [r["s_th_A"] for r in sel], "r--", lw=1.0, label="S_th(A)")
    if sel and "volume_law" in sel[0]:
        ax.plot(x, [r["volume_law"] for r in sel], "m:", lw=1.0,
                label="volume law")
    if sel and "max_bound" in sel[0]:
        ax.plot(x, [r["max_bound"] for r in sel], "c:", lw=1.0, label="bound")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x_key)
    ax.set_ylabel(f"{_ENTROPY_TITLES[kind]} (nats)")
    ax.legend(fontsize=8)
    return fig


def figure_pmax(rows: list[dict]):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    systems = sorted({r["L"] for r in rows})
    markers = {"real": "x", "complex": "*"}
    colors = dict(zip(systems, ("tab:blue", "tab:green", "tab:red", "tab:purple")))
    for L in systems:
        for kind in ("real", "complex"):
            sel = [r for r in rows if r["L"] == L and r["kind"] == kind]
            if not sel:
                continue
            x = [r["sqrt_beta"] for r in sel]
            ax.errorbar(x, [r["p_max_mean"] for r in sel],
                        yerr=[r["p_max_std"] for r in sel],
                        marker=markers[kind], color=colors.get(L),
                        lw=1.0, capsize=2, label=f"L={L} {kind}")
    ax.axhline(0.5, color="red", lw=0.8, ls="--")
    ax.axhline(np.pi**2 / 16, color="black", lw=0.8, ls="--")
    ax.set_xlabel("sqrt(beta)")
    ax.set_ylabel("max localization probability")
    ax.legend(fontsize=8)
    return fig


def figure_localized(rows: list[dict]):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    x = [r["L"] for r in rows]
    for key, label, style in (
        ("s_xe_loc", "xE of localized state", "o-"),
        ("s_xe_min", "xE minimum", "s-"),
        ("s_ent_loc", "entanglement of localized state", "^-"),
        ("prediction", "predicted xE (localized)", "k--"),
    ):
        ax.errorbar(x, [r[f"{key}_mean"] for r in rows],
                    yerr=[r[f"{key}_std"] for r in rows],
                    fmt=style, lw=1.0, capsize=3, label=label)
    ax.set_xlabel("L")
    ax.set_ylabel("entropy (nats)")
    ax.legend(fontsize=8)
    return fig


def figure_density(density: np.ndarray, title: str):
    fig, ax = plt.subplots(figsize=(6.0, 1.6))
    _lattice_heatmap(ax, density, title)
    return fig
