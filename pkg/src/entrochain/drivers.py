"""Experiment drivers: fluctuation histograms, size and temperature sweeps,
localization studies, and the single-run helpers behind the CLI.

Every driver is a pure function of its config: seeds are explicit, workers
only parallelize over independent (seed, grid-point) tasks, and results are
sorted before aggregation.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .entropy import (
    BipartitionTable,
    SpatialEnergyTable,
    localized_entropy_prediction,
    max_entanglement_bound,
    volume_law_prediction,
)
from .extremize import (
    ExtremizationResult,
    OptimizerConfig,
    extremize_entropy,
    localization_projector,
    maximize_localization,
    pmax_beta_sweep,
)
from .lattice import LatticeParams, RegionPartition, enumerate_basis
from .spectral import Spectrum, canonical_entropy, get_spectrum, subsystem_thermal_entropy
from .states import StateVector, apply_phases, sample_rpts, to_fock_basis

TRACE_CHUNK = 4096
BURN_IN_FRACTION = 0.01  # discarded from the head of every time series


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Parameter envelope shared by all drivers; unused fields are ignored
    by drivers that do not need them."""

    experiment: str = ""
    # lattice
    L: int = 16
    N_p: int = 2
    t: float = 1.9
    t_prime: float = 1.9
    V: float = 0.5
    V_prime: float = 0.5
    cut_hopping: int | None = None
    # bipartition block / region width
    width: int = 4
    offset: int = 0
    # sampling
    beta: float = 0.01
    beta_grid: tuple = (0.01, 0.1, 0.3, 0.5, 1.0, 3.0, 10.0)
    L_grid: tuple = (8, 12, 16, 20, 24, 28)
    seeds: tuple = (0, 1, 2, 3, 4, 5)
    state_kind: str = "complex"
    kinds: tuple = ("real", "complex")
    # time grid
    t_max: float = 5e4
    dt: float = 0.5
    bins: int = 100
    # localization window
    window_width: int = 5
    window_start: int | None = None  # None = centered
    # extremization
    entropy_kind: str = "ent"
    direction: str = "max"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # evolution snapshot (density driver)
    time: float = 0.0
    # outputs
    outdir: str = "runs"
    formats: tuple = ("csv", "json", "svg")
    workers: int = 2
    cache_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_max < 0:
            raise ConfigError("t_max must be nonnegative")
        for name in ("beta_grid", "L_grid", "seeds"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.bins < 2:
            raise ConfigError("bins must be >= 2")

    def lattice(self, L: int | None = None) -> LatticeParams:
        return LatticeParams(
            L=self.L if L is None else L, N_p=self.N_p, t=self.t,
            t_prime=self.t_prime, V=self.V, V_prime=self.V_prime,
            cut_hopping=self.cut_hopping,
        )

    def times(self) -> np.ndarray:
        return np.arange(0.0, self.t_max + self.dt / 2, self.dt)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d


@dataclass
class EntropyTrace:
    """Entropy time series with optional thinned particle densities."""

    times: np.ndarray
    s_ent: np.ndarray
    s_xe: np.ndarray
    densities: np.ndarray | None = None
    density_stride: int = 0

    def __post_init__(self):
        if len(self.s_ent) != len(self.times) or len(self.s_xe) != len(self.times):
            raise ConfigError("trace series lengths differ from the time grid")
        if not (np.isfinite(self.s_ent).all() and np.isfinite(self.s_xe).all()):
            raise ConfigError("trace contains non-finite entries")

    def mean_after_burn_in(self, series: np.ndarray) -> float:
        burn = int(len(series) * BURN_IN_FRACTION)
        return float(series[burn:].mean())


def _system(config: ExperimentConfig, L: int | None = None):
    params = config.lattice(L)
    basis = enumerate_basis(params)
    spec = get_spectrum(params, config.cache_dir)
    return params, basis, spec


def compute_trace(
    state0: StateVector,
    spec: Spectrum,
    basis,
    width: int,
    times: np.ndarray,
    offset: int = 0,
    density_stride: int = 0,
    ent_table: BipartitionTable | None = None,
    xe_table: SpatialEnergyTable | None = None,
) -> EntropyTrace:
    """Both entropies along an evolution, sharing the basis rotation."""
    bip = ent_table or BipartitionTable(basis, width, offset)
    xet = xe_table or SpatialEnergyTable(
        spec, basis, RegionPartition(basis.L, width)
    )
    eigvecs_c = spec.eigenvectors.astype(np.complex128)
    occupations = basis.occupations.astype(np.float64)
    s_ent = np.empty(len(times))
    s_xe = np.empty(len(times))
    dens_rows = []
    for start in range(0, len(times), TRACE_CHUNK):
        ts = times[start:start + TRACE_CHUNK]
        amps = state0.amps[None, :] * np.exp(-1j * np.outer(ts, spec.energies))
        fock = amps @ eigvecs_c.T
        s_ent[start:start + len(ts)] = bip.entropies(fock)
        s_xe[start:start + len(ts)] = xet.totals_from_fock(fock)
        if density_stride:
            global_idx = start + np.arange(len(ts))
            sel = np.nonzero(global_idx % density_stride == 0)[0]
            if len(sel):
                dens_rows.append(np.abs(fock[sel]) ** 2 @ occupations)
    densities = np.concatenate(dens_rows) if dens_rows else None
    return EntropyTrace(
        times=times, s_ent=s_ent, s_xe=s_xe,
        densities=densities, density_stride=density_stride,
    )


@dataclass
class TailFit:
    """Weighted least-squares line through the log-probabilities of the
    left histogram tail.

    The window is the bins strictly below the mode with at least
    ``min_count`` entries, excluding the quadratic core around the mode
    (bins above ``core_frac`` of the mode count).  The abscissa is the
    depth below the mode, so exponential suppression of downward
    fluctuations shows up as a negative slope (per nat of depth).
    """

    slope: float
    intercept: float
    r_squared: float
    n_bins: int
    mode_center: float


def fit_left_tail(
    counts: np.ndarray, edges: np.ndarray,
    min_count: int = 5, core_frac: float = 0.5,
) -> TailFit:
    counts = np.asarray(counts, dtype=np.float64)
    probs = counts / counts.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    mode = int(np.argmax(counts))
    keep = (counts[:mode] >= min_count) & (counts[:mode] <= core_frac * counts[mode])
    sel = np.nonzero(keep)[0]
    if len(sel) < 2:
        return TailFit(slope=np.nan, intercept=np.nan, r_squared=np.nan,
                       n_bins=len(sel), mode_center=float(centers[mode]))
    depth = centers[mode] - centers[sel]
    y, w = np.log(probs[sel]), counts[sel]
    coeffs = np.polyfit(depth, y, 1, w=np.sqrt(w))  # polyfit weights multiply residuals
    fit = np.polyval(coeffs, depth)
    ybar = (w * y).sum() / w.sum()
    ss_res = (w * (y - fit) ** 2).sum()
    ss_tot = (w * (y - ybar) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    return TailFit(
        slope=float(coeffs[0]), intercept=float(coeffs[1]),
        r_squared=float(r2), n_bins=len(sel), mode_center=float(centers[mode]),
    )


@dataclass
class HistogramData:
    label: str  # "ent" | "xE"
    edges: np.ndarray
    counts: np.ndarray
    probs: np.ndarray
    tail: TailFit
    marker_min: ExtremizationResult
    marker_max: ExtremizationResult
    sample_min: float
    sample_max: float
    sample_mean: float
    # site densities of the optimizer's extreme states and of the sample
    # closest to the mean
    density_min: np.ndarray
    density_max: np.ndarray
    density_mean: np.ndarray


@dataclass
class HistogramResult:
    config: ExperimentConfig
    trace: EntropyTrace
    entropies: dict  # label -> HistogramData


def _density_at_time(state0, spec, basis, t: float) -> np.ndarray:
    amps = state0.amps * np.exp(-1j * spec.energies * t)
    fock = spec.eigenvectors.astype(np.complex128) @ amps
    return np.abs(fock) ** 2 @ basis.occupations.astype(np.float64)


def _density_at_phases(state0, spec, basis, phases) -> np.ndarray:
    fock = to_fock_basis(apply_phases(state0, phases), spec)
    return np.abs(fock) ** 2 @ basis.occupations.astype(np.float64)


def run_histogram(config: ExperimentConfig) -> HistogramResult:
    """Fluctuation histogram of both entropies for one (L, beta, seed),
    with extreme-value markers from the phase optimizer."""
    params, basis, spec = _system(config)
    seed = config.seeds[0]
    state0 = sample_rpts(spec, config.beta, config.state_kind, seed)
    times = config.times()
    if len(times) < 1000:
        warnings.warn(f"only {len(times)} samples; tail statistics will be poor")
    trace = compute_trace(state0, spec, basis, config.width, times,
                          offset=config.offset)

    out = {}
    for label, series in (("ent", trace.s_ent), ("xE", trace.s_xe)):
        counts, edges = np.histogram(series, bins=config.bins)
        probs = counts / counts.sum()
        k_min, k_max = int(np.argmin(series)), int(np.argmax(series))
        k_mean = int(np.argmin(np.abs(series - series.mean())))
        seed_times = [times[k_min], times[k_max]]
        markers = {}
        for direction in ("min", "max"):
            markers[direction] = extremize_entropy(
                state0, spec, basis, label, direction, config.optimizer,
                width=config.width, offset=config.offset, seed_times=seed_times,
            )
        out[label] = HistogramData(
            label=label,
            edges=edges,
            counts=counts,
            probs=probs,
            tail=fit_left_tail(counts, edges),
            marker_min=markers["min"],
            marker_max=markers["max"],
            sample_min=float(series[k_min]),
            sample_max=float(series[k_max]),
            sample_mean=float(series.mean()),
            density_min=_density_at_phases(state0, spec, basis,
                                           markers["min"].phi_star),
            density_max=_density_at_phases(state0, spec, basis,
                                           markers["max"].phi_star),
            density_mean=_density_at_time(state0, spec, basis, times[k_mean]),
        )
    return HistogramResult(config=config, trace=trace, entropies=out)


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _stats(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), std


def _extreme_stats_for_system(config, params, basis, spec, kinds):
    """Per-seed {min, ave, max} of the requested entropies for one system."""
    times = config.times()

    def one_seed(seed):
        state0 = sample_rpts(spec, config.beta, config.state_kind, seed)
        trace = compute_trace(state0, spec, basis, config.width, times,
                              offset=config.offset)
        series = {"ent": trace.s_ent, "xE": trace.s_xe}
        row = {}
        for kind in kinds:
            s = series[kind]
            seed_times = [times[int(np.argmin(s))], times[int(np.argmax(s))]]
            res_min = extremize_entropy(
                state0, spec, basis, kind, "min", config.optimizer,
                width=config.width, offset=config.offset, seed_times=seed_times)
            res_max = extremize_entropy(
                state0, spec, basis, kind, "max", config.optimizer,
                width=config.width, offset=config.offset, seed_times=seed_times)
            row[kind] = {
                "min": res_min.value,
                "ave": trace.mean_after_burn_in(s),
                "max": res_max.value,
            }
        return row

    return _pmap(one_seed, list(config.seeds), config.workers)


def _aggregate_rows(config, key_name, key_value, per_seed, kinds, overlays):
    rows = []
    for kind in kinds:
        row = {key_name: key_value, "kind": kind, "n_seeds": len(config.seeds)}
        for stat in ("min", "ave", "max"):
            mean, std = _stats([entry[kind][stat] for entry in per_seed])
            row[f"{stat}_mean"] = mean
            row[f"{stat}_std"] = std
        row.update(overlays.get(kind, {}))
        rows.append(row)
    return rows


def run_size_sweep(config: ExperimentConfig) -> list[dict]:
    """{min, ave, max} of both entropies vs lattice size, with thermal
    overlays and the closed-form predictions."""
    rows = []
    for L in sorted(config.L_grid):
        if L % config.width != 0:
            raise ConfigError(
                f"L={L} is not a multiple of the region width {config.width}"
            )
        params, basis, spec = _system(config, L)
        per_seed = _extreme_stats_for_system(config, params, basis, spec,
                                             kinds=("ent", "xE"))
        s_th_full = canonical_entropy(spec, config.beta)
        s_th_a = subsystem_thermal_entropy(params, config.width, config.beta)
        overlays = {
            "ent": {
                "s_th_A": s_th_a,
                "s_th_AB": s_th_full,
                "volume_law": volume_law_prediction(s_th_full, config.width, L),
                "max_bound": max_entanglement_bound(L, config.width, config.N_p),
            },
            "xE": {"s_th_A": s_th_a, "s_th_AB": s_th_full},
        }
        rows.extend(_aggregate_rows(config, "L", L, per_seed, ("ent", "xE"),
                                    overlays))
    return rows


def run_beta_sweep(config: ExperimentConfig) -> list[dict]:
    """{min, ave, max} of both entropies vs inverse temperature at fixed L."""
    params, basis, spec = _system(config)
    rows = []
    for beta in config.beta_grid:
        cfg = replace(config, beta=beta)
        per_seed = _extreme_stats_for_system(cfg, params, basis, spec,
                                             kinds=("ent", "xE"))
        s_th_full = canonical_entropy(spec, beta)
        s_th_a = subsystem_thermal_entropy(params, config.width, beta)
        overlays = {
            "ent": {"s_th_A": s_th_a, "s_th_AB": s_th_full},
            "xE": {"s_th_A": s_th_a, "s_th_AB": s_th_full},
        }
        rows.extend(_aggregate_rows(cfg, "beta", beta, per_seed, ("ent", "xE"),
                                    overlays))
    return rows


def run_localized_entropy(config: ExperimentConfig) -> list[dict]:
    """Entropies of maximally localized states vs lattice size.

    Each seed's state is driven into the leftmost block by maximizing the
    localization probability; both entropies of that state are compared
    against the optimized entropy minimum and the closed-form prediction.
    """
    rows = []
    width = config.width
    for L in sorted(config.L_grid):
        params, basis, spec = _system(config, L)
        start = 0 if config.window_start is None else config.window_start
        mask, window = localization_projector(basis, start, width)
        xe_table = SpatialEnergyTable(spec, basis, RegionPartition(L, width))
        ent_table = BipartitionTable(basis, width, start)
        s_th_full = canonical_entropy(spec, config.beta)

        def one_seed(seed):
            state0 = sample_rpts(spec, config.beta, config.state_kind, seed)
            loc = maximize_localization(state0, spec, mask, config.optimizer)
            localized = apply_phases(state0, loc.phi_star)
            fock = to_fock_basis(localized, spec)
            s_xe_loc = xe_table.total(localized.amps)
            s_ent_loc = ent_table.entropy_of(fock)
            res_min = extremize_entropy(
                state0, spec, basis, "xE", "min", config.optimizer, width=width)
            prediction, bound = localized_entropy_prediction(
                s_th_full, loc.value, L, width, config.N_p)
            return {
                "p_max": loc.value, "s_xe_loc": s_xe_loc, "s_ent_loc": s_ent_loc,
                "s_xe_min": res_min.value, "prediction": prediction,
                "bound": bound,
            }

        per_seed = _pmap(one_seed, list(config.seeds), config.workers)
        row = {"L": L, "n_seeds": len(config.seeds), "s_th_AB": s_th_full,
               "M": window.M, "N": window.N}
        for key in ("p_max", "s_xe_loc", "s_ent_loc", "s_xe_min",
                    "prediction", "bound"):
            mean, std = _stats([entry[key] for entry in per_seed])
            row[f"{key}_mean"] = mean
            row[f"{key}_std"] = std
        rows.append(row)
    return rows


def run_pmax_sweep(config: ExperimentConfig) -> list[dict]:
    """Localization probability vs sqrt(beta) for each lattice size, for
    real and complex initial states (centered window)."""
    systems = {}
    for L in sorted(config.L_grid):
        params, basis, spec = _system(config, L)
        systems[L] = (spec, basis)
    return pmax_beta_sweep(
        systems, list(config.beta_grid), list(config.kinds),
        list(config.seeds), config.optimizer, width=config.window_width,
    )


def run_extremize(config: ExperimentConfig) -> ExtremizationResult:
    """One extremization of the configured entropy kind and direction."""
    params, basis, spec = _system(config)
    state0 = sample_rpts(spec, config.beta, config.state_kind, config.seeds[0])
    return extremize_entropy(
        state0, spec, basis, config.entropy_kind, config.direction,
        config.optimizer, width=config.width, offset=config.offset,
    )


def run_density(config: ExperimentConfig) -> dict:
    """Particle density of the sampled state, optionally evolved."""
    params, basis, spec = _system(config)
    state0 = sample_rpts(spec, config.beta, config.state_kind, config.seeds[0])
    density = _density_at_time(state0, spec, basis, config.time)
    return {
        "L": params.L, "N_p": params.N_p, "beta": config.beta,
        "seed": config.seeds[0], "time": config.time,
        "density": density,
    }
