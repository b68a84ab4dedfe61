"""Derivative-free extremization of entropies over the eigenphase torus and
maximization of the probability of localizing all particles in a window.

Evolving for a time t is the same as rotating eigenstate phases by E*t, so
the extreme values any evolution can reach are found by optimizing over one
phase per eigenstate (with the global phase gauge-fixed away).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .entropy import BipartitionTable, SpatialEnergyTable
from .lattice import FockBasis, RegionPartition
from .spectral import Spectrum
from .states import TWO_PI, PhaseVector, StateVector, sample_rpts

DEFAULT_CHUNK = 2048


class LocalizationError(ValueError):
    """Empty localized subspace."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Simplex-search settings; ``max_iter`` is the objective-evaluation
    budget per restart."""

    max_iter: int = 200_000
    tol_f: float = 1e-7
    tol_x: float = 1e-6
    restarts: int = 8
    seed: int = 0
    initial_step: float = 0.8  # simplex edge, radians
    prescan_t_max: float = 1e4
    prescan_dt: float = 0.5
    stage_dim_threshold: int = 500  # above this, optimize top phases first
    stage_top: int = 200


@dataclass(frozen=True)
class ExtremizationResult:
    value: float
    phi_star: PhaseVector
    iterations: int
    restarts_used: int
    converged: bool
    n_evals: int
    seed: int
    wall_time: float
    config: OptimizerConfig

    def to_json(self) -> str:
        payload = {
            "value": self.value,
            "phi_star": [float(p) for p in self.phi_star.phi],
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "n_evals": self.n_evals,
            "seed": self.seed,
            "wall_time_s": self.wall_time,
            "config": asdict(self.config),
        }
        return json.dumps(payload, sort_keys=True)

    def save(self, path: str | Path):
        Path(path).write_text(self.to_json())


def _nm_run(objective, x0, step, max_evals, tol_f, tol_x):
    """One Nelder-Mead run: reflection 1, expansion 2, contraction 0.5,
    shrink 0.5.  Stops on objective spread < tol_f, vertex spread < tol_x,
    or the evaluation budget.

    The simplex is kept unsorted; the vertex sum is updated incrementally
    so each iteration costs O(n) on top of the objective calls.
    """
    n = len(x0)
    sim = np.tile(np.asarray(x0, dtype=np.float64), (n + 1, 1))
    sim[1:] += np.eye(n) * step
    f = np.array([objective(x) for x in sim])
    evals = n + 1
    vertex_sum = sim.sum(axis=0)
    iters = 0
    converged = False
    check_every = max(1, n // 4)  # the O(n^2) spread check is amortized

    def replace_worst(w, x, fx):
        nonlocal vertex_sum
        vertex_sum += x - sim[w]
        sim[w] = x
        f[w] = fx

    while evals < max_evals:
        b = int(np.argmin(f))
        w = int(np.argmax(f))
        f_second = np.partition(f, -2)[-2]
        if f[w] - f[b] <= tol_f:
            converged = True
            break
        if iters % check_every == 0 and \
                np.max(np.abs(sim - sim[b]), initial=0.0) <= tol_x:
            converged = True
            break
        iters += 1
        centroid = (vertex_sum - sim[w]) / n
        xr = centroid + (centroid - sim[w])
        fr = objective(xr)
        evals += 1
        if fr < f[b]:
            xe = centroid + 2.0 * (centroid - sim[w])
            fe = objective(xe)
            evals += 1
            if fe < fr:
                replace_worst(w, xe, fe)
            else:
                replace_worst(w, xr, fr)
        elif fr < f_second:
            replace_worst(w, xr, fr)
        else:
            if fr < f[w]:  # outside contraction
                xc = centroid + 0.5 * (xr - centroid)
                fc = objective(xc)
                evals += 1
                accept = fc <= fr
            else:  # inside contraction
                xc = centroid - 0.5 * (centroid - sim[w])
                fc = objective(xc)
                evals += 1
                accept = fc < f[w]
            if accept:
                replace_worst(w, xc, fc)
            else:  # shrink toward the best vertex
                sim[:] = sim[b] + 0.5 * (sim - sim[b])
                keep = f[b]
                for i in range(n + 1):
                    if i != b:
                        f[i] = objective(sim[i])
                evals += n
                f[b] = keep
                vertex_sum = sim.sum(axis=0)
    best = int(np.argmin(f))
    return sim[best].copy(), float(f[best]), evals, iters, converged


def nelder_mead(
    objective, dim_phi: int, config: OptimizerConfig, starts=None
) -> ExtremizationResult:
    """Best-of-restarts simplex minimization.

    ``starts`` seeds the first restarts; the remainder draw uniform random
    phase vectors from the config seed.
    """
    if dim_phi < 1:
        raise ValueError("dim_phi must be >= 1")
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    start_list = [np.asarray(x, dtype=np.float64) for x in (starts or [])]
    while len(start_list) < config.restarts:
        start_list.append(rng.uniform(0.0, TWO_PI, dim_phi))

    best_x, best_f = None, np.inf
    total_evals = total_iters = 0
    any_converged = False
    for x0 in start_list:
        x, fx, evals, iters, conv = _nm_run(
            objective, x0, config.initial_step, config.max_iter,
            config.tol_f, config.tol_x,
        )
        total_evals += evals
        total_iters += iters
        any_converged = any_converged or conv
        if fx < best_f:
            best_x, best_f = x, fx
    return ExtremizationResult(
        value=best_f,
        phi_star=PhaseVector.from_free(np.mod(best_x, TWO_PI)),
        iterations=total_iters,
        restarts_used=len(start_list),
        converged=any_converged,
        n_evals=total_evals,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        config=config,
    )


def _staged_minimize(objective, dim_phi, config, starts, top_indices):
    """For very large phase counts, optimize the most-populated phases
    first, then polish over the full dimension."""
    subset = top_indices[:config.stage_top]
    stage_starts = [x[subset] for x in starts]

    def sub_objective(x_sub, _base=starts[0].copy()):
        x = _base.copy()
        x[subset] = x_sub
        return objective(x)

    sub = nelder_mead(sub_objective, len(subset), config, starts=stage_starts)
    full_start = starts[0].copy()
    full_start[subset] = np.mod(sub.phi_star.free, TWO_PI)
    polish_config = OptimizerConfig(**{**asdict(config), "restarts": 1})
    out = nelder_mead(objective, dim_phi, polish_config, starts=[full_start])
    if sub.value < out.value:
        return ExtremizationResult(
            value=sub.value,
            phi_star=PhaseVector.from_free(full_start),
            iterations=sub.iterations + out.iterations,
            restarts_used=sub.restarts_used + out.restarts_used,
            converged=sub.converged,
            n_evals=sub.n_evals + out.n_evals,
            seed=config.seed,
            wall_time=sub.wall_time + out.wall_time,
            config=config,
        )
    return out


class _EntropyObjective:
    """S(phases) for a fixed initial state, with a vectorized time scan."""

    def __init__(self, state0, spec, kind, basis, width, offset, partition, eps_deg):
        self.amps0 = state0.amps
        self.energies = spec.energies
        # complex copy avoids a real-to-complex promotion on every call
        self.eigvecs = spec.eigenvectors.astype(np.complex128)
        self.kind = kind
        if kind == "ent":
            self.table = BipartitionTable(basis, width, offset)
        elif kind == "xE":
            part = partition or RegionPartition(basis.L, width)
            self.table = SpatialEnergyTable(spec, basis, part, eps_deg)
        else:
            raise ValueError(f"unknown entropy kind {kind!r}")

    def value_at_free(self, free: np.ndarray) -> float:
        u = self.amps0 * np.exp(-1j * np.concatenate(([0.0], free)))
        if self.kind == "ent":
            return self.table.entropy_of(self.eigvecs @ u)
        return self.table.total(u)

    def time_scan(self, times: np.ndarray, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
        out = np.empty(len(times))
        for s in range(0, len(times), chunk):
            ts = times[s:s + chunk]
            amps = self.amps0[None, :] * np.exp(
                -1j * np.outer(ts, self.energies)
            )
            if self.kind == "ent":
                out[s:s + len(ts)] = self.table.entropies(amps @ self.eigvecs.T)
            else:
                out[s:s + len(ts)] = self.table.totals(amps)
        return out

    def top_indices(self) -> np.ndarray:
        return np.argsort(np.abs(self.amps0[1:]))[::-1]


def extremize_entropy(
    state0: StateVector,
    spec: Spectrum,
    basis: FockBasis,
    entropy_kind: str,
    direction: str,
    config: OptimizerConfig,
    width: int = 4,
    offset: int = 0,
    partition: RegionPartition | None = None,
    eps_deg: float | None = None,
    seed_times=(),
) -> ExtremizationResult:
    """Extreme entanglement ("ent") or position-energy observational
    entropy ("xE") over all eigenphase rotations of ``state0``.

    A coarse time-evolution scan seeds one simplex restart (plus any extra
    ``seed_times``), the remaining restarts start from random phases, and
    the returned extreme is never worse than the best scanned sample.
    """
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    t0 = time.perf_counter()
    sign = 1.0 if direction == "min" else -1.0
    obj = _EntropyObjective(
        state0, spec, entropy_kind, basis, width, offset, partition, eps_deg
    )
    dim_phi = len(state0.amps) - 1

    def objective(free):
        return sign * obj.value_at_free(free)

    starts = []
    prescan_best = np.inf
    n_scan = 0
    if config.prescan_t_max > 0:
        times = np.arange(0.0, config.prescan_t_max + config.prescan_dt / 2,
                          config.prescan_dt)
        values = sign * obj.time_scan(times)
        n_scan = len(times)
        k = int(np.argmin(values))
        prescan_best = float(values[k])
        starts.append(PhaseVector.from_time(spec.energies, times[k]).free)
    for t_seed in seed_times:
        starts.append(PhaseVector.from_time(spec.energies, float(t_seed)).free)

    if dim_phi > config.stage_dim_threshold:
        if not starts:
            starts = [np.zeros(dim_phi)]
        result = _staged_minimize(objective, dim_phi, config, starts,
                                  obj.top_indices())
    else:
        result = nelder_mead(objective, dim_phi, config, starts=starts)

    value = result.value
    phi_star = result.phi_star
    if prescan_best < value:
        value = prescan_best
        phi_star = PhaseVector.from_time(spec.energies, times[k])
    return ExtremizationResult(
        value=sign * value,
        phi_star=phi_star,
        iterations=result.iterations,
        restarts_used=result.restarts_used,
        converged=result.converged,
        n_evals=result.n_evals + n_scan,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        config=config,
    )


# ---------------------------------------------------------------------------
# localization probability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalizationWindow:
    """A contiguous site range together with the dimensions that control
    how sharply localization probability is capped."""

    start: int
    width: int
    M: int  # dimension of the all-particles-inside subspace
    N: int  # full Hilbert dimension

    @property
    def separation_ratio(self) -> float:
        return self.N / self.M**2

    @property
    def well_separated(self) -> bool:
        return self.separation_ratio >= 10.0


def localization_projector(
    basis: FockBasis, start: int, width: int
) -> tuple[np.ndarray, LocalizationWindow]:
    """Boolean mask over basis configs with every particle inside the
    window, plus the window bookkeeping."""
    if start < 0 or start + width > basis.L:
        raise LocalizationError("window does not fit on the lattice")
    window_mask = ((1 << width) - 1) << start
    inside = (basis.configs & ~window_mask) == 0
    M = int(inside.sum())
    if M == 0:
        raise LocalizationError(
            f"window of width {width} cannot hold {basis.N_p} particles"
        )
    window = LocalizationWindow(start=start, width=width, M=M, N=basis.dim)
    return inside, window


def middle_window(L: int, width: int) -> int:
    """Start site (0-based) of the centered window of the given width."""
    return (L - width) // 2


def align_phases(
    B: np.ndarray, amps: np.ndarray, tol: float = 1e-13, max_sweeps: int = 2000
):
    """Iterative phase alignment for maximizing |B u|^2 at fixed |u|.

    Each sweep replaces every phase with the phase of the projected image;
    for the positive-semidefinite quadratic form this never decreases the
    probability.  Returns the aligned amplitudes and the per-sweep history.
    """
    u = amps.astype(np.complex128).copy()
    history = [float((np.abs(B @ u) ** 2).sum())]
    mags = np.abs(amps)
    for _ in range(max_sweeps):
        w = B.conj().T @ (B @ u)
        wa = np.abs(w)
        ua = np.abs(u)
        old_phase = np.where(ua > 0, u / np.where(ua > 0, ua, 1.0), 1.0)
        phase = np.where(wa > 1e-300, w / np.where(wa > 0, wa, 1.0), old_phase)
        u_new = mags * phase
        p_new = float((np.abs(B @ u_new) ** 2).sum())
        u = u_new
        history.append(p_new)
        if p_new - history[-2] < tol:
            break
    return u, np.array(history)


def maximize_localization(
    state0: StateVector,
    spec: Spectrum,
    inside_mask: np.ndarray,
    config: OptimizerConfig,
) -> ExtremizationResult:
    """Maximal probability of finding every particle inside the window,
    over all eigenphase rotations of ``state0``.

    Phase alignment (from the initial state plus random phase draws) does
    the heavy lifting; a simplex pass polishes the best alignment.
    """
    t0 = time.perf_counter()
    if not np.any(inside_mask):
        raise LocalizationError("empty localized subspace")
    B = spec.eigenvectors[np.asarray(inside_mask, dtype=bool), :].astype(
        np.complex128
    )
    amps0 = state0.amps
    mags = np.abs(amps0)
    dim_phi = len(amps0) - 1
    rng = np.random.default_rng(config.seed)

    best_u, best_p = None, -1.0
    n_evals = 0
    for attempt in range(max(1, config.restarts)):
        if attempt == 0:
            u_init = amps0
        else:
            u_init = mags * np.exp(-1j * rng.uniform(0.0, TWO_PI, len(amps0)))
        u, history = align_phases(B, u_init)
        n_evals += len(history)
        if history[-1] > best_p:
            best_u, best_p = u, float(history[-1])

    # phases that turn state0 into the aligned state
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(mags > 0, np.angle(amps0) - np.angle(best_u), 0.0)
    phi_free = np.mod(phi - phi[0], TWO_PI)[1:]

    def objective(free):
        u = amps0 * np.exp(-1j * np.concatenate(([0.0], free)))
        return -float((np.abs(B @ u) ** 2).sum())

    polish_config = OptimizerConfig(**{**asdict(config), "restarts": 1})
    if dim_phi > config.stage_dim_threshold:
        top = np.argsort(mags[1:])[::-1]
        result = _staged_minimize(objective, dim_phi, polish_config, [phi_free], top)
    else:
        result = nelder_mead(objective, dim_phi, polish_config, starts=[phi_free])

    value = -result.value
    phi_star = result.phi_star
    if best_p > value:
        value = best_p
        phi_star = PhaseVector(np.concatenate(([0.0], np.mod(phi_free, TWO_PI))))
    return ExtremizationResult(
        value=min(max(value, 0.0), 1.0),
        phi_star=phi_star,
        iterations=result.iterations,
        restarts_used=config.restarts,
        converged=result.converged,
        n_evals=n_evals + result.n_evals,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        config=config,
    )


def pmax_beta_sweep(
    systems: dict,
    betas,
    kinds,
    seeds,
    config: OptimizerConfig,
    width: int = 5,
) -> list[dict]:
    """Mean localization probability vs sqrt(beta) for each lattice size.

    ``systems`` maps L to (Spectrum, FockBasis); the window is the centered
    ``width`` sites.  Returns one row per (L, beta, kind).
    """
    rows = []
    for L in sorted(systems):
        spec, basis = systems[L]
        mask, window = localization_projector(basis, middle_window(L, width), width)
        for beta in betas:
            for kind in kinds:
                values = []
                for seed in seeds:
                    state = sample_rpts(spec, beta, kind, seed)
                    res = maximize_localization(state, spec, mask, config)
                    values.append(res.value)
                values = np.array(values)
                rows.append({
                    "L": L,
                    "beta": float(beta),
                    "sqrt_beta": float(np.sqrt(beta)),
                    "kind": kind,
                    "p_max_mean": float(values.mean()),
                    "p_max_std": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
                    "n_seeds": len(seeds),
                    "M": window.M,
                    "N": window.N,
                })
    return rows
