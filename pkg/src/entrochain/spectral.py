"""Exact diagonalization and canonical thermodynamic reference values.

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import LatticeParams, build_hamiltonian, enumerate_basis

SPECTRUM_FORMAT_VERSION = 1


class SpectralError(RuntimeError):
    """Eigensolver failure or malformed input matrix."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hamiltonian.

    Column k of ``eigenvectors`` is the eigenvector of ``energies[k]``,
    expressed in the Fock basis.
    """

    energies: np.ndarray
    eigenvectors: np.ndarray
    params: LatticeParams | None = None

    @property
    def dim(self) -> int:
        return len(self.energies)


def diagonalize(H: np.ndarray, params: LatticeParams | None = None) -> Spectrum:
    """Full eigendecomposition of a dense real-symmetric matrix."""
    H = np.asarray(H, dtype=np.float64)
    scale = max(1.0, float(np.abs(H).max()) if H.size else 1.0)
    if np.abs(H - H.T).max(initial=0.0) > 1e-12 * scale:
        raise SpectralError("matrix is not symmetric within 1e-12")
    try:
        energies, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectralError(f"eigensolver failed to converge: {exc}") from exc
    return Spectrum(energies=energies, eigenvectors=vecs, params=params)


def get_spectrum(params: LatticeParams, cache_dir: str | Path | None = None) -> Spectrum:
    """Build and diagonalize the chain Hamiltonian, with optional file cache."""
    if cache_dir is not None:
        path = spectrum_cache_path(cache_dir, params)
        if path.exists():
            return load_spectrum(path, expected=params)
    basis = enumerate_basis(params)
    spec = diagonalize(build_hamiltonian(params, basis), params=params)
    if cache_dir is not None:
        save_spectrum(spec, path)
    return spec


def spectrum_cache_path(cache_dir: str | Path, params: LatticeParams) -> Path:
    p = params
    cut = "none" if p.cut_hopping is None else str(p.cut_hopping)
    name = (
        f"spectrum_L{p.L}_N{p.N_p}_t{p.t:g}_tp{p.t_prime:g}"
        f"_V{p.V:g}_Vp{p.V_prime:g}_cut{cut}.npz"
    )
    return Path(cache_dir) / name


def save_spectrum(spec: Spectrum, path: str | Path):
    if spec.params is None:
        raise SpectralError("cannot cache a spectrum without a params snapshot")
    p = spec.params
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savez(
        path,
        format_version=np.int64(SPECTRUM_FORMAT_VERSION),
        energies=spec.energies,
        eigenvectors=spec.eigenvectors,
        L=np.int64(p.L),
        N_p=np.int64(p.N_p),
        couplings=np.array([p.t, p.t_prime, p.V, p.V_prime]),
        cut_hopping=np.int64(-1 if p.cut_hopping is None else p.cut_hopping),
    )


def load_spectrum(path: str | Path, expected: LatticeParams | None = None) -> Spectrum:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != SPECTRUM_FORMAT_VERSION:
            raise SpectralError(f"unsupported spectrum cache version {version}")
        cut = int(data["cut_hopping"])
        params = LatticeParams(
            L=int(data["L"]),
            N_p=int(data["N_p"]),
            t=float(data["couplings"][0]),
            t_prime=float(data["couplings"][1]),
            V=float(data["couplings"][2]),
            V_prime=float(data["couplings"][3]),
            cut_hopping=None if cut < 0 else cut,
        )
        if expected is not None and params != expected:
            raise SpectralError(f"cache at {path} holds {params}, expected {expected}")
        return Spectrum(
            energies=data["energies"].copy(),
            eigenvectors=data["eigenvectors"].copy(),
            params=params,
        )


def partition_function(spec: Spectrum, beta: float) -> float:
    """Z = sum_E exp(-beta E), evaluated with a ground-state shift.

    The shifted sum itself cannot overflow; only the exp(-beta E_min)
    prefactor can, in which case inf is returned (use canonical_entropy
    for the always-finite log-space quantities).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    E = spec.energies
    e_min = E.min()
    with np.errstate(over="ignore"):
        return float(np.exp(-beta * (E - e_min)).sum() * np.exp(-beta * e_min))


def _log_z_and_mean_energy(energies: np.ndarray, beta: float) -> tuple[float, float]:
    e_min = energies.min()
    w = np.exp(-beta * (energies - e_min))
    total = w.sum()
    log_z = math.log(total) - beta * e_min
    mean_e = float((w * energies).sum() / total)
    return log_z, mean_e


def canonical_entropy(spec: Spectrum, beta: float) -> float:
    """Thermal entropy ln Z + beta <E> of the canonical state."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    log_z, mean_e = _log_z_and_mean_energy(spec.energies, beta)
    return max(0.0, log_z + beta * mean_e)


def subsystem_thermal_entropy(params: LatticeParams, width: int, beta: float) -> float:
    """Thermal entropy of the leftmost ``width`` sites.

    The subsystem Hamiltonian is the same chain restricted to those sites,
    block diagonal over particle sectors 0..min(N_p, width), and is
    normalized by its own trace.
    """
    if not 0 < width < params.L:
        raise ValueError(f"width must be in (0, L), got {width}")
    energies = [np.zeros(1)]  # empty sector: single vacuum state at E = 0
    for n in range(1, min(params.N_p, width) + 1):
        if width == 1:
            energies.append(np.zeros(1))  # lone site, no couplings
            continue
        sub = LatticeParams(
            L=width, N_p=n, t=params.t, t_prime=params.t_prime,
            V=params.V, V_prime=params.V_prime,
        )
        H = build_hamiltonian(sub, enumerate_basis(sub))
        energies.append(np.linalg.eigvalsh(H))
    pooled = np.concatenate(energies)
    log_z, mean_e = _log_z_and_mean_energy(pooled, beta)
    return max(0.0, log_z + beta * mean_e)
