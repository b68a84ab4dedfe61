"""Fixed particle-number Fock basis and Hamiltonian for spinless fermions
on an open 1-D chain.

Basis states are occupation bit-patterns with site 1 stored in the least
significant bit, ordered by ascending integer value.  The corresponding
operator ordering is f_1^dag ... f_L^dag acting on the vacuum, so a hop
between sites i < j picks up the parity of the occupied sites strictly
between i and j.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

MAX_SITES = 32  # bit-pattern width limit


class LatticeError(ValueError):
    """Invalid lattice parameters or mismatched basis."""


@dataclass(frozen=True)
class LatticeParams:
    """Geometry and couplings of the open chain.

    ``t``/``t_prime`` are nearest- and next-nearest-neighbor hopping
    amplitudes, ``V``/``V_prime`` the matching density-density interaction
    strengths.  ``cut_hopping``, when set to a site count d, removes every
    hop that crosses the boundary between sites d and d+1 (interactions
    across the cut are kept).
    """

    L: int
    N_p: int
    t: float = 1.9
    t_prime: float = 1.9
    V: float = 0.5
    V_prime: float = 0.5
    cut_hopping: int | None = None

    def __post_init__(self):
        if not 2 <= self.L <= MAX_SITES:
            raise LatticeError(f"L must be in [2, {MAX_SITES}], got {self.L}")
        if not 1 <= self.N_p <= self.L:
            raise LatticeError(f"N_p must be in [1, L={self.L}], got {self.N_p}")
        for name in ("t", "t_prime", "V", "V_prime"):
            if not math.isfinite(getattr(self, name)):
                raise LatticeError(f"coupling {name} must be finite")
        if self.cut_hopping is not None and not 0 < self.cut_hopping < self.L:
            raise LatticeError(f"cut_hopping must be in (0, L), got {self.cut_hopping}")

    @property
    def dim(self) -> int:
        return math.comb(self.L, self.N_p)


_CONFIG_KEYS = {
    "L": ("L", int),
    "Np": ("N_p", int),
    "t": ("t", float),
    "tprime": ("t_prime", float),
    "V": ("V", float),
    "Vprime": ("V_prime", float),
    "cut_hopping": ("cut_hopping", int),
}


def params_from_file(path: str | Path) -> LatticeParams:
    """Read LatticeParams from a config file.

    Accepts either a JSON object or plain ``key = value`` lines; keys are
    L, Np, t, tprime, V, Vprime and the optional cut_hopping site count.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise LatticeError(f"malformed config line: {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            raw[key] = value
    kwargs = {}
    for key, value in raw.items():
        if key not in _CONFIG_KEYS:
            raise LatticeError(f"unknown config key: {key!r}")
        field, cast = _CONFIG_KEYS[key]
        kwargs[field] = cast(value)
    return LatticeParams(**kwargs)


@dataclass(frozen=True)
class FockBasis:
    """Ordered fixed-N_p occupation basis over L sites."""

    L: int
    N_p: int
    configs: np.ndarray  # ascending bit-patterns, shape (dim,)
    occupations: np.ndarray  # 0/1 per (config, site), shape (dim, L)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def index_of(self, pattern: int) -> int:
        i = int(np.searchsorted(self.configs, pattern))
        if i >= self.dim or self.configs[i] != pattern:
            raise LatticeError(f"pattern {pattern:#x} not in basis")
        return i


def enumerate_basis(params: LatticeParams) -> FockBasis:
    """All C(L, N_p) occupation patterns in ascending integer order."""
    L, N_p = params.L, params.N_p
    patterns = sorted(
        sum(1 << s for s in sites) for sites in combinations(range(L), N_p)
    )
    configs = np.array(patterns, dtype=np.int64)
    occ = (configs[:, None] >> np.arange(L)[None, :]) & 1
    return FockBasis(L=L, N_p=N_p, configs=configs, occupations=occ.astype(np.uint8))


def _check_basis(params: LatticeParams, basis: FockBasis):
    if basis.L != params.L or basis.N_p != params.N_p:
        raise LatticeError(
            f"basis (L={basis.L}, N_p={basis.N_p}) does not match "
            f"params (L={params.L}, N_p={params.N_p})"
        )


def build_hamiltonian(params: LatticeParams, basis: FockBasis) -> np.ndarray:
    """Dense real-symmetric Hamiltonian in the fixed-N_p sector.

    Diagonal entries are the interaction energies; off-diagonal entries are
    -t or -t_prime times the fermionic parity of the sites strictly between
    the hop endpoints.  Hops reaching past site L are dropped (hard wall).
    """
    _check_basis(params, basis)
    occ = basis.occupations.astype(np.float64)
    H = np.zeros((basis.dim, basis.dim))
    diag = params.V * (occ[:, :-1] * occ[:, 1:]).sum(axis=1)
    if basis.L >= 3:
        diag += params.V_prime * (occ[:, :-2] * occ[:, 2:]).sum(axis=1)
    np.fill_diagonal(H, diag)

    cut = params.cut_hopping
    for a, pattern in enumerate(basis.configs):
        pattern = int(pattern)
        for i in range(basis.L):
            if not (pattern >> i) & 1:
                continue
            for dist, amp in ((1, params.t), (2, params.t_prime)):
                j = i + dist
                if j >= basis.L or (pattern >> j) & 1:
                    continue
                if cut is not None and i < cut <= j:
                    continue
                # parity of occupied sites strictly between i and j
                sign = -1.0 if dist == 2 and (pattern >> (i + 1)) & 1 else 1.0
                b = basis.index_of(pattern ^ (1 << i) ^ (1 << j))
                H[a, b] = -amp * sign
                H[b, a] = -amp * sign
    return H


def particle_density(amplitudes: np.ndarray, basis: FockBasis) -> np.ndarray:
    """Per-site occupation expectation <n_i> of a Fock-basis state."""
    amplitudes = np.asarray(amplitudes)
    nrm = np.linalg.norm(amplitudes)
    if abs(nrm - 1.0) > 1e-10:
        raise LatticeError(f"state not normalized: |amps| = {nrm}")
    return np.abs(amplitudes) ** 2 @ basis.occupations


@dataclass(frozen=True)
class RegionPartition:
    """Division of the chain into m contiguous regions of equal width."""

    L: int
    width: int

    def __post_init__(self):
        if self.width < 1 or self.L % self.width != 0:
            raise LatticeError(
                f"region width {self.width} does not evenly divide L={self.L}"
            )

    @property
    def m(self) -> int:
        return self.L // self.width

    def region_of_site(self, site: int) -> int:
        return site // self.width


def region_occupations(basis: FockBasis, partition: RegionPartition) -> np.ndarray:
    """Per-region particle counts for every basis config, shape (dim, m)."""
    if partition.L != basis.L:
        raise LatticeError("partition does not cover the basis lattice")
    occ = basis.occupations
    return occ.reshape(basis.dim, partition.m, partition.width).sum(axis=2)


def macrostate_volume(
    basis: FockBasis, partition: RegionPartition, label: tuple
) -> int:
    """Number of basis configs whose region occupations equal ``label``.

    Equals the product of per-region binomials C(width, n_j).
    """
    label = tuple(int(n) for n in label)
    if len(label) != partition.m or sum(label) != basis.N_p:
        raise LatticeError(f"invalid macrostate label {label}")
    if any(n < 0 or n > partition.width for n in label):
        raise LatticeError(f"invalid macrostate label {label}")
    vol = 1
    for n in label:
        vol *= math.comb(partition.width, n)
    return vol
