"""Bipartite entanglement entropy, observational entropy over ordered
coarse-grainings, and the closed-form bounds and predictions that go with
them.

The position-then-energy observational entropy has a dedicated table-backed
evaluator (``SpatialEnergyTable``) used by the optimizers and sweep drivers;
the generic engine (``observational_entropy``) accepts arbitrary ordered
coarse-grainings and doubles as its cross-check oracle.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .lattice import FockBasis, RegionPartition, region_occupations
from .spectral import Spectrum

PROB_CUTOFF = 1e-14  # terms with p below this contribute 0 (0 ln 0 := 0)
EIG_CUTOFF = 1e-14


class EntropyError(RuntimeError):
    pass


def _entropy_of_terms(probs: np.ndarray, volumes: np.ndarray) -> float:
    mask = probs > PROB_CUTOFF
    if np.any(volumes[mask] <= 0.0):
        raise EntropyError("macrostate with nonzero probability but zero volume")
    p, v = probs[mask], volumes[mask]
    return float(-(p * np.log(p / v)).sum())


# ---------------------------------------------------------------------------
# bipartite entanglement
# ---------------------------------------------------------------------------

class BipartitionTable:
    """Index tables for tracing out everything but a contiguous block.

    With the canonical operator ordering and a contiguous block, every basis
    config factorizes into a block string times a remainder string with a
    sign that depends only on (block filling, remainder config), so it
    cancels inside the reduced density matrix and the coefficient-matrix
    reshape needs no sign bookkeeping.
    """

    def __init__(self, basis: FockBasis, width: int, offset: int = 0):
        if not 0 < width < basis.L:
            raise EntropyError(f"block width must be in (0, L), got {width}")
        if offset < 0 or offset + width > basis.L:
            raise EntropyError("block does not fit on the lattice")
        self.basis = basis
        self.width = width
        self.offset = offset
        L, N_p = basis.L, basis.N_p
        n_max = min(N_p, width)

        # subsystem Fock space: all block patterns with <= n_max particles
        sub_patterns = [
            p for p in range(1 << width) if p.bit_count() <= n_max
        ]
        self.sub_patterns = np.array(sub_patterns, dtype=np.int64)
        self.sub_dim = len(sub_patterns)
        sub_index = {p: i for i, p in enumerate(sub_patterns)}

        block_mask = (1 << width) - 1
        low_mask = (1 << offset) - 1
        a_rank: dict[int, dict[int, int]] = {}
        b_rank: dict[int, dict[int, int]] = {}
        split = np.empty((basis.dim, 3), dtype=np.int64)  # n_A, a, b per config
        for c, pattern in enumerate(basis.configs):
            pattern = int(pattern)
            a = (pattern >> offset) & block_mask
            b = (pattern & low_mask) | ((pattern >> (offset + width)) << offset)
            n = a.bit_count()
            split[c] = (n, a, b)
            a_rank.setdefault(n, {}).setdefault(a, 0)
            b_rank.setdefault(n, {}).setdefault(b, 0)

        # sectors: n_A -> (config order for row-major reshape, block patterns)
        self.sectors: list[tuple[int, np.ndarray, np.ndarray, int, int]] = []
        for n in sorted(a_rank):
            a_pats = np.array(sorted(a_rank[n]), dtype=np.int64)
            b_pats = sorted(b_rank[n])
            rows, cols = len(a_pats), len(b_pats)
            ar = {p: i for i, p in enumerate(a_pats)}
            br = {p: i for i, p in enumerate(b_pats)}
            order = np.empty(rows * cols, dtype=np.int64)
            in_sector = np.nonzero(split[:, 0] == n)[0]
            for c in in_sector:
                _, a, b = split[c]
                order[ar[int(a)] * cols + br[int(b)]] = c
            sub_rows = np.array([sub_index[int(p)] for p in a_pats], dtype=np.int64)
            self.sectors.append((n, order, sub_rows, rows, cols))

    def reduced_density_matrix(self, fock_amps: np.ndarray) -> np.ndarray:
        """Reduced density matrix of the block over its own Fock space."""
        fock_amps = np.asarray(fock_amps, dtype=np.complex128)
        nrm = np.linalg.norm(fock_amps)
        if abs(nrm - 1.0) > 1e-9:
            raise EntropyError(f"state not normalized: |amps| = {nrm}")
        rho = np.zeros((self.sub_dim, self.sub_dim), dtype=np.complex128)
        for _, order, sub_rows, rows, cols in self.sectors:
            C = fock_amps[order].reshape(rows, cols)
            rho[np.ix_(sub_rows, sub_rows)] = C @ C.conj().T
        return rho

    def schmidt_eigenvalues(self, fock_amps: np.ndarray) -> np.ndarray:
        """Nonzero-sector eigenvalues of the reduced state, unsorted."""
        fock_amps = np.asarray(fock_amps, dtype=np.complex128)
        out = []
        for _, order, _, rows, cols in self.sectors:
            C = fock_amps[order].reshape(rows, cols)
            if min(rows, cols) == 1:
                out.append(np.array([(np.abs(C) ** 2).sum()]))
            else:
                G = C @ C.conj().T if rows <= cols else C.conj().T @ C
                out.append(np.linalg.eigvalsh(G))
        return np.concatenate(out)

    def entropy_of(self, fock_amps: np.ndarray) -> float:
        total = 0.0
        for _, order, _, rows, cols in self.sectors:
            C = fock_amps[order].reshape(rows, cols)
            if min(rows, cols) == 1:
                lam = np.array([(np.abs(C) ** 2).sum()])
            else:
                G = C @ C.conj().T if rows <= cols else C.conj().T @ C
                lam = np.linalg.eigvalsh(G)
            lam = lam[lam > EIG_CUTOFF]
            total -= (lam * np.log(lam)).sum()
        return float(total)

    def entropies(self, fock_batch: np.ndarray) -> np.ndarray:
        """Entanglement entropy for each row of a (T, dim) batch."""
        fock_batch = np.asarray(fock_batch, dtype=np.complex128)
        T = fock_batch.shape[0]
        total = np.zeros(T)
        for _, order, _, rows, cols in self.sectors:
            C = fock_batch[:, order].reshape(T, rows, cols)
            if min(rows, cols) == 1:
                lam = (np.abs(C) ** 2).sum(axis=(1, 2))[:, None]
            else:
                if rows <= cols:
                    G = C @ C.conj().transpose(0, 2, 1)
                else:
                    G = C.conj().transpose(0, 2, 1) @ C
                lam = np.linalg.eigvalsh(G)
            lam = np.where(lam > EIG_CUTOFF, lam, 1.0)
            total -= (np.log(lam) * lam).sum(axis=1)
        return total


def vn_entropy(eigenvalues: np.ndarray) -> float:
    """-sum lam ln lam over eigenvalues above the cutoff."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.min(initial=0.0) < -1e-10:
        raise EntropyError(f"negative eigenvalue {lam.min()} in a density matrix")
    lam = lam[lam > EIG_CUTOFF]
    return float(-(lam * np.log(lam)).sum())


def reduced_density_matrix(
    fock_amps: np.ndarray, basis: FockBasis, width: int, offset: int = 0
) -> np.ndarray:
    return BipartitionTable(basis, width, offset).reduced_density_matrix(fock_amps)


def entanglement_entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy of a reduced density matrix, in nats."""
    return vn_entropy(np.linalg.eigvalsh(rho))


# ---------------------------------------------------------------------------
# coarse-grainings and the generic observational-entropy engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoarseGraining:
    """A partition of a basis into labeled macrostates.

    ``domain`` names the basis the member indices refer to ("fock" or
    "energy"); the member sets must be disjoint and cover every index.
    """

    domain: str
    macrostates: tuple

    def __post_init__(self):
        if self.domain not in ("fock", "energy"):
            raise EntropyError(f"unknown coarse-graining domain {self.domain!r}")
        seen = np.concatenate([m for _, m in self.macrostates])
        if len(np.unique(seen)) != len(seen):
            raise EntropyError("macrostate member sets overlap")
        if not np.array_equal(np.sort(seen), np.arange(len(seen))):
            raise EntropyError("macrostates do not cover the basis")

    @property
    def dim(self) -> int:
        return sum(len(m) for _, m in self.macrostates)

    def volumes(self) -> np.ndarray:
        return np.array([len(m) for _, m in self.macrostates], dtype=np.float64)


def identity_coarse_graining(dim: int, domain: str = "fock") -> CoarseGraining:
    return CoarseGraining(domain, (("all", np.arange(dim)),))


def fine_coarse_graining(dim: int, domain: str = "fock") -> CoarseGraining:
    states = tuple((i, np.array([i])) for i in range(dim))
    return CoarseGraining(domain, states)


def position_coarse_graining(
    basis: FockBasis, partition: RegionPartition
) -> CoarseGraining:
    """Macrostates labeled by the per-region particle-count tuple."""
    counts = region_occupations(basis, partition)
    labels, inverse = np.unique(counts, axis=0, return_inverse=True)
    states = tuple(
        (tuple(int(n) for n in labels[i]), np.nonzero(inverse == i)[0])
        for i in range(len(labels))
    )
    return CoarseGraining("fock", states)


def energy_groups(spec: Spectrum, eps_deg: float | None = None) -> np.ndarray:
    """Start index of each (near-)degenerate eigenvalue group."""
    E = spec.energies
    if eps_deg is None:
        eps_deg = 1e-9 * float(np.abs(E).max(initial=0.0))
    gaps = np.diff(E)
    starts = np.concatenate([[0], np.nonzero(gaps > eps_deg)[0] + 1])
    return starts


def energy_coarse_graining(
    spec: Spectrum, eps_deg: float | None = None
) -> CoarseGraining:
    """Eigenvalue macrostates; near-degenerate levels share one projector."""
    starts = energy_groups(spec, eps_deg)
    bounds = np.concatenate([starts, [spec.dim]])
    states = tuple(
        (g, np.arange(bounds[g], bounds[g + 1])) for g in range(len(starts))
    )
    return CoarseGraining("energy", states)


@dataclass(frozen=True)
class EntropyBreakdown:
    """Observational entropy with its per-macrostate probabilities and
    Hilbert-space volumes."""

    total: float
    labels: tuple
    probs: np.ndarray
    volumes: np.ndarray

    @property
    def terms(self) -> list:
        return list(zip(self.labels, self.probs, self.volumes))

    def to_json(self) -> str:
        def _plain(x):
            if isinstance(x, tuple):
                return [_plain(v) for v in x]
            if isinstance(x, (np.integer, int)):
                return int(x)
            return x

        payload = {
            "total": self.total,
            "terms": [
                {"label": _plain(label), "p": float(p), "V": float(v)}
                for label, p, v in self.terms
            ],
        }
        return json.dumps(payload, sort_keys=True)


def _apply_projector(
    vec: np.ndarray, domain: str, cg: CoarseGraining, members: np.ndarray,
    eigvecs: np.ndarray | None,
) -> np.ndarray:
    """Project a vector (or the columns of a matrix) onto one macrostate.

    ``domain`` is the representation the vector lives in; a mismatch with
    the coarse-graining's domain is resolved through the eigenvector matrix.
    """
    if cg.domain == domain:
        out = np.zeros_like(vec)
        out[members] = vec[members]
        return out
    if eigvecs is None:
        raise EntropyError(
            "coarse-graining domain differs from the state domain; "
            "an eigenvector matrix is required"
        )
    if domain == "fock":  # energy-domain projector on a fock vector
        Vg = eigvecs[:, members]
        return Vg @ (Vg.T @ vec)
    # fock-domain projector on an energy vector
    fock = eigvecs @ vec
    out = np.zeros_like(fock)
    out[members] = fock[members]
    return eigvecs.T @ out


def _volume_tree(
    cgs, X: np.ndarray, domain: str, eigvecs, suffix: tuple, out: dict
):
    # Volumes apply the projector chain to identity columns in reverse
    # coarse-graining order; the Frobenius norm of the result is the volume.
    if not cgs:
        out[suffix] = float((np.abs(X) ** 2).sum())
        return
    cg = cgs[-1]
    for label, members in cg.macrostates:
        _volume_tree(
            cgs[:-1], _apply_projector(X, domain, cg, members, eigvecs),
            domain, eigvecs, (label,) + suffix, out,
        )


def _prob_tree_pure(cgs, vec, domain, eigvecs, prefix: tuple, out: dict):
    if not cgs:
        out[prefix] = float((np.abs(vec) ** 2).sum())
        return
    cg = cgs[0]
    for label, members in cg.macrostates:
        _prob_tree_pure(
            cgs[1:], _apply_projector(vec, domain, cg, members, eigvecs),
            domain, eigvecs, prefix + (label,), out,
        )


def _prob_tree_mixed(cgs, rho, domain, eigvecs, prefix: tuple, out: dict):
    if not cgs:
        out[prefix] = float(np.trace(rho).real)
        return
    cg = cgs[0]
    for label, members in cg.macrostates:
        half = _apply_projector(rho, domain, cg, members, eigvecs)
        proj = _apply_projector(half.conj().T, domain, cg, members, eigvecs)
        _prob_tree_mixed(
            cgs[1:], proj.conj().T, domain, eigvecs, prefix + (label,), out
        )


def observational_entropy(
    state: np.ndarray,
    cgs,
    domain: str = "fock",
    eigvecs: np.ndarray | None = None,
) -> EntropyBreakdown:
    """Observational entropy -sum p ln(p/V) for ordered coarse-grainings.

    ``state`` is a normalized pure-state vector or a density matrix, given
    in ``domain``; probabilities apply the coarse-grainings in order, and
    volumes use the matching ordered-projection trace.  Macrostates with
    zero volume and zero probability are omitted from the breakdown.
    """
    cgs = list(cgs)
    if not cgs:
        raise EntropyError("at least one coarse-graining is required")
    state = np.asarray(state, dtype=np.complex128)
    dim = state.shape[0]
    for cg in cgs:
        if cg.dim != dim:
            raise EntropyError(f"coarse-graining dim {cg.dim} != state dim {dim}")

    probs: dict = {}
    if state.ndim == 1:
        if abs(np.linalg.norm(state) - 1.0) > 1e-9:
            raise EntropyError("state not normalized")
        _prob_tree_pure(cgs, state, domain, eigvecs, (), probs)
    else:
        _prob_tree_mixed(cgs, state, domain, eigvecs, (), probs)

    vols: dict = {}
    eye = np.eye(dim, dtype=np.complex128)
    _volume_tree(cgs, eye, domain, eigvecs, (), vols)

    labels, p_list, v_list = [], [], []
    for label in vols:
        p, v = probs[label], vols[label]
        if v <= 1e-12 and p <= PROB_CUTOFF:
            continue
        labels.append(label)
        p_list.append(p)
        v_list.append(v)
    p_arr = np.array(p_list)
    v_arr = np.array(v_list)
    return EntropyBreakdown(
        total=_entropy_of_terms(p_arr, v_arr),
        labels=tuple(labels),
        probs=p_arr,
        volumes=v_arr,
    )


# ---------------------------------------------------------------------------
# position-then-energy observational entropy, table-backed
# ---------------------------------------------------------------------------

class SpatialEnergyTable:
    """Precomputed projector data for the observational entropy with
    region-occupation coarse-graining applied before total-energy
    coarse-graining.

    The probability of (region label x, energy group g) is the weight of
    the state projected onto the label-x configs and re-expressed in the
    eigenbasis; the volume table holds the matching projection traces.
    """

    def __init__(
        self,
        spec: Spectrum,
        basis: FockBasis,
        partition: RegionPartition,
        eps_deg: float | None = None,
    ):
        if spec.dim != basis.dim:
            raise EntropyError("spectrum and basis dimensions differ")
        counts = region_occupations(basis, partition)
        label_rows, inverse = np.unique(counts, axis=0, return_inverse=True)
        self.labels = tuple(tuple(int(n) for n in row) for row in label_rows)
        perm = np.argsort(inverse, kind="stable")
        self.perm = perm
        sizes = np.bincount(inverse, minlength=len(self.labels))
        self.label_starts = np.concatenate([[0], np.cumsum(sizes)])
        self.group_starts = energy_groups(spec, eps_deg)
        self.n_groups = len(self.group_starts)
        self.group_energies = np.array(
            [spec.energies[s] for s in self.group_starts]
        )
        self.Vp = np.ascontiguousarray(spec.eigenvectors[perm, :])
        # complex copy: real @ complex products would otherwise promote the
        # matrix on every call
        self._Vpc = self.Vp.astype(np.complex128)
        vol = np.empty((len(self.labels), self.n_groups))
        for x in range(len(self.labels)):
            s, e = self.label_starts[x], self.label_starts[x + 1]
            per_level = (self.Vp[s:e, :] ** 2).sum(axis=0)
            vol[x] = np.add.reduceat(per_level, self.group_starts)
        self.volume_table = vol
        self._log_vol = np.where(vol > 0, np.log(np.where(vol > 0, vol, 1.0)), 0.0)

    @property
    def dim(self) -> int:
        return self.Vp.shape[0]

    def prob_table(self, energy_amps: np.ndarray) -> np.ndarray:
        """p(x, g) for one state, shape (labels, groups)."""
        fock_perm = self._Vpc @ energy_amps
        # eigenbasis components of the state projected onto each label,
        # via one segment sum of the weighted eigenvector rows
        comp = np.add.reduceat(
            self._Vpc * fock_perm[:, None], self.label_starts[:-1], axis=0
        )
        return np.add.reduceat(
            comp.real**2 + comp.imag**2, self.group_starts, axis=1
        )

    def total(self, energy_amps: np.ndarray) -> float:
        p = self.prob_table(energy_amps)
        mask = p > PROB_CUTOFF
        if np.any(self.volume_table[mask] <= 0.0):
            raise EntropyError("macrostate with nonzero probability but zero volume")
        pm = p[mask]
        return float(-(pm * (np.log(pm) - self._log_vol[mask])).sum())

    def totals(self, energy_batch: np.ndarray) -> np.ndarray:
        """Entropy for each row of a (T, dim) batch of eigenbasis states."""
        energy_batch = np.asarray(energy_batch, dtype=np.complex128)
        return self.totals_from_fock_perm(energy_batch @ self._Vpc.T)

    def totals_from_fock(self, fock_batch: np.ndarray) -> np.ndarray:
        """Same as ``totals`` but starting from occupation-basis rows."""
        return self.totals_from_fock_perm(fock_batch[:, self.perm])

    def totals_from_fock_perm(self, fock_perm: np.ndarray) -> np.ndarray:
        T = fock_perm.shape[0]
        out = np.zeros(T)
        log_v = np.log(np.where(self.volume_table > 0, self.volume_table, 1.0))
        for x in range(len(self.labels)):
            s, e = self.label_starts[x], self.label_starts[x + 1]
            comp = fock_perm[:, s:e] @ self._Vpc[s:e, :]
            p = np.add.reduceat(np.abs(comp) ** 2, self.group_starts, axis=1)
            safe = np.where(p > PROB_CUTOFF, p, 1.0)
            contrib = safe * (np.log(safe) - log_v[x])
            contrib[p <= PROB_CUTOFF] = 0.0
            out -= contrib.sum(axis=1)
        return out

    def breakdown(self, energy_amps: np.ndarray) -> EntropyBreakdown:
        p = self.prob_table(energy_amps)
        keep = self.volume_table.ravel() > 0
        if np.any((p.ravel() > PROB_CUTOFF) & ~keep):
            raise EntropyError(
                "macrostate with nonzero probability but zero volume")
        labels = tuple(
            (self.labels[x], g)
            for x in range(len(self.labels))
            for g in range(self.n_groups)
        )
        labels = tuple(l for l, k in zip(labels, keep) if k)
        probs = p.ravel()[keep]
        vols = self.volume_table.ravel()[keep]
        return EntropyBreakdown(
            total=_entropy_of_terms(probs, vols),
            labels=labels,
            probs=probs,
            volumes=vols,
        )


def spatial_energy_entropy(
    state_amps: np.ndarray,
    spec: Spectrum,
    basis: FockBasis,
    partition: RegionPartition,
    eps_deg: float | None = None,
) -> EntropyBreakdown:
    """Observational entropy with position-first, energy-second
    coarse-graining, for a pure state given in the eigenbasis."""
    table = SpatialEnergyTable(spec, basis, partition, eps_deg)
    return table.breakdown(np.asarray(state_amps, dtype=np.complex128))


# ---------------------------------------------------------------------------
# closed-form bounds and predictions
# ---------------------------------------------------------------------------

def _sector_weights(L: int, width: int, N_p: int) -> np.ndarray:
    return np.array(
        [
            min(math.comb(width, n), math.comb(L - width, N_p - n))
            for n in range(N_p + 1)
        ],
        dtype=np.float64,
    )


def max_entanglement_bound(L: int, width: int, N_p: int) -> float:
    """Upper bound on block entanglement entropy at fixed particle number."""
    if not 0 < width < L:
        raise EntropyError("block width must be in (0, L)")
    return float(np.log(_sector_weights(L, width, N_p).sum()))


def mean_occupation_at_max_entanglement(L: int, width: int, N_p: int) -> float:
    """Expected block filling of a maximally entangled state."""
    d = _sector_weights(L, width, N_p)
    n = np.arange(N_p + 1)
    return float((d * n).sum() / d.sum())


def localized_entropy_prediction(
    s_th_full: float, p_max: float, L: int, width: int, N_p: int
) -> tuple[float, float]:
    """Predicted observational entropy of a maximally localized state.

    Returns (prediction, lower_bound): the prediction subtracts the
    localization information from the full thermal entropy, and the bound
    is (1 - p_max) times that entropy.  The prediction is a large-system
    approximation; a warning flags parameter ranges where it undercuts the
    bound.
    """
    if not 0.0 <= p_max <= 1.0:
        raise EntropyError(f"p_max must lie in [0, 1], got {p_max}")

    def _xlnx(x: float) -> float:
        return x * math.log(x) if x > 0 else 0.0

    prediction = (
        s_th_full
        - p_max * N_p * math.log(L / width)
        - (1.0 - p_max) * N_p * math.log(L / (L - width))
        - _xlnx(p_max)
        - _xlnx(1.0 - p_max)
    )
    bound = (1.0 - p_max) * s_th_full
    if prediction < bound - 1e-12:
        warnings.warn(
            "localized-entropy prediction fell below its lower bound; "
            "the correction terms are outside their range of validity"
        )
    return prediction, bound


def volume_law_prediction(s_th_full: float, width: int, L: int) -> float:
    """High-temperature average entanglement: the block's share of the
    full thermal entropy."""
    if width > L:
        raise EntropyError("block cannot exceed the lattice")
    return (width / L) * s_th_full
