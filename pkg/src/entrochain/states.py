"""Random pure thermal states, unitary evolution, and eigenphase rotations.

States live in the energy eigenbasis; ``to_fock_basis`` rotates them into
the occupation basis for density and entropy evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .spectral import Spectrum

# Pinned PRNG so every figure is reproducible bit-for-bit from its seed.
RNG_ALGORITHM = "numpy.random.Generator(PCG64)"

TWO_PI = 2.0 * np.pi


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    """Pure state in the energy eigenbasis with sampling metadata."""

    amps: np.ndarray  # complex, unit norm
    beta: float
    kind: str  # "real" | "complex" | "other"
    seed: int | None = None

    def __post_init__(self):
        nrm = np.linalg.norm(self.amps)
        if abs(nrm - 1.0) > 1e-12:
            raise StateError(f"state not normalized: |amps| = {nrm!r}")

    @property
    def dim(self) -> int:
        return len(self.amps)


@dataclass(frozen=True)
class PhaseVector:
    """One phase per eigenstate, in [0, 2pi), with the first entry pinned
    to 0 to fix the unobservable global phase."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.ndim != 1 or len(phi) < 1:
            raise StateError("phase vector must be a nonempty 1-D array")
        phi = np.mod(phi - phi[0], TWO_PI)
        phi[0] = 0.0
        object.__setattr__(self, "phi", phi)

    @classmethod
    def zeros(cls, dim: int) -> "PhaseVector":
        return cls(np.zeros(dim))

    @classmethod
    def from_free(cls, free: np.ndarray) -> "PhaseVector":
        """Build from the dim-1 free components (entry 0 is the gauge)."""
        return cls(np.concatenate([[0.0], np.asarray(free, dtype=np.float64)]))

    @classmethod
    def from_time(cls, energies: np.ndarray, t: float) -> "PhaseVector":
        """Phases equivalent to evolving for time t, modulo global phase."""
        return cls(np.mod((energies - energies[0]) * t, TWO_PI))

    @property
    def free(self) -> np.ndarray:
        return self.phi[1:]


def sample_rpts(spec: Spectrum, beta: float, kind: str, seed: int) -> StateVector:
    """Draw a random pure thermal state.

    Coefficients are (x+iy)/sqrt(2) for the complex kind and (x+y)/sqrt(2)
    for the real kind, with x, y i.i.d. standard normal, then weighted by
    exp(-beta E / 2) and normalized.
    """
    if beta < 0:
        raise StateError("beta must be nonnegative")
    if kind not in ("real", "complex"):
        raise StateError(f"unknown state kind {kind!r}")
    E = spec.energies
    shift = E.min()
    weight = np.exp(-0.5 * beta * (E - shift))
    attempt = seed
    while True:
        rng = np.random.default_rng(attempt)
        x = rng.standard_normal(spec.dim)
        y = rng.standard_normal(spec.dim)
        if kind == "complex":
            c = (x + 1j * y) / np.sqrt(2.0)
        else:
            c = ((x + y) / np.sqrt(2.0)).astype(np.complex128)
        amps = c * weight
        nrm = np.linalg.norm(amps)
        if nrm >= 1e-300:
            break
        attempt += 1  # degenerate draw; probability zero but be safe
    return StateVector(amps=amps / nrm, beta=beta, kind=kind, seed=seed)


def evolve(state: StateVector, spec: Spectrum, t: float) -> StateVector:
    """Unitary evolution: multiply each amplitude by exp(-i E t)."""
    return replace(state, amps=state.amps * np.exp(-1j * spec.energies * t))


def apply_phases(state: StateVector, phases: PhaseVector) -> StateVector:
    """Rotate each amplitude by exp(-i phi_E); magnitudes are untouched."""
    if len(phases.phi) != state.dim:
        raise StateError(
            f"phase vector length {len(phases.phi)} != state dim {state.dim}"
        )
    return replace(state, amps=state.amps * np.exp(-1j * phases.phi))


def to_fock_basis(state: StateVector, spec: Spectrum) -> np.ndarray:
    """Amplitudes in the occupation basis: V @ amps."""
    if spec.dim != state.dim:
        raise StateError(f"spectrum dim {spec.dim} != state dim {state.dim}")
    return spec.eigenvectors @ state.amps


def state_to_json(state: StateVector) -> str:
    payload = {
        "beta": state.beta,
        "kind": state.kind,
        "seed": state.seed,
        "rng": RNG_ALGORITHM,
        "amps": [[float(a.real), float(a.imag)] for a in state.amps],
    }
    return json.dumps(payload, sort_keys=True)


def state_from_json(text: str) -> StateVector:
    payload = json.loads(text)
    amps = np.array([complex(re, im) for re, im in payload["amps"]])
    return StateVector(
        amps=amps, beta=payload["beta"], kind=payload["kind"], seed=payload["seed"]
    )


def save_state(state: StateVector, path: str | Path):
    Path(path).write_text(state_to_json(state))


def load_state(path: str | Path) -> StateVector:
    return state_from_json(Path(path).read_text())
