import numpy as np
import pytest

import entrochain as ec


@pytest.fixture(scope="session")
def chain6():
    """L=6, N_p=2 reference system (dim 15)."""
    params = ec.LatticeParams(L=6, N_p=2)
    basis = ec.enumerate_basis(params)
    H = ec.build_hamiltonian(params, basis)
    spec = ec.diagonalize(H, params)
    return params, basis, H, spec


@pytest.fixture(scope="session")
def chain8():
    """L=8, N_p=2 reference system (dim 28)."""
    params = ec.LatticeParams(L=8, N_p=2)
    basis = ec.enumerate_basis(params)
    H = ec.build_hamiltonian(params, basis)
    spec = ec.diagonalize(H, params)
    return params, basis, H, spec


@pytest.fixture(scope="session")
def chain16():
    """L=16, N_p=2 system used by the paper-scale checks (dim 120)."""
    params = ec.LatticeParams(L=16, N_p=2)
    basis = ec.enumerate_basis(params)
    H = ec.build_hamiltonian(params, basis)
    spec = ec.diagonalize(H, params)
    return params, basis, H, spec


def random_state(dim: int, seed: int, real: bool = False) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    if not real:
        v = v + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
