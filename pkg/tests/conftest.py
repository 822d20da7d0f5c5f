from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from threadpoolctl import threadpool_limits

from equilibration.model import ObservableSpec, SpinChainSpec, StateSpec, XXZNNN, build_hamiltonian, \
    build_observable, build_state
from equilibration.spectral import diagonalize

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True, scope="session")
def _single_thread_blas():
    with threadpool_limits(1):
        yield


class Quench:
    """XXZ-NNN chain in the Sz = 0 sector, CDW initial state, sigma_z in the middle."""

    def __init__(self, N: int, boundary: str = "open"):
        self.chain = SpinChainSpec(N, XXZNNN(1.0, 1.0, 0.5), boundary=boundary, sector=0)
        self.H = build_hamiltonian(self.chain)
        self.dec = diagonalize(self.H)
        self.psi = build_state(StateSpec("cdw"), self.chain)
        self.A = build_observable(ObservableSpec("site_pauli", site=N // 2, axis="Z"), self.chain)


_QUENCHES: dict = {}


def quench(N: int) -> Quench:
    if N not in _QUENCHES:
        _QUENCHES[N] = Quench(N)
    return _QUENCHES[N]


@pytest.fixture(scope="session")
def xxz6():
    return quench(6)


@pytest.fixture(scope="session")
def xxz8():
    return quench(8)


@pytest.fixture(scope="session")
def xxz10():
    return quench(10)


@pytest.fixture
def two_level():
    """H = sigma_z, psi = |+>, A = sigma_x."""
    H = np.diag([1.0, -1.0])
    psi = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    return H, psi, A
