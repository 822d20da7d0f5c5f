"""Exact-diagonalization toolkit for dephasing, equilibration and its time scales in small quantum systems."""

from __future__ import annotations

from .model import (
    CustomModel,
    Disorder,
    ModelError,
    ObservableSpec,
    PauliTerm,
    SpinChainSpec,
    StateSpec,
    TransverseIsing,
    XXZNNN,
    build_hamiltonian,
    build_observable,
    build_state,
)
from .spectral import (
    GapCatalog,
    SpectralDecomposition,
    diagonalize,
    gap_catalog,
    window_concentration,
)
from .dynamics import (
    evolve_expectation,
    effective_dimension,
    fluctuation_data,
    time_average_finite,
    time_average_infinite,
    cloud_snapshot,
)
from .bounds import BoundReport, BoundViolation, compare
from .ensembles import EnsembleResult, haar_unitary, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "BoundViolation",
    "CustomModel",
    "Disorder",
    "EnsembleResult",
    "GapCatalog",
    "ModelError",
    "ObservableSpec",
    "PauliTerm",
    "SpectralDecomposition",
    "SpinChainSpec",
    "StateSpec",
    "TransverseIsing",
    "XXZNNN",
    "build_hamiltonian",
    "build_observable",
    "build_state",
    "cloud_snapshot",
    "compare",
    "diagonalize",
    "effective_dimension",
    "evolve_expectation",
    "fluctuation_data",
    "gap_catalog",
    "haar_unitary",
    "run_experiment",
    "time_average_finite",
    "time_average_infinite",
    "window_concentration",
    "__version__",
]
