"""Measure a quench and score every theorem-backed bound against it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from .dynamics import (
    DEFAULT_PAIR_BUDGET,
    FluctuationData,
    distinguishability_series,
    effective_dimension,
    fluctuation_data,
    sampled_average,
    spectral_projections,
    survival_probability,
    time_average,
    time_average_finite,
    time_average_infinite,
)
from .model import as_density_matrix, operator_norm
from .spectral import SpectralDecomposition, window_concentration

VERIFIED_BOUNDS = (
    "equil1_sum_v",
    "equil1_deff",
    "equil2",
    "finite_short",
    "finite_malabarba",
    "finite_distinguishability",
    "small_rank",
    "random_state_general",
)


@dataclass
class Measurements:
    """Quantities shared by all bounds for one (system, state, observable) triple."""

    fd: FluctuationData
    d: int
    d_E: int
    g: int
    eps_min: float
    d_eff: float
    ipr: float
    purity: float
    normA: float
    n_outcomes: int
    infinite_fluctuation: float
    infinite_distinguishability: float
    pure: bool
    extra: dict = field(default_factory=dict)


def _max_gap(dec: SpectralDecomposition) -> float:
    return float(dec.energies[-1] - dec.energies[0]) if dec.d_E > 1 else 0.0


def measure(dec: SpectralDecomposition, state, A, gap_tolerance: float | None = None,
            infinite_T: float = 1e4, infinite_samples: int = 100_000) -> Measurements:
    state = np.asarray(state)
    fd = fluctuation_data(dec, state, A, gap_tolerance)
    cat = fd.catalog
    d_eff, ipr = effective_dimension(state, dec)
    rho = as_density_matrix(state)
    purity = float(np.real(np.vdot(rho, rho)))
    projections = [P for _, P in spectral_projections(A)]
    if len(projections) > 1 and dec.d_E > 1:
        D_inf, _ = sampled_average(lambda t: distinguishability_series(dec, state, projections, t),
                                   infinite_T, infinite_samples)
    else:
        D_inf = 0.0
    return Measurements(
        fd=fd, d=dec.d_T, d_E=dec.d_E, g=max(cat.g, 1), eps_min=cat.eps_min, d_eff=d_eff, ipr=ipr,
        purity=purity, normA=operator_norm(A), n_outcomes=len(projections),
        infinite_fluctuation=time_average_infinite(fd), infinite_distinguishability=D_inf,
        pure=state.ndim == 1, extra={"projections": projections},
    )


def verify(dec: SpectralDecomposition, state, A, T_values, gap_tolerance: float | None = None,
           pair_budget: int = DEFAULT_PAIR_BUDGET, rhs_scale: float = 1.0,
           infinite_T: float = 1e4, infinite_samples: int = 100_000,
           measurements: Measurements | None = None) -> tuple[list[B.BoundReport], Measurements]:
    """One report per bound per ``T``; ``T``-independent bounds repeat on every row.

    ``rhs_scale`` multiplies every right-hand side and exists only to exercise
    the failure path.
    """
    m = measurements or measure(dec, state, A, gap_tolerance, infinite_T, infinite_samples)
    state = np.asarray(state)
    fd = m.fd
    projections = m.extra["projections"]
    bandwidth = 2.0 * _max_gap(dec)
    common = {"g": m.g, "d_eff": m.d_eff, "normA": m.normA, "d_E": m.d_E, "eps_min": m.eps_min}
    rhs1, rhs2 = B.bound_infinite_fluctuation(m.g, fd.sum_v_sq, m.normA, m.d_eff)
    reports: list[B.BoundReport] = []

    def add(name, lhs, rhs, inputs):
        reports.append(B.compare(name, lhs, rhs * rhs_scale, inputs))

    for T in T_values:
        T = float(T)
        if not T > 0:
            raise ValueError(f"averaging window must be positive, got {T}")
        fin = time_average_finite(fd, T, pair_budget)
        if len(projections) > 1 and dec.d_E > 1:
            D_T = time_average(lambda t: distinguishability_series(dec, state, projections, t), T, bandwidth)
        else:
            D_T = time_average(lambda t: np.zeros(np.size(t)), T, 1.0)
        base = dict(common, T=T)

        add("equil1_sum_v", m.infinite_fluctuation, rhs1, dict(base, sum_v_sq=fd.sum_v_sq))
        add("equil1_deff", m.infinite_fluctuation, rhs2, base)
        add("equil2", m.infinite_distinguishability,
            B.bound_infinite_distinguishability(m.g, m.n_outcomes, m.d_eff),
            dict(base, N_outcomes=m.n_outcomes, averaging_T=infinite_T))

        eps = m.eps_min if math.isfinite(m.eps_min) and m.eps_min > 0 else math.inf
        short = B.bound_finite_time_short(m.g, m.normA, m.d_eff, max(m.d_E, 1), eps, T)
        add("finite_short", fin.value, short, dict(base, quadrature_error=fin.error_estimate))
        malabarba = B.bound_finite_time_malabarba(m.g, m.normA, m.d_eff, eps, T)
        add("finite_malabarba", fin.value, malabarba, dict(base, quadrature_error=fin.error_estimate))
        fdist = B.bound_finite_distinguishability(m.g, m.n_outcomes, m.d_eff, eps, T)
        add("finite_distinguishability", D_T.value, fdist,
            dict(base, N_outcomes=m.n_outcomes, quadrature_error=D_T.error_estimate))

        if m.pure:
            p = dec.populations(state)
            eta = window_concentration(dec.energies, p, 1.0 / T)
            ref = float(np.sum(p**2))
            D_P = time_average(lambda t: np.abs(survival_probability(dec, state, t) - ref), T, bandwidth)
            add("small_rank", D_P.value, B.bound_small_rank(1, eta),
                dict(base, K=1, eta=eta, quadrature_error=D_P.error_estimate))

        xi = window_concentration(fd.gaps, fd.gap_weights, 1.0 / T) if fd.Q > 0 else 0.0
        add("random_state_general", fin.value, B.bound_random_state_general(m.normA, m.d, min(m.purity, 1.0), xi),
            dict(base, d=m.d, purity=m.purity, xi=xi))
    return reports, m
