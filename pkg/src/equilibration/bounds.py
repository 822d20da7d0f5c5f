"""Closed-form evaluators for rigorous and heuristic equilibration bounds.

Every function here is a pure function of scalar inputs.  Measurement code
lives in :mod:`equilibration.dynamics` and :mod:`equilibration.verification`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

SMALL_RANK_CONSTANT = 7.0
REPORT_RTOL = 1e-9

# bounds proven for every valid input; a violation is a bug
THEOREM_BOUNDS = frozenset({
    "equil1_sum_v",
    "equil1_deff",
    "equil2",
    "finite_short",
    "finite_malabarba",
    "finite_distinguishability",
    "small_rank",
    "random_observable",
    "eigen_observable",
    "mixed_bath",
    "random_state_general",
})
# approximate statements checked with explicit slack
HEURISTIC_BOUNDS = frozenset({"goldstein", "brandao", "reimann_F", "microcanonical_bath"})


class BoundViolation(AssertionError):
    def __init__(self, report: "BoundReport"):
        self.report = report
        super().__init__(f"{report.bound_name} violated: lhs={report.lhs_measured!r} > "
                         f"rhs={report.rhs_bound!r}; inputs={report.inputs!r}")


@dataclass
class BoundReport:
    bound_name: str
    lhs_measured: float
    rhs_bound: float
    inputs: dict = field(default_factory=dict)
    satisfied: bool = True
    slack: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def compare(bound_name: str, lhs_measured: float, rhs: float, inputs: dict | None = None) -> BoundReport:
    """Package a measured left-hand side against a bound value.

    ``satisfied`` uses ``lhs <= rhs * (1 + 1e-9)``; NaN anywhere is rejected.
    """
    inputs = dict(inputs or {})
    values = [lhs_measured, rhs, *[v for v in inputs.values() if isinstance(v, (int, float))]]
    if any(isinstance(v, float) and math.isnan(v) for v in values):
        raise ValueError(f"NaN in bound report {bound_name!r}: lhs={lhs_measured}, rhs={rhs}, inputs={inputs}")
    lhs, rhs = float(lhs_measured), float(rhs)
    satisfied = lhs <= rhs * (1.0 + REPORT_RTOL) if rhs >= 0 else lhs <= rhs * (1.0 - REPORT_RTOL)
    return BoundReport(bound_name, lhs, rhs, inputs, bool(satisfied), rhs - lhs)


def check_reports(reports, names=THEOREM_BOUNDS) -> None:
    """Raise :class:`BoundViolation` on the first unsatisfied report among ``names``."""
    for report in reports:
        if report.bound_name in names and not report.satisfied:
            raise BoundViolation(report)


# ---------------------------------------------------------------------------
# general (time-averaged) bounds


def bound_infinite_fluctuation(g: int, sum_v_sq: float, normA: float, d_eff: float) -> tuple[float, float]:
    """``(g sum|v|^2, g ||A||^2 / d_eff)``."""
    return g * sum_v_sq, g * normA**2 / d_eff


def bound_infinite_distinguishability(g: int, n_outcomes: int, d_eff: float) -> float:
    return 0.5 * math.sqrt(g * (n_outcomes - 1) / d_eff)


def bound_finite_time_short(g: int, normA: float, d_eff: float, d_E: int, eps_min: float, T: float) -> float:
    if math.isinf(T):
        return g * normA**2 / d_eff
    return g * normA**2 / d_eff * (1.0 + 8.0 * math.log2(d_E) / (eps_min * T))


def _malabarba_factor(eps_min: float, T: float) -> float:
    return 2.5 * math.pi * (1.5 + (0.0 if math.isinf(T) else 1.0 / (eps_min * T)))


def bound_finite_time_malabarba(g: int, normA: float, d_eff: float, eps_min: float, T: float) -> float:
    return g * normA**2 / d_eff * _malabarba_factor(eps_min, T)


def bound_finite_distinguishability(g: int, n_outcomes: int, d_eff: float, eps_min: float, T: float) -> float:
    return 0.5 * math.sqrt(g * (n_outcomes - 1) / d_eff * _malabarba_factor(eps_min, T))


def bound_small_rank(K: int, eta: float, c: float = SMALL_RANK_CONSTANT) -> float:
    """``c sqrt(K eta)`` for a two-outcome measurement with a rank-``K`` outcome."""
    return c * math.sqrt(K * eta)


def bound_small_rank_envelope(K: int, a: float, delta: float, sigma_E: float, T: float,
                              c: float = SMALL_RANK_CONSTANT) -> float:
    return c * math.sqrt(K * (a / (sigma_E * T) + delta))


# ---------------------------------------------------------------------------
# random observables


def bound_random_observable(n_outcomes: int, d: int) -> float:
    return 0.5 * math.sqrt(n_outcomes / (d + 1))


def bound_eigen_observable(D_proj_measured: float, n_outcomes: int, d: int) -> float:
    return D_proj_measured + 0.5 * math.sqrt(n_outcomes / (d - 1))


def combined_eigen_bound(c: float, a: float, delta: float, sigma_E: float, T: float, n_outcomes: int, d: int) -> float:
    return c * math.sqrt(a / (sigma_E * T) + delta) + 0.5 * math.sqrt(n_outcomes / (d - 1))


class GoldsteinBound(NamedTuple):
    rhs: float
    T_max: float
    within_validity: bool


def bound_goldstein(beta: float, T: float, d: int, d_neq: int) -> GoldsteinBound:
    """``2 pi beta / T`` and the largest ``T`` for which it is claimed."""
    if beta <= 0 or not d >= d_neq >= 1:
        raise ValueError("need beta > 0 and d >= d_neq >= 1")
    T_max = 2 * math.pi * beta * min((d / d_neq) ** 0.25, d ** (1 / 6))
    return GoldsteinBound(2 * math.pi * beta / T, T_max, T <= T_max * (1.0 + 1e-12))


# ---------------------------------------------------------------------------
# random Hamiltonians


def brandao_quantities(energies, multiplicities, t):
    """``(chi, zeta, gamma)`` at time(s) ``t``."""
    E = np.asarray(energies, dtype=float)
    dk = np.asarray(multiplicities, dtype=float)
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * np.multiply.outer(t, E))
    chi = (phase**2) @ dk
    zeta = phase @ dk
    gamma = float(np.sum(dk**2))
    return chi, zeta, gamma


def bound_brandao(chi, zeta, gamma: float, d_S: int, d_B: int) -> tuple[np.ndarray | float, float]:
    """Leading terms of the subsystem-fluctuation bound and the ``1/d_B`` remainder.

    The remainder is an asymptotic order estimate scored with unit constant.
    """
    d = d_S * d_B
    lead = np.abs(chi) ** 2 / (d_S * d**2) + (np.abs(zeta) ** 2 / d**2 - gamma / d**2) ** 2
    return lead, 1.0 / d_B


def reimann_F(energies, t):
    E = np.asarray(energies, dtype=float)
    d = E.size
    if d < 2:
        raise ValueError("need at least two energies")
    t = np.asarray(t, dtype=float)
    s = np.abs(np.exp(1j * np.multiply.outer(t, E)).sum(axis=-1) / d) ** 2
    F = d / (d - 1) * (s - 1.0 / d)
    if np.ndim(F) == 0:
        return float(F)
    F[t == 0] = 1.0
    return F


def reimann_prediction(F, equilibrium_value: float, initial_value: float):
    return equilibrium_value + np.asarray(F) * (initial_value - equilibrium_value)


def reimann_lorentzian(beta: float, t):
    return 1.0 / (1.0 + (np.asarray(t, dtype=float) / beta) ** 2)


# ---------------------------------------------------------------------------
# random / mixed initial states


def bound_mixed_bath(normA: float, d_S: int, a: float, delta: float, sigma_G: float, T: float) -> float:
    return 4 * math.pi * normA**2 * d_S * (a / (sigma_G * T) + delta)


def bound_random_state_general(normA: float, d: int, purity: float, xi: float) -> float:
    if not 0 < purity <= 1 + 1e-12:
        raise ValueError("purity must lie in (0, 1]")
    return 4 * math.pi * normA**2 * d * purity * xi


def bound_microcanonical_bath(normA, d_S, beta, normHS, normHI, K, a, delta, sigma_G, T) -> float:
    boltz = math.exp(beta * normHS + (1 + math.sqrt(d_S)) * K * beta * normHI)
    return 4 * normA**2 * (math.pi * d_S * boltz * (a / (sigma_G * T) + delta) + 18.0 / K**2)


@dataclass(frozen=True)
class OptimizedK:
    K: float
    rhs: float
    converged: bool


def optimize_K(normA, d_S, beta, normHS, normHI, a, delta, sigma_G, T,
               log_bounds: tuple[float, float] = (-8.0, 12.0)) -> OptimizedK:
    """Minimize the microcanonical-bath bound over ``K > 0``."""
    def rhs(K):
        try:
            return bound_microcanonical_bath(normA, d_S, beta, normHS, normHI, K, a, delta, sigma_G, T)
        except OverflowError:
            return math.inf

    if normHI == 0:
        return OptimizedK(math.inf, 4 * math.pi * normA**2 * d_S * math.exp(beta * normHS)
                          * (a / (sigma_G * T) + delta), True)
    lo, hi = log_bounds
    probe = [v for v in (rhs(math.exp(x)) for x in np.linspace(lo, hi, 21)) if math.isfinite(v)]
    if len(probe) < 2 or max(probe) - min(probe) <= 1e-12 * max(1.0, abs(max(probe))):
        # flat objective: no minimizer to converge to
        return OptimizedK(1.0, rhs(1.0), False)
    res = minimize_scalar(lambda x: rhs(math.exp(x)), bounds=log_bounds, method="bounded",
                          options={"xatol": 1e-10})
    K = math.exp(res.x)
    best = rhs(K)
    at_edge = min(abs(res.x - lo), abs(res.x - hi)) < 1e-6
    if best > rhs(1.0):
        return OptimizedK(1.0, rhs(1.0), False)
    return OptimizedK(K, best, bool(res.success) and not at_edge)


def sigma_G_commutator_bound(rho, H, A, Q: float, normA: float = 1.0, divide_by_norm: bool = False) -> float:
    """Lower bound on the gap spread ``sigma_G^2`` from a double commutator.

    Returns ``|tr([[rho, H], H] A)| / Q``, which never exceeds ``sigma_G^2``.
    With ``divide_by_norm`` an extra ``1/||A||`` factor is applied; that form
    is only guaranteed when ``||A|| >= 1``.
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    c1 = rho @ H - H @ rho
    c2 = c1 @ H - H @ c1
    val = abs(np.trace(c2 @ A)) / Q
    if divide_by_norm:
        val /= normA
    return float(val)
