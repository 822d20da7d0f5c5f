"""Seeded random ensembles and Monte-Carlo harnesses for the averaged bounds.

Every trial draws from its own generator seeded by ``(master_seed, index)``,
so trials can run in any order or in parallel.  Reductions use ``math.fsum``
in trial-index order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds as B
from .dynamics import (
    dephase,
    fluctuation_data,
    partial_trace,
    phase_sum,
    time_average_finite,
)
from .model import (
    SpinChainSpec,
    XXZNNN,
    ObservableSpec,
    StateSpec,
    build_hamiltonian,
    build_observable,
    build_state,
    operator_norm,
)
from .spectral import decomposition_from_levels, diagonalize, fit_envelope, window_concentration

SETUP_STREAM = 2**32  # trial index reserved for quantities shared by all trials


class ExperimentError(RuntimeError):
    pass


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def trial_seed(master_seed: int, index: int) -> int:
    """64-bit seed that reproduces trial ``index`` (for replay logs)."""
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
               .view(np.uint64)[0])


# ---------------------------------------------------------------------------
# samplers


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-distributed unitary via QR with the phases of ``diag(R)`` removed."""
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = as_rng(seed)
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    diag = np.diag(R)
    return Q * (diag / np.abs(diag))


def haar_state(d: int, seed=None) -> np.ndarray:
    rng = as_rng(seed)
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def haar_isometry(d: int, k: int, seed=None) -> np.ndarray:
    """``d x k`` matrix whose columns span a Haar-random ``k``-dimensional subspace."""
    rng = as_rng(seed)
    Z = (rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    diag = np.diag(R)
    return Q * (diag / np.abs(diag))


def expand_spectrum(spectrum) -> np.ndarray:
    """Flat eigenvalue list from either values or ``(value, multiplicity)`` pairs."""
    spectrum = list(spectrum)
    if spectrum and isinstance(spectrum[0], (tuple, list)):
        return np.concatenate([np.full(int(m), float(v)) for v, m in spectrum])
    return np.asarray(spectrum, dtype=float)


def random_observable(spectrum, seed=None) -> np.ndarray:
    """``U diag(spectrum) U^dag`` with Haar ``U``."""
    lam = expand_spectrum(spectrum)
    U = haar_unitary(lam.size, seed)
    return (U * lam) @ U.conj().T


def random_eigen_observable(psi0, spectrum, seed=None) -> np.ndarray:
    """Random observable with ``psi0`` as eigenvector of the first listed eigenvalue.

    The remaining eigenvectors are a Haar-random basis of the orthogonal
    complement of ``psi0``.
    """
    lam = expand_spectrum(spectrum)
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    d = lam.size
    if psi0.size != d:
        raise ValueError("state and spectrum dimensions differ")
    rng = as_rng(seed)
    # orthonormal complement of psi0
    M = np.column_stack([psi0, rng.standard_normal((d, d - 1)) + 1j * rng.standard_normal((d, d - 1))])
    Q, _ = np.linalg.qr(M)
    C = Q[:, 1:]
    C = C - np.outer(psi0, psi0.conj() @ C)
    W = C @ haar_unitary(d - 1, rng) if d > 1 else C
    A = lam[0] * np.outer(psi0, psi0.conj()) + (W * lam[1:]) @ W.conj().T
    return 0.5 * (A + A.conj().T)


def random_hamiltonian_fixed_spectrum(energies, seed=None) -> np.ndarray:
    return random_observable(energies, seed)


def permuted_hamiltonian(dec, seed=None) -> np.ndarray:
    """Same eigenvectors as ``dec`` with the eigenvalues permuted uniformly."""
    rng = as_rng(seed)
    E = dec.eigenvalues[rng.permutation(dec.d_T)]
    V = dec.eigenvectors
    H = (V * E) @ V.conj().T
    return 0.5 * (H + H.conj().T)


def exponential_dos_spectrum(beta: float, width: float, d: int, seed=None) -> np.ndarray:
    """``d`` sorted energies drawn from a density ``~ exp(beta E)`` on ``[0, width]``."""
    if beta * width < 5:
        warnings.warn(f"beta * width = {beta * width:.3g} is not >> 1", stacklevel=2)
    u = as_rng(seed).uniform(size=d)
    return np.sort(exponential_dos_quantile(beta, width, u))


def exponential_dos_quantile(beta: float, width: float, u):
    u = np.asarray(u, dtype=float)
    if beta == 0:
        return u * width
    return np.log1p(u * np.expm1(beta * width)) / beta


# ---------------------------------------------------------------------------
# experiment harness


@dataclass
class EnsembleResult:
    quantity: str
    trials: int
    mean: float | np.ndarray
    std_error: float | np.ndarray
    master_seed: int
    trial_seeds: list[int] = field(default_factory=list)
    axis: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def conv(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, dict):
                return {k: conv(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [conv(v) for v in x]
            return x
        return conv({
            "quantity": self.quantity, "trials": self.trials, "mean": self.mean,
            "std_error": self.std_error, "master_seed": self.master_seed,
            "trial_seeds": self.trial_seeds, "axis": self.axis, "extra": self.extra,
        })


def _reduce(samples: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    arr = np.array(samples, dtype=float)
    n = arr.shape[0]
    flat = arr.reshape(n, -1)
    mean = np.array([math.fsum(col) / n for col in flat.T])
    dev = flat - mean
    var = np.array([math.fsum(col) / (n - 1) for col in (dev**2).T]) if n > 1 else np.zeros_like(mean)
    se = np.sqrt(var / n)
    shape = arr.shape[1:]
    return mean.reshape(shape), se.reshape(shape)


def run_trials(func: Callable[[np.random.Generator, int], np.ndarray], trials: int, master_seed: int,
               threads: int = 1) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Run ``func(rng, index)`` for every trial; returns mean, standard error, samples."""
    def one(i):
        out = np.asarray(func(trial_rng(master_seed, i), i), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ExperimentError(f"trial {i} produced NaN (replay seed {trial_seed(master_seed, i)})")
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(one, range(trials)))
    else:
        samples = [one(i) for i in range(trials)]
    mean, se = _reduce(samples)
    return mean, se, samples


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _se_report(name, mean, se, bound_value, margin, extra_inputs=None) -> B.BoundReport:
    inputs = {"bound_value": float(bound_value), "std_error": float(se), "margin_se": margin}
    inputs.update(extra_inputs or {})
    return B.compare(name, float(mean), float(bound_value + margin * se), inputs)


def _worst(reports):
    return min(reports, key=lambda r: r.slack)


def _shared_diagonal_setup(d, rng):
    energies = np.sort(rng.standard_normal(d))
    psi0 = haar_state(d, rng)
    return energies, psi0


def _deviation_series(energies, psi0, times):
    """``rho(t) - omega`` in the energy eigenbasis for a nondegenerate spectrum."""
    rho = np.outer(psi0, psi0.conj())
    np.fill_diagonal(rho, 0.0)
    ph = np.exp(-1j * np.outer(times, energies))
    return ph[:, :, None] * rho[None] * ph.conj()[:, None, :]


def _projector_expectations(W_blocks, drho):
    """``tr(P_lambda drho(t))`` for projectors ``W W^dag``; shape ``(n_lambda, n_t)``."""
    return np.array([np.real(np.einsum("ia,tij,ja->t", W.conj(), drho, W)) for W in W_blocks])


def _exp_random_observable(params, trials, seed, threads, eigen: bool):
    d = int(params.get("d", 64))
    n_out = int(params.get("n_outcomes", 2))
    T = float(params.get("T", 20.0))
    n_times = int(params.get("n_times", 21))
    mult = params.get("multiplicities") or [d // n_out + (1 if i < d % n_out else 0) for i in range(n_out)]
    if sum(mult) != d or len(mult) != n_out:
        raise ExperimentError("multiplicities must have n_outcomes entries summing to d")
    setup = trial_rng(seed, SETUP_STREAM)
    energies, psi0 = _shared_diagonal_setup(d, setup)
    times = np.linspace(0.0, T, n_times)
    drho = _deviation_series(energies, psi0, times)
    bounds_at = np.cumsum([0] + list(mult))
    p = np.abs(psi0) ** 2
    # distinguishability via the initial-state projector
    surv = np.abs(np.exp(-1j * np.outer(times, energies)) @ p) ** 2
    D_proj = np.abs(surv - np.sum(p**2))

    def trial(rng, _):
        if eigen:
            # psi0 sits in the first outcome's eigenspace
            U = np.empty((d, d), dtype=complex)
            U[:, 0] = psi0
            M = np.column_stack([psi0, rng.standard_normal((d, d - 1)) + 1j * rng.standard_normal((d, d - 1))])
            Q, _ = np.linalg.qr(M)
            C = Q[:, 1:] - np.outer(psi0, psi0.conj() @ Q[:, 1:])
            U[:, 1:] = C @ haar_unitary(d - 1, rng)
        else:
            U = haar_unitary(d, rng)
        blocks = [U[:, bounds_at[k]:bounds_at[k + 1]] for k in range(n_out)]
        D = 0.5 * np.sum(np.abs(_projector_expectations(blocks, drho)), axis=0)
        return np.concatenate([D, [np.mean(D)]])

    mean, se, _ = run_trials(trial, trials, seed, threads)
    series, series_se = mean[:-1], se[:-1]
    time_avg, time_avg_se = mean[-1], se[-1]
    reports = []
    if eigen:
        per_t = [
            _se_report("eigen_observable", series[k], series_se[k],
                       B.bound_eigen_observable(D_proj[k], n_out, d), 3, {"t": float(times[k]), "d": d,
                                                                            "N_outcomes": n_out,
                                                                            "D_proj": float(D_proj[k])})
            for k in range(times.size)
        ]
        reports.append(_worst(per_t))
        quantity = "eigen_observable_distinguishability"
    else:
        bound = B.bound_random_observable(n_out, d)
        reports.append(_se_report("random_observable", time_avg, time_avg_se, bound, 3,
                                  {"d": d, "N_outcomes": n_out, "T": T}))
        per_t = [_se_report("random_observable", series[k], series_se[k], bound, 3,
                            {"d": d, "N_outcomes": n_out, "t": float(times[k])}) for k in range(times.size)]
        reports.append(_worst(per_t))
        quantity = "random_observable_distinguishability"
    result = EnsembleResult(quantity, trials, series, series_se, seed,
                            [trial_seed(seed, i) for i in range(trials)],
                            axis={"t": times}, extra={"time_average": time_avg, "time_average_se": time_avg_se,
                                                      "D_proj": D_proj})
    return result, reports


def _exp_goldstein(params, trials, seed, threads):
    beta = float(params.get("beta", 1.0))
    width = float(params.get("width", 10.0))
    d = int(params.get("d", 512))
    d_neq = int(params.get("d_neq", 8))
    dt = float(params.get("dt", 0.01))
    setup = trial_rng(seed, SETUP_STREAM)
    energies = exponential_dos_spectrum(beta, width, d, setup)
    T_max = B.bound_goldstein(beta, 1.0, d, d_neq).T_max
    T_values = np.asarray(params.get("T_values") or np.geomspace(2.0, T_max, 8), dtype=float)
    if d_neq == d:
        result = EnsembleResult("goldstein_nonequilibrium_weight", 0, np.ones(T_values.size),
                                np.zeros(T_values.size), seed, axis={"T": T_values},
                                extra={"vacuous": True, "T_max": T_max,
                                       "note": "d_neq = d: the non-equilibrium subspace is everything"})
        return result, []
    t_end = float(T_values.max())
    n = int(np.ceil(t_end / dt))
    times = (np.arange(n) + 0.5) * dt

    def trial(rng, _):
        Q = haar_isometry(d, d_neq, rng)
        psi0 = Q @ haar_state(d_neq, rng)
        out = np.empty(n)
        for lo in range(0, n, 1024):
            ph = np.exp(-1j * np.outer(times[lo:lo + 1024], energies))
            out[lo:lo + 1024] = np.sum(np.abs((ph * psi0) @ Q.conj()) ** 2, axis=1)
        csum = np.cumsum(out) * dt
        idx = np.clip(np.round(T_values / dt).astype(int) - 1, 0, n - 1)
        return csum[idx] / ((idx + 1) * dt)

    mean, se, _ = run_trials(trial, trials, seed, threads)
    reports = []
    for T, m, s in zip(T_values, mean, se):
        gb = B.bound_goldstein(beta, T, d, d_neq)
        reports.append(B.compare("goldstein", float(m), 2 * gb.rhs,
                                 {"beta": beta, "T": float(T), "d": d, "d_neq": d_neq, "T_max": gb.T_max,
                                  "slack_factor": 2.0, "std_error": float(s),
                                  "within_validity": gb.within_validity}))
    result = EnsembleResult("goldstein_nonequilibrium_weight", trials, mean, se, seed,
                            [trial_seed(seed, i) for i in range(trials)], axis={"T": T_values},
                            extra={"T_max": T_max, "vacuous": False})
    return result, reports


def _exp_brandao(params, trials, seed, threads):
    d_S = int(params.get("d_S", 2))
    d_B = int(params.get("d_B", 8))
    d = d_S * d_B
    setup = trial_rng(seed, SETUP_STREAM)
    if params.get("energies") is not None:
        levels = np.asarray(params["energies"], dtype=float)
        mult = np.asarray(params.get("multiplicities") or [1] * levels.size, dtype=int)
    else:
        levels = np.sort(setup.standard_normal(d))
        mult = np.ones(d, dtype=int)
    if int(mult.sum()) != d:
        raise ExperimentError("multiplicities must sum to d_S * d_B")
    flat = np.repeat(levels, mult)
    times = np.asarray(params.get("times") or np.linspace(0.0, float(params.get("t_max", 10.0)), 20), dtype=float)
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1.0

    def trial(rng, _):
        U = haar_unitary(d, rng)
        dec = decomposition_from_levels(levels, mult, U)
        c = U.conj().T @ psi0
        omega = dephase(psi0, dec)
        omega_S = np.trace(omega.reshape(d_S, d_B, d_S, d_B), axis1=1, axis2=3)
        out = np.empty(times.size)
        for k, t in enumerate(times):
            psi_t = U @ (c * np.exp(-1j * flat * t))
            m = psi_t.reshape(d_S, d_B)
            diff = m @ m.conj().T - omega_S
            out[k] = float(np.real(np.trace(diff @ diff)))
        return out

    mean, se, _ = run_trials(trial, trials, seed, threads)
    chi, zeta, gamma = B.brandao_quantities(levels, mult, times)
    lead, remainder = B.bound_brandao(chi, zeta, gamma, d_S, d_B)
    reports = [
        B.compare("brandao", float(m), float(l + remainder),
                  {"t": float(t), "d_S": d_S, "d_B": d_B, "leading": float(l), "remainder": remainder,
                   "std_error": float(s), "asymptotic_remainder": True})
        for t, m, s, l in zip(times, mean, se, lead)
    ]
    result = EnsembleResult("subsystem_purity_deviation", trials, mean, se, seed,
                            [trial_seed(seed, i) for i in range(trials)], axis={"t": times},
                            extra={"leading_bound": lead, "remainder": remainder, "gamma": gamma})
    return result, reports


def _exp_reimann(params, trials, seed, threads):
    mode = params.get("spectrum", "equally_spaced")
    if mode == "equally_spaced":
        d = int(params.get("d", 32))
        energies = float(params.get("spacing", 1.0)) * np.arange(d)
        times = np.asarray(params.get("times") or np.linspace(0.0, 2 * np.pi, 50), dtype=float)
        psi0 = np.zeros(d, dtype=complex)
        psi0[0] = 1.0
        A = np.outer(psi0, psi0.conj())

        def trial(rng, _):
            U = haar_unitary(d, rng)
            c = U.conj().T @ psi0
            M = np.outer(c, c.conj()) * (U.conj().T @ A @ U).T
            return phase_sum(energies, M, times).real

        mean, se, _ = run_trials(trial, trials, seed, threads)
        # Haar average of the dephased state: (I + rho0) / (d + 1)
        rho0 = np.outer(psi0, psi0.conj())
        eq_value = float(np.real(np.trace(A) + np.trace(rho0 @ A))) / (d + 1)
        init_value = float(np.real(np.trace(rho0 @ A)))
        F = B.reimann_F(energies, times)
        pred = B.reimann_prediction(F, eq_value, init_value)
        ratio = np.abs(mean - pred) / np.maximum(5 * se, 1e-12)
        k = int(np.argmax(ratio))
        reports = [B.compare("reimann_F", float(ratio[k]), 1.0,
                             {"t": float(times[k]), "d": d, "band_se": 5.0, "deviation": float(abs(mean[k] - pred[k])),
                              "std_error": float(se[k]), "F0": float(B.reimann_F(energies, 0.0))})]
        result = EnsembleResult("reimann_trajectory", trials, mean, se, seed,
                                [trial_seed(seed, i) for i in range(trials)], axis={"t": times},
                                extra={"prediction": pred, "F": F, "equilibrium_value": eq_value})
        return result, reports
    if mode == "exponential_dos":
        beta = float(params.get("beta", 1.0))
        width = float(params.get("width", 10.0))
        d = int(params.get("d", 512))
        times = np.asarray(params.get("times") or np.linspace(0.0, 3 * beta, 31), dtype=float)
        late = np.linspace(50 * beta, 100 * beta, 501)

        def trial(rng, _):
            E = exponential_dos_spectrum(beta, width, d, rng)
            return np.concatenate([B.reimann_F(E, times), [np.mean(np.abs(B.reimann_F(E, late)))]])

        mean, se, _ = run_trials(trial, trials, seed, threads)
        F, F_se = mean[:-1], se[:-1]
        lor = B.reimann_lorentzian(beta, times)
        rel = np.abs(F - lor) / lor
        k = int(np.argmax(rel))
        reports = [B.compare("reimann_F", float(rel[k]), 0.2,
                             {"t": float(times[k]), "beta": beta, "d": d, "relative_tolerance": 0.2,
                              "late_mean_abs_F": float(mean[-1])})]
        result = EnsembleResult("reimann_F_exponential_dos", trials, F, F_se, seed,
                                [trial_seed(seed, i) for i in range(trials)], axis={"t": times},
                                extra={"lorentzian": lor, "late_mean_abs_F": float(mean[-1]),
                                       "late_mean_abs_F_se": float(se[-1]), "d": d})
        return result, reports
    raise ExperimentError(f"unknown reimann spectrum mode {mode!r}")


def _exp_permutation(params, trials, seed, threads):
    d = int(params.get("d", 32))
    energies = float(params.get("spacing", 1.0)) * np.arange(d) if params.get("energies") is None \
        else np.asarray(params["energies"], dtype=float)
    times = np.asarray(params.get("times") or np.linspace(0.0, 2 * np.pi, 50), dtype=float)
    setup = trial_rng(seed, SETUP_STREAM)
    V = np.eye(d, dtype=complex) if params.get("eigenbasis", "haar") == "computational" else haar_unitary(d, setup)
    psi0 = np.zeros(d, dtype=complex)
    if params.get("initial", "basis0") == "two_level":
        psi0[:2] = 1 / math.sqrt(2)
    else:
        psi0[0] = 1.0
    A = np.outer(psi0, psi0.conj())
    dec0 = decomposition_from_levels(energies, np.ones(d, dtype=int), V)

    def trial(rng, _):
        H = permuted_hamiltonian(dec0, rng)
        E, U = np.linalg.eigh(H)
        c = U.conj().T @ psi0
        M = np.outer(c, c.conj()) * (U.conj().T @ A @ U).T
        return phase_sum(E, M, times).real

    mean, se, _ = run_trials(trial, trials, seed, threads)
    omega = dephase(psi0, dec0)  # identical for every permutation of a nondegenerate spectrum
    from .dynamics import trace_distance
    td = trace_distance(omega, np.eye(d) / d)
    eq_value = float(np.real(np.trace(omega @ A)))
    F = B.reimann_F(energies, times)
    pred = B.reimann_prediction(F, eq_value, float(np.real(np.vdot(psi0, A @ psi0))))
    result = EnsembleResult("permutation_trajectory", trials, mean, se, seed,
                            [trial_seed(seed, i) for i in range(trials)], axis={"t": times},
                            extra={"prediction": pred, "F": F, "rho_av_trace_distance_to_maximally_mixed": td,
                                   "max_deviation": float(np.max(np.abs(mean - pred)))})
    return result, []


def _exp_random_bath(params, trials, seed, threads):
    N = int(params.get("N", 6))
    n_sys = int(params.get("system_sites", 1))
    chain = SpinChainSpec(N, XXZNNN(float(params.get("Jxy", 1.0)), float(params.get("Jz", 1.0)),
                                    float(params.get("J2", 0.5))), boundary=params.get("boundary", "open"))
    H = build_hamiltonian(chain)
    dec = diagonalize(H)
    A = build_observable(ObservableSpec("site_pauli", site=0, axis="Z"), chain)
    normA = operator_norm(A)
    T_values = np.asarray(params.get("T_values") or [1.0, 10.0, 100.0, 1000.0], dtype=float)
    d_S, d_B, d = 2**n_sys, 2 ** (N - n_sys), 2**N
    rho = build_state(StateSpec("mixed_system_bath", system_bits="0" * n_sys), chain)
    fd = fluctuation_data(dec, rho, A)
    purity = float(np.real(np.trace(rho @ rho)))
    p = fd.gap_weights
    xi = [window_concentration(fd.gaps, p, 1.0 / T) for T in T_values]
    env = fit_envelope(list(zip(T_values, xi)), fd.sigma_G, max_weight=float(
        np.max(np.bincount(fd.group_of, weights=p)))) if fd.Q > 0 else None
    reports = []
    measured = []
    for T, x in zip(T_values, xi):
        lhs = time_average_finite(fd, T).value
        measured.append(lhs)
        reports.append(B.compare("random_state_general", lhs, B.bound_random_state_general(normA, d, purity, x),
                                 {"T": float(T), "d": d, "purity": purity, "xi": x, "normA": normA}))
        if env is not None:
            reports.append(B.compare("mixed_bath", lhs,
                                     B.bound_mixed_bath(normA, d_S, env.a, env.delta, fd.sigma_G, T),
                                     {"T": float(T), "d_S": d_S, "d_B": d_B, "a": env.a, "delta": env.delta,
                                      "sigma_G": fd.sigma_G, "normA": normA}))

    def trial(rng, _):
        bath = haar_state(d_B, rng)
        sys = np.zeros(d_S, dtype=complex)
        sys[0] = 1.0
        fdp = fluctuation_data(dec, np.kron(sys, bath), A, catalog=fd.catalog)
        return [time_average_finite(fdp, T).value for T in T_values]

    mean, se, _ = run_trials(trial, trials, seed, threads) if trials > 0 else (np.zeros(T_values.size),) * 2 + ([],)
    result = EnsembleResult("pure_bath_fluctuation", trials, mean, se, seed,
                            [trial_seed(seed, i) for i in range(trials)], axis={"T": T_values},
                            extra={"mixed_bath_fluctuation": measured, "xi": xi, "sigma_G": fd.sigma_G,
                                   "a": env.a if env else None, "delta": env.delta if env else None})
    return result, reports


EXPERIMENTS = {
    "random_observable_avg": lambda p, n, s, th: _exp_random_observable(p, n, s, th, eigen=False),
    "eigen_observable_avg": lambda p, n, s, th: _exp_random_observable(p, n, s, th, eigen=True),
    "goldstein": _exp_goldstein,
    "brandao": _exp_brandao,
    "reimann_F": _exp_reimann,
    "permutation_F": _exp_permutation,
    "random_bath": _exp_random_bath,
}


def run_experiment(kind: str, params: dict | None, trials: int, master_seed: int,
                   threads: int = 1) -> tuple[EnsembleResult, list[B.BoundReport]]:
    """Run a named Monte-Carlo experiment and pair it with its bound evaluations."""
    if kind not in EXPERIMENTS:
        raise ExperimentError(f"unknown experiment {kind!r}; choose from {sorted(EXPERIMENTS)}")
    if trials < 0:
        raise ExperimentError("trials must be non-negative")
    return EXPERIMENTS[kind](dict(params or {}), int(trials), int(master_seed), int(threads))
