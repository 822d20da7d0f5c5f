from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from equilibration.dynamics import (
    circular_variance,
    cloud_snapshot,
    dephase,
    distinguishability,
    distinguishability_series,
    effective_dimension,
    envelope_tau,
    evolve_expectation,
    evolve_state,
    fit_gaussian_tau,
    fluctuation_data,
    gaussian_envelope_prediction,
    partial_trace,
    sampled_average,
    spectral_projections,
    survival_probability,
    time_average,
    time_average_finite,
    time_average_infinite,
    trace_distance,
)
from equilibration.spectral import diagonalize

from conftest import quench

# Independent oracle: numpy eigh, level grouping by hand, pair amplitudes
# summed per gap with an explicit dict over all level pairs.
D_EFF = {6: 8.542211782304804, 8: 17.44067578652613, 10: 38.35640107303272}
INFINITE_FLUCT = {6: 0.05813744817695962, 8: 0.02279233804054644, 10: 0.007718829883834908}


def test_two_level_expectation(two_level):
    H, psi, A = two_level
    dec = diagonalize(H)
    t = np.linspace(0, 5, 37)
    assert np.allclose(evolve_expectation(dec, psi, A, t), np.cos(2 * t), atol=1e-12)


def test_two_level_averages(two_level):
    H, psi, A = two_level
    dec = diagonalize(H)
    fd = fluctuation_data(dec, psi, A)
    assert time_average_infinite(fd) == pytest.approx(0.5, abs=1e-12)
    for T in (0.3, 1.0, 7.5, 100.0):
        exact = 0.5 + np.sin(4 * T) / (8 * T)
        assert time_average_finite(fd, T).value == pytest.approx(exact, abs=1e-12)
    d_eff, ipr = effective_dimension(psi, dec)
    assert d_eff == pytest.approx(2.0)
    assert ipr == pytest.approx(0.5)


@pytest.mark.parametrize("N", [6, 8])
def test_propagation_matches_expm(N):
    q = quench(N)
    rng = np.random.default_rng(N)
    times = np.sort(rng.uniform(0, 50, 50))
    ours = evolve_expectation(q.dec, q.psi, q.A, times)
    ref = []
    for t in times:
        phi = expm(-1j * q.H * t) @ q.psi
        ref.append(np.real(np.vdot(phi, q.A @ phi)))
    assert np.max(np.abs(ours - np.array(ref))) < 1e-8


def test_evolve_state_matches_expm(xxz6):
    q = xxz6
    phi = evolve_state(q.dec, q.psi, 0.7)
    assert np.allclose(phi, expm(-0.7j * q.H) @ q.psi, atol=1e-10)


@pytest.mark.parametrize("N", [6, 8, 10])
def test_frozen_effective_dimension(N):
    q = quench(N)
    d_eff, ipr = effective_dimension(q.psi, q.dec)
    assert d_eff == pytest.approx(D_EFF[N], rel=1e-9)
    # the level-adapted IPR agrees with 1/d_eff for pure states
    assert ipr == pytest.approx(1.0 / d_eff, rel=1e-9)


@pytest.mark.parametrize("N", [6, 8, 10])
def test_frozen_infinite_fluctuation(N):
    q = quench(N)
    fd = fluctuation_data(q.dec, q.psi, q.A)
    assert time_average_infinite(fd) == pytest.approx(INFINITE_FLUCT[N], rel=1e-7)


def test_sum_rule_and_conjugate_symmetry(xxz8):
    q = xxz8
    fd = fluctuation_data(q.dec, q.psi, q.A)
    expect0 = np.real(np.vdot(q.psi, q.A @ q.psi))
    assert fd.initial_value == pytest.approx(expect0, abs=1e-12)
    assert np.sum(fd.z).real == pytest.approx(fd.delta_A0, abs=1e-12)
    G = fd.distinct_gaps
    flip = np.searchsorted(G, -G[::-1])
    assert np.allclose(G[flip], -G[::-1])
    assert np.allclose(fd.z[::-1], np.conj(fd.z[flip]), atol=1e-14)
    t = np.linspace(0, 10, 41)
    assert np.allclose(fd.delta_A(t), fd.from_groups(t), atol=1e-12)


def test_equilibrium_value_is_dephased_expectation(xxz8):
    q = xxz8
    fd = fluctuation_data(q.dec, q.psi, q.A)
    omega = dephase(q.psi, q.dec)
    assert fd.equilibrium_value == pytest.approx(np.real(np.trace(omega @ q.A)), abs=1e-12)


@pytest.mark.parametrize("N", [6, 8])
def test_finite_average_matches_quadrature(N):
    q = quench(N)
    fd = fluctuation_data(q.dec, q.psi, q.A)
    T = 37.0
    exact = time_average_finite(fd, T).value
    mid, _ = sampled_average(lambda t: fd.delta_A(t) ** 2, T, 1_000_000)
    assert abs(mid - exact) / exact < 1e-4
    gl = time_average(lambda t: fd.delta_A(t) ** 2, T, 2 * np.ptp(q.dec.energies))
    assert gl.value == pytest.approx(exact, rel=1e-8)


def test_pair_budget_fallback_agrees(xxz8):
    q = xxz8
    fd = fluctuation_data(q.dec, q.psi, q.A)
    exact = time_average_finite(fd, 12.0, pair_budget=10**9)
    quad = time_average_finite(fd, 12.0, pair_budget=1)
    assert exact.method == "exact" and quad.method == "gauss-legendre"
    assert quad.value == pytest.approx(exact.value, rel=1e-8)


def test_finite_average_approaches_infinite(xxz8):
    q = xxz8
    fd = fluctuation_data(q.dec, q.psi, q.A)
    inf = time_average_infinite(fd)
    assert time_average_finite(fd, 1e7, pair_budget=10**9).value == pytest.approx(inf, rel=1e-3)


def test_distinguishability_series_matches_direct(xxz6):
    q = xxz6
    projs = [P for _, P in spectral_projections(q.A)]
    omega = dephase(q.psi, q.dec)
    times = [0.0, 0.4, 2.5, 11.0]
    series = distinguishability_series(q.dec, q.psi, projs, times)
    direct = [distinguishability(evolve_state(q.dec, q.psi, t), omega, projs) for t in times]
    assert np.allclose(series, direct, atol=1e-12)


def test_distinguishability_requires_resolution(xxz6):
    q = xxz6
    projs = [P for _, P in spectral_projections(q.A)]
    with pytest.raises(ValueError):
        distinguishability(q.psi, q.psi, projs[:1])


def test_survival_probability(xxz6):
    q = xxz6
    t = np.array([0.0, 1.3, 4.0])
    ref = [abs(np.vdot(q.psi, expm(-1j * q.H * s) @ q.psi)) ** 2 for s in t]
    assert np.allclose(survival_probability(q.dec, q.psi, t), ref, atol=1e-10)


def test_partial_trace_against_explicit_sum():
    rng = np.random.default_rng(3)
    N = 3
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    # keep site 1 (middle bit): sum over bits of sites 0 and 2
    ref = np.zeros((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            for s0 in range(2):
                for s2 in range(2):
                    i = (s0 << 2) | (a << 1) | s2
                    j = (s0 << 2) | (b << 1) | s2
                    ref[a, b] += rho[i, j]
    assert np.allclose(partial_trace(rho, [1], N), ref)
    assert np.allclose(partial_trace(psi, [0, 1, 2], N), rho)
    with pytest.raises(ValueError):
        partial_trace(rho, [3], N)


def test_trace_distance_simple():
    assert trace_distance(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(0.5)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    assert trace_distance(plus, np.array([1.0, 0.0])) == pytest.approx(np.sqrt(0.5))


def test_cloud_points_sum_to_deviation(xxz8):
    q = xxz8
    fd = fluctuation_data(q.dec, q.psi, q.A)
    for t in (0.0, 1.0, 3.0):
        snap = cloud_snapshot(fd, 33.0, t)
        assert abs(snap.total - fd.delta_A(t)[0]) < 1e-4
    raw = cloud_snapshot(fd, np.inf, 2.0)
    assert raw.total == pytest.approx(fd.delta_A(2.0)[0], abs=1e-12)


def test_circular_variance_limits():
    assert circular_variance(np.array([1.0, 2.0, 0.5])) == pytest.approx(0.0)
    assert circular_variance(np.array([1.0, -1.0])) == pytest.approx(1.0)
    assert circular_variance(np.zeros(3)) == 0.0


def test_fit_gaussian_tau_recovers_synthetic():
    t = np.linspace(0, 6, 200)
    y = 0.8 * np.exp(-((t / 2.3) ** 2)) * np.cos(0.1 * t)
    assert fit_gaussian_tau(t, y) == pytest.approx(2.3, rel=0.02)
    pred = gaussian_envelope_prediction(0.8, 2.3, t)
    assert pred[0] == 0.8 and pred[-1] < 1e-2


def test_envelope_tau_trivial():
    dec = diagonalize(np.eye(3))
    fd = fluctuation_data(dec, np.array([1.0, 0, 0]), np.diag([1.0, 0, 0]))
    assert envelope_tau(fd) == np.inf


def _random_hermitian(rng, d):
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (X + X.conj().T) / 2


@given(st.integers(0, 2**32 - 1), st.integers(2, 7))
def test_dephase_idempotent_and_trace_preserving(seed, d):
    rng = np.random.default_rng(seed)
    H = _random_hermitian(rng, d)
    H[0, 0] = H[1, 1]
    dec = diagonalize(H)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    psi /= np.linalg.norm(psi)
    omega = dephase(psi, dec)
    assert np.trace(omega).real == pytest.approx(1.0)
    assert np.allclose(dephase(omega, dec), omega, atol=1e-12)
    assert np.allclose(omega @ H, H @ omega, atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(-20, 20))
def test_evolution_is_unitary(seed, t):
    rng = np.random.default_rng(seed)
    H = _random_hermitian(rng, 5)
    dec = diagonalize(H)
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi /= np.linalg.norm(psi)
    phi = evolve_state(dec, psi, t)
    assert np.linalg.norm(phi) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(evolve_state(dec, phi, -t), psi, atol=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_infinite_average_bounded_by_sum_v(seed):
    # |z_G|^2 summed never exceeds g sum|v|^2
    rng = np.random.default_rng(seed)
    E = rng.integers(0, 4, size=6).astype(float)
    dec = diagonalize(np.diag(E))
    psi = rng.normal(size=6) + 1j * rng.normal(size=6)
    psi /= np.linalg.norm(psi)
    A = _random_hermitian(rng, 6)
    fd = fluctuation_data(dec, psi, A)
    assert time_average_infinite(fd) <= fd.catalog.g * fd.sum_v_sq * (1 + 1e-12) + 1e-15
