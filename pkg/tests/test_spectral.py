from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from equilibration.model import SpinChainSpec, StateSpec, TransverseIsing, build_hamiltonian, build_state
from equilibration.spectral import (
    DEFAULT_DEGENERACY_TOL,
    decomposition_from_levels,
    diagonalize,
    dos_diagnostics,
    fit_envelope,
    gap_catalog,
    gap_window_count,
    matrix_element_decay,
    window_concentration,
)


def brute_gap_groups(E, tol):
    """O(d_E^2) double loop over ordered level pairs, then single-linkage on sorted values."""
    G = sorted(E[i] - E[j] for i in range(len(E)) for j in range(len(E)) if i != j)
    groups = [[G[0]]]
    for x in G[1:]:
        if x - groups[-1][-1] <= tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    return groups


def brute_window(values, weights, width):
    return max(sum(w for v, w in zip(values, weights) if x <= v < x + width) for x in values)


def test_diagonal_degenerate_levels():
    dec = diagonalize(np.diag([1.0, 1.0, 2.0]))
    assert dec.d_E == 2
    assert list(dec.multiplicities) == [2, 1]
    assert np.allclose(dec.energies, [1, 2])


def test_sigma_x_eigenvectors():
    dec = diagonalize(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(dec.energies, [-1, 1])
    minus = np.array([1, -1]) / np.sqrt(2)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert np.isclose(abs(np.vdot(minus, dec.eigenvectors[:, 0])), 1)
    assert np.isclose(abs(np.vdot(plus, dec.eigenvectors[:, 1])), 1)


def test_xxz8_decomposition_invariants(xxz8):
    dec, H = xxz8.dec, xxz8.H
    normH = np.max(np.abs(np.linalg.eigvalsh(H)))
    V = dec.eigenvectors
    assert np.allclose(V.conj().T @ V, np.eye(dec.d_T), atol=1e-10)
    assert np.max(np.abs(dec.reconstruct() - H)) <= 1e-9 * normH
    resid = np.linalg.norm(H @ V - V * dec.level_energy_per_column, axis=0)
    assert resid.max() <= 1e-9 * normH
    assert dec.multiplicities.sum() == dec.d_T
    assert np.all(np.diff(dec.energies) > dec.degeneracy_tolerance)


def test_gap_catalog_equally_spaced():
    cat = gap_catalog(decomposition_from_levels([0, 1, 2, 3], [1, 1, 1, 1]))
    assert cat.g == 3
    assert np.allclose(cat.distinct_gaps[cat.distinct_gaps > 0], [1, 2, 3])
    assert np.isclose(cat.eps_min, 1.0)
    assert cat.gap_count == 12


def test_gap_catalog_irrational():
    cat = gap_catalog(decomposition_from_levels([0, 1, 1 + np.sqrt(2)], [1, 1, 1]))
    assert cat.g == 1 and cat.distinct_gaps.size == 6


def test_gap_catalog_trivial():
    cat = gap_catalog(decomposition_from_levels([2.0], [3]))
    assert cat.trivial and cat.gap_count == 0
    assert any("trivial dynamics" in n for n in cat.notes)


def test_gap_catalog_xxz8_matches_double_loop(xxz8):
    dec = xxz8.dec
    cat = gap_catalog(dec)
    groups = brute_gap_groups(list(dec.energies), DEFAULT_DEGENERACY_TOL * max(1.0, dec.norm))
    assert cat.g == max(len(g) for g in groups) == 1
    mids = [np.mean(g) for g in groups]
    assert np.isclose(cat.eps_min, min(np.diff(mids)), rtol=1e-6)
    # frozen from the double-loop oracle above
    assert np.isclose(cat.eps_min, 3.5759498526743982e-06, rtol=1e-6)
    assert cat.gap_count == dec.d_E * (dec.d_E - 1)
    # closed under negation, exactly
    assert np.array_equal(np.sort(cat.gaps), np.sort(-cat.gaps))
    assert np.array_equal(cat.distinct_gaps, -cat.distinct_gaps[::-1])
    assert gap_window_count(cat, cat.eps_min / 2) == cat.g


def test_gap_window_count_examples():
    assert gap_window_count(np.array([-2, -1, 1, 2.0]), 0.5) == 1
    assert gap_window_count(np.array([-2, -1, -1, -1, 1, 1, 1, 2.0]), 0.5) == 3


def test_window_concentration_examples():
    assert window_concentration([3.0], [1.0], 0.01) == 1.0
    d = 7
    assert np.isclose(window_concentration(np.arange(d) * 2.0, np.full(d, 1 / d), 1.5), 1 / d)
    with pytest.raises(ValueError):
        window_concentration([], [], 1.0)


def test_window_concentration_xxz8_grid_scan(xxz8):
    dec = xxz8.dec
    p = dec.populations(xxz8.psi)
    width = 0.1
    grid = np.arange(dec.energies[0] - width, dec.energies[-1] + width, width / 1000)
    E = dec.energies
    lo = np.searchsorted(E, grid, side="left")
    hi = np.searchsorted(E, grid + width, side="left")
    c = np.concatenate([[0.0], np.cumsum(p)])
    scan = np.max(c[hi] - c[lo])
    assert np.isclose(window_concentration(E, p, width), scan, atol=1e-12)


def test_fit_envelope_examples():
    env = fit_envelope([(1.0, 1.0), (10.0, 1.0)], sigma=1.0, max_weight=1.0)
    assert env.delta == 1.0 and env.a == 0.0
    d = 10
    vals = np.arange(d) * 5.0
    w = np.full(d, 1 / d)
    samples = [(T, window_concentration(vals, w, 1 / T)) for T in (10.0, 100.0, 1000.0)]
    env = fit_envelope(samples, sigma=np.std(vals), max_weight=w.max())
    assert np.isclose(env.delta, 1 / d)


def test_fit_envelope_cdw_n10_a_of_order_one(xxz10):
    dec = xxz10.dec
    p = dec.populations(xxz10.psi)
    sigma = dos_diagnostics(dec, xxz10.psi).sigma
    samples = [(T, window_concentration(dec.energies, p, 1 / T)) for T in np.geomspace(0.05, 100, 30)]
    env = fit_envelope(samples, sigma, max_weight=p.max())
    assert 1 / 3 <= env.a <= 3
    assert env.delta < 0.1
    for T, v in samples:
        assert v <= env(T) * (1 + 1e-12)


def test_dos_eigenstate_flagged():
    dec = diagonalize(np.diag([0.0, 1.0, 3.0]))
    d = dos_diagnostics(dec, np.array([0, 1.0, 0]))
    assert d.degenerate and d.sigma == 0.0


def test_dos_infinite_temperature_scaling():
    sig = {}
    for N in (6, 8, 10):
        dec = diagonalize(build_hamiltonian(SpinChainSpec(N, TransverseIsing(1.0, 1.0))))
        sig[N] = dos_diagnostics(dec, np.eye(2**N) / 2**N).sigma
    c = np.dot([sig[6], sig[8]], np.sqrt([6, 8])) / 14.0
    assert abs(sig[10] - c * np.sqrt(10)) <= 0.2 * c * np.sqrt(10)


def test_dos_cdw_gaussian(xxz10):
    d = dos_diagnostics(xxz10.dec, xxz10.psi)
    assert d.ks_distance < 0.1
    assert np.isclose(d.mean, np.vdot(xxz10.psi, xxz10.H @ xxz10.psi).real, atol=1e-10)


def test_matrix_elements_commuting_trivial(xxz6):
    dec = xxz6.dec
    med = matrix_element_decay(dec.to_eigenbasis(xxz6.H), dec)
    assert med.trivial


def test_matrix_elements_local_vs_global(xxz10):
    dec = xxz10.dec
    local = matrix_element_decay(dec.to_eigenbasis(xxz10.A), dec)
    assert local.violation_fraction == 0.0
    bm = local.bin_max[~np.isnan(local.bin_max)]
    tail = bm[int(np.argmax(bm)):]
    assert np.mean(np.diff(tail) < 0) >= 0.8
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dec.d_T) + 1j * rng.standard_normal(dec.d_T)
    v /= np.linalg.norm(v)
    glob = matrix_element_decay(dec.to_eigenbasis(np.outer(v, v.conj())), dec)
    # a global observable has a much flatter envelope than a single-site one
    assert glob.alpha < local.alpha / 5


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.floats(1e-3, 3), st.floats(1e-3, 3),
       st.integers(0, 2**31))
def test_window_concentration_properties(values, w1, w2, seed):
    values = np.sort(np.asarray(values))
    weights = np.random.default_rng(seed).random(values.size) + 1e-3
    weights /= weights.sum()
    lo, hi = sorted((w1, w2))
    a = window_concentration(values, weights, lo)
    b = window_concentration(values, weights, hi)
    assert a <= b + 1e-12
    assert np.isclose(a, brute_window(values, weights, lo), atol=1e-12)
    assert np.isclose(window_concentration(values, weights, np.ptp(values) + 1.0), 1.0)


@given(st.lists(st.integers(-6, 6), min_size=1, max_size=8), st.integers(0, 2**31))
def test_catalog_and_population_properties(levels, seed):
    E = np.asarray(levels, dtype=float) * 0.5
    rng = np.random.default_rng(seed)
    H = np.diag(E)
    U = np.linalg.qr(rng.standard_normal((E.size, E.size)))[0]
    dec = diagonalize(U @ H @ U.T)
    cat = gap_catalog(dec)
    assert cat.gap_count == dec.d_E * (dec.d_E - 1)
    assert dec.d_E == len(set(levels))
    if not cat.trivial:
        assert np.allclose(np.sort(cat.gaps), np.sort(-cat.gaps), atol=0)
        assert cat.g >= 1 and cat.eps_min > cat.tolerance
    psi = rng.standard_normal(E.size) + 1j * rng.standard_normal(E.size)
    psi /= np.linalg.norm(psi)
    assert np.isclose(dec.populations(psi).sum(), 1.0, atol=1e-10)
    d = dos_diagnostics(dec, psi)
    assert np.isclose(d.mean, np.vdot(psi, (U @ H @ U.T) @ psi).real, atol=1e-10)
    assert 0 <= d.ks_distance <= 1


@given(st.lists(st.tuples(st.floats(0.1, 100), st.floats(0, 1)), min_size=2, max_size=10,
                unique_by=lambda s: s[0]), st.floats(0.1, 10))
def test_fit_envelope_covers_samples(samples, sigma):
    env = fit_envelope(samples, sigma)
    for T, v in samples:
        assert v <= env.a / (sigma * T) + env.delta + 1e-12
    assert env.a >= 0
