"""Time evolution, dephasing decomposition and time averages.

Sign convention: with ``rho_ij = <E_i|rho|E_j>`` the expectation value is
``tr(rho(t) A) = sum_ij rho_ij A_ji exp(-i (E_i - E_j) t)``.  The amplitude
of the level pair ``(k, l)`` is ``v_(k,l) = tr(P_k rho P_l A)`` and it rotates
with the gap ``G_(k,l) = E_k - E_l``.  For a pure state this equals
``c_k c_l^* A_lk`` in a basis where the state overlaps a single vector of each
degenerate level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .model import as_density_matrix
from .spectral import GapCatalog, SpectralDecomposition, gap_catalog

DEFAULT_PAIR_BUDGET = 20_000_000
_TIME_CHUNK = 2048


# ---------------------------------------------------------------------------
# evaluation kernels


def _rho_eig(dec: SpectralDecomposition, state) -> np.ndarray:
    state = np.asarray(state)
    if state.ndim == 1:
        c = dec.to_eigenbasis(state)
        return np.outer(c, c.conj())
    return dec.to_eigenbasis(state)


def _weighted_matrix(dec: SpectralDecomposition, state, A) -> np.ndarray:
    """``M_ij = rho_ij A_ji`` in the eigenbasis."""
    return _rho_eig(dec, state) * dec.to_eigenbasis(A).T


def _same_level(dec: SpectralDecomposition) -> np.ndarray:
    return dec.level_of[:, None] == dec.level_of[None, :]


def phase_sum(energies: np.ndarray, M: np.ndarray, times) -> np.ndarray:
    """``sum_ij M_ij exp(-i (E_i - E_j) t)`` for every ``t``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty(times.size, dtype=complex)
    for lo in range(0, times.size, _TIME_CHUNK):
        t = times[lo:lo + _TIME_CHUNK]
        U = np.exp(-1j * np.outer(t, energies))
        out[lo:lo + _TIME_CHUNK] = np.sum((U @ M) * U.conj(), axis=1)
    return out


def evolve_expectation(dec: SpectralDecomposition, state, A, times) -> np.ndarray:
    """``tr(exp(-iHt) rho exp(iHt) A)`` evaluated in the eigenbasis."""
    vals = phase_sum(dec.eigenvalues, _weighted_matrix(dec, state, A), times)
    return vals.real


def evolve_state(dec: SpectralDecomposition, psi, t: float) -> np.ndarray:
    c = dec.to_eigenbasis(np.asarray(psi))
    return dec.from_eigenbasis(c * np.exp(-1j * dec.eigenvalues * t))


def dephase(state, dec: SpectralDecomposition) -> np.ndarray:
    """Dephased state ``sum_k P_k rho P_k`` (the infinite-time average of ``rho(t)``)."""
    rho = _rho_eig(dec, state)
    rho = np.where(_same_level(dec), rho, 0.0)
    return dec.from_eigenbasis(rho)


def level_adapted_basis(dec: SpectralDecomposition, psi) -> np.ndarray:
    """Eigenbasis in which ``psi`` overlaps at most one vector per degenerate level.

    Inside each level the first basis vector is the normalized projection of
    ``psi``; the rest of the level is completed by Gram-Schmidt.
    """
    c = dec.to_eigenbasis(np.asarray(psi))
    V = dec.eigenvectors.copy()
    for k in np.flatnonzero(dec.multiplicities > 1):
        cols = np.flatnonzero(dec.level_of == k)
        a = c[cols]
        norm = np.linalg.norm(a)
        if norm == 0.0:
            continue
        basis = [a / norm]
        for e in np.eye(cols.size, dtype=complex):
            w = e - sum(np.vdot(b, e) * b for b in basis)
            n = np.linalg.norm(w)
            if n > 1e-8:
                basis.append(w / n)
            if len(basis) == cols.size:
                break
        V[:, cols] = dec.eigenvectors[:, cols] @ np.array(basis).T
    return V


# ---------------------------------------------------------------------------
# dephasing decomposition


@dataclass(eq=False)
class FluctuationData:
    """Level-pair amplitudes ``v``, grouped amplitudes ``z`` and derived scalars.

    ``pairs``, ``gaps`` and ``v`` run over all ordered pairs of distinct
    levels; ``distinct_gaps`` / ``z`` over the grouped gap values.
    """

    pairs: np.ndarray
    gaps: np.ndarray
    v: np.ndarray
    distinct_gaps: np.ndarray
    z: np.ndarray
    group_of: np.ndarray
    equilibrium_value: float
    initial_value: float
    Q: float
    sigma_G: float
    catalog: GapCatalog
    eigenvalues: np.ndarray | None = None
    offdiag: np.ndarray | None = None

    @property
    def delta_A0(self) -> float:
        return self.initial_value - self.equilibrium_value

    @property
    def sum_v_sq(self) -> float:
        return float(np.sum(np.abs(self.v) ** 2))

    @property
    def gap_weights(self) -> np.ndarray:
        """``p_alpha = |v_alpha| / Q``."""
        if self.Q == 0.0:
            return np.zeros_like(self.gaps)
        return np.abs(self.v) / self.Q

    def delta_A(self, times) -> np.ndarray:
        """``Delta A(t)``; uses the eigenbasis kernel when available."""
        if self.offdiag is not None:
            return phase_sum(self.eigenvalues, self.offdiag, times).real
        return self.from_groups(times)

    def from_groups(self, times) -> np.ndarray:
        """``sum_G z_G exp(-i G t)`` summed over grouped gaps."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        pos = self.distinct_gaps > 0
        G, z = self.distinct_gaps[pos], self.z[pos]
        out = np.empty(times.size)
        for lo in range(0, times.size, _TIME_CHUNK):
            t = times[lo:lo + _TIME_CHUNK]
            out[lo:lo + _TIME_CHUNK] = 2.0 * np.real(np.exp(-1j * np.outer(t, G)) @ z)
        return out


def fluctuation_data(dec: SpectralDecomposition, state, A, gap_tolerance: float | None = None,
                     catalog: GapCatalog | None = None) -> FluctuationData:
    if catalog is None:
        catalog = gap_catalog(dec, gap_tolerance)
    M = _weighted_matrix(dec, state, A)
    S = np.zeros((dec.d_E, dec.d_T))
    S[dec.level_of, np.arange(dec.d_T)] = 1.0
    V = S @ M @ S.T
    pairs = catalog.pairs
    v = V[pairs[:, 0], pairs[:, 1]] if pairs.size else np.zeros(0, dtype=complex)
    z = np.bincount(catalog.group_of, weights=v.real, minlength=catalog.distinct_gaps.size) \
        + 1j * np.bincount(catalog.group_of, weights=v.imag, minlength=catalog.distinct_gaps.size)
    equilibrium = float(np.real(np.trace(V)))
    initial = float(np.real(np.sum(M)))
    absv = np.abs(v)
    Q = float(absv.sum())
    if Q > 0:
        p = absv / Q
        mean = float(np.dot(p, catalog.gaps))
        sigma_G = float(np.sqrt(max(np.dot(p, (catalog.gaps - mean) ** 2), 0.0)))
    else:
        sigma_G = 0.0
    offdiag = np.where(_same_level(dec), 0.0, M)
    return FluctuationData(
        pairs=pairs, gaps=catalog.gaps, v=v, distinct_gaps=catalog.distinct_gaps, z=z,
        group_of=catalog.group_of, equilibrium_value=equilibrium, initial_value=initial,
        Q=Q, sigma_G=sigma_G, catalog=catalog, eigenvalues=dec.eigenvalues, offdiag=offdiag,
    )


def time_average_infinite(fd: FluctuationData) -> float:
    """``<Delta A(t)^2>_inf = sum_G |z_G|^2``."""
    return float(np.sum(np.abs(fd.z) ** 2))


def _phi(x: np.ndarray) -> np.ndarray:
    """``(1/T) int_0^T exp(-i w t) dt`` as a function of ``x = w T``."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape, dtype=complex)
    nz = x != 0
    out[nz] = (np.exp(-1j * x[nz]) - 1.0) / (-1j * x[nz])
    return out


@dataclass(frozen=True)
class FiniteAverage:
    value: float
    method: str
    error_estimate: float


def _gl_nodes(T: float, bandwidth: float, order: int, panel_phase: float = 4 * np.pi):
    panels = max(1, int(np.ceil(bandwidth * T / panel_phase)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, T, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel() / T
    return nodes, weights


def time_average(func, T: float, bandwidth: float, order: int = 16) -> FiniteAverage:
    """``(1/T) int_0^T func(t) dt`` by composite Gauss-Legendre.

    Panels span at most two periods of ``bandwidth``; the error estimate is
    the difference to a lower-order rule on the same panels.
    """
    if T <= 0:
        raise ValueError("averaging window must be positive")
    bandwidth = max(float(bandwidth), 1.0 / T)
    nodes, weights = _gl_nodes(T, bandwidth, order)
    hi = float(np.dot(weights, func(nodes)))
    nodes, weights = _gl_nodes(T, bandwidth, max(4, order * 3 // 4))
    lo = float(np.dot(weights, func(nodes)))
    return FiniteAverage(hi, "gauss-legendre", abs(hi - lo))


def time_average_finite(fd: FluctuationData, T: float,
                        pair_budget: int = DEFAULT_PAIR_BUDGET) -> FiniteAverage:
    """``<Delta A(t)^2>_T``, exact double sum over grouped gaps when affordable."""
    if T <= 0:
        raise ValueError("averaging window must be positive")
    G, z = fd.distinct_gaps, fd.z
    n = G.size
    if n == 0:
        return FiniteAverage(0.0, "exact", 0.0)
    if n * n <= pair_budget:
        total = 0.0 + 0.0j
        rows = max(1, 4_000_000 // n)
        for lo in range(0, n, rows):
            block = _phi((G[lo:lo + rows, None] - G[None, :]) * T)
            total += np.sum(z[lo:lo + rows, None] * block * z.conj()[None, :])
        return FiniteAverage(float(total.real), "exact", 0.0)
    bandwidth = 2.0 * float(np.max(np.abs(G)))
    return time_average(lambda t: fd.delta_A(t) ** 2, T, bandwidth)


def sampled_average(func, T: float, samples: int) -> tuple[float, float]:
    """Midpoint-grid average of ``func`` over ``[0, T]`` and its sample std."""
    t = (np.arange(samples) + 0.5) * (T / samples)
    vals = np.concatenate([func(t[lo:lo + 8192]) for lo in range(0, samples, 8192)])
    return float(np.mean(vals)), float(np.std(vals))


# ---------------------------------------------------------------------------
# effective dimension and distinguishability


def effective_dimension(state, dec: SpectralDecomposition) -> tuple[float, float]:
    """``(d_eff, IPR)``.

    For pure states the IPR is ``sum_i |c_i|^4`` in the level-adapted basis;
    for mixed states it is ``sum_i <E_i|rho|E_i>^2`` in the stored eigenbasis.
    """
    state = np.asarray(state)
    p = dec.populations(state)
    d_eff = 1.0 / float(np.sum(p**2))
    if state.ndim == 1:
        c = level_adapted_basis(dec, state).conj().T @ state
        ipr = float(np.sum(np.abs(c) ** 4))
    else:
        diag = np.real(np.diag(dec.to_eigenbasis(state)))
        ipr = float(np.sum(diag**2))
    return d_eff, ipr


def spectral_projections(A, tol: float = 1e-9) -> list[tuple[float, np.ndarray]]:
    """Distinct eigenvalues of ``A`` with their spectral projectors."""
    evals, evecs = np.linalg.eigh(A)
    out = []
    start = 0
    scale = tol * max(1.0, float(np.max(np.abs(evals))) if evals.size else 1.0)
    for stop in range(1, evals.size + 1):
        if stop == evals.size or evals[stop] - evals[stop - 1] > scale:
            cols = evecs[:, start:stop]
            out.append((float(np.mean(evals[start:stop])), cols @ cols.conj().T))
            start = stop
    return out


def _check_resolution(projections, dim: int) -> None:
    total = sum(np.asarray(P) for P in projections)
    if np.max(np.abs(total - np.eye(dim))) > 1e-10:
        raise ValueError("projections do not resolve the identity")


def distinguishability(rho, sigma, projections) -> float:
    """``D_A = 1/2 sum_i |tr(P_i rho) - tr(P_i sigma)|``."""
    rho, sigma = as_density_matrix(rho), as_density_matrix(sigma)
    _check_resolution(projections, rho.shape[0])
    return 0.5 * float(sum(abs(np.real(np.trace(P @ (rho - sigma)))) for P in projections))


def distinguishability_series(dec: SpectralDecomposition, state, projections, times) -> np.ndarray:
    """``D_A(rho(t), omega)`` for each time."""
    _check_resolution(projections, dec.d_T)
    rho = _rho_eig(dec, state)
    off = ~_same_level(dec)
    total = np.zeros(np.size(times))
    rest = np.zeros(np.size(times))
    # the deviations sum to zero, so the last outcome is the negated sum of the others
    for P in projections[:-1]:
        M = np.where(off, rho * dec.to_eigenbasis(P).T, 0.0)
        x = phase_sum(dec.eigenvalues, M, times).real
        total += np.abs(x)
        rest += x
    return 0.5 * (total + np.abs(rest))


def survival_probability(dec: SpectralDecomposition, psi, times) -> np.ndarray:
    """``|<psi|psi(t)>|^2`` from the level populations."""
    p = dec.populations(np.asarray(psi))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty(times.size)
    for lo in range(0, times.size, _TIME_CHUNK):
        t = times[lo:lo + _TIME_CHUNK]
        out[lo:lo + _TIME_CHUNK] = np.abs(np.exp(-1j * np.outer(t, dec.energies)) @ p) ** 2
    return out


# ---------------------------------------------------------------------------
# subsystems


def partial_trace(rho, keep, N: int) -> np.ndarray:
    """Reduced state on the sites ``keep`` of an ``N``-site full-space state."""
    keep = sorted(int(s) for s in keep)
    if not keep or len(set(keep)) != len(keep) or keep[0] < 0 or keep[-1] >= N:
        raise ValueError(f"invalid subsystem {keep} for N={N}")
    rho = as_density_matrix(np.asarray(rho))
    if rho.shape != (2**N, 2**N):
        raise ValueError(f"state of shape {rho.shape} is not an N={N} full-space state")
    drop = [s for s in range(N) if s not in keep]
    t = rho.reshape([2] * (2 * N))
    row = list(range(N))
    col = [N + s if s in keep else s for s in range(N)]
    out_idx = keep + [N + s for s in keep]
    reduced = np.einsum(t, row + col, out_idx) if drop else t
    dk = 2 ** len(keep)
    return reduced.reshape(dk, dk)


def trace_distance(rho, sigma) -> float:
    """``1/2 ||rho - sigma||_1`` from the eigenvalues of the difference."""
    diff = as_density_matrix(np.asarray(rho)) - as_density_matrix(np.asarray(sigma))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# cloud picture


@dataclass(frozen=True)
class CloudSnapshot:
    t: float
    T: float
    grid: np.ndarray
    points: np.ndarray

    @property
    def total(self) -> complex:
        return complex(np.sum(self.points))


def cloud_grid(fd: FluctuationData, T: float) -> np.ndarray:
    gmax = (float(np.max(np.abs(fd.distinct_gaps))) if fd.distinct_gaps.size else 0.0) + 4.0 / T
    n = int(np.ceil(2 * gmax * 4 * T)) + 1
    return np.linspace(-gmax, gmax, n)


def cloud_snapshot(fd: FluctuationData, T: float, t: float, grid: np.ndarray | None = None) -> CloudSnapshot:
    """Gaussian-smoothed gap amplitudes ``z_G exp(-iGt)`` on a uniform gap grid.

    The kernel has standard deviation ``1/T``; each point carries the grid
    step so that the points sum to ``Delta A(t)``.  ``T = inf`` disables
    smoothing and returns the raw grouped amplitudes.
    """
    if T <= 0:
        raise ValueError("regularization width must be positive")
    rotated = fd.z * np.exp(-1j * fd.distinct_gaps * t)
    if np.isinf(T):
        return CloudSnapshot(t, T, fd.distinct_gaps.copy(), rotated)
    if grid is None:
        grid = cloud_grid(fd, T)
    step = grid[1] - grid[0] if grid.size > 1 else 1.0
    s = 1.0 / T
    points = np.zeros(grid.size, dtype=complex)
    rows = max(1, 2_000_000 // max(1, fd.distinct_gaps.size))
    for lo in range(0, grid.size, rows):
        g = grid[lo:lo + rows]
        kernel = np.exp(-0.5 * ((g[:, None] - fd.distinct_gaps[None, :]) / s) ** 2)
        points[lo:lo + rows] = kernel @ rotated
    points *= step / (s * np.sqrt(2 * np.pi))
    return CloudSnapshot(t, T, grid, points)


def circular_variance(points: np.ndarray) -> float:
    """Magnitude-weighted circular variance ``1 - |sum z| / sum |z|`` of the point phases."""
    mag = np.abs(points)
    total = mag.sum()
    if total == 0.0:
        return 0.0
    return float(1.0 - abs(np.sum(points)) / total)


def gaussian_envelope_prediction(delta_A0: float, tau: float, times) -> np.ndarray:
    """``Delta A(0) exp(-(t/tau)^2)``; ``tau`` is the 1/e time."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = np.asarray(times, dtype=float)
    return delta_A0 * np.exp(-((t / tau) ** 2))


def fit_gaussian_tau(times, values) -> float:
    """Least-squares ``tau`` of ``|Delta A(0)| exp(-(t/tau)^2)`` on the initial decay.

    The fit window runs until the first local minimum of ``|Delta A|``.
    """
    t = np.asarray(times, dtype=float)
    y = np.abs(np.asarray(values, dtype=float))
    if t.size < 3:
        raise ValueError("need at least three samples")
    stop = t.size
    for i in range(1, t.size - 1):
        if y[i] <= y[i - 1] and y[i] < y[i + 1]:
            stop = i + 1
            break
    t, y = t[:stop], y[:stop]
    y0 = y[0]
    if y0 == 0.0:
        raise ValueError("no initial deviation to fit")

    def loss(log_tau):
        return float(np.sum((y - y0 * np.exp(-((t / np.exp(log_tau)) ** 2))) ** 2))

    span = max(t[-1], 1e-12)
    res = minimize_scalar(loss, bounds=(np.log(span) - 12, np.log(span) + 6), method="bounded",
                          options={"xatol": 1e-10})
    return float(np.exp(res.x))


def envelope_tau(fd: FluctuationData) -> float:
    """``sqrt(2) / s`` with ``s`` the ``|z_G|``-weighted spread of the gaps.

    This is the 1/e time of ``Delta A`` when ``z_G`` is a Gaussian of standard
    deviation ``s``.  Returns ``inf`` for trivial dynamics.
    """
    w = np.abs(fd.z)
    total = float(w.sum())
    if total == 0.0:
        return float("inf")
    s = float(np.sqrt(np.dot(w, fd.distinct_gaps**2) / total))
    return float(np.sqrt(2.0) / s) if s > 0 else float("inf")
