"""Diagonalization, level grouping, energy-gap catalogs and spectral diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import ndtr

from .model import as_density_matrix

DEFAULT_DEGENERACY_TOL = 1e-9


class SpectralError(RuntimeError):
    pass


def cluster_sorted(values: np.ndarray, tol: float) -> np.ndarray:
    """Single-linkage cluster labels for an ascending array.

    Neighbours closer than or equal to ``tol`` share a label, so an exactly
    degenerate multiplet is never split.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64)
    breaks = np.diff(values) > tol
    return np.concatenate(([0], np.cumsum(breaks))).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``H = sum_k E_k P_k`` with the eigenbasis stored column-wise.

    Columns of ``eigenvectors`` are in ascending eigenvalue order, hence
    grouped by level; ``level_of[n]`` is the level index of column ``n``.
    """

    energies: np.ndarray
    multiplicities: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    level_of: np.ndarray
    degeneracy_tolerance: float
    norm: float

    @property
    def d_T(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def d_E(self) -> int:
        return int(self.energies.size)

    @property
    def level_energy_per_column(self) -> np.ndarray:
        return self.energies[self.level_of]

    def to_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        M = np.asarray(M)
        if M.ndim == 1:
            return V.conj().T @ M
        return V.conj().T @ M @ V

    def from_eigenbasis(self, M: np.ndarray) -> np.ndarray:
        V = self.eigenvectors
        if M.ndim == 1:
            return V @ M
        return V @ M @ V.conj().T

    def projector(self, k: int) -> np.ndarray:
        cols = self.eigenvectors[:, self.level_of == k]
        return cols @ cols.conj().T

    def populations(self, state: np.ndarray) -> np.ndarray:
        """Level populations ``tr(P_k rho)``."""
        state = np.asarray(state)
        if state.ndim == 1:
            diag = np.abs(self.to_eigenbasis(state)) ** 2
        else:
            diag = np.real(np.einsum("ij,ji->i", self.eigenvectors.conj().T, state @ self.eigenvectors))
        return np.bincount(self.level_of, weights=diag, minlength=self.d_E)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.level_energy_per_column) @ V.conj().T


def diagonalize(H: np.ndarray, degeneracy_tolerance: float = DEFAULT_DEGENERACY_TOL) -> SpectralDecomposition:
    """Full eigendecomposition with levels grouped at ``tol * max(1, ||H||)``."""
    H = np.asarray(H)
    try:
        evals, evecs = sla.eigh(H)
    except (np.linalg.LinAlgError, ValueError) as exc:
        finite = bool(np.all(np.isfinite(H)))
        raise SpectralError(
            f"eigensolver failed on {H.shape} matrix (finite entries: {finite}, "
            f"max |H_ij| = {np.max(np.abs(H)) if finite else float('nan'):.3e}): {exc}"
        ) from exc
    norm = float(np.max(np.abs(evals))) if evals.size else 0.0
    tol_abs = degeneracy_tolerance * max(1.0, norm)
    labels = cluster_sorted(evals, tol_abs)
    counts = np.bincount(labels)
    energies = np.bincount(labels, weights=evals) / counts
    return SpectralDecomposition(
        energies=energies,
        multiplicities=counts,
        eigenvalues=evals,
        eigenvectors=np.ascontiguousarray(evecs, dtype=complex),
        level_of=labels,
        degeneracy_tolerance=degeneracy_tolerance,
        norm=norm,
    )


def decomposition_from_levels(energies, multiplicities, eigenvectors=None,
                              degeneracy_tolerance: float = DEFAULT_DEGENERACY_TOL) -> SpectralDecomposition:
    """Decomposition of a Hamiltonian given directly by its levels (eigenbasis defaults to identity)."""
    energies = np.asarray(energies, dtype=float)
    multiplicities = np.asarray(multiplicities, dtype=np.int64)
    d = int(multiplicities.sum())
    starts = np.concatenate(([0], np.cumsum(multiplicities)[:-1]))
    order = np.argsort(energies, kind="stable")
    cols = [np.arange(starts[k], starts[k] + multiplicities[k]) for k in order]
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    eigenvectors = np.eye(d, dtype=complex) if eigenvectors is None else np.asarray(eigenvectors, dtype=complex)
    eigenvectors = eigenvectors[:, cols]
    energies, multiplicities = energies[order], multiplicities[order]
    level_of = np.repeat(np.arange(energies.size), multiplicities)
    return SpectralDecomposition(
        energies=energies,
        multiplicities=multiplicities,
        eigenvalues=energies[level_of],
        eigenvectors=eigenvectors,
        level_of=level_of,
        degeneracy_tolerance=degeneracy_tolerance,
        norm=float(np.max(np.abs(energies))) if energies.size else 0.0,
    )


# ---------------------------------------------------------------------------
# gaps


@dataclass(frozen=True, eq=False)
class GapCatalog:
    """All gaps ``G_(i,j) = E_i - E_j`` between distinct levels ``i != j``.

    ``group_of[a]`` maps gap ``a`` onto its entry in ``distinct_gaps``.
    """

    gaps: np.ndarray
    pairs: np.ndarray
    distinct_gaps: np.ndarray
    gap_multiplicities: np.ndarray
    group_of: np.ndarray
    g: int
    eps_min: float
    tolerance: float
    d_E: int
    trivial: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def gap_count(self) -> int:
        return int(self.gaps.size)


def level_pairs(d_E: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(d_E), np.arange(d_E), indexing="ij")
    mask = i != j
    return np.stack([i[mask], j[mask]], axis=1)


def gap_catalog(dec: SpectralDecomposition, gap_tolerance: float | None = None) -> GapCatalog:
    if gap_tolerance is None:
        gap_tolerance = dec.degeneracy_tolerance
    tol_abs = gap_tolerance * max(1.0, dec.norm)
    if dec.d_E < 2:
        return GapCatalog(
            gaps=np.zeros(0), pairs=np.zeros((0, 2), dtype=np.int64), distinct_gaps=np.zeros(0),
            gap_multiplicities=np.zeros(0, dtype=np.int64), group_of=np.zeros(0, dtype=np.int64),
            g=1, eps_min=float("inf"), tolerance=tol_abs, d_E=dec.d_E, trivial=True,
            notes=["trivial dynamics: a single energy level"],
        )
    pairs = level_pairs(dec.d_E)
    E = dec.energies
    gaps = E[pairs[:, 0]] - E[pairs[:, 1]]
    order = np.argsort(gaps, kind="stable")
    sorted_gaps = gaps[order]
    labels = cluster_sorted(sorted_gaps, tol_abs)
    n_groups = int(labels[-1]) + 1
    lo = np.full(n_groups, np.inf)
    hi = np.full(n_groups, -np.inf)
    np.minimum.at(lo, labels, sorted_gaps)
    np.maximum.at(hi, labels, sorted_gaps)
    # midpoint keeps distinct values exactly antisymmetric
    distinct = 0.5 * (lo + hi)
    mult = np.bincount(labels, minlength=n_groups)
    group_of = np.empty_like(labels)
    group_of[order] = labels
    eps_min = float(np.min(np.diff(distinct))) if n_groups > 1 else float("inf")
    return GapCatalog(
        gaps=gaps, pairs=pairs, distinct_gaps=distinct, gap_multiplicities=mult,
        group_of=group_of, g=int(mult.max()), eps_min=eps_min, tolerance=tol_abs, d_E=dec.d_E,
    )


def gap_window_count(catalog: GapCatalog | np.ndarray, epsilon: float) -> int:
    """Largest number of gaps (with multiplicity) in any window ``[x, x + epsilon)``."""
    if epsilon <= 0:
        raise ValueError("window size must be positive")
    gaps = catalog.gaps if isinstance(catalog, GapCatalog) else np.asarray(catalog, dtype=float)
    if gaps.size == 0:
        return 0
    g = np.sort(gaps)
    start = np.searchsorted(g, g, side="left")
    stop = np.searchsorted(g, g + epsilon, side="left")
    return int(np.max(stop - start))


def window_concentration(values, weights, width: float, return_anchor: bool = False):
    """Maximum total weight inside a half-open window ``[x, x + width)``.

    Windows are anchored at the data points, which attains the maximum for a
    sum of point masses.  Ties resolve to the smallest anchor.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("window concentration of an empty distribution")
    if width <= 0:
        raise ValueError("window width must be positive")
    if values.shape != weights.shape:
        raise ValueError("values and weights differ in shape")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12 * max(1, weights.size) ** 0.5 + 1e-12:
        raise ValueError("weights must be a probability vector")
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    csum = np.concatenate(([0.0], np.cumsum(w)))
    start = np.searchsorted(v, v, side="left")
    stop = np.searchsorted(v, v + width, side="left")
    mass = csum[stop] - csum[start]
    best = int(np.argmax(mass))
    value = float(min(mass[best], 1.0))
    if return_anchor:
        return value, float(v[best])
    return value


@dataclass(frozen=True)
class Envelope:
    a: float
    delta: float
    sigma: float

    def __call__(self, T):
        return self.a / (self.sigma * np.asarray(T, dtype=float)) + self.delta


def fit_envelope(samples, sigma: float, max_weight: float | None = None) -> Envelope:
    """Constants ``(a, delta)`` with ``value <= a / (sigma T) + delta`` on every sample.

    ``delta`` is the largest single weight (the large-T floor); without it
    the smallest sampled value is used.
    """
    samples = [(float(T), float(v)) for T, v in samples]
    if len({T for T, _ in samples}) < 2:
        raise ValueError("need samples at two or more values of T")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    delta = float(max_weight) if max_weight is not None else min(v for _, v in samples)
    a = max(0.0, max((v - delta) * sigma * T for T, v in samples))
    return Envelope(a=a, delta=delta, sigma=sigma)


# ---------------------------------------------------------------------------
# density of states and matrix elements


@dataclass(frozen=True)
class DosDiagnostics:
    mean: float
    sigma: float
    ks_distance: float
    degenerate: bool


def dos_diagnostics(dec: SpectralDecomposition, state) -> DosDiagnostics:
    """Energy mean, spread and KS distance of the level populations to a Gaussian."""
    p = dec.populations(as_density_matrix(state) if np.asarray(state).ndim == 2 else state)
    E = dec.energies
    mean = float(np.dot(p, E))
    var = float(np.dot(p, (E - mean) ** 2))
    sigma = float(np.sqrt(max(var, 0.0)))
    if sigma <= dec.degeneracy_tolerance * max(1.0, dec.norm):
        return DosDiagnostics(mean, 0.0, 0.0, True)
    after = np.cumsum(p)
    before = after - p
    model = ndtr((E - mean) / sigma)
    ks = float(np.max(np.maximum(np.abs(after - model), np.abs(before - model))))
    return DosDiagnostics(mean, sigma, min(ks, 1.0), False)


@dataclass
class MatrixElementDecay:
    omega: np.ndarray
    magnitude: np.ndarray
    bin_edges: np.ndarray
    bin_max: np.ndarray
    bin_upper_decile: np.ndarray
    alpha: float
    R: float
    ls_violation_fraction: float
    violation_fraction: float
    trivial: bool


def matrix_element_decay(A_eig: np.ndarray, dec: SpectralDecomposition, n_bins: int = 24,
                         norm_A: float | None = None, floor: float = 1e-14) -> MatrixElementDecay:
    """Scatter of ``(|E_i - E_j|, |A_ij|)`` and an exponential envelope.

    The decay rate ``alpha`` is a least-squares fit of ``log|A_ij|`` over the
    upper decile of each energy-difference bin.  The offset ``R`` is then
    raised until the envelope ``||A|| exp(-alpha (w - 2R))`` covers every
    point, so ``violation_fraction`` is zero; ``ls_violation_fraction``
    reports the plain least-squares line.
    """
    A_eig = np.asarray(A_eig)
    E = dec.level_energy_per_column
    lv = dec.level_of
    iu, ju = np.triu_indices(dec.d_T, k=1)
    keep = lv[iu] != lv[ju]
    iu, ju = iu[keep], ju[keep]
    omega = np.abs(E[iu] - E[ju])
    mag = np.abs(A_eig[iu, ju])
    if norm_A is None:
        norm_A = float(np.max(np.abs(np.linalg.eigvalsh(A_eig)))) if A_eig.size else 0.0
    empty = np.zeros(0)
    if mag.size == 0 or np.max(mag, initial=0.0) <= floor * max(1.0, norm_A):
        return MatrixElementDecay(omega, mag, empty, empty, empty, float("inf"), 0.0, 0.0, 0.0, True)
    edges = np.linspace(0.0, omega.max() * (1 + 1e-12), n_bins + 1)
    idx = np.clip(np.digitize(omega, edges) - 1, 0, n_bins - 1)
    bin_max = np.full(n_bins, np.nan)
    bin_q = np.full(n_bins, np.nan)
    xs, ys = [], []
    for b in range(n_bins):
        sel = (idx == b) & (mag > floor)
        if not np.any(sel):
            continue
        m = mag[sel]
        bin_max[b] = m.max()
        q = np.quantile(m, 0.9)
        bin_q[b] = q
        top = sel & (mag >= q)
        xs.append(omega[top])
        ys.append(np.log(mag[top]))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if np.ptp(x) > 0:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = 0.0, float(np.mean(y))
    alpha = float(-slope)
    live = mag > floor
    ls_line = intercept + slope * omega[live]
    ls_viol = float(np.mean(np.log(mag[live]) > ls_line + 1e-12))
    lifted = float(np.max(np.log(mag[live]) + alpha * omega[live]))
    log_norm = np.log(norm_A) if norm_A > 0 else 0.0
    R = (lifted - log_norm) / (2 * alpha) if alpha != 0 else float("inf")
    envelope = log_norm - alpha * (omega[live] - 2 * R) if alpha != 0 else np.full(live.sum(), lifted)
    viol = float(np.mean(np.log(mag[live]) > envelope + 1e-9))
    return MatrixElementDecay(omega, mag, edges, bin_max, bin_q, alpha, float(R), ls_viol, viol, False)
