"""Hamiltonians, observables and initial states for small spin-1/2 chains.

Conventions used throughout the package:

* Computational basis state ``|b>`` with site 0 stored in the most significant
  bit of the integer ``b``.  Bit value 0 is spin up, i.e. ``Z|0> = +|0>``.
* All operators are built from Pauli matrices (no factors of 1/2).
* A magnetization sector is labelled by ``Sz = sum_x Z_x / 2``; its basis is
  the set of computational states with popcount ``N/2 - Sz`` in ascending
  integer order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
import scipy.sparse as sp

PAULI_LETTERS = "IXYZ"
HERMITICITY_TOL = 1e-12
MAX_FULL_SPACE_SITES = 12


class ModelError(ValueError):
    """Invalid chain, observable or state description."""


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    string: str

    def __post_init__(self):
        if isinstance(self.coefficient, complex):
            if self.coefficient.imag != 0.0:
                raise ModelError(
                    f"complex coefficient on {self.string!r} makes the term non-Hermitian"
                )
            object.__setattr__(self, "coefficient", self.coefficient.real)
        if not np.isfinite(self.coefficient):
            raise ModelError(f"non-finite coefficient in Pauli term {self.string!r}")
        bad = set(self.string) - set(PAULI_LETTERS)
        if bad:
            raise ModelError(f"Pauli string {self.string!r} contains {sorted(bad)}")


@dataclass(frozen=True)
class XXZNNN:
    """Anisotropic chain with nearest and next-nearest neighbour couplings.

    ``H = sum_i Jxy (X_i X_{i+1} + Y_i Y_{i+1}) + Jz Z_i Z_{i+1}
        + sum_i J2 (X_i X_{i+2} + Y_i Y_{i+2}) + J2z Z_i Z_{i+2}``

    ``J2z`` defaults to ``J2`` (isotropic next-nearest coupling).
    """

    Jxy: float = 1.0
    Jz: float = 1.0
    J2: float = 0.5
    J2z: float | None = None

    @property
    def nnn_zz(self) -> float:
        return self.J2 if self.J2z is None else self.J2z


@dataclass(frozen=True)
class TransverseIsing:
    """``H = J sum_i Z_i Z_{i+1} + h sum_i X_i``."""

    J: float = 1.0
    h: float = 1.0


@dataclass(frozen=True)
class CustomModel:
    terms: tuple[PauliTerm, ...]


@dataclass(frozen=True)
class Disorder:
    """Random longitudinal fields ``W * w_x * Z_x`` with ``w_x ~ U[-1, 1]``."""

    strength: float
    seed: int


@dataclass(frozen=True)
class SpinChainSpec:
    N: int
    model: XXZNNN | TransverseIsing | CustomModel = field(default_factory=XXZNNN)
    boundary: str = "open"
    disorder: Disorder | None = None
    sector: float | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ModelError(f"chain needs N >= 2 sites, got {self.N}")
        if self.boundary not in ("open", "periodic"):
            raise ModelError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.sector is None and self.N > MAX_FULL_SPACE_SITES:
            raise ModelError(
                f"N={self.N} exceeds the full-space limit of {MAX_FULL_SPACE_SITES} sites; "
                "request a magnetization sector"
            )
        if self.sector is not None:
            popcount_of_sector(self.N, self.sector)

    @property
    def dim(self) -> int:
        if self.sector is None:
            return 2**self.N
        return comb(self.N, popcount_of_sector(self.N, self.sector))


# ---------------------------------------------------------------------------
# basis helpers


def popcount_of_sector(N: int, sz: float) -> int:
    k = N / 2 - sz
    if abs(k - round(k)) > 1e-12 or not 0 <= round(k) <= N:
        raise ModelError(f"Sz={sz} is not a valid magnetization for N={N}")
    return int(round(k))


def sector_basis(N: int, sz: float) -> np.ndarray:
    """Computational basis indices of the ``Sz`` sector, ascending."""
    k = popcount_of_sector(N, sz)
    states = np.arange(2**N, dtype=np.int64)
    return states[popcount(states) == k]


def popcount(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.int64)
    count = np.zeros_like(states)
    s = states.copy()
    while np.any(s):
        count += s & 1
        s >>= 1
    return count


def bits_to_index(bits: str) -> int:
    if not bits or set(bits) - {"0", "1"}:
        raise ModelError(f"bit string {bits!r} must be a non-empty string over 0/1")
    return int(bits, 2)


def site_bit(states: np.ndarray, site: int, N: int) -> np.ndarray:
    return (np.asarray(states) >> (N - 1 - site)) & 1


def _basis(chain: SpinChainSpec) -> np.ndarray | None:
    return None if chain.sector is None else sector_basis(chain.N, chain.sector)


# ---------------------------------------------------------------------------
# Pauli-string lifting


def pauli_string_sparse(string: str, coefficient: complex = 1.0) -> sp.coo_matrix:
    """Full-space sparse matrix of ``coefficient * P_0 (x) P_1 (x) ...``."""
    N = len(string)
    dim = 2**N
    states = np.arange(dim, dtype=np.int64)
    flip = 0
    phase = np.full(dim, complex(coefficient))
    for site, letter in enumerate(string):
        if letter == "I":
            continue
        bit = site_bit(states, site, N)
        sign = 1 - 2 * bit
        if letter == "X":
            flip |= 1 << (N - 1 - site)
        elif letter == "Y":
            flip |= 1 << (N - 1 - site)
            phase = phase * (1j * sign)
        else:
            phase = phase * sign
    return sp.coo_matrix((phase, (states ^ flip, states)), shape=(dim, dim))


def _place(N: int, ops: dict[int, str]) -> str:
    letters = ["I"] * N
    for site, letter in ops.items():
        letters[site] = letter
    return "".join(letters)


def _bonds(N: int, distance: int, boundary: str) -> list[tuple[int, int]]:
    if boundary == "open":
        return [(i, i + distance) for i in range(N - distance)]
    return [(i, (i + distance) % N) for i in range(N) if (i + distance) % N != i]


def chain_terms(spec: SpinChainSpec) -> list[PauliTerm]:
    """Expand a chain description into its Pauli terms (disorder included)."""
    N, model = spec.N, spec.model
    terms: list[PauliTerm] = []
    if isinstance(model, XXZNNN):
        for distance, jxy, jz in ((1, model.Jxy, model.Jz), (2, model.J2, model.nnn_zz)):
            for i, j in _bonds(N, distance, spec.boundary):
                for axis, c in (("X", jxy), ("Y", jxy), ("Z", jz)):
                    if c != 0.0:
                        terms.append(PauliTerm(float(c), _place(N, {i: axis, j: axis})))
    elif isinstance(model, TransverseIsing):
        for i, j in _bonds(N, 1, spec.boundary):
            if model.J != 0.0:
                terms.append(PauliTerm(float(model.J), _place(N, {i: "Z", j: "Z"})))
        if model.h != 0.0:
            terms.extend(PauliTerm(float(model.h), _place(N, {i: "X"})) for i in range(N))
    elif isinstance(model, CustomModel):
        for term in model.terms:
            if len(term.string) != N:
                raise ModelError(f"Pauli string {term.string!r} has length != N={N}")
        terms.extend(model.terms)
    else:
        raise ModelError(f"unknown model {model!r}")
    if spec.disorder is not None:
        fields = disorder_fields(N, spec.disorder)
        terms.extend(PauliTerm(float(w), _place(N, {i: "Z"})) for i, w in enumerate(fields))
    return terms


def disorder_fields(N: int, disorder: Disorder) -> np.ndarray:
    rng = np.random.default_rng(disorder.seed)
    return disorder.strength * rng.uniform(-1.0, 1.0, size=N)


def terms_sparse(terms: Sequence[PauliTerm], N: int) -> sp.csr_matrix:
    dim = 2**N
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for term in terms:
        out = out + pauli_string_sparse(term.string, term.coefficient).tocsr()
    return out


def _off_sector_norm(M: sp.spmatrix, N: int) -> float:
    """Frobenius norm of the elements of ``M`` connecting different Sz sectors."""
    coo = M.tocoo()
    counts = popcount(np.arange(2**N))
    mask = counts[coo.row] != counts[coo.col]
    return float(np.sqrt(np.sum(np.abs(coo.data[mask]) ** 2)))


def _restrict(M: sp.spmatrix, basis: np.ndarray | None) -> np.ndarray:
    M = M.tocsr()
    if basis is not None:
        M = M[basis][:, basis]
    return M.toarray()


def _hermitian_check(M: np.ndarray, what: str) -> None:
    dev = np.max(np.abs(M - M.conj().T)) if M.size else 0.0
    if dev > HERMITICITY_TOL:
        raise ModelError(f"{what} is not Hermitian (max |M - M^dag| = {dev:.3e})")


def build_hamiltonian(spec: SpinChainSpec) -> np.ndarray:
    """Dense Hamiltonian of the chain, restricted to ``spec.sector`` if set."""
    H = terms_sparse(chain_terms(spec), spec.N)
    if spec.sector is not None:
        leak = _off_sector_norm(H, spec.N)
        if leak > 1e-12:
            raise ModelError(
                f"Hamiltonian does not conserve total Z (off-sector norm {leak:.3e}); "
                "sector restriction impossible"
            )
    out = _restrict(H, _basis(spec))
    _hermitian_check(out, "Hamiltonian")
    if np.all(out.imag == 0):
        out = np.ascontiguousarray(out.real)
    return out


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class ObservableSpec:
    """One of ``site_pauli``, ``magnetization``, ``imbalance``, ``projector``, ``custom``.

    ``imbalance`` is ``(sum_even Z - sum_odd Z) / N`` with sites counted from 1,
    so the alternating state ``|0101...>`` has imbalance -1.
    """

    kind: str
    site: int | None = None
    axis: str = "Z"
    states: tuple[str, ...] = ()
    terms: tuple[PauliTerm, ...] = ()


def observable_terms(spec: ObservableSpec, N: int) -> list[PauliTerm]:
    if spec.kind == "site_pauli":
        if spec.site is None or not 0 <= spec.site < N:
            raise ModelError(f"site {spec.site} out of range [0, {N})")
        if spec.axis not in ("X", "Y", "Z"):
            raise ModelError(f"axis must be X, Y or Z, got {spec.axis!r}")
        return [PauliTerm(1.0, _place(N, {spec.site: spec.axis}))]
    if spec.kind == "magnetization":
        return [PauliTerm(1.0 / N, _place(N, {i: "Z"})) for i in range(N)]
    if spec.kind == "imbalance":
        # site index i is site i + 1 in the even/odd labelling
        return [PauliTerm((1.0 if i % 2 == 1 else -1.0) / N, _place(N, {i: "Z"})) for i in range(N)]
    if spec.kind == "custom":
        for term in spec.terms:
            if len(term.string) != N:
                raise ModelError(f"Pauli string {term.string!r} has length != N={N}")
        return list(spec.terms)
    raise ModelError(f"observable kind {spec.kind!r} has no Pauli expansion")


def build_observable(
    spec: ObservableSpec, chain: SpinChainSpec | int, full_space: bool = False
) -> np.ndarray:
    """Dense observable on the chain's working space (sector or full).

    ``chain`` may also be a bare site count, meaning the full ``2**N`` space.
    """
    if isinstance(chain, (int, np.integer)):
        if chain < 1:
            raise ModelError(f"need at least one site, got {chain}")
        N, basis = int(chain), None
    else:
        N = chain.N
        basis = None if full_space else _basis(chain)
    if spec.kind == "projector":
        if not spec.states:
            raise ModelError("projector observable needs at least one basis state")
        idx = []
        for bits in spec.states:
            if len(bits) != N:
                raise ModelError(f"basis state {bits!r} has length != N={N}")
            idx.append(bits_to_index(bits))
        diag = np.zeros(2**N)
        diag[idx] = 1.0
        if basis is not None:
            outside = set(idx) - set(basis.tolist())
            if outside:
                raise ModelError("projector states lie outside the magnetization sector")
            diag = diag[basis]
        return np.diag(diag)
    A = terms_sparse(observable_terms(spec, N), N)
    if basis is not None:
        leak = _off_sector_norm(A, N)
        if leak > 1e-12:
            raise ModelError(
                f"observable does not commute with total Z (off-sector norm {leak:.3e}); "
                "build it with full_space=True"
            )
    out = _restrict(A, basis)
    _hermitian_check(out, "observable")
    if np.all(out.imag == 0):
        out = np.ascontiguousarray(out.real)
    return out


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StateSpec:
    """One of ``product``, ``cdw``, ``amplitude_vector``, ``mixed_system_bath``.

    ``mixed_system_bath`` places ``system_bits`` on the leading sites and a
    maximally mixed state on the remaining ``N - len(system_bits)`` sites.
    """

    kind: str
    bits: str | None = None
    amplitudes: tuple[complex, ...] = ()
    system_bits: str | None = None


def cdw_bits(N: int) -> str:
    return "".join("01"[i % 2] for i in range(N))


def build_state(spec: StateSpec, chain: SpinChainSpec) -> np.ndarray:
    """Normalized state vector, or density matrix for ``mixed_system_bath``."""
    N = chain.N
    basis = _basis(chain)
    if spec.kind in ("product", "cdw"):
        bits = cdw_bits(N) if spec.kind == "cdw" else spec.bits
        if bits is None or len(bits) != N:
            raise ModelError(f"product state needs a bit string of length {N}")
        index = bits_to_index(bits)
        if basis is not None:
            pos = np.searchsorted(basis, index)
            if pos >= len(basis) or basis[pos] != index:
                raise ModelError(f"state |{bits}> lies outside the magnetization sector")
            index = int(pos)
        psi = np.zeros(chain.dim, dtype=complex)
        psi[index] = 1.0
        return psi
    if spec.kind == "amplitude_vector":
        psi = np.asarray(spec.amplitudes, dtype=complex)
        if psi.shape != (chain.dim,):
            raise ModelError(f"amplitude vector has length {psi.size}, expected {chain.dim}")
        norm = np.linalg.norm(psi)
        if not np.isfinite(norm) or norm == 0.0:
            raise ModelError("amplitude vector is not normalizable")
        return psi / norm
    if spec.kind == "mixed_system_bath":
        if basis is not None:
            raise ModelError("mixed_system_bath states require the full space (no sector)")
        bits = spec.system_bits
        if not bits or len(bits) >= N:
            raise ModelError("system_bits must cover between 1 and N-1 leading sites")
        sys_state = np.zeros(2 ** len(bits))
        sys_state[bits_to_index(bits)] = 1.0
        d_B = 2 ** (N - len(bits))
        return np.kron(np.diag(sys_state), np.eye(d_B) / d_B).astype(complex)
    raise ModelError(f"unknown state kind {spec.kind!r}")


def as_density_matrix(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def embed_sector(state: np.ndarray, chain: SpinChainSpec) -> np.ndarray:
    """Lift a sector vector or density matrix to the full ``2**N`` space."""
    basis = _basis(chain)
    if basis is None:
        return np.asarray(state)
    dim = 2**chain.N
    state = np.asarray(state)
    if state.ndim == 1:
        out = np.zeros(dim, dtype=complex)
        out[basis] = state
        return out
    out = np.zeros((dim, dim), dtype=complex)
    out[np.ix_(basis, basis)] = state
    return out


def operator_norm(M: np.ndarray) -> float:
    """Largest singular value (eigenvalue magnitude for Hermitian input)."""
    return float(np.max(np.abs(np.linalg.eigvalsh(M)))) if M.size else 0.0
