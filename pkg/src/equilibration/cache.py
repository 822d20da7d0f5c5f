"""On-disk cache of spectral decompositions.

File layout (all little-endian)::

    magic      4 bytes   b"EQDC"
    version    uint32
    d_T        uint64
    d_E        uint64
    tolerance  float64   degeneracy tolerance
    norm       float64   operator-norm scale used for clustering
    eigenvalues            d_T x float64
    level_of               d_T x int64
    eigenvectors (real)    d_T*d_T x float64, row-major
    eigenvectors (imag)    d_T*d_T x float64, row-major

Entries are written to a temporary file and renamed into place, so readers
never see a partial file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .model import SpinChainSpec
from .spectral import SpectralDecomposition

log = logging.getLogger(__name__)

MAGIC = b"EQDC"
VERSION = 1
_HEADER = struct.Struct("<4sIQQdd")
CACHE_ENV = "EQUILIBRATION_CACHE_DIR"
DEFAULT_CACHE_DIR = Path.home() / ".cache" / "equilibration"


class CacheCorrupt(RuntimeError):
    pass


def _canonical(obj):
    if is_dataclass(obj):
        return {"type": type(obj).__name__, **{k: _canonical(v) for k, v in asdict(obj).items()}}
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


def cache_key(chain: SpinChainSpec, tolerances: dict) -> str:
    """128-bit content hash (hex) of the chain and the clustering tolerances."""
    payload = json.dumps({"chain": _canonical(chain), "tolerances": _canonical(tolerances)},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(payload.encode(), digest_size=16).hexdigest()


def resolve_cache_dir(configured: str | os.PathLike | None) -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(configured) if configured else DEFAULT_CACHE_DIR


def encode(dec: SpectralDecomposition) -> bytes:
    d = dec.d_T
    V = np.ascontiguousarray(dec.eigenvectors, dtype=complex)
    parts = [
        _HEADER.pack(MAGIC, VERSION, d, dec.d_E, float(dec.degeneracy_tolerance), float(dec.norm)),
        np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes(),
        np.ascontiguousarray(dec.level_of, dtype="<i8").tobytes(),
        np.ascontiguousarray(V.real, dtype="<f8").tobytes(),
        np.ascontiguousarray(V.imag, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def decode(blob: bytes) -> SpectralDecomposition:
    if len(blob) < _HEADER.size:
        raise CacheCorrupt("truncated header")
    magic, version, d, d_E, tol, norm = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION:
        raise CacheCorrupt("bad magic or version")
    expected = _HEADER.size + 8 * d * 2 + 16 * d * d
    if len(blob) != expected:
        raise CacheCorrupt(f"size {len(blob)} != expected {expected}")
    off = _HEADER.size
    evals = np.frombuffer(blob, "<f8", d, off).astype(float)
    off += 8 * d
    level_of = np.frombuffer(blob, "<i8", d, off).astype(np.int64)
    off += 8 * d
    re = np.frombuffer(blob, "<f8", d * d, off).reshape(d, d)
    im = np.frombuffer(blob, "<f8", d * d, off + 8 * d * d).reshape(d, d)
    if not (np.all(np.isfinite(evals)) and np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        raise CacheCorrupt("non-finite payload")
    if d and (level_of.min() < 0 or level_of.max() != d_E - 1 or np.any(np.diff(level_of) < 0)):
        raise CacheCorrupt("inconsistent level labels")
    counts = np.bincount(level_of, minlength=d_E)
    # same reduction as diagonalize(), so cached and fresh runs agree bitwise
    energies = np.bincount(level_of, weights=evals, minlength=d_E) / counts
    V = np.empty((d, d), dtype=complex)
    V.real, V.imag = re, im
    return SpectralDecomposition(energies=energies, multiplicities=counts, eigenvalues=evals, eigenvectors=V,
                                 level_of=level_of, degeneracy_tolerance=tol, norm=float(norm))


class DecompositionCache:
    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.eqdc"

    def load(self, key: str) -> SpectralDecomposition | None:
        p = self.path(key)
        if not p.exists():
            return None
        try:
            return decode(p.read_bytes())
        except (CacheCorrupt, ValueError) as exc:
            log.warning("cache entry %s is corrupt (%s); recomputing", p.name, exc)
            return None

    def store(self, key: str, dec: SpectralDecomposition) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.path(key)
        fd, tmp = tempfile.mkstemp(prefix=f".{key}.", suffix=".tmp", dir=self.directory)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode(dec))
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target

    def entries(self) -> list[tuple[str, int]]:
        if not self.directory.exists():
            return []
        return sorted((p.stem, p.stat().st_size) for p in self.directory.glob("*.eqdc"))

    def clear(self) -> int:
        n = 0
        for p in self.directory.glob("*.eqdc") if self.directory.exists() else []:
            p.unlink()
            n += 1
        return n
