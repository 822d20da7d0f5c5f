from __future__ import annotations

import numpy as np
import pytest

from equilibration.cache import CacheCorrupt, DecompositionCache, cache_key, decode, encode, resolve_cache_dir
from equilibration.model import SpinChainSpec, TransverseIsing, XXZNNN, build_hamiltonian
from equilibration.spectral import diagonalize


@pytest.fixture
def chain_dec():
    chain = SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5), sector=0)
    return chain, diagonalize(build_hamiltonian(chain))


def test_round_trip_is_bitwise(chain_dec):
    _, dec = chain_dec
    back = decode(encode(dec))
    for name in ("energies", "multiplicities", "eigenvalues", "eigenvectors", "level_of"):
        assert np.array_equal(getattr(back, name), getattr(dec, name)), name
    assert back.degeneracy_tolerance == dec.degeneracy_tolerance and back.norm == dec.norm


def test_store_and_load(tmp_path, chain_dec):
    chain, dec = chain_dec
    cache = DecompositionCache(tmp_path)
    key = cache_key(chain, {"degeneracy": 1e-9})
    assert cache.load(key) is None
    cache.store(key, dec)
    assert np.array_equal(cache.load(key).eigenvectors, dec.eigenvectors)
    assert [k for k, _ in cache.entries()] == [key]
    assert not list(tmp_path.glob("*.tmp"))
    assert cache.clear() == 1 and cache.entries() == []


def test_corrupt_entry_recovers(tmp_path, chain_dec, caplog):
    chain, dec = chain_dec
    cache = DecompositionCache(tmp_path)
    key = cache_key(chain, {"degeneracy": 1e-9})
    cache.store(key, dec)
    blob = cache.path(key).read_bytes()
    cache.path(key).write_bytes(blob[: len(blob) // 2])
    assert cache.load(key) is None
    assert "corrupt" in caplog.text
    cache.path(key).write_bytes(b"XXXX" + blob[4:])
    assert cache.load(key) is None
    with pytest.raises(CacheCorrupt):
        decode(b"EQ")


def test_key_sensitivity():
    base = SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5), sector=0)
    k = cache_key(base, {"degeneracy": 1e-9})
    assert k == cache_key(SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5), sector=0), {"degeneracy": 1e-9})
    others = [
        cache_key(SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5000001), sector=0), {"degeneracy": 1e-9}),
        cache_key(SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5), sector=1), {"degeneracy": 1e-9}),
        cache_key(SpinChainSpec(6, XXZNNN(1.0, 1.0, 0.5), boundary="periodic", sector=0), {"degeneracy": 1e-9}),
        cache_key(SpinChainSpec(6, TransverseIsing(1.0, 0.5)), {"degeneracy": 1e-9}),
        cache_key(base, {"degeneracy": 1e-8}),
    ]
    assert len({k, *others}) == 6
    assert len(k) == 32


def test_env_var_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("EQUILIBRATION_CACHE_DIR", str(tmp_path / "env"))
    assert resolve_cache_dir("configured") == tmp_path / "env"
    monkeypatch.delenv("EQUILIBRATION_CACHE_DIR")
    assert str(resolve_cache_dir("configured")) == "configured"
