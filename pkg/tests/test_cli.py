from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

from equilibration.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main
from equilibration.verification import VERIFIED_BOUNDS

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"

BASE = """\
name: t
system:
  N: {N}
  model: {{name: xxz_nnn, Jxy: 1.0, Jz: 1.0, J2: 0.5}}
  sector: 0
observable: {{kind: site_pauli, site: {site}, axis: Z}}
tasks:
{tasks}"""


@pytest.fixture(autouse=True)
def _cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EQUILIBRATION_CACHE_DIR", str(tmp_path / "cache"))


def _write(tmp_path, text, name="run.yaml") -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


def _config(tmp_path, tasks: str, N: int = 6) -> Path:
    return _write(tmp_path, BASE.format(N=N, site=N // 2, tasks=tasks))


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _same_token(a: str, b: str) -> bool:
    if a == b:
        return True
    try:
        x, y = float(a), float(b)
    except ValueError:
        return False
    return math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-12)


def _same_json(a, b) -> bool:
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_same_json(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(_same_json(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, (int, float)):
        return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)
    return a == b


def test_golden_tiny_n2(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(CONFIGS / "tiny_n2.yaml"), "--output-dir", str(out)]) == EXIT_OK
    golden = sorted(p.relative_to(GOLDEN / "tiny_n2") for p in (GOLDEN / "tiny_n2").rglob("*") if p.is_file())
    produced = sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    assert produced == golden
    for rel in golden:
        want, got = (GOLDEN / "tiny_n2" / rel).read_text(), (out / rel).read_text()
        if rel.suffix == ".json":
            assert _same_json(json.loads(want), json.loads(got)), rel
            continue
        wl, gl = want.splitlines(), got.splitlines()
        assert len(wl) == len(gl), rel
        for w, g in zip(wl, gl):
            wt, gt = w.split(","), g.split(",")
            assert len(wt) == len(gt) and all(_same_token(x, y) for x, y in zip(wt, gt)), (rel, w, g)


def test_tiny_n2_decay_against_kronecker(tmp_path):
    out = tmp_path / "out"
    main(["run", str(CONFIGS / "tiny_n2.yaml"), "--output-dir", str(out)])
    X = np.array([[0, 1], [1, 0]])
    Z = np.diag([1.0, -1.0])
    I = np.eye(2)
    H = np.kron(Z, Z) + 0.5 * (np.kron(X, I) + np.kron(I, X))
    A = np.kron(Z, I)
    psi = np.array([1.0, 0, 0, 0])
    for row in _read_csv(out / "01_dynamics" / "decay.csv"):
        phi = expm(-1j * H * float(row["t"])) @ psi
        assert float(row["expectation"]) == pytest.approx(np.real(np.vdot(phi, A @ phi)), abs=1e-12)


def test_second_run_hits_cache(tmp_path):
    cfg = _config(tmp_path, "  - spectrum: {}\n")
    for i, hit in enumerate((False, True)):
        out = tmp_path / f"o{i}"
        assert main(["run", str(cfg), "--output-dir", str(out)]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["cache"]["hit"] is hit
    a = (tmp_path / "o0" / "00_spectrum" / "spectrum.csv").read_bytes()
    assert a == (tmp_path / "o1" / "00_spectrum" / "spectrum.csv").read_bytes()


def test_manifest_contents(tmp_path):
    cfg = _config(tmp_path, "  - spectrum: {}\n")
    out = tmp_path / "out"
    main(["run", str(cfg), "--output-dir", str(out)])
    m = json.loads((out / "manifest.json").read_text())
    assert m["tool"] == "equilibration" and m["violations"] == 0
    assert {a["path"] for a in m["artifacts"]} >= {"00_spectrum/spectrum.csv", "COLUMNS.txt"}
    import hashlib
    for a in m["artifacts"]:
        assert hashlib.sha256((out / a["path"]).read_bytes()).hexdigest() == a["sha256"]


def test_verify_n8_exits_zero(tmp_path):
    out = tmp_path / "out"
    assert main(["verify", str(CONFIGS / "xxz_n8_verify.yaml"), "--output-dir", str(out)]) == EXIT_OK


def test_verify_detects_scaled_rhs(tmp_path, capsys):
    cfg = _config(tmp_path, "  - bounds: {T: [1.0], infinite_samples: 2000, rhs_scale: 1.0e-6}\n")
    out = tmp_path / "out"
    assert main(["verify", str(cfg), "--output-dir", str(out)]) == EXIT_VIOLATION
    assert "VIOLATION" in capsys.readouterr().err
    assert json.loads((out / "manifest.json").read_text())["violations"] > 0
    # run reports but does not fail
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o2")]) == EXIT_OK


def test_empty_task_list_writes_only_manifest(tmp_path):
    cfg = _write(tmp_path, "name: empty\ntasks: []\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]


def test_three_snapshots_three_files(tmp_path):
    cfg = _config(tmp_path, "  - cloud: {T: 10.0, times: [0.0, 1.0, 2.0]}\n")
    out = tmp_path / "out"
    main(["run", str(cfg), "--output-dir", str(out)])
    files = sorted(p.name for p in (out / "00_cloud").iterdir())
    assert files == ["cloud_0.csv", "cloud_1.csv", "cloud_2.csv", "cloud_index.csv"]
    index = _read_csv(out / "00_cloud" / "cloud_index.csv")
    assert [float(r["t"]) for r in index] == [0.0, 1.0, 2.0]


def test_bound_rows_are_bounds_times_T(tmp_path):
    cfg = _config(tmp_path, "  - bounds: {T: [1.0, 5.0, 50.0], infinite_samples: 2000}\n")
    out = tmp_path / "out"
    assert main(["verify", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    rows = _read_csv(out / "00_bounds" / "bounds.csv")
    assert len(rows) == len(VERIFIED_BOUNDS) * 3
    assert {r["bound_name"] for r in rows} == set(VERIFIED_BOUNDS)
    assert all(r["satisfied"] == "true" for r in rows)


def test_figures_opt_in(tmp_path):
    cfg = _config(tmp_path, "  - dynamics: {times: {start: 0.0, stop: 4.0, num: 41}}\n", N=4)
    out = tmp_path / "out"
    main(["run", str(cfg), "--output-dir", str(out), "--figures"])
    assert (out / "00_dynamics" / "decay.png").stat().st_size > 0
    out2 = tmp_path / "out2"
    main(["run", str(cfg), "--output-dir", str(out2)])
    assert not (out2 / "00_dynamics" / "decay.png").exists()


def test_seed_override_changes_ensemble(tmp_path):
    cfg = _write(tmp_path, "tasks:\n  - ensemble: {kind: reimann_F, trials: 30, params: {d: 8}, seed: 5}\n")
    a, b, c = (tmp_path / x for x in "abc")
    main(["run", str(cfg), "--output-dir", str(a)])
    main(["run", str(cfg), "--output-dir", str(b)])
    main(["run", str(cfg), "--output-dir", str(c), "--seed", "99"])
    name = "00_ensemble/ensemble_reimann_F.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / name).read_bytes() != (c / name).read_bytes()


def test_usage_errors(tmp_path, capsys):
    bad = _write(tmp_path, "system: {N: 4, model: {name: isingg}}\ntasks: []\n")
    assert main(["run", str(bad)]) == EXIT_USAGE
    assert "did you mean" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == EXIT_USAGE
    assert main(["run", str(bad), "--threads", "0"]) == EXIT_USAGE
    assert main(["run", str(bad), "--seed", "-1"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_cache_command(tmp_path, capsys):
    cfg = _config(tmp_path, "  - spectrum: {}\n", N=4)
    main(["run", str(cfg), "--output-dir", str(tmp_path / "out")])
    capsys.readouterr()
    assert main(["cache", "--list"]) == EXIT_OK
    assert len(capsys.readouterr().out.strip().splitlines()) == 1
    assert main(["cache", "--clear"]) == EXIT_OK
    assert "removed 1" in capsys.readouterr().out
