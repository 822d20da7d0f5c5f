"""CSV / JSON writers and the run manifest.

Floats are written with ``%.17g`` so every value round-trips exactly and
identical runs produce identical bytes.  The manifest's ``created`` field is
the only run-dependent content.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FLOAT_FORMAT = "%.17g"

COLUMN_DOCS = {
    "spectrum.csv": ["level: level index (ascending energy)", "energy: level energy",
                     "multiplicity: degeneracy of the level", "population: tr(P_k rho(0))"],
    "gaps.csv": ["gap: distinct gap value G", "multiplicity: number of level pairs with this gap",
                 "re_z / im_z: grouped amplitude z_G"],
    "decay.csv": ["t: time", "expectation: tr(rho(t) A)", "delta_A: tr(rho(t) A) - tr(omega A)",
                  "envelope_prediction: delta_A(0) exp(-(t/tau)^2) with tau = sqrt(2)/s"],
    "cloud_<i>.csv": ["t: snapshot time", "G: gap grid point", "re_z / im_z: smoothed rotated amplitude"],
    "cloud_index.csv": ["index: snapshot number", "t: snapshot time", "T: smoothing window",
                        "file: snapshot file", "sum_re / sum_im: sum of points", "circular_variance"],
    "bounds.csv": ["bound_name", "T: averaging window", "lhs: measured quantity", "rhs: bound value",
                   "satisfied: lhs <= rhs (1 + 1e-9)", "slack: rhs - lhs"],
    "ensemble_<kind>.csv": ["axis value (t or T)", "mean: sample mean over trials", "std_error"],
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FORMAT % float(x)
    return str(x)


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class Emitter:
    """Writes artifacts under ``root`` and records them for the manifest."""

    root: Path
    artifacts: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path, task: str, inputs: dict | None):
        self.artifacts.append({"path": path.relative_to(self.root).as_posix(), "task": task,
                               "inputs": to_jsonable(inputs or {}), "sha256": sha256(path)})

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence], task: str,
            inputs: dict | None = None) -> Path:
        path = self.root / name
        lines = [",".join(header)]
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        self._record(path, task, inputs)
        return path

    def json(self, name: str, obj, task: str, inputs: dict | None = None) -> Path:
        path = self.root / name
        path.write_text(dumps(obj), encoding="utf-8")
        self._record(path, task, inputs)
        return path

    def figure(self, name: str, fig, task: str, inputs: dict | None = None) -> Path:
        path = self.root / name
        fig.savefig(path, metadata={"Software": None, "Creation Time": None} if path.suffix == ".png" else None)
        self._record(path, task, inputs)
        return path

    def column_docs(self) -> Path:
        path = self.root / "COLUMNS.txt"
        out = []
        for name, cols in COLUMN_DOCS.items():
            out.append(name)
            out.extend(f"  {c}" for c in cols)
        path.write_text("\n".join(out) + "\n", encoding="utf-8")
        self._record(path, "docs", None)
        return path

    def manifest(self, config: dict, version: str, extra: dict | None = None,
                 created: str | None = None) -> Path:
        created = created or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        body = {"tool": "equilibration", "version": version, "created": created, "config": config,
                "artifacts": self.artifacts}
        body.update(extra or {})
        path = self.root / "manifest.json"
        path.write_text(dumps(body), encoding="utf-8")
        return path


def bound_rows(reports) -> list[list]:
    return [[r.bound_name, r.inputs.get("T", math.inf), r.lhs_measured, r.rhs_bound, r.satisfied, r.slack]
            for r in reports]


BOUND_HEADER = ("bound_name", "T", "lhs", "rhs", "satisfied", "slack")
