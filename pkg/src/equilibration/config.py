"""Strict YAML run configuration.

Unknown keys, wrong types and out-of-range values are rejected with the
path to the offending field and its line in the source file.
"""

from __future__ import annotations

import difflib
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics import DEFAULT_PAIR_BUDGET
from .ensembles import EXPERIMENTS
from .model import (
    CustomModel,
    Disorder,
    ObservableSpec,
    PauliTerm,
    SpinChainSpec,
    StateSpec,
    TransverseIsing,
    XXZNNN,
)
from .spectral import DEFAULT_DEGENERACY_TOL

MODEL_NAMES = ("xxz_nnn", "transverse_ising", "custom")
_MODEL_PARAMS = {
    "xxz_nnn": {"Jxy", "Jz", "J2", "J2z"},
    "transverse_ising": {"J", "h"},
    "custom": {"terms"},
}


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TermConfig(_Strict):
    coefficient: float
    string: str


class ModelConfig(_Strict):
    name: str
    Jxy: Optional[float] = None
    Jz: Optional[float] = None
    J2: Optional[float] = None
    J2z: Optional[float] = None
    J: Optional[float] = None
    h: Optional[float] = None
    terms: Optional[list[TermConfig]] = None

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in MODEL_NAMES:
            close = difflib.get_close_matches(v, MODEL_NAMES, n=3, cutoff=0.4)
            hint = f"; did you mean {', '.join(repr(c) for c in close)}?" if close else ""
            raise ValueError(f"unknown model {v!r}{hint} (valid: {', '.join(MODEL_NAMES)})")
        return v

    @model_validator(mode="after")
    def _params_match(self):
        given = {k for k in ("Jxy", "Jz", "J2", "J2z", "J", "h", "terms") if getattr(self, k) is not None}
        stray = given - _MODEL_PARAMS[self.name]
        if stray:
            raise ValueError(f"parameters {sorted(stray)} do not belong to model {self.name!r}")
        if self.name == "custom" and not self.terms:
            raise ValueError("custom model needs a non-empty 'terms' list")
        return self

    def build(self):
        if self.name == "xxz_nnn":
            kw = {k: getattr(self, k) for k in ("Jxy", "Jz", "J2", "J2z") if getattr(self, k) is not None}
            return XXZNNN(**kw)
        if self.name == "transverse_ising":
            kw = {k: getattr(self, k) for k in ("J", "h") if getattr(self, k) is not None}
            return TransverseIsing(**kw)
        return CustomModel(tuple(PauliTerm(t.coefficient, t.string) for t in self.terms))


class DisorderConfig(_Strict):
    strength: float = Field(ge=0)
    seed: int = Field(ge=0)


class SystemConfig(_Strict):
    N: int = Field(ge=2, le=24)
    model: ModelConfig
    boundary: Literal["open", "periodic"] = "open"
    sector: Optional[float] = None
    disorder: Optional[DisorderConfig] = None

    def build(self) -> SpinChainSpec:
        dis = Disorder(self.disorder.strength, self.disorder.seed) if self.disorder else None
        return SpinChainSpec(self.N, self.model.build(), self.boundary, dis, self.sector)


class StateConfig(_Strict):
    kind: Literal["product", "cdw", "amplitude_vector", "mixed_system_bath"] = "cdw"
    bits: Optional[str] = None
    amplitudes: Optional[list[float]] = None
    system_bits: Optional[str] = None

    def build(self) -> StateSpec:
        return StateSpec(self.kind, self.bits, tuple(self.amplitudes or ()), self.system_bits)


class ObservableConfig(_Strict):
    kind: Literal["site_pauli", "magnetization", "imbalance", "projector", "custom"] = "site_pauli"
    site: Optional[int] = Field(default=None, ge=0)
    axis: Literal["X", "Y", "Z"] = "Z"
    states: Optional[list[str]] = None
    terms: Optional[list[TermConfig]] = None

    def build(self, N: int) -> ObservableSpec:
        site = self.site if self.site is not None else (N // 2 if self.kind == "site_pauli" else None)
        terms = tuple(PauliTerm(t.coefficient, t.string) for t in self.terms or ())
        return ObservableSpec(self.kind, site, self.axis, tuple(self.states or ()), terms)


class Tolerances(_Strict):
    degeneracy: float = Field(default=DEFAULT_DEGENERACY_TOL, gt=0)
    gap: Optional[float] = Field(default=None, gt=0)
    pair_budget: int = Field(default=DEFAULT_PAIR_BUDGET, gt=0)


class TimeGrid(_Strict):
    start: float = Field(default=0.0, ge=0)
    stop: float = Field(gt=0)
    num: int = Field(ge=2)


class SpectrumTask(_Strict):
    matrix_elements: bool = False


class DynamicsTask(_Strict):
    times: Union[TimeGrid, list[float]]

    @field_validator("times")
    @classmethod
    def _nonneg(cls, v):
        if isinstance(v, list) and (not v or any(t < 0 for t in v)):
            raise ValueError("times must be a non-empty list of non-negative numbers")
        return v


class CloudTask(_Strict):
    T: float = Field(gt=0)
    times: list[float] = Field(min_length=1)


class BoundsTask(_Strict):
    T: list[float] = Field(min_length=1)
    infinite_T: float = Field(default=1e4, gt=0)
    infinite_samples: int = Field(default=100_000, ge=16)
    rhs_scale: float = Field(default=1.0, gt=0)

    @field_validator("T")
    @classmethod
    def _positive(cls, v):
        for i, T in enumerate(v):
            if not T > 0:
                raise ValueError(f"averaging window T[{i}] = {T} must be positive")
        return v


class EnsembleTask(_Strict):
    kind: str
    params: dict[str, Any] = Field(default_factory=dict)
    trials: int = Field(ge=1)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)

    @field_validator("kind")
    @classmethod
    def _known(cls, v):
        if v not in EXPERIMENTS:
            close = difflib.get_close_matches(v, list(EXPERIMENTS), n=3, cutoff=0.4)
            hint = f"; did you mean {', '.join(repr(c) for c in close)}?" if close else ""
            raise ValueError(f"unknown experiment {v!r}{hint}")
        return v


class Task(_Strict):
    """Exactly one of the task kinds."""

    spectrum: Optional[SpectrumTask] = None
    dynamics: Optional[DynamicsTask] = None
    cloud: Optional[CloudTask] = None
    bounds: Optional[BoundsTask] = None
    ensemble: Optional[EnsembleTask] = None

    @model_validator(mode="after")
    def _one(self):
        set_ = [k for k in ("spectrum", "dynamics", "cloud", "bounds", "ensemble") if getattr(self, k) is not None]
        if len(set_) != 1:
            raise ValueError(f"each task needs exactly one kind, got {set_ or 'none'}")
        return self

    @property
    def kind(self) -> str:
        return next(k for k in ("spectrum", "dynamics", "cloud", "bounds", "ensemble") if getattr(self, k) is not None)

    @property
    def body(self):
        return getattr(self, self.kind)


class RunConfig(_Strict):
    name: str = "run"
    system: Optional[SystemConfig] = None
    state: StateConfig = StateConfig()
    observable: ObservableConfig = ObservableConfig()
    tasks: list[Task] = Field(default_factory=list)
    output_dir: str = "output"
    cache_dir: Optional[str] = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def _system_needed(self):
        for i, task in enumerate(self.tasks):
            if task.kind != "ensemble" and self.system is None:
                raise ValueError(f"tasks[{i}] ({task.kind}) requires a 'system' section")
        return self


# ---------------------------------------------------------------------------
# loading


def _node_line(node, loc) -> int | None:
    """1-based source line of the YAML node at pydantic location ``loc``."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _format_errors(err: ValidationError, root, source: str) -> str:
    lines = []
    for e in err.errors():
        loc = tuple(x for x in e["loc"] if not (isinstance(x, str) and x in ("TimeGrid", "list[float]")))
        path = ".".join(str(x) if not isinstance(x, int) else f"[{x}]" for x in loc).replace(".[", "[")
        line = _node_line(root, loc) if root is not None else None
        where = f"{source}:{line}" if line else source
        msg = e["msg"].removeprefix("Value error, ")
        if e["type"] == "extra_forbidden":
            msg = "unknown field"
        lines.append(f"{where}: {path or '<root>'}: {msg}")
    return "\n".join(lines)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root, source)) from None


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 ({exc})") from None
    return parse_config_text(text, str(path))
