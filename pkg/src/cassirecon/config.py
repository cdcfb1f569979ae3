"""Run configuration: one nested key/value document (YAML), parsed strictly.

Unknown keys are errors so typos fail fast. Precedence is
command-line flags > config file > built-in defaults; flag overrides are
applied to the raw mapping before validation.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .core import default_wavelengths
from .exceptions import ConfigError
from .solver import SolverConfig

_SOLVER_KEYMAP = {
    "lambda": "lam",
    "zeta": "zeta",
    "guidance_scale": "guidance_scale",
    "t_start": "t_start",
    "step_count": "step_count",
    "seed": "seed",
    "sigma_n": "sigma_n",
    "mu": "mu",
    "plan": "plan_kind",
    "anchors": "anchors",
    "cutoff_nm": "cutoff_nm",
    "accelerate": "accelerate",
    "warm_start": "warm_start",
    "normalize": "normalize",
}


@dataclass
class MaskConfig:
    source: str = "random"  # "random" | "file"
    path: str | None = None
    seed: int = 0
    density: float = 0.5


@dataclass
class OperatorConfig:
    shift_step: int = 2
    bands: int = 28
    mask: MaskConfig = field(default_factory=MaskConfig)


@dataclass
class ScheduleConfig:
    steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass
class PriorConfig:
    kind: str = "gaussianShrink"  # identity | gaussianShrink | oracle | external
    strength: float = 1.0
    endpoint: str | None = None
    truth: str | None = None
    max_concurrent: int = 1


@dataclass
class PathsConfig:
    cube: str | None = None
    mask: str | None = None
    measurement: str | None = None
    output: str | None = None
    trace: str | None = None
    report_dir: str | None = None


@dataclass
class MetricsConfig:
    peak: float = 1.0
    region: list[int] | None = None  # [top, left, height, width]


@dataclass
class WavelengthRange:
    start: float = 450.0
    end: float = 720.0
    values: list[float] | None = None  # explicit list wins over the range

    def resolve(self, bands: int) -> np.ndarray:
        if self.values is not None:
            arr = np.asarray(self.values, dtype=np.float64)
            if arr.shape != (bands,):
                raise ConfigError(
                    f"wavelengths.values has {arr.size} entries but operator.bands is {bands}"
                )
            return arr
        return default_wavelengths(bands, self.start, self.end)


@dataclass
class RunConfig:
    operator: OperatorConfig = field(default_factory=OperatorConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    wavelengths: WavelengthRange = field(default_factory=WavelengthRange)


def _build(cls, mapping: dict, section: str, keymap: dict[str, str] | None = None):
    if not isinstance(mapping, dict):
        raise ConfigError(f"section '{section}' must be a mapping, got {type(mapping).__name__}")
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        name = keymap.get(key) if keymap else key
        if name is None or name not in names:
            raise ConfigError(f"unknown key '{section}.{key}'")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section '{section}': {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    known = {"operator", "schedule", "solver", "prior", "paths", "metrics", "wavelengths"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"unknown top-level key '{key}'")
    op_doc = dict(doc.get("operator", {}))
    mask_doc = op_doc.pop("mask", {})
    operator = _build(OperatorConfig, op_doc, "operator")
    operator.mask = _build(MaskConfig, mask_doc, "operator.mask")

    solver_doc = dict(doc.get("solver", {}))
    if "anchors" in solver_doc:
        anchors = solver_doc["anchors"]
        if not (isinstance(anchors, (list, tuple)) and len(anchors) == 2):
            raise ConfigError("solver.anchors must be a two-element list")
        solver_doc["anchors"] = tuple(int(a) for a in anchors)

    return RunConfig(
        operator=operator,
        schedule=_build(ScheduleConfig, doc.get("schedule", {}), "schedule"),
        solver=_build(SolverConfig, solver_doc, "solver", _SOLVER_KEYMAP),
        prior=_build(PriorConfig, doc.get("prior", {}), "prior"),
        paths=_build(PathsConfig, doc.get("paths", {}), "paths"),
        metrics=_build(MetricsConfig, doc.get("metrics", {}), "metrics"),
        wavelengths=_build(WavelengthRange, doc.get("wavelengths", {}), "wavelengths"),
    )


def config_to_dict(cfg: RunConfig) -> dict:
    solver = {}
    reverse = {v: k for k, v in _SOLVER_KEYMAP.items()}
    for f in fields(SolverConfig):
        value = getattr(cfg.solver, f.name)
        if isinstance(value, tuple):
            value = list(value)
        solver[reverse[f.name]] = value
    return {
        "operator": asdict(cfg.operator),
        "schedule": asdict(cfg.schedule),
        "solver": solver,
        "prior": asdict(cfg.prior),
        "paths": asdict(cfg.paths),
        "metrics": asdict(cfg.metrics),
        "wavelengths": asdict(cfg.wavelengths),
    }


def parse_config(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return config_from_dict(doc)


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(p.read_text(encoding="utf-8"))


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings onto the raw mapping; values are
    parsed as YAML scalars."""
    doc = dict(doc) if doc else {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key.path=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        if not all(keys):
            raise ConfigError(f"override '{item}' has an empty key component")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override value '{raw}' is not a YAML scalar: {exc}") from exc
        node = doc
        for key in keys[:-1]:
            nxt = node.get(key)
            if nxt is None:
                nxt = {}
                node[key] = nxt
            if not isinstance(nxt, dict):
                raise ConfigError(f"override '{item}' descends through a non-mapping")
            node = nxt
        node[keys[-1]] = value
    return doc
