"""JSON run configuration documents.

Every document carries "version": 1. Keys are checked against the settings
of the command that reads the document; unknown keys and missing required
fields are reported by name.
"""
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from ..config import RUN_CONFIG_VERSION
from ..errors import ConfigError, DataIOError
from ..evaluation.sweep import SweepConfig
from ..inference.variational import VIConfig
from ..simulation.synthetic import BoundRule, SynthConfig

VI_KEYS = {f.name for f in fields(VIConfig)}
SYNTH_KEYS = {f.name for f in fields(SynthConfig)} - {"p", "E", "n", "seed", "name"}


def read_run_config(path) -> dict:
    """Load a JSON document and check its version."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise DataIOError(f"Run configuration not found: {path}") from e
    except OSError as e:
        raise DataIOError(f"Could not read run configuration {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Run configuration {path} is not valid JSON: {e}") from e

    if not isinstance(document, dict):
        raise ConfigError(f"Run configuration {path} must be a JSON object")
    if "version" not in document:
        raise ConfigError(f"Run configuration {path} is missing required field 'version'")
    if document["version"] != RUN_CONFIG_VERSION:
        raise ConfigError(f"Unsupported run configuration version {document['version']!r} (expected {RUN_CONFIG_VERSION})")
    return document


def check_keys(document: dict, allowed: set, required: set = frozenset(), where: str = "run configuration"):
    unknown = sorted(set(document) - allowed - {"version"})
    if unknown:
        raise ConfigError(f"Unknown key(s) in {where}: {', '.join(unknown)}")
    missing = sorted(k for k in required if k not in document)
    if missing:
        raise ConfigError(f"Missing required field(s) in {where}: {', '.join(missing)}")


def _build(cls, values: dict, where: str):
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"Invalid value in {where}: {e}") from e


def _as_tuple(value):
    return tuple(value) if isinstance(value, (list, tuple)) else value


def vi_config_from_dict(document: dict, where: str = "VI configuration") -> VIConfig:
    check_keys(document, VI_KEYS, where=where)
    values = {k: v for k, v in document.items() if k != "version"}
    return _build(VIConfig, values, where)


@dataclass(frozen=True)
class FitVIRun:
    vi: VIConfig
    prior: str = "uniform"
    p_max: Optional[int] = None
    inits: tuple[tuple[float, ...], ...] = ()


def fit_vi_run_from_dict(document: dict) -> FitVIRun:
    """fit-vi document: VIConfig fields plus prior, p_max and optional extra inits."""
    extra = {"prior", "p_max", "inits"}
    check_keys(document, VI_KEYS | extra, where="fit-vi configuration")
    vi = vi_config_from_dict({k: v for k, v in document.items() if k not in extra}, "fit-vi configuration")
    inits = tuple(tuple(float(v) for v in init) for init in document.get("inits", ()))
    return FitVIRun(vi=vi, prior=document.get("prior", "uniform"), p_max=document.get("p_max"), inits=inits)


@dataclass(frozen=True)
class SimulateRun:
    preset: str
    p: Optional[int] = None
    E: Optional[int] = None
    n: Optional[int] = None
    strength: Optional[float] = None
    seed: Optional[int] = None
    overrides: dict = field(default_factory=dict)


def simulate_run_from_dict(document: dict) -> SimulateRun:
    """simulate document: a preset name, size overrides and any generator setting."""
    base = {"preset", "p", "E", "n", "strength", "seed"}
    check_keys(document, base | SYNTH_KEYS, required={"preset"}, where="simulate configuration")
    overrides: dict[str, Any] = {}
    for key in SYNTH_KEYS & set(document):
        value = document[key]
        if key in ("lb_rule", "ub_rule"):
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object with offset, scale and power")
            value = _build(BoundRule, value, key)
        overrides[key] = _as_tuple(value)
    return SimulateRun(
        preset=document["preset"],
        p=document.get("p"),
        E=document.get("E"),
        n=document.get("n"),
        strength=document.get("strength"),
        seed=document.get("seed"),
        overrides=overrides,
    )


def sweep_config_from_dict(document: dict) -> SweepConfig:
    """sweep document: SweepConfig fields; 'vi' is a nested VIConfig object."""
    allowed = {f.name for f in fields(SweepConfig)}
    check_keys(document, allowed, required={"methods"}, where="sweep configuration")
    values = {k: _as_tuple(v) for k, v in document.items() if k not in ("version", "vi")}
    if "vi" in document:
        values["vi"] = vi_config_from_dict(document["vi"], "sweep configuration 'vi'")
    return _build(SweepConfig, values, "sweep configuration")
