"""Run configuration files: one YAML/JSON document, strictly validated.

Every section is optional and falls back to the defaults of the matching
dataclass; only ``seed`` is mandatory. Unknown keys and ill-typed values are
reported with their dotted field path.
"""

from __future__ import annotations

import dataclasses
import json
import re
import types
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .baselines import SVCConfig
from .experiments import ExperimentConfig, WalkForwardConfig, default_workers
from .features import SmoothingConfig
from .mlp import NetworkConfig, TrainConfig
from .synth import LagStructure, SynthConfig

INTERVALS = ("session_day",)


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds one message per offending field."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentSection:
    targets: tuple[str, ...] | None = None
    target_count: int | None = None
    include_target: bool = False
    fold_count: int = 5
    workers: int | None = None  # None: all available cores


@dataclass(frozen=True)
class RunConfig:
    seed: int
    calendar: str | None = None  # None or "nyse": built-in profile; otherwise a file path
    min_coverage: float = 0.9
    interval: str = "session_day"
    smoothing: SmoothingConfig = SmoothingConfig()
    network: NetworkConfig = NetworkConfig()
    training: TrainConfig = TrainConfig()
    svc: SVCConfig = SVCConfig()
    experiment: ExperimentSection = ExperimentSection()
    walk_forward: WalkForwardConfig = WalkForwardConfig()
    synth: SynthConfig = SynthConfig()
    structure: LagStructure | None = None  # explicit synthetic structure overriding the default one
    source: str | None = field(default=None, compare=False)

    def experiment_config(self, workers: int | None = None) -> ExperimentConfig:
        exp = self.experiment
        n_workers = workers if workers is not None else exp.workers
        return ExperimentConfig(
            targets=exp.targets,
            target_count=exp.target_count,
            include_target=exp.include_target,
            smoothing=self.smoothing,
            network=self.network,
            training=self.training,
            svc=self.svc,
            walk_forward=self.walk_forward,
            fold_count=exp.fold_count,
            seed=self.seed,
            workers=n_workers if n_workers is not None else default_workers(),
        )

    def synth_config(self) -> SynthConfig:
        return dataclasses.replace(self.synth, seed=self.seed)

    def to_dict(self) -> dict:
        """A document that ``parse_config`` accepts and maps back to ``self``."""
        out = dataclasses.asdict(self)
        out.pop("source")
        for section, key in _HIDDEN:
            out[section].pop(key)
        if self.structure is not None:
            out["structure"] = self.structure.to_dict()
            out["structure"].pop("seed")
        else:
            out.pop("structure")
        if out["experiment"]["targets"] is not None:
            out["experiment"]["targets"] = list(out["experiment"]["targets"])
        return out


_SECTIONS = {
    "smoothing": SmoothingConfig,
    "network": NetworkConfig,
    "training": TrainConfig,
    "svc": SVCConfig,
    "experiment": ExperimentSection,
    "walk_forward": WalkForwardConfig,
    "synth": SynthConfig,
}
# Seeds of sub-configs are derived from the top-level seed, never set directly.
_HIDDEN = {("network", "input_dim"), ("network", "output_dim"), ("training", "seed"), ("svc", "seed"), ("synth", "seed")}


def _check_type(path: str, value: Any, annotation: Any, errors: list[str]) -> Any:
    """Validate ``value`` against a (string) annotation and return it coerced."""
    hint = annotation
    args = typing.get_args(hint)
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        hint = next(a for a in args if a is not type(None))
        origin = typing.get_origin(hint)
        args = typing.get_args(hint)
    if origin is tuple:
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            errors.append(f"{path}: expected a list of strings, got {value!r}")
            return None
        return tuple(value)
    if hint is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {value!r}")
            return value
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
        return value
    return value


def _build_section(name: str, cls, raw: Any, errors: list[str]):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected a mapping, got {type(raw).__name__}")
        return cls()
    hints = typing.get_type_hints(cls)
    allowed = {f.name for f in fields(cls) if (name, f.name) not in _HIDDEN}
    kwargs = {}
    for key, value in raw.items():
        if key not in allowed:
            errors.append(f"{name}.{key}: unknown key")
            continue
        kwargs[key] = _check_type(f"{name}.{key}", value, hints[key], errors)
    if errors:
        return cls()
    try:
        return cls(**kwargs)
    except ValueError as exc:
        errors.append(f"{name}: {exc}")
        return cls()


def parse_config(document: Any, source: str | None = None) -> RunConfig:
    if not isinstance(document, dict):
        raise ConfigError([f"{source or 'config'}: top level must be a mapping"])
    errors: list[str] = []
    top_hints = typing.get_type_hints(RunConfig)
    allowed = {f.name for f in fields(RunConfig)} - {"source"}
    for key in document:
        if key not in allowed:
            errors.append(f"{key}: unknown key")
    if "seed" not in document:
        errors.append("seed: required")
    kwargs: dict[str, Any] = {"source": source}
    for key in ("seed", "calendar", "min_coverage", "interval"):
        if key in document:
            kwargs[key] = _check_type(key, document[key], top_hints[key], errors)
    if "min_coverage" in kwargs and isinstance(kwargs["min_coverage"], float) and not 0 <= kwargs["min_coverage"] <= 1:
        errors.append(f"min_coverage: must lie in [0, 1], got {kwargs['min_coverage']}")
    if kwargs.get("interval", "session_day") not in INTERVALS:
        errors.append(f"interval: must be one of {INTERVALS}, got {kwargs['interval']!r}")
    for name, cls in _SECTIONS.items():
        section_errors: list[str] = []
        kwargs[name] = _build_section(name, cls, document.get(name), section_errors)
        errors.extend(section_errors)
    raw_structure = document.get("structure")
    if raw_structure is not None:
        synth = kwargs["synth"]
        if not isinstance(raw_structure, dict):
            errors.append("structure: expected a mapping")
        elif set(raw_structure) - {"dependencies", "noise_level", "volatility", "drift"}:
            extra = sorted(set(raw_structure) - {"dependencies", "noise_level", "volatility", "drift"})
            errors.extend(f"structure.{k}: unknown key" for k in extra)
        else:
            merged = {
                "noise_level": synth.noise_level if synth.noise_level is not None else 0.0,
                "volatility": synth.volatility,
                "drift": synth.drift,
                **raw_structure,
                "seed": kwargs.get("seed", 0),
            }
            try:
                kwargs["structure"] = LagStructure.from_dict(merged)
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"structure: malformed ({type(exc).__name__}: {exc})")
    if errors:
        raise ConfigError(errors)
    return RunConfig(**kwargs)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats such as ``1e-4``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)[eE][-+]?[0-9]+$"),
    list("-+0123456789."),
)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML document, or JSON when the suffix is ``.json``."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{p}: cannot read ({exc.strerror})"]) from exc
    try:
        document = json.loads(text) if p.suffix.lower() == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{p}: malformed document ({exc})"]) from exc
    return parse_config(document, str(p))
