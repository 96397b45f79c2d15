"""Run configuration: defaults, YAML loading, and validation.

A config file is a single YAML document with optional sections; every
hyperparameter defaults to the toolkit's standard values, so an empty file
(or none at all) is a valid configuration for the built-in plants.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .cfgen import CFParams
from .plants import Plant, Requirement, get_plant, plant_names
from .testgen import SAParams

__all__ = ["RunConfig", "ConfigError", "load_config", "resolve_plant"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    plant: str = "at"
    requirement: str = ""       # empty: the plant's first requirement
    seed: int = 17
    seeds: tuple[int, ...] = ()  # extra seeds for eval; empty: (seed,)
    out: str = "out"
    runs: int = 20               # annealing restarts for data generation
    retain: str = "all-evaluated"
    sa: SAParams = field(default_factory=SAParams)
    model: str = "m5"
    generator: str = "kd"
    cf: CFParams = field(default_factory=CFParams)
    contrast_size: int = 50
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.model not in ("m5", "rf"):
            raise ConfigError(f"model must be 'm5' or 'rf', got {self.model!r}")
        if self.generator not in ("rs", "ga", "kd"):
            raise ConfigError(
                f"generator must be 'rs', 'ga' or 'kd', got {self.generator!r}")
        if self.retain not in ("best", "all-evaluated"):
            raise ConfigError(
                f"retain must be 'best' or 'all-evaluated', got {self.retain!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.plant not in plant_names():
            raise ConfigError(
                f"unknown plant {self.plant!r}; available: {plant_names()}")
        resolve_plant(self)  # validates the requirement id

    def all_seeds(self) -> tuple[int, ...]:
        return self.seeds if self.seeds else (self.seed,)


def resolve_plant(cfg: RunConfig) -> tuple[Plant, Requirement]:
    plant, reqs = get_plant(cfg.plant)
    if not cfg.requirement:
        return plant, reqs[0]
    for r in reqs:
        if r.id == cfg.requirement:
            return plant, r
    raise ConfigError(
        f"plant {cfg.plant!r} has no requirement {cfg.requirement!r}; "
        f"available: {[r.id for r in reqs]}")


def _build(cls, section, what):
    if section is None:
        return cls()
    if not isinstance(section, dict):
        raise ConfigError(f"{what} section must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad {what} parameters: {e}") from e


def load_config(path: str | None = None, **overrides) -> RunConfig:
    """Load YAML (if given) and apply keyword overrides on top."""
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    sa = _build(SAParams, doc.pop("sa", None), "sa")
    cf_section = doc.pop("cf", None)
    if cf_section and "mutable_mask" in cf_section and \
            cf_section["mutable_mask"] is not None:
        cf_section["mutable_mask"] = tuple(bool(b)
                                           for b in cf_section["mutable_mask"])
    cf = _build(CFParams, cf_section, "cf")
    if "seeds" in doc and doc["seeds"] is not None:
        doc["seeds"] = tuple(int(s) for s in doc["seeds"])
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(sa=sa, cf=cf, **doc)
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"bad configuration: {e}") from e
