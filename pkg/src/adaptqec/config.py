"""Experiment configuration: INI-style files plus ``key=value`` overrides."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

from adaptqec.errors import InputError
from adaptqec.pauli import parse_descriptor

DECODERS = ("auto", "ideal", "mwpm")
WEIGHT_MODES = ("static", "adaptive-co", "adaptive-sp", "adaptive-truth", "oracle-true-rates")
OBSERVERS = ("co", "sp", "both", "oracle-truth")
ESTIMATORS = ("gp", "static", "none")


@dataclass
class ExperimentConfig:
    code: str = "surface:3"
    rounds: int = 100_000
    warmup_rounds: int = 10_000
    decoder: str = "auto"
    weights: tuple[str, ...] = ("adaptive-sp",)
    observer: str = "both"
    estimator: str = "gp"
    mean_rate: float = 0.02
    sd_rate: float = 0.01
    xi: float = 5000.0
    f0_mean: float | None = None
    sigma_f: float | None = None
    xi_prior: float | None = None
    seed: int = 0
    shards: int = 1
    workers: int = 1
    distances: tuple[int, ...] = (3, 5, 7)
    failure_target: int = 200
    max_rounds: int = 10_000_000
    record: bool = False
    output_dir: str = "."

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        parse_descriptor(self.code)
        if self.rounds <= 0:
            raise InputError("rounds must be positive")
        if self.warmup_rounds < 0:
            raise InputError("warmup_rounds must be >= 0")
        if self.decoder not in DECODERS:
            raise InputError(f"decoder must be one of {DECODERS}")
        if isinstance(self.weights, str):
            self.weights = tuple(w.strip() for w in self.weights.split(",") if w.strip())
        self.weights = tuple(self.weights)
        if not self.weights:
            raise InputError("at least one weights mode is required")
        for w in self.weights:
            if w not in WEIGHT_MODES:
                raise InputError(f"weights mode {w!r} not in {WEIGHT_MODES}")
        if len(set(self.weights)) != len(self.weights):
            raise InputError("duplicate weights modes")
        if self.observer not in OBSERVERS:
            raise InputError(f"observer must be one of {OBSERVERS}")
        if self.estimator not in ESTIMATORS:
            raise InputError(f"estimator must be one of {ESTIMATORS}")
        if self.estimator == "none" and any(w.startswith("adaptive") for w in self.weights):
            raise InputError("adaptive weights need an estimator")
        if not 0 <= self.mean_rate < 0.5:
            raise InputError("mean_rate must lie in [0, 0.5)")
        if not 0 <= self.sd_rate < 0.5:
            raise InputError("sd_rate must lie in [0, 0.5)")
        if not self.xi > 0:
            raise InputError("xi must be positive")
        if self.shards < 1 or self.workers < 1:
            raise InputError("shards and workers must be >= 1")
        if isinstance(self.distances, (str, int)):
            self.distances = _int_tuple(self.distances)
        self.distances = tuple(int(d) for d in self.distances)
        for d in self.distances:
            if d < 3 or d % 2 == 0:
                raise InputError(f"distance {d} must be odd and >= 3")
        if self.failure_target < 1 or self.max_rounds < 1:
            raise InputError("failure_target and max_rounds must be positive")

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs: Iterable[str]) -> ExperimentConfig:
        changes = {}
        for item in pairs:
            key, sep, value = item.partition("=")
            if not sep:
                raise InputError(f"override {item!r} is not key=value")
            key = key.strip()
            changes[key] = _coerce(key, value.strip())
        return self.replace(**changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["weights"] = list(self.weights)
        out["distances"] = list(self.distances)
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _int_tuple(value) -> tuple[int, ...]:
    if isinstance(value, int):
        return (value,)
    try:
        return tuple(int(v) for v in str(value).replace(" ", "").split(",") if v)
    except ValueError:
        raise InputError(f"expected a comma-separated integer list, got {value!r}") from None


def _coerce(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise InputError(f"unknown configuration key {key!r}")
    kind = _FIELD_TYPES[key]
    try:
        if key in ("weights",):
            return tuple(w.strip() for w in raw.split(",") if w.strip())
        if key == "distances":
            return _int_tuple(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if kind == "float":
            return float(raw)
        if kind == "float | None":
            return None if raw.lower() in ("", "none") else float(raw)
        return raw
    except ValueError:
        raise InputError(f"bad value {raw!r} for {key}") from None


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    """Read ``key = value`` entries from every section of an INI file."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key in values:
                    raise InputError(f"key {key!r} appears in more than one section")
                values[key] = _coerce(key, raw)
    cfg = ExperimentConfig(**values)
    return cfg.with_overrides(overrides) if overrides else cfg
