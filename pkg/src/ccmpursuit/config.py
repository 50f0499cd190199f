"""Run configuration: nested dataclasses backed by an INI file.

Every section of the file mirrors one parameter group; unknown sections or
keys are rejected at load time.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .ccm import ConvergenceThresholds, EmbeddingSpec
from .physics import BodyParams, SimulationError, WorldConfig
from .strategies import PendulumMapping, PendulumParams, SpringParams

DEFAULT_CONFIG_PATH = Path(__file__).with_name("default.ini")

CONDITIONS = ("chaser", "spring", "scripted")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Condition:
    name: str = "chaser"
    perturbed: bool = True
    n_episodes: int = 10
    steps: int = 2000
    seed: int = 0

    def validate(self):
        if self.name not in CONDITIONS:
            raise ConfigError(f"unknown condition {self.name!r}; expected one of {CONDITIONS}")
        if self.n_episodes < 1:
            raise ConfigError("n_episodes must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        return self


@dataclass(frozen=True)
class CcmConfig:
    E: int = 3
    tau: int = 2
    theiler: int = 10
    n_subsamples: int = 20
    n_library_sizes: int = 10
    min_library_size: int = 50
    library_sizes: tuple = ()  # explicit sizes override the log-spaced default
    library_mode: str = "random"
    min_delta_rho: float = 0.05
    min_monotonicity: float = 0.5
    min_final_rho: float = 0.1
    seed: int = 0

    @property
    def embedding(self):
        return EmbeddingSpec(self.E, self.tau, self.theiler)

    @property
    def thresholds(self):
        return ConvergenceThresholds(self.min_delta_rho, self.min_monotonicity, self.min_final_rho)

    def validate(self):
        self.embedding
        if self.n_subsamples < 1:
            raise ConfigError("n_subsamples must be >= 1")
        if self.library_mode not in ("random", "prefix"):
            raise ConfigError(f"library_mode must be 'random' or 'prefix', got {self.library_mode!r}")
        if self.library_sizes and list(self.library_sizes) != sorted(set(self.library_sizes)):
            raise ConfigError("library_sizes must be strictly ascending")
        if not self.library_sizes and self.n_library_sizes < 3:
            raise ConfigError("need at least 3 library sizes for a convergence verdict")
        return self


@dataclass(frozen=True)
class OutputConfig:
    trajectory: str = "trajectories.csv"
    out_dir: str = "analysis"


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    condition: Condition = field(default_factory=Condition)
    spring: SpringParams = field(default_factory=SpringParams)
    pendulum: PendulumParams = field(default_factory=PendulumParams)
    mapping: PendulumMapping | None = None  # None: centred, scaled to the arena
    ccm: CcmConfig = field(default_factory=CcmConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def resolved_mapping(self):
        if self.mapping is not None:
            return self.mapping
        return PendulumMapping.default_for(self.world.arena_half_width, self.pendulum)

    def validate(self):
        try:
            self.world.validate()
            self.spring.validate()
            self.pendulum.validate()
            self.resolved_mapping.validate(self.world.arena_half_width, self.pendulum)
            self.condition.validate()
            self.ccm.validate()
        except (SimulationError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e
        return self


# section name -> (path of attributes inside RunConfig, dataclass type)
_SECTIONS = {
    "world": (("world",), WorldConfig),
    "predator_body": (("world", "predator_body"), BodyParams),
    "prey_body": (("world", "prey_body"), BodyParams),
    "condition": (("condition",), Condition),
    "spring": (("spring",), SpringParams),
    "pendulum": (("pendulum",), PendulumParams),
    "mapping": (("mapping",), PendulumMapping),
    "ccm": (("ccm",), CcmConfig),
    "output": (("output",), OutputConfig),
}
_NESTED = {"predator_body", "prey_body"}


def _scalar_fields(cls):
    return [f for f in fields(cls) if f.name not in _NESTED]


def _parse(value, default, name):
    try:
        if isinstance(default, bool):
            v = value.strip().lower()
            if v in ("true", "yes", "1", "on"):
                return True
            if v in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            parts = [p for p in value.replace(",", " ").split() if p]
            cast = float if name == "anchor" else int
            return tuple(cast(p) for p in parts)
        return value.strip()
    except ValueError:
        raise ConfigError(f"bad value for {name!r}: {value!r}") from None


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _get(cfg, path):
    obj = cfg
    for attr in path:
        obj = getattr(obj, attr)
    return obj


def _set(cfg, path, value):
    if len(path) == 1:
        return replace(cfg, **{path[0]: value})
    head = getattr(cfg, path[0])
    return replace(cfg, **{path[0]: _set(head, path[1:], value)})


def loads(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        path, cls = _SECTIONS[section]
        current = _get(cfg, path)
        if current is None:  # mapping left on auto
            current = cfg.resolved_mapping
        known = {f.name for f in _scalar_fields(cls)}
        updates = {}
        for key, value in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            updates[key] = _parse(value, getattr(current, key), key)
        cfg = _set(cfg, path, replace(current, **updates))
    return cfg.validate()


def load(path=None):
    if path is None:
        path = DEFAULT_CONFIG_PATH
    return loads(Path(path).read_text(encoding="utf-8"))


def dumps(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, (path, cls) in _SECTIONS.items():
        obj = _get(cfg, path)
        if obj is None:
            continue
        parser[section] = {f.name: _format(getattr(obj, f.name)) for f in _scalar_fields(cls)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
