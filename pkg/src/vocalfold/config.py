"""Run configuration: one TOML file with a section per pipeline stage.

Every key is optional. Unknown sections or keys are rejected so that a
typo cannot silently fall back to a default.

.. code-block:: toml

    [simulation]
    horizon = 300.0

    [optimizer]
    method = "bfgs"
    restarts = 4

    [[regions]]
    label = "Normal"
    delta_min = 0.0
    delta_max = 0.5
    ...
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .estimator import OptimizerConfig
from .exceptions import ConfigError, VocalFoldError
from .glottal import InverseFilterConfig, PhysicalConstants
from .model import NORMAL_VOICE, ModelParams
from .pathology import default_regions, regions_from_json, validate_regions
from .phase import SimulationConfig

#: environment variable naming a config file used when ``--config`` is absent
CONFIG_ENV = "VOCALFOLD_CONFIG"


@dataclass(frozen=True)
class InitConfig:
    alpha: float = NORMAL_VOICE[0]
    beta: float = NORMAL_VOICE[1]
    delta: float = NORMAL_VOICE[2]

    def params(self, sim):
        return ModelParams(self.alpha, self.beta, self.delta, sim.c_r, sim.c_l)


@dataclass(frozen=True)
class PitchConfig:
    fmin: float = 50.0
    fmax: float = 500.0

    def __post_init__(self):
        if not 0.0 < self.fmin < self.fmax:
            raise ConfigError(f"need 0 < fmin < fmax, got {self.fmin}, {self.fmax}")


@dataclass(frozen=True)
class SweepConfig:
    alpha_min: float = 0.3
    alpha_max: float = 0.7
    delta_min: float = 0.0
    delta_max: float = 1.0
    beta: float = 0.32
    n_alpha: int = 16
    n_delta: int = 16

    def __post_init__(self):
        if self.n_alpha < 2 or self.n_delta < 2:
            raise ConfigError("sweep grid must be at least 2x2")
        if not (self.alpha_min < self.alpha_max and self.delta_min < self.delta_max):
            raise ConfigError("sweep ranges must be increasing")


@dataclass(frozen=True)
class BatchConfig:
    workers: int = 1
    pattern: str = "*.wav"

    def __post_init__(self):
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")


_SECTIONS = {
    "physical": PhysicalConstants,
    "simulation": SimulationConfig,
    "inverse_filter": InverseFilterConfig,
    "optimizer": OptimizerConfig,
    "init": InitConfig,
    "pitch": PitchConfig,
    "sweep": SweepConfig,
    "batch": BatchConfig,
}


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalConstants = field(default_factory=PhysicalConstants)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    inverse_filter: InverseFilterConfig = field(default_factory=InverseFilterConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    init: InitConfig = field(default_factory=InitConfig)
    pitch: PitchConfig = field(default_factory=PitchConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    batch: BatchConfig = field(default_factory=BatchConfig)
    regions: tuple = field(default_factory=default_regions)

    @classmethod
    def from_dict(cls, data, base_dir=None):
        data = dict(data)
        unknown = set(data) - set(_SECTIONS) - {"regions", "regions_file"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        kwargs = {}
        for name, kind in _SECTIONS.items():
            if name in data:
                kwargs[name] = _section(kind, name, data[name])
        if "regions" in data and "regions_file" in data:
            raise ConfigError("give either regions or regions_file, not both")
        if "regions" in data:
            kwargs["regions"] = regions_from_json(list(data["regions"]))
        elif "regions_file" in data:
            path = Path(data["regions_file"])
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            if not path.exists():
                raise ConfigError(f"regions_file {path} not found")
            kwargs["regions"] = regions_from_json(path)
        cfg = cls(**kwargs)
        validate_regions(cfg.regions)
        return cfg

    def to_dict(self):
        out = {name: _clean(asdict(getattr(self, name))) for name in _SECTIONS}
        out["regions"] = [r.to_dict() for r in self.regions]
        return out

    def dumps(self):
        return tomli_w.dumps(self.to_dict())

    def dump(self, path):
        Path(path).write_text(self.dumps())

    def override(self, section, **values):
        """Copy with some keys of one section replaced (``None`` values are skipped)."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        current = getattr(self, section)
        try:
            return replace(self, **{section: replace(current, **values)})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _clean(d):
    # TOML has no null; absent keys fall back to the default on reload
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items() if v is not None}


def _section(kind, name, values):
    if not isinstance(values, dict):
        raise ConfigError(f"[{name}] must be a table")
    allowed = {f.name for f in fields(kind)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    try:
        return kind(**values)
    except ConfigError:
        raise
    except (VocalFoldError, TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def load_config(path=None):
    """Read ``path``, else the file named by ``$VOCALFOLD_CONFIG``, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(data, base_dir=path.parent)
