"""Toolkit configuration: one TOML file, every field defaulted."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cache import CacheConfig, LevelConfig
from .energy import EpiTable, LatencyTable, TableError
from .transforms import POLICIES

DEFAULT_THETAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

DEFAULTS_TOML = """\
# recomp toolkit configuration (all keys optional)

[program]
path = ""               # .tp program; a bare name selects a shipped workload
max_steps = 1000000

[program.inputs]        # named integer inputs

[cache]
line = 64
levels = [
  { capacity = 32768, assoc = 8 },    # L1D 32KB 8-way
  { capacity = 524288, assoc = 8 },   # L2 512KB 8-way
]

[energy]                # picojoules
predict = 10.0
load = [10.0, 40.0, 200.0]    # L1, L2, MEM
store = [10.0, 40.0, 200.0]

[energy.classes]
alu-simple = 1.0
alu-mul = 3.0
alu-div = 12.0
control = 1.0

[latency]               # cycles
predict = 1.0
memory = [3.0, 12.0, 100.0]

[latency.classes]
alu-simple = 1.0
alu-mul = 3.0
alu-div = 20.0
control = 1.0

[plan]
policy = "recalculation"   # recalculation | prediction | combined | none
window = 64
theta = 0.9
thetas = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]

[output]
dir = "out"
format = "csv"
seed = 0
plots = true
"""


class ConfigError(ValueError):
    pass


@dataclass
class ToolkitConfig:
    program: str = ""
    inputs: dict = field(default_factory=dict)
    max_steps: int = 1_000_000
    cache: CacheConfig = field(default_factory=CacheConfig)
    epi: EpiTable = field(default_factory=EpiTable)
    latency: LatencyTable = field(default_factory=LatencyTable)
    policy: str = "recalculation"
    window: int = 64
    theta: float = 0.9
    thetas: tuple[float, ...] = DEFAULT_THETAS
    out: str = "out"
    format: str = "csv"
    seed: int = 0
    plots: bool = True
    base_dir: Optional[Path] = None

    def validate(self) -> "ToolkitConfig":
        for th in (self.theta, *self.thetas):
            if not 0.0 <= th <= 1.0:
                raise ConfigError(f"threshold {th} outside [0, 1]")
        if self.window < 0:
            raise ConfigError("window must be non-negative")
        if self.policy not in POLICIES + ("none",):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.max_steps <= 0:
            raise ConfigError("max_steps must be positive")
        try:
            self.epi.check_depth(self.cache.depth)
        except TableError as e:
            raise ConfigError(str(e)) from None
        if len(self.latency.memory) != self.cache.depth:
            raise ConfigError(
                f"latency table has {len(self.latency.memory)} memory levels, "
                f"cache has {self.cache.depth}"
            )
        return self

    def canonical(self) -> dict:
        return {
            "program": self.program,
            "inputs": dict(sorted(self.inputs.items())),
            "max_steps": self.max_steps,
            "cache": {"line": self.cache.line,
                      "levels": [[l.capacity, l.assoc] for l in self.cache.levels]},
            "energy": {"classes": dict(sorted(self.epi.classes.items())),
                       "load": list(self.epi.load), "store": list(self.epi.store),
                       "predict": self.epi.predict},
            "latency": {"classes": dict(sorted(self.latency.classes.items())),
                        "memory": list(self.latency.memory), "predict": self.latency.predict},
            "window": self.window,
            "theta": self.theta,
            "thetas": list(self.thetas),
            "seed": self.seed,
        }

    def hash(self, program_text: str = "") -> str:
        blob = json.dumps(self.canonical(), sort_keys=True) + "\0" + program_text
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _get(d: Mapping, key: str, default: Any) -> Any:
    return d[key] if key in d else default


def from_mapping(data: Mapping, base_dir: Optional[Path] = None) -> ToolkitConfig:
    try:
        prog = data.get("program", {})
        cache = data.get("cache", {})
        energy = data.get("energy", {})
        lat = data.get("latency", {})
        plan = data.get("plan", {})
        out = data.get("output", {})
        dflt = ToolkitConfig()

        cache_cfg = dflt.cache
        if cache:
            levels = cache.get("levels")
            cache_cfg = CacheConfig(
                tuple(LevelConfig(int(l["capacity"]), int(l["assoc"])) for l in levels)
                if levels is not None else dflt.cache.levels,
                int(cache.get("line", dflt.cache.line)),
            )
        epi = EpiTable(
            classes={**dflt.epi.classes, **energy.get("classes", {})},
            load=tuple(_get(energy, "load", dflt.epi.load)),
            store=tuple(_get(energy, "store", _get(energy, "load", dflt.epi.store))),
            predict=_get(energy, "predict", dflt.epi.predict),
        )
        latency = LatencyTable(
            classes={**dflt.latency.classes, **lat.get("classes", {})},
            memory=tuple(_get(lat, "memory", dflt.latency.memory)),
            predict=_get(lat, "predict", dflt.latency.predict),
        )
        cfg = ToolkitConfig(
            program=str(_get(prog, "path", "")),
            inputs={str(k): int(v) for k, v in prog.get("inputs", {}).items()},
            max_steps=int(_get(prog, "max_steps", dflt.max_steps)),
            cache=cache_cfg,
            epi=epi,
            latency=latency,
            policy=str(_get(plan, "policy", dflt.policy)),
            window=int(_get(plan, "window", dflt.window)),
            theta=float(_get(plan, "theta", dflt.theta)),
            thetas=tuple(float(x) for x in _get(plan, "thetas", dflt.thetas)),
            out=str(_get(out, "dir", dflt.out)),
            format=str(_get(out, "format", dflt.format)),
            seed=int(_get(out, "seed", dflt.seed)),
            plots=bool(_get(out, "plots", dflt.plots)),
            base_dir=base_dir,
        )
    except (TypeError, KeyError) as e:
        raise ConfigError(f"malformed config: {e}") from None
    except (TableError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from None
    return cfg.validate()


def load_config(path: Optional[str]) -> ToolkitConfig:
    if not path:
        return from_mapping(tomllib.loads(DEFAULTS_TOML))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_mapping(data, p.parent)
