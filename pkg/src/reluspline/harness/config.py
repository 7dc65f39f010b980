"""YAML experiment configs with a strict schema.

Every key is declared below with its type and default; unknown keys, type
mismatches and out-of-range values raise :class:`ConfigError` naming the
dotted key path.

Shared sections::

    experiment: <name>          # required
    tier: paper | desk          # informational
    base_seed: 0                # trial i uses base_seed + i
    n_trials: 1
    output_dir: null            # default: runs/<experiment>
    network: {inputs, width, depth | depths, outputs}
    data: {...}                 # per experiment
    train:
      epochs, snapshot_every, shuffle (null = shuffle when batching),
      rho, epsilon, lr,
      batch: {policy: full|fixed|fixed-drop|random, size, steps_per_epoch,
              min_points}       # datasets smaller than min_points train full-batch
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from reluspline.optim import (
    BatchPolicy,
    FixedDropRemainder,
    FixedWithRemainder,
    FullBatch,
    RandomSample,
    TrainConfig,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "dump_config",
    "load_config",
    "parse_config",
    "shipped_config",
    "shipped_config_names",
]

EXPERIMENT_NAMES = ("degenerate", "size-heatmap", "size-heatmap-batched", "stuck", "linearity")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, bool, str, int-list, float-pair
    default: Any = None
    required: bool = False
    nullable: bool = False
    minimum: float | None = None
    choices: tuple | None = None


def _int(default=None, minimum=None, **kw):
    return Field("int", default, minimum=minimum, **kw)


def _float(default=None, minimum=None, **kw):
    return Field("float", default, minimum=minimum, **kw)


_TRAIN = {
    "epochs": _int(required=True, minimum=1),
    "snapshot_every": _int(1, minimum=1),
    "shuffle": Field("bool", None, nullable=True),
    "rho": _float(0.95, minimum=0.0),
    "epsilon": _float(1e-7, minimum=0.0),
    "lr": _float(1.0, minimum=0.0),
    "batch": {
        "policy": Field("str", "full", choices=("full", "fixed", "fixed-drop", "random")),
        "size": _int(None, minimum=1, nullable=True),
        "steps_per_epoch": _int(None, minimum=1, nullable=True),
        "min_points": _int(0, minimum=0),
    },
}

_COMMON = {
    "experiment": Field("str", required=True, choices=EXPERIMENT_NAMES),
    "tier": Field("str", "desk", choices=("paper", "desk")),
    "base_seed": _int(0, minimum=0),
    "n_trials": _int(1, minimum=1),
    "output_dir": Field("str", None, nullable=True),
    "train": _TRAIN,
}

_NET = {
    "inputs": _int(1, minimum=1),
    "width": _int(required=True, minimum=1),
    "depth": _int(required=True, minimum=1),
    "outputs": _int(1, minimum=1),
}

_HEATMAP_NET = {
    "inputs": _int(3, minimum=1),
    "width": _int(required=True, minimum=1),
    "depths": Field("int-list", required=True, minimum=1),
    "outputs": _int(1, minimum=1),
}

SCHEMAS: dict[str, dict] = {
    "degenerate": {
        **_COMMON,
        "network": {**_NET, "inputs": _int(3, minimum=1)},
        "data": {"n_points": _int(1000, minimum=1)},
        "census": {"layers": Field("int-list", [3, 10, 20], minimum=1)},
    },
    "size-heatmap": {
        **_COMMON,
        "network": _HEATMAP_NET,
        "data": {"sizes": Field("int-list", required=True, minimum=1)},
    },
    "stuck": {
        **_COMMON,
        "network": _NET,
        "data": {
            "n_points": _int(1000, minimum=2),
            "n_teeth": _int(16, minimum=1),
            "domain": Field("float-pair", [-1.0, 1.0]),
        },
        "checkpoints": Field("int-list", required=True, minimum=0),
        "grid_points": _int(512, minimum=2),
    },
    "linearity": {
        **_COMMON,
        "network": _NET,
        "data": {
            "n_points": _int(64, minimum=1),
            "n_knots": _int(8, minimum=2),
            "domain": Field("float-pair", [-1.0, 1.0]),
            "noise_sigma": _float(None, minimum=0.0, nullable=True),
            "noise_ratio": _float(0.3, minimum=0.0),
        },
        "checkpoints": Field("int-list", required=True, minimum=0),
        "curve_points": _int(10, minimum=0),
        "grid_points": _int(512, minimum=2),
        "boost": {
            "enabled": Field("bool", False),
            "carrier": Field("str", "signal", choices=("signal", "random-spline")),
            "carrier_knots": _int(4, minimum=2),
        },
    },
}
SCHEMAS["size-heatmap-batched"] = SCHEMAS["size-heatmap"]


def _check_value(path: str, spec: Field, value):
    if value is None:
        if spec.nullable:
            return None
        raise ConfigError(f"{path}: must not be null")
    kind = spec.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
    elif kind == "int-list":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a nonempty list of integers, got {value!r}")
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{path}[{i}]: expected an integer, got {v!r}")
            if spec.minimum is not None and v < spec.minimum:
                raise ConfigError(f"{path}[{i}]: must be >= {spec.minimum:g}, got {v}")
        return list(value)
    elif kind == "float-pair":
        if (
            not isinstance(value, list)
            or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
        ):
            raise ConfigError(f"{path}: expected a pair of numbers [a, b], got {value!r}")
        a, b = float(value[0]), float(value[1])
        if not a < b:
            raise ConfigError(f"{path}: need a < b, got {value!r}")
        return [a, b]
    if spec.minimum is not None and value < spec.minimum:
        raise ConfigError(f"{path}: must be >= {spec.minimum:g}, got {value}")
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(f"{path}: must be one of {', '.join(spec.choices)}; got {value!r}")
    return value


def _validate(schema: dict, raw, prefix: str = "") -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'config'}: expected a mapping, got {raw!r}")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key '{prefix}{unknown[0]}'")
    out = {}
    for key, spec in schema.items():
        path = prefix + key
        if isinstance(spec, dict):
            out[key] = _validate(spec, raw.get(key), path + ".")
        elif key in raw:
            out[key] = _check_value(path, spec, raw[key])
        elif spec.required:
            raise ConfigError(f"missing required key '{path}'")
        else:
            out[key] = copy.deepcopy(spec.default)
    return out


@dataclass
class ExperimentConfig:
    """A validated experiment config; sections are plain dicts with every key filled."""

    name: str
    values: dict = field(repr=False)

    @property
    def tier(self) -> str:
        return self.values["tier"]

    @property
    def base_seed(self) -> int:
        return self.values["base_seed"]

    @property
    def n_trials(self) -> int:
        return self.values["n_trials"]

    @property
    def output_dir(self) -> str:
        return self.values["output_dir"] or f"runs/{self.name}"

    @property
    def network(self) -> dict:
        return self.values["network"]

    @property
    def data(self) -> dict:
        return self.values["data"]

    @property
    def train(self) -> dict:
        return self.values["train"]

    def __getitem__(self, key):
        return self.values[key]

    def layer_sizes(self, depth: int | None = None) -> list[int]:
        net = self.network
        depth = net["depth"] if depth is None else depth
        return [net["inputs"]] + [net["width"]] * depth + [net["outputs"]]

    def batch_policy(self, n_points: int) -> BatchPolicy:
        b = self.train["batch"]
        if b["policy"] == "full" or n_points < b["min_points"]:
            return FullBatch()
        size = b["size"]
        if size is None:
            raise ConfigError(f"train.batch.size is required for policy {b['policy']!r}")
        if b["policy"] == "fixed":
            return FixedWithRemainder(size)
        if b["policy"] == "fixed-drop":
            return FixedDropRemainder(size)
        steps = b["steps_per_epoch"] or -(-n_points // size)
        return RandomSample(size, steps)

    def train_config(self, n_points: int, seed: int | None = None, **overrides) -> TrainConfig:
        t = self.train
        kwargs = dict(
            epochs=t["epochs"],
            batch_policy=self.batch_policy(n_points),
            shuffle_each_epoch=t["shuffle"],
            snapshot_every=t["snapshot_every"],
            seed=self.base_seed if seed is None else seed,
            rho=t["rho"],
            epsilon=t["epsilon"],
            lr=t["lr"],
        )
        kwargs.update(overrides)
        return TrainConfig(**kwargs)

    def with_overrides(self, n_trials=None, base_seed=None, output_dir=None) -> "ExperimentConfig":
        raw = copy.deepcopy(self.values)
        if n_trials is not None:
            raw["n_trials"] = n_trials
        if base_seed is not None:
            raw["base_seed"] = base_seed
        if output_dir is not None:
            raw["output_dir"] = str(output_dir)
        return parse_config(raw)

    def dump(self) -> str:
        return dump_config(self)


def _check_semantics(cfg: ExperimentConfig) -> None:
    t = cfg.train
    if t["rho"] >= 1.0:
        raise ConfigError(f"train.rho: must be < 1, got {t['rho']}")
    if t["epsilon"] <= 0.0:
        raise ConfigError(f"train.epsilon: must be > 0, got {t['epsilon']}")
    b = t["batch"]
    if b["policy"] != "full" and b["size"] is None:
        raise ConfigError(f"train.batch.size: required when train.batch.policy is {b['policy']!r}")
    if "checkpoints" in cfg.values:
        cps = cfg["checkpoints"]
        if any(c > t["epochs"] for c in cps):
            raise ConfigError(f"checkpoints: must not exceed train.epochs={t['epochs']}, got {cps}")
        if any(b2 < a for a, b2 in zip(cps, cps[1:])):
            raise ConfigError(f"checkpoints: must be nondecreasing, got {cps}")
    if cfg.name == "degenerate":
        depth = cfg.network["depth"]
        bad = [l for l in cfg["census"]["layers"] if l > depth]
        if bad:
            raise ConfigError(f"census.layers: layer {bad[0]} exceeds network.depth={depth}")
    if cfg.name in ("stuck", "linearity"):
        if cfg.network["inputs"] != 1 or cfg.network["outputs"] != 1:
            raise ConfigError(f"network: the {cfg.name} experiment needs inputs: 1 and outputs: 1")


def parse_config(raw) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a mapping at the top level")
    name = raw.get("experiment")
    if name is None:
        raise ConfigError("missing required key 'experiment'")
    if name not in SCHEMAS:
        raise ConfigError(f"experiment: unknown experiment {name!r}; choose from {', '.join(EXPERIMENT_NAMES)}")
    cfg = ExperimentConfig(name, _validate(SCHEMAS[name], raw))
    _check_semantics(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_config(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.values, sort_keys=False, default_flow_style=None)


def shipped_config_names() -> list[str]:
    files = resources.files("reluspline.configs").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".yaml"))


def shipped_config(name: str) -> ExperimentConfig:
    """Load a bundled config such as ``"linearity-desk"`` or ``"degenerate-paper"``."""
    res = resources.files("reluspline.configs") / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"no shipped config {name!r}; available: {', '.join(shipped_config_names())}")
    return parse_config(yaml.safe_load(res.read_text(encoding="utf-8")))
