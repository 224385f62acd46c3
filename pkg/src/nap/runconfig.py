"""Resolved run configuration: one flat "key = value" text per run directory.

Model and training keys are namespaced ("model.t_pred", "train.lr"); run-level
plumbing keys are bare. Unknown keys are rejected so a stale config cannot
silently drift past a rename.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .model import NapConfig
from .train import TrainConfig


@dataclass
class RunConfig:
    data_dir: str = "data"
    out_dir: str = ""
    checkpoint: str = ""
    track: str = ""
    grid: str = ""
    test_scene: str = ""
    seed: int = 0
    k: int = 1
    steps: str = "all"
    threads: int = 1
    allow_train_eval: bool = False
    heatmap: bool = False
    n_peds: int = 12
    n_scenes: int = 5
    mix: str = "mixed"
    noise: float = 0.0
    span: int = 60
    model: NapConfig = field(default_factory=NapConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


_RUN_FIELDS = {f.name: f for f in fields(RunConfig)
               if f.name not in ("model", "train")}
_MODEL_FIELDS = {f.name: f for f in fields(NapConfig)}
_TRAIN_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _coerce(key, value, ftype):
    try:
        if ftype == "bool":
            low = value.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if ftype == "int":
            return int(value)
        if ftype == "float":
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': cannot parse {value!r} as {ftype}") from exc


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_runconfig(text, base=None):
    """Parse "key = value" lines over a base RunConfig (defaults if omitted)."""
    rc = base if base is not None else RunConfig()
    run_kw, model_kw, train_kw = {}, {}, {}
    explicit_train_seed = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key.startswith("model."):
            name = key[len("model."):]
            if name not in _MODEL_FIELDS:
                raise ConfigError(f"config line {lineno}: unknown key '{key}'")
            model_kw[name] = _coerce(key, value, _MODEL_FIELDS[name].type)
        elif key.startswith("train."):
            name = key[len("train."):]
            if name not in _TRAIN_FIELDS:
                raise ConfigError(f"config line {lineno}: unknown key '{key}'")
            train_kw[name] = _coerce(key, value, _TRAIN_FIELDS[name].type)
            if name == "seed":
                explicit_train_seed = True
        else:
            if key not in _RUN_FIELDS:
                raise ConfigError(f"config line {lineno}: unknown key '{key}'")
            run_kw[key] = _coerce(key, value, _RUN_FIELDS[key].type)
    model = replace(rc.model, **model_kw) if model_kw else rc.model
    train = replace(rc.train, **train_kw) if train_kw else rc.train
    rc = dataclasses.replace(rc, model=model, train=train, **run_kw)
    if "seed" in run_kw and not explicit_train_seed:
        rc = dataclasses.replace(rc, train=replace(rc.train, seed=rc.seed))
    return rc


def load_runconfig(path, base=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_runconfig(path.read_text(encoding="utf-8"), base=base)


def serialize_runconfig(rc):
    """Stable text form; parse_runconfig round-trips it exactly."""
    lines = []
    for name in sorted(_RUN_FIELDS):
        lines.append(f"{name} = {_format(getattr(rc, name))}")
    for name in sorted(_MODEL_FIELDS):
        lines.append(f"model.{name} = {_format(getattr(rc.model, name))}")
    for name in sorted(_TRAIN_FIELDS):
        lines.append(f"train.{name} = {_format(getattr(rc.train, name))}")
    return "\n".join(lines) + "\n"


def parse_steps(value, t_pred):
    """--steps value: "all" or comma-separated 1-based indices."""
    if value is None or value == "all" or value == "":
        return None
    try:
        steps = tuple(sorted({int(p) for p in value.split(",") if p.strip()}))
    except ValueError as exc:
        raise ConfigError(f"bad --steps value {value!r}") from exc
    if not steps:
        raise ConfigError("empty --steps list")
    if any(s < 1 or s > t_pred for s in steps):
        raise ConfigError(f"--steps entries must lie in 1..{t_pred}")
    return steps
