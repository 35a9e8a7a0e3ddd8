"""
Run configuration files.

A run configuration is a flat key-value file read with python-dotenv:

    # cache sweep at rho0 = 1.4
    snr_db = 10
    beta = 0.5
    L_b = 100
    rho0 = 1.4
    L_u = [0, 5, 10, 15, 20]
    precoders = [mrt, zf, rzf]

Scalar keys map onto SystemConfig fields. Sweep axes take either an
explicit list or a grid `{start, stop, steps, scale: linear|log}`.

A manifest.json written by an earlier run can stand in for the file:
load_recorded_run() rebuilds the exact configuration it resolved.
"""

import json
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from services.errors import ConfigError
from services.scenario import SystemConfig

logger = logging.getLogger(__name__)

SYSTEM_KEYS = set(SystemConfig.model_fields)
RUN_KEYS = {
    "rho0",
    "precoders",
    "modes",
    "evaluation",
    "trials",
    "threads",
    "xi_min",
    "xi_max",
    "cache_policy",
}
GRID_SCALES = ("linear", "log")


@dataclass(frozen=True)
class RunConfig:
    """A resolved run configuration: one scenario template plus sweep settings."""

    system: SystemConfig
    rho0: Tuple[float, ...] = ()
    L_u: Tuple[float, ...] = ()
    precoders: Tuple[str, ...] = ("mrt", "zf", "rzf")
    modes: Tuple[str, ...] = ("proposed", "baseline")
    evaluation: str = "large-system"
    trials: Optional[int] = None
    threads: Optional[int] = None
    xi_min: Optional[float] = None
    xi_max: Optional[float] = None
    cache_policy: str = "fixed"
    source: Optional[str] = None

    def resolved(self) -> Dict[str, Any]:
        """JSON-ready snapshot of every setting."""
        return {
            "system": self.system.model_dump(mode="json"),
            "rho0": list(self.rho0),
            "L_u": list(self.L_u),
            "precoders": list(self.precoders),
            "modes": list(self.modes),
            "evaluation": self.evaluation,
            "trials": self.trials,
            "threads": self.threads,
            "xi_min": self.xi_min,
            "xi_max": self.xi_max,
            "cache_policy": self.cache_policy,
            "source": self.source,
        }


def parse_scalar(text: str) -> Any:
    """Parse an int, a float, or fall back to the stripped string."""
    text = text.strip().strip("'\"")
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_list(text: str) -> Tuple[Any, ...]:
    """Parse `[a, b, c]` into a tuple of scalars."""
    body = text.strip()[1:-1].strip()
    if not body:
        return ()
    return tuple(parse_scalar(item) for item in body.split(","))


def parse_grid(text: str) -> Tuple[float, ...]:
    """
    Parse `{start, stop, steps, scale: linear|log}` into grid values.

    Raises:
        ConfigError: malformed grid, non-positive steps, or a log grid touching zero
    """
    body = text.strip()[1:-1]
    positional, options = [], {}
    for item in body.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            name, value = item.split(":", 1)
            options[name.strip()] = value.strip()
        else:
            positional.append(item)

    if len(positional) != 3:
        raise ConfigError(f"grid '{text}' needs start, stop and steps")
    try:
        start, stop = float(positional[0]), float(positional[1])
        steps = int(positional[2])
    except ValueError as e:
        raise ConfigError(f"grid '{text}' has a non-numeric bound: {e}") from e
    scale = options.pop("scale", "linear")
    if options:
        raise ConfigError(f"grid '{text}' has unknown options: {', '.join(options)}")
    if steps < 1:
        raise ConfigError(f"grid '{text}' needs at least one step")
    if scale not in GRID_SCALES:
        raise ConfigError(f"grid scale must be linear or log, got '{scale}'")
    if scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"log grid '{text}' needs positive bounds")
        return tuple(np.geomspace(start, stop, steps).tolist())
    return tuple(np.linspace(start, stop, steps).tolist())


def parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith("{") and text.endswith("}"):
        return parse_grid(text)
    if text.startswith("[") and text.endswith("]"):
        return parse_list(text)
    return parse_scalar(text)


def _as_axis(key: str, value: Any) -> Tuple[float, ...]:
    values = value if isinstance(value, tuple) else (value,)
    for item in values:
        if not isinstance(item, (int, float)):
            raise ConfigError(f"{key} values must be numeric, got '{item}'")
    return tuple(float(v) for v in values)


def _as_names(key: str, value: Any) -> Tuple[str, ...]:
    values = value if isinstance(value, tuple) else (value,)
    return tuple(str(v) for v in values)


def build_run_config(
    raw: Dict[str, Optional[str]], source: Optional[str] = None
) -> RunConfig:
    """Turn raw key-value strings into a validated RunConfig."""
    unknown = sorted(set(raw) - SYSTEM_KEYS - RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")

    system: Dict[str, Any] = {}
    run: Dict[str, Any] = {"source": source}
    for key, text in raw.items():
        if text is None or not text.strip():
            raise ConfigError(f"configuration key '{key}' has no value")
        value = parse_value(text)

        if key == "L_u":
            axis = _as_axis(key, value)
            if len(axis) == 1 and float(axis[0]).is_integer():
                system["L_u"] = int(axis[0])
            run["L_u"] = axis
        elif key == "rho0":
            run["rho0"] = _as_axis(key, value)
        elif key in ("precoders", "modes"):
            run[key] = _as_names(key, value)
        elif key in ("trials", "threads"):
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key} must be a positive integer, got '{text}'")
            run[key] = value
        elif key in ("xi_min", "xi_max"):
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"{key} must be a positive number, got '{text}'")
            run[key] = float(value)
        elif key in ("evaluation", "cache_policy"):
            run[key] = str(value)
        else:
            system[key] = list(value) if isinstance(value, tuple) else value

    try:
        run["system"] = SystemConfig(**system)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario: {e}") from e

    return RunConfig(**run)


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """
    Load a run configuration file (defaults only when path is None).

    Raises:
        ConfigError: missing file, unknown key or invalid value
    """
    if path is None:
        return build_run_config({})

    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    raw = dotenv_values(file)
    logger.info(f"Loaded {len(raw)} settings from {path}")
    return build_run_config(dict(raw), source=str(file))


@dataclass(frozen=True)
class RecordedRun:
    """The resolved settings of an earlier run, read back from its manifest.json."""

    command: str
    seed: int
    trials: int
    threads: int
    options: Dict[str, Any]
    run_config: RunConfig


RECORDED_KEYS = ("command", "seed", "trials", "threads", "config")
SEQUENCE_FIELDS = ("rho0", "L_u", "precoders", "modes")


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    """
    Rebuild a RunConfig from its resolved() snapshot.

    Raises:
        ConfigError: missing scenario, unknown field or invalid value
    """
    if not isinstance(data, dict) or not isinstance(data.get("system"), dict):
        raise ConfigError("recorded configuration has no scenario")
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"recorded configuration has unknown fields: {', '.join(unknown)}")

    run = {key: value for key, value in data.items() if key != "system"}
    for key in SEQUENCE_FIELDS:
        if key in run:
            run[key] = tuple(run[key])
    try:
        system = SystemConfig(**data["system"])
    except ValidationError as e:
        raise ConfigError(f"invalid recorded scenario: {e}") from e
    return RunConfig(system=system, **run)


def load_recorded_run(path: str) -> RecordedRun:
    """
    Read a manifest.json back into the settings that produced it.

    Raises:
        ConfigError: missing or unreadable file, or a manifest without run settings
    """
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        with file.open(encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"manifest {path} is not valid JSON: {e}") from e

    missing = [key for key in RECORDED_KEYS if key not in data]
    if missing:
        raise ConfigError(f"manifest {path} lacks {', '.join(missing)}")
    logger.info(f"Replaying {data['command']} from {path}")
    return RecordedRun(
        command=data["command"],
        seed=int(data["seed"]),
        trials=int(data["trials"]),
        threads=int(data["threads"]),
        options=dict(data.get("options") or {}),
        run_config=run_config_from_dict(data["config"]),
    )


def with_overrides(run_config: RunConfig, **system_overrides) -> RunConfig:
    """Return a copy whose scenario has the given fields replaced (None values ignored)."""
    updates = {k: v for k, v in system_overrides.items() if v is not None}
    if not updates:
        return run_config
    values = run_config.system.model_dump()
    values.update(updates)
    try:
        system = SystemConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid scenario: {e}") from e
    return RunConfig(**{**run_config.__dict__, "system": system})
