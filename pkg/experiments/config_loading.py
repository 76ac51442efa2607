"""Load system, optimizer and command configuration from JSON files."""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from models import ValidationError
from parameters import OptimizerConfig, ReproduceConfig, RydbergSystem

RYDBERG_KEYS = {"gamma_mhz", "gamma_d_mhz", "delta_1", "delta_2"}


def load_json(json_path: Union[str, Path]) -> Dict[str, Any]:
    """Read a JSON object from disk.

    Raises:
        ValidationError: If the file is missing, unreadable or not a JSON object.
    """
    json_path = Path(json_path)
    if not json_path.exists():
        raise ValidationError(f"Config file not found: {json_path}")
    try:
        with open(json_path, 'r') as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in {json_path}: {e}") from e
    if not isinstance(config, dict):
        raise ValidationError(f"{json_path} must contain a JSON object")
    return config


def check_keys(config: Dict[str, Any], allowed: Iterable[str], where: str) -> None:
    unknown = sorted(set(config) - set(allowed))
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {unknown}")


def resolve_path(value: Optional[str], base: Union[str, Path]) -> Optional[Path]:
    """Interpret `value` relative to the directory of the config file `base`."""
    if value is None:
        return None
    path = Path(value)
    if path.is_absolute():
        return path
    return (Path(base).parent / path).resolve()


def rydberg_system_from_dict(config: Dict[str, Any], where: str = "rydberg config") -> RydbergSystem:
    check_keys(config, RYDBERG_KEYS, where)
    return RydbergSystem.from_mhz(**{key: float(value) for key, value in config.items()})


def load_rydberg_system(json_path: Union[str, Path]) -> RydbergSystem:
    """System rates from `gamma_mhz`, `gamma_d_mhz`, `delta_1`, `delta_2` (MHz, times 2*pi)."""
    return rydberg_system_from_dict(load_json(json_path), str(json_path))


def load_optimizer_config(json_path: Union[str, Path]) -> OptimizerConfig:
    try:
        return OptimizerConfig.from_dict(load_json(json_path))
    except TypeError as e:
        raise ValidationError(f"invalid optimizer config {json_path}: {e}") from e


def load_reproduce_config(json_path: Union[str, Path]) -> ReproduceConfig:
    try:
        return ReproduceConfig.from_dict(load_json(json_path))
    except TypeError as e:
        raise ValidationError(f"invalid reproduce config {json_path}: {e}") from e


def load_command_config(json_path: Union[str, Path], allowed: Iterable[str],
                        path_keys: Iterable[str] = ()) -> Dict[str, Any]:
    """Command options from a config file, paths resolved against its directory."""
    config = load_json(json_path)
    check_keys(config, allowed, str(json_path))
    for key in path_keys:
        if key in config and config[key] is not None:
            if isinstance(config[key], list):
                config[key] = [resolve_path(v, json_path) for v in config[key]]
            else:
                config[key] = resolve_path(config[key], json_path)
    return config
