"""Plain-text `key=value` configuration with dotted keys, e.g. `plasticity.alpha=0.0001`."""
import copy
import typing
from dataclasses import fields, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from ..classes import PlasticityConfig, RunConfig
from ..exceptions import ConfigurationError

# dotted key -> (raw text, where it came from)
RawValues = Dict[str, Tuple[str, str]]

ALPHA_KEY = "plasticity.alpha"
ALPHA_PRESET_KEY = "plasticity.alpha_preset"

TRUE_WORDS = ("1", "true", "yes", "on")
FALSE_WORDS = ("0", "false", "no", "off")


def _field_types(cls) -> Dict[str, Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def field_types(cls=RunConfig, prefix: str = "") -> Dict[str, Any]:
    """Every leaf key of the config tree mapped to its annotated type."""
    out = {}
    for name, hint in _field_types(cls).items():
        if is_dataclass(hint):
            out.update(field_types(hint, f"{prefix}{name}."))
        else:
            out[f"{prefix}{name}"] = hint
    return out


def flatten(obj, prefix: str = "") -> Dict[str, Any]:
    out = {}
    for f in fields(obj):
        value = getattr(obj, f.name)
        if is_dataclass(value):
            out.update(flatten(value, f"{prefix}{f.name}."))
        else:
            out[f"{prefix}{f.name}"] = value
    return out


def format_value(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return ",".join(f"{k}:{v}" for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_value(text: str, hint) -> Any:
    text = text.strip()
    origin = typing.get_origin(hint)
    if origin in (list, tuple):
        return [int(part) for part in text.split(",") if part.strip()]
    if origin is dict:
        result = {}
        for part in text.split(","):
            if not part.strip():
                continue
            key, sep, value = part.partition(":")
            if not sep:
                raise ValueError(f"expected class:count pairs, got '{part}'")
            result[int(key)] = int(value)
        return result
    if isinstance(hint, type) and issubclass(hint, Enum):
        return hint(text)
    if hint is bool:
        if text.lower() in TRUE_WORDS:
            return True
        if text.lower() in FALSE_WORDS:
            return False
        raise ValueError(f"expected a boolean, got '{text}'")
    if hint is int:
        return int(text)
    if hint is float:
        return float(text)
    return text


def parse_config_text(text: str, source: str = "<config>") -> RawValues:
    known = field_types()
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigurationError(f"{source}:{line_no}: expected key=value, got '{stripped}'")
        if key not in known:
            raise ConfigurationError(f"{source}:{line_no}: unknown key '{key}'")
        raw[key] = (value.strip(), f"{source}:{line_no}")
    return raw


def parse_overrides(overrides: Iterable[str]) -> RawValues:
    known = field_types()
    raw = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigurationError(f"--set {item}: expected key=value")
        if key not in known:
            raise ConfigurationError(f"--set {item}: unknown key '{key}'")
        raw[key] = (value.strip(), "--set")
    return raw


def _construct(cls, values: Dict[str, Any], prefix: str = ""):
    kwargs = {}
    for name, hint in _field_types(cls).items():
        if is_dataclass(hint):
            kwargs[name] = _construct(hint, values, f"{prefix}{name}.")
        else:
            kwargs[name] = copy.copy(values[f"{prefix}{name}"])
    return cls(**kwargs)


def build_config(raw: RawValues, base: Optional[RunConfig] = None) -> RunConfig:
    known = field_types()
    values = flatten(base or RunConfig())
    for key, (text, where) in raw.items():
        try:
            values[key] = parse_value(text, known[key])
        except ValueError as e:
            raise ConfigurationError(f"{where}: bad value for '{key}': {e}")
    if ALPHA_PRESET_KEY in raw and ALPHA_KEY not in raw:
        name = values[ALPHA_PRESET_KEY]
        if name not in PlasticityConfig.ALPHA_PRESETS:
            raise ConfigurationError(f"{raw[ALPHA_PRESET_KEY][1]}: unknown alpha preset '{name}', "
                                     f"known presets: {', '.join(PlasticityConfig.ALPHA_PRESETS)}")
        values[ALPHA_KEY] = PlasticityConfig.ALPHA_PRESETS[name]
    return _construct(RunConfig, values)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Defaults, then the config file, then `--set` overrides."""
    raw = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        raw.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    raw.update(parse_overrides(overrides))
    return build_config(raw)


def apply_overrides(config: RunConfig, overrides: Iterable[str]) -> RunConfig:
    return build_config(parse_overrides(overrides), base=config)


def dump_config(config: RunConfig) -> str:
    return "".join(f"{key}={format_value(value)}\n" for key, value in flatten(config).items())
