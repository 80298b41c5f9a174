"""Experiment configuration: flat key-value files plus flag overrides.

A config file holds one `key = value` pair per line, where the value is
JSON-encoded; `#` starts a comment. Command-line flags always take
precedence over file values, and BELLSIM_SEED is the seed of last resort.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Mapping, Optional

from .models import ModelDescriptor, catalog, quantum_model, nonlocal_model
from .stats import validate_sign_pattern


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


def parse_config_file(path: str) -> dict[str, object]:
    """Parse `key = JSON` lines into a dict."""
    try:
        text = open(path, "r", encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            values[key] = json.loads(value.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{lineno}: value for {key!r} is not valid JSON") from exc
    return values


def sign_pattern_from_string(text: str) -> tuple[int, ...]:
    signs = {"+": 1, "-": -1}
    if any(ch not in signs for ch in text):
        raise ConfigError(f"sign pattern must use only '+' and '-', got {text!r}")
    try:
        return validate_sign_pattern(signs[ch] for ch in text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sign_pattern_to_string(pattern: tuple[int, ...]) -> str:
    return "".join("+" if s == 1 else "-" for s in pattern)


def parse_angles(value: object) -> tuple[float, float, float, float]:
    """Angles from a CSV string ('0,1.57,0.78,2.35') or a JSON list."""
    if isinstance(value, str):
        parts = value.split(",")
    else:
        parts = list(value)  # type: ignore[arg-type]
    try:
        angles = tuple(float(p) for p in parts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"angles must be four numbers, got {value!r}") from exc
    if len(angles) != 4 or any(not math.isfinite(t) for t in angles):
        raise ConfigError(f"angles must be four finite radians, got {value!r}")
    return angles


def resolve_model(
    spec: object,
    state: Optional[str] = None,
    angles: Optional[tuple[float, float, float, float]] = None,
) -> ModelDescriptor:
    """Resolve --model input: a catalog name, 'quantum'/'nonlocal', or JSON.

    `state` and `angles` override the state kind and angle binding for
    quantum and nonlocal models.
    """
    try:
        if isinstance(spec, Mapping):
            model = ModelDescriptor.from_dict(spec)
        elif isinstance(spec, str):
            name = spec.strip()
            named = catalog()
            if name in named:
                model = named[name]
            elif name == "quantum":
                model = quantum_model()
            elif name == "nonlocal":
                model = nonlocal_model()
            elif name.startswith("{"):
                model = ModelDescriptor.from_dict(json.loads(name))
            else:
                raise ConfigError(
                    f"unknown model {name!r}; expected a catalog name "
                    f"({', '.join(sorted(named))}), 'quantum', 'nonlocal', or a JSON object"
                )
        else:
            raise ConfigError(f"cannot interpret model specification {spec!r}")
        if model.kind in ("quantum", "nonlocal") and (state is not None or angles is not None):
            model = ModelDescriptor(
                kind=model.kind,
                state=state if state is not None else model.state,
                angles=angles if angles is not None else model.angles,
            )
        elif state is not None or angles is not None:
            raise ConfigError(f"--state/--angles do not apply to a {model.kind} model")
        return model
    except ConfigError:
        raise
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def resolve_seed(flag_value: Optional[int], file_value: Optional[object]) -> int:
    """Seed precedence: flag, then config file, then BELLSIM_SEED, then 0."""
    if flag_value is not None:
        return int(flag_value)
    if file_value is not None:
        if not isinstance(file_value, int):
            raise ConfigError(f"seed must be an integer, got {file_value!r}")
        return file_value
    env = os.environ.get("BELLSIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"BELLSIM_SEED must be an integer, got {env!r}") from exc
    return 0


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved CHSH experiment description."""

    model: ModelDescriptor
    trials_per_pair: int
    seed: int
    sign_pattern: tuple[int, ...]
    out_path: Optional[str]
    out_format: str
    threads: int
    exact: bool

    def __post_init__(self) -> None:
        if self.trials_per_pair < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials_per_pair}")
        if self.out_format not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {self.out_format!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
