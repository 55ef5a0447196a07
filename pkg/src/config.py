"""Experiment configuration: `key = value` files, CLI overrides, validation."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from src.family import MAX_ALPHABET, default_resolution
from src.solver import DEFAULT_LAMBDA, default_epsilon, reference_settings

MODES = ("solve", "capacity", "sandwich", "beta", "combined", "supervised", "table1", "oracle-check")
BINARY_ONLY = ("sandwich", "beta", "supervised", "table1")
# Modes whose unset lambda and epsilon follow reference_settings.
REFERENCE_MODES = ("sandwich", "table1")

DEFAULT_OUT = Path("results")
DEFAULT_SIMPLEX_DIVISIONS = 40
DEFAULT_SUPERVISED_GRID = 101

# File keys that differ from the field they set.
KEY_ALIASES = {"lambda": "lam", "M": "grid"}

_FAMILY_RE = re.compile(r"^multinomial-(\d+)$")


class ConfigError(ValueError):
    pass


def parse_range(text: str) -> tuple[float, float]:
    """'lo,hi' -> (lo, hi)."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise ConfigError(f"range must look like 'lo,hi', got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as e:
        raise ConfigError(f"range bounds must be numbers, got {text!r}") from e
    if not 0.0 <= lo <= hi <= 1.0:
        raise ConfigError(f"range must satisfy 0 <= lo <= hi <= 1, got {text!r}")
    return lo, hi


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


_PARSERS = {
    "family": str,
    "phi_range": parse_range,
    "theta_range": parse_range,
    "N": int,
    "L": int,
    "alpha": float,
    "grid": _optional_int,
    "lam": float,
    "epsilon": _optional_float,
    "max_iters": int,
    "seed": int,
    "out": Path,
    "threads": _optional_int,
    "px": float,
    "samples": int,
    "log_every": int,
}


@dataclass
class ExperimentConfig:
    mode: str = "solve"
    family: str = "bernoulli"
    phi_range: tuple[float, float] = (0.0, 1.0)
    theta_range: tuple[float, float] | None = None
    N: int = 100
    L: int = 1
    alpha: float = 0.1
    grid: int | None = None
    lam: float | None = None
    epsilon: float | None = None
    max_iters: int = 200_000
    seed: int = 0
    out: Path | None = None
    threads: int | None = None
    px: float = 0.5
    samples: int = 2000
    log_every: int = 100

    @property
    def alphabet_size(self) -> int:
        if self.family == "bernoulli":
            return 2
        m = _FAMILY_RE.match(self.family)
        if not m:
            raise ConfigError(f"family must be 'bernoulli' or 'multinomial-K', got {self.family!r}")
        return int(m.group(1)) + 1

    @property
    def theta(self) -> tuple[float, float]:
        return self.theta_range if self.theta_range is not None else self.phi_range

    @property
    def resolution(self) -> int:
        """Grid points (Bernoulli) or simplex divisions (multinomial)."""
        if self.grid is not None:
            return self.grid
        if self.mode == "supervised":
            return DEFAULT_SUPERVISED_GRID
        if self.alphabet_size > 2:
            return DEFAULT_SIMPLEX_DIVISIONS
        return default_resolution(self.N)

    @property
    def out_dir(self) -> Path:
        return self.out if self.out is not None else DEFAULT_OUT / self.mode

    def solver_settings(self, N: int | None = None) -> dict[str, float]:
        """lam and epsilon for a run at batch size N; explicit values win over mode defaults."""
        N = self.N if N is None else N
        if self.mode in REFERENCE_MODES:
            defaults = reference_settings(N)
        else:
            defaults = {"lam": DEFAULT_LAMBDA, "epsilon": default_epsilon(N)}
        return {
            "lam": self.lam if self.lam is not None else defaults["lam"],
            "epsilon": self.epsilon if self.epsilon is not None else defaults["epsilon"],
        }

    def validate(self) -> ExperimentConfig:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        size = self.alphabet_size
        if not 2 <= size <= MAX_ALPHABET:
            raise ConfigError(f"multinomial families need 1 <= K <= {MAX_ALPHABET - 1}")
        if size > 2 and self.mode in BINARY_ONLY:
            raise ConfigError(f"mode {self.mode!r} needs the bernoulli family")
        lo, hi = self.phi_range
        a, b = self.theta
        if not (lo <= a <= b <= hi):
            raise ConfigError(f"theta_range [{a}, {b}] must lie inside phi_range [{lo}, {hi}]")
        if self.N < 1:
            raise ConfigError(f"N must be at least 1, got {self.N}")
        if self.mode == "beta" and self.N < 2:
            raise ConfigError("beta mode needs N >= 2 (at least one training symbol)")
        if self.L < 1:
            raise ConfigError(f"L must be at least 1, got {self.L}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.grid is not None and self.grid < 1:
            raise ConfigError(f"grid must be at least 1, got {self.grid}")
        if self.grid == 1 and lo < hi and size == 2:
            raise ConfigError("a non-degenerate phi_range needs a grid of at least 2 points")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if not 0.0 <= self.px <= 1.0:
            raise ConfigError(f"px must lie in [0, 1], got {self.px}")
        if self.samples < 2:
            raise ConfigError(f"samples must be at least 2, got {self.samples}")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be at least 1, got {self.log_every}")
        return self

    def echo(self) -> dict[str, Any]:
        """JSON-friendly copy of every field."""
        out = asdict(self)
        out["out"] = str(self.out_dir)
        out["phi_range"] = list(self.phi_range)
        out["theta_range"] = list(self.theta)
        out["grid"] = self.resolution
        if self.mode != "table1":
            out.update(self.solver_settings())
        return out


FIELD_NAMES = {f.name for f in fields(ExperimentConfig)} - {"mode"}


def _field_for(key: str) -> str:
    key = key.strip()
    key = KEY_ALIASES.get(key, key).replace("-", "_")
    if key not in FIELD_NAMES:
        raise ConfigError(f"unknown config key {key!r}")
    return key


def load_config_file(path: str | Path) -> dict[str, str]:
    """Raw values from a `key = value` file; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path, interpolate=False)
    values: dict[str, str] = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigError(f"config key {key!r} has no value")
        values[_field_for(key)] = value
    return values


def resolve_config(
    mode: str,
    file_values: dict[str, str] | None = None,
    flags: dict[str, Any] | None = None,
) -> ExperimentConfig:
    """Defaults, then file values, then non-None flags."""
    settings: dict[str, Any] = {}
    for key, text in (file_values or {}).items():
        name = _field_for(key)
        try:
            settings[name] = _PARSERS[name](text)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad value for {name!r}: {text!r}") from e
    for key, value in (flags or {}).items():
        if value is not None:
            settings[_field_for(key)] = value
    return ExperimentConfig(mode=mode, **settings).validate()
