"""Experiment configuration: a versioned JSON object, overridable by CLI flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from ..densityops import is_power_of_two
from ..errors import InvalidArgumentError

CONFIG_VERSION = 1
MODES = ("query", "sample-ideal", "sample-lmr")
QUANTITIES = ("affinity", "tsallis", "certify")
FIXTURES = ("identical", "orthogonal", "diag")


class ConfigError(InvalidArgumentError):
    """The experiment configuration is malformed or violates a precondition."""


@dataclass
class ExperimentConfig:
    alpha: float = 0.5
    dim: int = 2
    rank: int = 1
    eps: float = 0.2
    trials: int = 1
    mode: str = "query"
    seed: int = 0
    quantity: str = "affinity"
    thresholds: tuple[float, float] | None = None
    fixture: str | None = None
    rho_path: str | None = None
    sigma_path: str | None = None
    output_path: str | None = None
    timing: bool = False
    version: int = CONFIG_VERSION

    def validate(self) -> "ExperimentConfig":
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not is_power_of_two(self.dim) or self.dim > 64:
            raise ConfigError(f"dim must be a power of two at most 64, got {self.dim}")
        if not 1 <= self.rank <= self.dim:
            raise ConfigError(f"rank must lie in [1, dim], got {self.rank}")
        if not 0 < self.eps < 1:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if self.trials < 0:
            raise ConfigError(f"trials must be nonnegative, got {self.trials}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.quantity not in QUANTITIES:
            raise ConfigError(f"quantity must be one of {QUANTITIES}, got {self.quantity!r}")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.quantity == "certify":
            if self.thresholds is None:
                raise ConfigError("certification needs thresholds")
            lo, hi = self.thresholds
            if not 0 <= lo < hi <= 1:
                raise ConfigError(f"thresholds must satisfy 0 <= lo < hi <= 1, got {self.thresholds}")
        if self.fixture is not None and self.fixture not in FIXTURES:
            raise ConfigError(f"fixture must be one of {FIXTURES}, got {self.fixture!r}")
        if (self.rho_path is None) != (self.sigma_path is None):
            raise ConfigError("give both instance files or neither")
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def load_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("thresholds") is not None:
        raw["thresholds"] = tuple(raw["thresholds"])
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
