"""Run configuration shared by the updaters and the harness."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

from ..errors import ConfigError

ALGORITHMS = ("sppo", "ppo", "spg", "sddpg")


@dataclass
class RunConfig:
    algo: str = "sppo"
    env: str = "pendulum"
    alpha: float = 0.2
    auto_alpha: bool = False
    target_entropy: float | None = None  # None -> -(action dim) / 0.5 ln(n) discrete
    alpha_lr: float = 1e-3
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    horizon: int = 2048
    epochs: int = 10
    minibatch: int = 64
    lr_policy: float = 3e-4
    lr_value: float = 3e-4
    max_grad_norm: float | None = 0.5
    normalize_adv: bool = True
    sigma_scheme: int = 1
    loss_scheme: int = 1
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    num_envs: int = 1
    total_steps: int = 150_000
    seed: int = 0
    eval_episodes: int = 100
    eval_every: int = 10
    # off-policy (sddpg) settings
    buffer_size: int = 100_000
    batch_size: int = 256
    tau: float = 0.005
    learning_starts: int = 1000
    env_max_steps: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if not 0.0 < self.clip < 1.0:
            raise ConfigError("clip must lie in (0, 1)")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if self.alpha < 0.0:
            raise ConfigError("alpha must be >= 0")
        if self.sigma_scheme not in (1, 2, 3, 4):
            raise ConfigError("sigma_scheme must be 1, 2, 3 or 4")
        if self.loss_scheme not in (1, 2):
            raise ConfigError("loss_scheme must be 1 or 2")
        for name in ("horizon", "epochs", "minibatch", "num_envs", "eval_episodes", "eval_every",
                     "batch_size", "buffer_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if self.activation not in ("tanh", "relu"):
            raise ConfigError("activation must be tanh or relu")
        self.hidden = tuple(int(h) for h in self.hidden)

    @property
    def effective_alpha(self) -> float:
        return 0.0 if self.algo == "ppo" else self.alpha

    @property
    def tunes_alpha(self) -> bool:
        return self.auto_alpha and self.algo != "ppo"

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """Build from string (or already typed) values, rejecting unknown keys."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(name, fields[name].default, raw)
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out[f.name] = "none" if v is None else str(v)
        return out


_OPTIONAL_INT = {"env_max_steps"}


def _coerce(name: str, default, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if text.lower() == "none":
        return None
    try:
        if name in _OPTIONAL_INT:
            return int(text)
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(default, float) or default is None:
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return text


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out
