"""Flat key/value experiment configuration.

Files are UTF-8 text, one `key = value` pair per line, `#` comments.
Keys are namespaced env.* / ppo.* / deir.* / run.*; command-line
overrides use the same `key=value` form. Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

from ..envs import TASKS, EnvSpec
from ..methods import METHODS


class ConfigError(Exception):
    pass


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_ints(text):
    return tuple(int(p) for p in str(text).replace(",", " ").split())


@dataclass
class ExperimentConfig:
    # env.*
    task: str = "MultiRoomN2S4"
    view_size: int = 7
    noise_mu: float = 0.0
    noise_sigma: float = 0.0
    invisible_obstacles: bool = False
    max_steps: int = 0  # 0 -> task default
    time_penalty_coef: float = 0.9
    # ppo.*
    gamma: float = 0.99
    gae_lambda: float = 0.95
    rollout_steps: int = 512
    workers: int = 16
    clip: float = 0.2
    ppo_epochs: int = 4
    minibatch: int = 512
    entropy_coef: float = 1e-2
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    adv_momentum: float = 0.9
    lr: float = 3e-4
    adam_eps: float = 1e-5
    bptt_len: int = 16
    embed_dim: int = 64
    hidden: int = 128
    channels: tuple = (32, 64, 64)
    norm: str = "batch"
    # deir.*
    method_lr: float = 3e-4
    beta: float = 1e-2
    ext_coef: float = 1.0
    ir_momentum: float = 0.9
    queue_size: int = 100_000
    queue_smoothing: float = 0.9
    model_epochs: int = 4
    model_minibatch: int = 512
    # run.*
    method: str = "DEIR"
    frames: int = 1_000_000
    seeds: tuple = (0, 1, 2)
    out: str = "runs"
    checkpoint_every: int = 0  # rollouts between checkpoints; 0 = only final
    log_every: int = 1

    def env_spec(self) -> EnvSpec:
        return EnvSpec(
            task=self.task,
            view_size=self.view_size,
            noise_mu=self.noise_mu,
            noise_sigma=self.noise_sigma,
            invisible_obstacles=self.invisible_obstacles,
            max_steps=self.max_steps or None,
            time_penalty_coef=self.time_penalty_coef,
        )

    def validate(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        self.env_spec()  # re-run env-side validation
        positive = ("rollout_steps", "workers", "minibatch", "ppo_epochs",
                    "model_epochs", "model_minibatch", "bptt_len",
                    "embed_dim", "hidden", "frames", "queue_size")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("gamma", "gae_lambda", "clip", "adv_momentum",
                     "ir_momentum", "queue_smoothing"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.rollout_steps % self.bptt_len:
            raise ConfigError("rollout_steps must be divisible by bptt_len")
        if len(self.channels) != 3:
            raise ConfigError("channels needs exactly 3 entries")
        if self.norm not in ("batch", "layer", "none"):
            raise ConfigError(f"unknown norm {self.norm!r}")
        return self


# config-file key -> (dataclass field, parser)
_KEYS = {
    "env.task": ("task", str),
    "env.view_size": ("view_size", int),
    "env.noise_mu": ("noise_mu", float),
    "env.noise_sigma": ("noise_sigma", float),
    "env.invisible_obstacles": ("invisible_obstacles", _parse_bool),
    "env.max_steps": ("max_steps", int),
    "env.time_penalty_coef": ("time_penalty_coef", float),
    "ppo.gamma": ("gamma", float),
    "ppo.gae_lambda": ("gae_lambda", float),
    "ppo.rollout_steps": ("rollout_steps", int),
    "ppo.workers": ("workers", int),
    "ppo.clip": ("clip", float),
    "ppo.epochs": ("ppo_epochs", int),
    "ppo.minibatch": ("minibatch", int),
    "ppo.entropy_coef": ("entropy_coef", float),
    "ppo.value_coef": ("value_coef", float),
    "ppo.max_grad_norm": ("max_grad_norm", float),
    "ppo.adv_momentum": ("adv_momentum", float),
    "ppo.lr": ("lr", float),
    "ppo.adam_eps": ("adam_eps", float),
    "ppo.bptt_len": ("bptt_len", int),
    "ppo.embed_dim": ("embed_dim", int),
    "ppo.hidden": ("hidden", int),
    "ppo.channels": ("channels", _parse_ints),
    "ppo.norm": ("norm", str),
    "deir.lr": ("method_lr", float),
    "deir.beta": ("beta", float),
    "deir.ext_coef": ("ext_coef", float),
    "deir.ir_momentum": ("ir_momentum", float),
    "deir.queue_size": ("queue_size", int),
    "deir.queue_smoothing": ("queue_smoothing", float),
    "deir.model_epochs": ("model_epochs", int),
    "deir.model_minibatch": ("model_minibatch", int),
    "run.method": ("method", str),
    "run.frames": ("frames", int),
    "run.seeds": ("seeds", _parse_ints),
    "run.out": ("out", str),
    "run.checkpoint_every": ("checkpoint_every", int),
    "run.log_every": ("log_every", int),
}


def parse_overrides(pairs):
    """['key=value', ...] -> {key: value-string}."""
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out


def _read_pairs(path):
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = text.partition("=")
            pairs[key.strip()] = value.strip()
    return pairs


def load_config(path=None, overrides=None) -> ExperimentConfig:
    pairs = _read_pairs(path) if path else {}
    pairs.update(overrides or {})
    cfg = ExperimentConfig()
    for key, raw in pairs.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        name, parse = _KEYS[key]
        try:
            setattr(cfg, name, parse(raw))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return cfg.validate()


def config_lines(cfg: ExperimentConfig):
    """Render a config back to its flat key/value text form."""
    back = {name: key for key, (name, _) in _KEYS.items()}
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{back[f.name]} = {value}")
    return lines
