"""Flat ``key = value`` experiment configuration.

Lists are comma-separated, booleans are ``true``/``false``. Unknown keys are
rejected. ``format_config(parse_config(text))`` is canonical, so parsing the
formatted text gives back the same object.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .trainer import TrainConfig

OUTPUT_ENV = "POLARBP_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # code
    N: int = 64
    k: int = 0  # 0 means N / 2
    design: str = "bhattacharyya_awgn"
    design_param: str = "0.0"
    avector: str = ""
    design_b: str = "bhattacharyya_awgn"
    design_param_b: str = "0.0"
    avector_b: str = ""
    # channel / decoder
    channel: str = "awgn"
    snr_db: tuple = (1.0, 2.0, 3.0)
    n_it: int = 5
    n_it_b: int = 0
    # training
    train_snrs: tuple = (2.0, 4.0, 5.0)
    steps: tuple = (200, 2000, 2000)
    lambda1: float = 1.0
    lambda2: float = 1.0
    lr: float = 0.001
    batch_size: int = 128
    a_init: str = "zeros"
    rate_projection: bool = False
    merge_phases: bool = False
    extraction: str = "largest_info"
    payload: str = "zero"
    # simulation
    min_frames: int = 1000
    max_frames: int = 100000
    target_errors: int = 100
    seed: int = 0
    # gradient check / export
    trials: int = 20
    input: str = ""
    output_dir: str = ""

    def validate(self) -> "ExperimentConfig":
        """Check cross-field consistency; returns the config with ``k`` resolved."""
        if self.N < 2 or self.N & (self.N - 1):
            raise ConfigError(f"N must be a power of two >= 2, got {self.N}")
        if self.k == 0:
            return replace(self, k=self.N // 2).validate()
        if not 1 <= self.k <= self.N:
            raise ConfigError(f"k must satisfy 1 <= k <= N (k={self.k}, N={self.N})")
        if self.channel.lower() not in ("awgn", "rayleigh"):
            raise ConfigError(f"unknown channel {self.channel!r}")
        if self.n_it < 1 or self.n_it_b < 0:
            raise ConfigError("n_it must be >= 1")
        if not 1 <= self.min_frames <= self.max_frames or self.target_errors < 1:
            raise ConfigError("need 1 <= min_frames <= max_frames and target_errors >= 1")
        if len(self.steps) != 3 or any(s < 0 for s in self.steps):
            raise ConfigError("steps must be three non-negative phase budgets")
        return self

    def train_config(self) -> TrainConfig:
        if not self.train_snrs:
            raise ConfigError("train_snrs must not be empty when training")
        try:
            return TrainConfig(N=self.N, k=self.k, n_it=self.n_it, channel=self.channel,
                               train_snrs=self.train_snrs, batch_size=self.batch_size, lr=self.lr,
                               steps=self.steps, lambda1=self.lambda1, lambda2=self.lambda2,
                               merge_phases=self.merge_phases, a_init=self.a_init,
                               rate_projection=self.rate_projection, extraction=self.extraction,
                               payload=self.payload, seed=self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV, "runs"))


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def _convert(name: str, raw: str):
    default = getattr(_DEFAULTS, name)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return low == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            elem = type(default[0]) if default else float
            return tuple(elem(p) for p in raw.split(",") if p.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def override(cfg: ExperimentConfig, pairs: dict) -> ExperimentConfig:
    changes = {}
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        changes[key] = raw if not isinstance(raw, str) else _convert(key, raw)
    return replace(cfg, **changes)


def parse_config(text: str) -> ExperimentConfig:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        pairs[key.strip()] = val.strip()
    return override(ExperimentConfig(), pairs)


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f} = {_format_value(getattr(cfg, f))}\n" for f in _FIELDS)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def to_dict(cfg: ExperimentConfig) -> dict:
    return {f: _format_value(getattr(cfg, f)) for f in _FIELDS}


def from_dict(d: dict) -> ExperimentConfig:
    return override(ExperimentConfig(), {k: str(v) for k, v in d.items()})
