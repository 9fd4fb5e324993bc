"""Key-value model configuration files.

One INI section per encoder (``word``, ``char``, ``subword``) with keys
named after the usual hyper-parameter table, plus an optional ``train``
section::

    [word]
    max_seq_length = 256
    hidden_size = 512
    num_hidden_layers = 6
    num_attention_heads = 8
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..autodiff.nn import (DESK_CHAR, DESK_SUBWORD, DESK_WORD, REFERENCE_CHAR, REFERENCE_SUBWORD,
                           REFERENCE_WORD, ConfigError, EncoderConfig)
from .training import TrainSchedule

_KEYS = {
    "max_seq_length": ("max_seq_len", int),
    "hidden_size": ("hidden_size", int),
    "num_hidden_layers": ("num_layers", int),
    "num_attention_heads": ("num_heads", int),
    "ff_multiplier": ("ff_multiplier", int),
    "dropout": ("dropout_rate", float),
    "activation": ("activation", str),
}
_TRAIN_KEYS = {"epochs": int, "batch_size": int, "learning_rate": float,
               "target_train_accuracy": float}
ENCODERS = ("word", "char", "subword")


@dataclass
class ModelConfig:
    encoders: dict[str, EncoderConfig] = field(default_factory=dict)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)

    def encoder(self, name: str) -> EncoderConfig:
        # fresh copy: models write vocab_size into their config
        return EncoderConfig(**self.encoders[name].to_dict())


def reference_config() -> ModelConfig:
    return ModelConfig({"word": EncoderConfig(**REFERENCE_WORD), "char": EncoderConfig(**REFERENCE_CHAR),
                        "subword": EncoderConfig(**REFERENCE_SUBWORD)})


def desk_config() -> ModelConfig:
    return ModelConfig({"word": EncoderConfig(**DESK_WORD), "char": EncoderConfig(**DESK_CHAR),
                        "subword": EncoderConfig(**DESK_SUBWORD)},
                       TrainSchedule(epochs=30, batch_size=32, lr=1e-3))


def load_model_config(path, base: ModelConfig | None = None) -> ModelConfig:
    """Read a config file; sections and keys it omits keep the ``base`` values."""
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    cfg = base or desk_config()
    for name in ENCODERS:
        if not cp.has_section(name):
            continue
        values = cfg.encoders[name].to_dict() if name in cfg.encoders else {}
        for key, raw in cp.items(name):
            if key not in _KEYS:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            attr, conv = _KEYS[key]
            values[attr] = conv(raw)
        cfg.encoders[name] = EncoderConfig(**values)
    if cp.has_section("train"):
        s = cfg.schedule
        for key, raw in cp.items("train"):
            if key not in _TRAIN_KEYS:
                raise ConfigError(f"[train] unknown key {key!r}")
            value = _TRAIN_KEYS[key](raw)
            setattr(s, "lr" if key == "learning_rate" else key, value)
    return cfg


def write_model_config(cfg: ModelConfig, path) -> None:
    cp = configparser.ConfigParser()
    for name, enc in cfg.encoders.items():
        d = enc.to_dict()
        cp[name] = {key: str(d[attr]) for key, (attr, _) in _KEYS.items()}
    s = cfg.schedule
    cp["train"] = {"epochs": str(s.epochs), "batch_size": str(s.batch_size),
                   "learning_rate": repr(s.lr)}
    with Path(path).open("w", encoding="utf-8") as fh:
        cp.write(fh)
