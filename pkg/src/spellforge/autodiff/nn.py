"""Transformer-encoder building blocks on top of the tensor kernels."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


class ConfigError(ValueError):
    pass


@dataclass
class EncoderConfig:
    hidden_size: int
    num_layers: int
    num_heads: int
    max_seq_len: int
    vocab_size: int = 0
    ff_multiplier: int = 4
    dropout_rate: float = 0.1
    activation: str = "gelu"

    def __post_init__(self):
        for name in ("hidden_size", "num_layers", "num_heads", "max_seq_len", "ff_multiplier"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.hidden_size % self.num_heads:
            raise ConfigError(
                f"hidden_size {self.hidden_size} is not divisible by num_heads {self.num_heads}"
            )
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return asdict(self)


ACTIVATIONS = {"gelu": T.gelu, "relu": T.relu}

# Benchmark-scale encoder shapes.  The character encoder gets one extra
# position for [CLS] in front of the 20 characters.
REFERENCE_WORD = dict(hidden_size=512, num_layers=6, num_heads=8, max_seq_len=256)
REFERENCE_SUBWORD = dict(hidden_size=768, num_layers=12, num_heads=12, max_seq_len=256)
REFERENCE_CHAR = dict(hidden_size=256, num_layers=4, num_heads=8, max_seq_len=21)

# What actually trains on one CPU core.
DESK_WORD = dict(hidden_size=128, num_layers=2, num_heads=4, max_seq_len=256)
DESK_SUBWORD = dict(hidden_size=128, num_layers=2, num_heads=4, max_seq_len=256)
DESK_CHAR = dict(hidden_size=128, num_layers=2, num_heads=4, max_seq_len=21)


def trunc_normal(rng, shape, std: float = 0.02) -> np.ndarray:
    """Normal(0, std) redrawn outside two standard deviations."""
    x = rng.normal(0.0, std, size=shape)
    bad = np.abs(x) > 2 * std
    while bad.any():
        x[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(x) > 2 * std
    return x


def param(data, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


class Module:
    training = True

    def named_parameters(self, prefix: str = ""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self):
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self) -> None:
        # zeros, not None: parameters unreachable from the loss report a zero gradient
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def set_dropout_rng(self, rng) -> None:
        for m in self.modules():
            if isinstance(m, Dropout):
                m.rng = rng

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = sorted(set(params) - set(state))
            extra = sorted(set(state) - set(params))
            raise KeyError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if p.shape != state[name].shape:
                raise T.ShapeError(f"{name}: expected {p.shape}, got {state[name].shape}")
            p.data = np.array(state[name], dtype=p.dtype)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng):
        self.weight = param(trunc_normal(rng, (d_in, d_out)))
        self.bias = param(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise T.ShapeError(f"linear: incompatible shapes {x.shape} and {self.weight.shape}")
        return T.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = param(np.ones(dim))
        self.beta = param(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gamma, self.beta)


class Dropout(Module):
    def __init__(self, rate: float):
        self.rate = rate
        self.rng = np.random.default_rng(0)

    def __call__(self, x: Tensor) -> Tensor:
        return T.dropout(x, self.rate, self.rng, self.training)


def padding_bias(mask: np.ndarray) -> np.ndarray:
    """(batch, seq) validity mask -> additive (batch, 1, 1, seq) key bias."""
    return np.where(mask, 0.0, -np.inf)[:, None, None, :]


class MultiHeadAttention(Module):
    def __init__(self, config: EncoderConfig, rng):
        d = config.hidden_size
        self.num_heads = config.num_heads
        self.head_dim = d // config.num_heads
        self.query = Linear(d, d, rng)
        self.key = Linear(d, d, rng)
        self.value = Linear(d, d, rng)
        self.output = Linear(d, d, rng)
        self.attn_dropout = Dropout(config.dropout_rate)
        self.last_weights: np.ndarray | None = None

    def _heads(self, x: Tensor, b: int, s: int) -> Tensor:
        return x.reshape(b, s, self.num_heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """Scaled dot-product attention; ``mask`` is (batch, seq), True = real token."""
        b, s, d = x.shape
        q = self._heads(self.query(x), b, s)
        k = self._heads(self.key(x), b, s)
        v = self._heads(self.value(x), b, s)
        scores = T.scale(q @ k.transpose(0, 1, 3, 2), 1.0 / math.sqrt(self.head_dim))
        weights = T.softmax(T.mask_add(scores, np.broadcast_to(padding_bias(mask), scores.shape)))
        self.last_weights = weights.data
        ctx = self.attn_dropout(weights) @ v
        return self.output(ctx.transpose(0, 2, 1, 3).reshape(b, s, d))


class EncoderLayer(Module):
    """Post-norm block: attention, residual, norm, feed-forward, residual, norm."""

    def __init__(self, config: EncoderConfig, rng):
        d = config.hidden_size
        self.attention = MultiHeadAttention(config, rng)
        self.attn_norm = LayerNorm(d)
        self.ff_in = Linear(d, d * config.ff_multiplier, rng)
        self.ff_out = Linear(d * config.ff_multiplier, d, rng)
        self.ff_norm = LayerNorm(d)
        self.dropout = Dropout(config.dropout_rate)
        self.activation = config.activation

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        x = self.attn_norm(x + self.dropout(self.attention(x, mask)))
        h = self.ff_out(ACTIVATIONS[self.activation](self.ff_in(x)))
        return self.ff_norm(x + self.dropout(h))


class TransformerEncoder(Module):
    def __init__(self, config: EncoderConfig, rng):
        if config.vocab_size <= 0:
            raise ConfigError("encoder vocab_size must be positive")
        self.config = config
        self.token_embedding = param(trunc_normal(rng, (config.vocab_size, config.hidden_size)))
        self.position_embedding = param(
            trunc_normal(rng, (config.max_seq_len, config.hidden_size))
        )
        self.embed_dropout = Dropout(config.dropout_rate)
        self.layers = [EncoderLayer(config, rng) for _ in range(config.num_layers)]

    def __call__(self, ids, mask=None) -> Tensor:
        """Encode a (batch, seq) id array; returns (batch, seq, hidden)."""
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids = ids[None, :]
        b, s = ids.shape
        if s > self.config.max_seq_len:
            raise ValueError(f"sequence length {s} exceeds max_seq_len {self.config.max_seq_len}")
        if mask is None:
            mask = np.ones((b, s), bool)
        x = T.embedding_lookup(self.token_embedding, ids)
        x = x + T.getitem(self.position_embedding, slice(0, s))
        x = self.embed_dropout(x)
        for layer in self.layers:
            x = layer(x, mask)
        return x
