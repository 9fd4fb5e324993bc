"""Desk-scale masked-LM pretraining for the subword encoder.

A small stand-in for initialising from a large pretrained language model:
15% of subwords are selected, of which 80% become <mask>, 10% a random
subword and 10% stay unchanged; the encoder learns to recover them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..autodiff.nn import EncoderConfig, Linear, Module, TransformerEncoder
from ..autodiff.optim import Adam
from ..corpus import MASK
from ..tokenize import SubwordModel, subword_encode


@dataclass
class MaskCounts:
    selected: int = 0
    masked: int = 0
    randomized: int = 0
    kept: int = 0


def mask_tokens(ids: np.ndarray, valid: np.ndarray, vocab, rng, rate: float = 0.15,
                counts: MaskCounts | None = None):
    """Returns ``(inputs, targets)``; targets are -1 where nothing was selected.

    Every row with a real token gets at least one selected position.
    """
    selected = (rng.random(ids.shape) < rate) & valid
    for b in np.flatnonzero(~selected.any(axis=1) & valid.any(axis=1)):
        real = np.flatnonzero(valid[b])
        selected[b, real[rng.integers(len(real))]] = True
    u = rng.random(ids.shape)
    to_mask = selected & (u < 0.8)
    to_random = selected & (u >= 0.8) & (u < 0.9)
    inputs = ids.copy()
    inputs[to_mask] = vocab.id_of[MASK]
    inputs[to_random] = rng.integers(vocab.num_specials, len(vocab), size=int(to_random.sum()))
    targets = np.where(selected, ids, -1)
    if counts is not None:
        counts.selected += int(selected.sum())
        counts.masked += int(to_mask.sum())
        counts.randomized += int(to_random.sum())
        counts.kept += int((selected & (u >= 0.9)).sum())
    return inputs, targets


class MaskedLM(Module):
    def __init__(self, encoder: TransformerEncoder, rng):
        self.encoder = encoder
        self.head = Linear(encoder.config.hidden_size, encoder.config.vocab_size, rng)

    def loss(self, inputs, targets, valid) -> ad.Tensor:
        logits = self.head(self.encoder(inputs, valid))
        return ad.cross_entropy(logits, np.maximum(targets, 0), targets < 0)


@dataclass
class PretrainResult:
    state: dict
    losses: list[float] = field(default_factory=list)
    counts: MaskCounts = field(default_factory=MaskCounts)


def new_subword_encoder(config: EncoderConfig, subword: SubwordModel, seed: int = 0):
    config.vocab_size = len(subword.vocab)
    return TransformerEncoder(config, np.random.default_rng(seed))


def mlm_pretrain(encoder: TransformerEncoder, corpus, subword: SubwordModel,
                 mask_rate: float = 0.15, steps: int = 1000, seed: int = 0,
                 lr: float = 1e-3, batch_size: int = 32) -> PretrainResult:
    """Train ``encoder`` in place on clean sentences; returns its weights."""
    seqs = []
    for s in corpus:
        ids, _ = subword_encode(s.tokens, subword)
        if len(ids) <= encoder.config.max_seq_len:
            seqs.append(ids)
    if not seqs:
        raise ValueError("no pretraining sentences fit the encoder")
    rng = np.random.default_rng(seed)
    model = MaskedLM(encoder, np.random.default_rng([seed, 2]))
    model.set_dropout_rng(np.random.default_rng([seed, 1]))
    model.train()
    opt = Adam(model.named_parameters(), lr=lr, total_steps=steps)
    result = PretrainResult({})
    pad = subword.vocab.pad_id
    for _ in range(steps):
        pick = rng.choice(len(seqs), size=min(batch_size, len(seqs)), replace=False)
        S = max(len(seqs[i]) for i in pick)
        ids = np.full((len(pick), S), pad, dtype=np.int64)
        for b, i in enumerate(pick):
            ids[b, :len(seqs[i])] = seqs[i]
        valid = ids != pad
        inputs, targets = mask_tokens(ids, valid, subword.vocab, rng, mask_rate, result.counts)
        model.zero_grad()
        loss = model.loss(inputs, targets, valid)
        value = float(loss.data)
        if not math.isfinite(value):
            raise FloatingPointError("masked-LM pretraining diverged")
        loss.backward()
        opt.step()
        result.losses.append(value)
    encoder.eval()
    result.state = encoder.state_dict()
    return result
