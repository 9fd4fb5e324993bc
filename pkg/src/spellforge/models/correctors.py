"""Word+Char and Subword-BIO2 correctors.

Both predict, for every input word, a word from the regular (non-special)
entries of the word vocabulary, so the output never contains <unk> or <pad>.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff.nn import ConfigError, EncoderConfig, Linear, Module, TransformerEncoder
from ..tokenize import bio2_decode, tag_from_index, DecodeStats
from .data import Batch, Resources

ARCHS = ("word", "char", "wordchar", "subword")


class WordCharModel(Module):
    """Word encoder over the sentence, char encoder over each word, joint softmax.

    Either encoder may be absent (width zero), which gives the Word-only and
    Char-only ablations.
    """

    def __init__(self, resources: Resources, word_config: EncoderConfig | None,
                 char_config: EncoderConfig | None, seed: int = 0):
        if word_config is None and char_config is None:
            raise ConfigError("a WordCharModel needs at least one encoder")
        rng = np.random.default_rng(seed)
        self.resources = resources
        wv = resources.word_vocab
        self.num_labels = len(wv) - wv.num_specials
        self.word_config = word_config
        self.char_config = char_config
        self.word_encoder = None
        self.char_encoder = None
        width = 0
        if word_config is not None:
            word_config.vocab_size = len(wv)
            self.word_encoder = TransformerEncoder(word_config, rng)
            width += word_config.hidden_size
        if char_config is not None:
            char_config.vocab_size = len(resources.char_vocab)
            if char_config.max_seq_len < resources.max_word_len + 1:
                raise ConfigError(
                    f"char max_seq_len {char_config.max_seq_len} cannot hold [CLS] + "
                    f"{resources.max_word_len} characters"
                )
            self.char_encoder = TransformerEncoder(char_config, rng)
            width += char_config.hidden_size
        self.output = Linear(width, self.num_labels, rng)

    @property
    def arch(self) -> str:
        if self.word_encoder is None:
            return "char"
        return "word" if self.char_encoder is None else "wordchar"

    @property
    def max_words(self) -> int:
        return self.word_config.max_seq_len if self.word_config else 10 ** 9

    def features(self, batch: Batch) -> ad.Tensor:
        """Concatenated per-word representation, shape (B, T, word_hidden + char_hidden)."""
        parts = []
        if self.word_encoder is not None:
            parts.append(self.word_encoder(batch.word_ids, batch.word_mask))
        if self.char_encoder is not None:
            h = self.char_encoder(batch.char_ids, batch.char_mask)
            cls = ad.getitem(h, (slice(None), 0))  # (N, Dc)
            parts.append(ad.embedding_lookup(cls, batch.word_row))
        return parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1)

    def forward(self, batch: Batch) -> ad.Tensor:
        return self.output(self.features(batch))

    def loss(self, batch: Batch) -> ad.Tensor:
        return ad.cross_entropy(self.forward(batch), np.maximum(batch.labels, 0),
                                ~batch.word_mask)

    def predict(self, batch: Batch, stats: DecodeStats | None = None) -> list[list[int]]:
        logits = self.forward(batch).data
        best = logits.argmax(axis=-1) + self.resources.word_vocab.num_specials
        return [best[b, :int(batch.word_mask[b].sum())].tolist() for b in range(batch.size)]

    def label_targets(self, batch: Batch):
        return batch.labels, batch.word_mask

    def config_dict(self) -> dict:
        return {
            "arch": self.arch,
            "word": self.word_config.to_dict() if self.word_config else None,
            "char": self.char_config.to_dict() if self.char_config else None,
        }


class SubwordTagModel(Module):
    """Subword encoder with a BIO2 tag softmax over 2 * |words| labels."""

    arch = "subword"

    def __init__(self, resources: Resources, config: EncoderConfig, seed: int = 0):
        if resources.subword is None:
            raise ConfigError("SubwordTagModel needs a trained subword model")
        rng = np.random.default_rng(seed)
        self.resources = resources
        wv = resources.word_vocab
        self.num_labels = 2 * (len(wv) - wv.num_specials)
        config.vocab_size = len(resources.subword.vocab)
        self.config = config
        self.encoder = TransformerEncoder(config, rng)
        self.output = Linear(config.hidden_size, self.num_labels, rng)

    @property
    def max_subwords(self) -> int:
        return self.config.max_seq_len

    def forward(self, batch: Batch) -> ad.Tensor:
        return self.output(self.encoder(batch.sub_ids, batch.sub_mask))

    def loss(self, batch: Batch) -> ad.Tensor:
        # averaged over subword positions
        return ad.cross_entropy(self.forward(batch), np.maximum(batch.sub_labels, 0),
                                ~batch.sub_mask)

    def predict(self, batch: Batch, stats: DecodeStats | None = None) -> list[list[int]]:
        best = self.forward(batch).data.argmax(axis=-1)
        wv = self.resources.word_vocab
        out = []
        for b, spans in enumerate(batch.spans):
            tags = [tag_from_index(int(i), wv) for i in best[b, :spans[-1][1]]]
            out.append(bio2_decode(tags, spans, stats))
        return out

    def predict_tags(self, batch: Batch) -> np.ndarray:
        return self.forward(batch).data.argmax(axis=-1)

    def load_encoder(self, state: dict[str, np.ndarray]) -> None:
        """Initialise the encoder from pretrained weights (masked-LM)."""
        self.encoder.load_state_dict(state)

    def config_dict(self) -> dict:
        return {"arch": "subword", "subword": self.config.to_dict()}


def build_model(arch: str, resources: Resources, word_config=None, char_config=None,
                subword_config=None, seed: int = 0):
    if arch == "word":
        return WordCharModel(resources, word_config, None, seed)
    if arch == "char":
        return WordCharModel(resources, None, char_config, seed)
    if arch == "wordchar":
        return WordCharModel(resources, word_config, char_config, seed)
    if arch == "subword":
        return SubwordTagModel(resources, subword_config, seed)
    raise ConfigError(f"unknown arch {arch!r}; expected one of {ARCHS}")


def build_from_config(cfg: dict, resources: Resources, seed: int = 0):
    make = lambda d: EncoderConfig(**d) if d else None  # noqa: E731
    return build_model(cfg["arch"], resources, make(cfg.get("word")), make(cfg.get("char")),
                       make(cfg.get("subword")), seed)
