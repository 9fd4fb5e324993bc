"""Encoding parallel examples into padded minibatches."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import MAX_WORD_LEN, Vocabulary, VocabKind
from ..noise import ParallelExample
from ..tokenize import (EncodedSentence, SubwordModel, bio2_labels, encode_sentence, tag_index)


@dataclass
class Resources:
    """Vocabularies (and optionally the subword model) a corrector is tied to."""

    word_vocab: Vocabulary
    char_vocab: Vocabulary
    subword: SubwordModel | None = None
    max_word_len: int = MAX_WORD_LEN

    def digests(self) -> dict[str, str]:
        d = {"word_vocab": self.word_vocab.digest(), "char_vocab": self.char_vocab.digest()}
        if self.subword is not None:
            d["subword_vocab"] = self.subword.vocab.digest()
        return d

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.word_vocab.save(d / "word.vocab")
        self.char_vocab.save(d / "char.vocab")
        if self.subword is not None:
            self.subword.save(d)

    @classmethod
    def load(cls, directory) -> "Resources":
        d = Path(directory)
        sub = SubwordModel.load(d) if (d / "subword.merges").exists() else None
        return cls(Vocabulary.load(d / "word.vocab", VocabKind.Word),
                   Vocabulary.load(d / "char.vocab", VocabKind.Char), sub)

    def encode(self, noisy) -> EncodedSentence:
        return encode_sentence(noisy, self.word_vocab, self.char_vocab, self.subword,
                               self.max_word_len)

    def gold_ids(self, clean) -> list[int]:
        return [self.word_vocab.id_of[w] for w in clean]


@dataclass
class Item:
    enc: EncodedSentence
    gold: list[int] | None = None  # word-vocabulary ids


@dataclass
class DatasetStats:
    skipped_too_long: int = 0


def prepare(examples, resources: Resources, max_subwords: int | None = None,
            stats: DatasetStats | None = None) -> list[Item]:
    """Encode examples; sentences over ``max_subwords`` pieces are skipped and counted."""
    items = []
    for ex in examples:
        if isinstance(ex, ParallelExample):
            noisy, gold = ex.noisy, resources.gold_ids(ex.clean.tokens)
        else:
            noisy, gold = ex, None
        enc = resources.encode(noisy)
        if max_subwords is not None and len(enc.subword_ids) > max_subwords:
            if stats is not None:
                stats.skipped_too_long += 1
            continue
        items.append(Item(enc, gold))
    return items


@dataclass
class Batch:
    word_ids: np.ndarray       # (B, T)
    word_mask: np.ndarray      # (B, T) True = real word
    char_ids: np.ndarray       # (N, L) one row per real word
    char_mask: np.ndarray      # (N, L)
    word_row: np.ndarray       # (B, T) row of char_ids holding that word
    sub_ids: np.ndarray | None = None
    sub_mask: np.ndarray | None = None
    spans: list = field(default_factory=list)
    labels: np.ndarray | None = None      # (B, T) word label, -1 on padding
    sub_labels: np.ndarray | None = None  # (B, S) BIO2 tag column, -1 on padding

    @property
    def size(self) -> int:
        return self.word_ids.shape[0]


def make_batch(items: list[Item], resources: Resources) -> Batch:
    wv, cv = resources.word_vocab, resources.char_vocab
    B = len(items)
    T = max(len(it.enc) for it in items)
    word_ids = np.full((B, T), wv.pad_id, dtype=np.int64)
    word_mask = np.zeros((B, T), bool)
    word_row = np.zeros((B, T), dtype=np.int64)
    chars = []
    for b, it in enumerate(items):
        n = len(it.enc)
        word_ids[b, :n] = it.enc.word_ids
        word_mask[b, :n] = True
        word_row[b, :n] = np.arange(len(chars), len(chars) + n)
        chars.extend(it.enc.char_ids)
    L = max(len(c) for c in chars)
    char_ids = np.full((len(chars), L), cv.pad_id, dtype=np.int64)
    char_mask = np.zeros((len(chars), L), bool)
    for i, c in enumerate(chars):
        char_ids[i, :len(c)] = c
        char_mask[i, :len(c)] = True
    batch = Batch(word_ids, word_mask, char_ids, char_mask, word_row,
                  spans=[it.enc.word_spans for it in items])
    if resources.subword is not None:
        S = max(len(it.enc.subword_ids) for it in items)
        sv = resources.subword.vocab
        batch.sub_ids = np.full((B, S), sv.pad_id, dtype=np.int64)
        batch.sub_mask = np.zeros((B, S), bool)
        for b, it in enumerate(items):
            batch.sub_ids[b, :len(it.enc.subword_ids)] = it.enc.subword_ids
            batch.sub_mask[b, :len(it.enc.subword_ids)] = True
    if all(it.gold is not None for it in items):
        batch.labels = np.full((B, T), -1, dtype=np.int64)
        for b, it in enumerate(items):
            batch.labels[b, :len(it.gold)] = np.asarray(it.gold) - wv.num_specials
        if batch.sub_ids is not None:
            batch.sub_labels = np.full(batch.sub_ids.shape, -1, dtype=np.int64)
            for b, it in enumerate(items):
                tags = bio2_labels(it.enc.word_spans, it.gold)
                batch.sub_labels[b, :len(tags)] = [tag_index(t, wv) for t in tags]
    return batch


def bucketed_batches(items: list[Item], batch_size: int, rng, key=None, pool: int = 20):
    """Shuffle, sort by length inside pools of ``pool`` batches, shuffle batch order."""
    key = key or (lambda it: len(it.enc))
    order = rng.permutation(len(items))
    batches = []
    step = batch_size * pool
    for start in range(0, len(order), step):
        chunk = sorted(order[start:start + step], key=lambda i: key(items[i]))
        batches.extend(chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]
