"""Sentence corpora, closed vocabularies and train/dev/test splitting.

Input corpora are pre-tokenized: one sentence per line, tokens separated by
single spaces.  No lowercasing or normalization is applied.
"""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

# Benchmark-scale defaults.
WORD_VOCAB_SIZE = 50000
REFERENCE_CHAR_VOCAB_SIZE = 130
MAX_SENT_LEN = 200
MAX_WORD_LEN = 20
REFERENCE_SPLIT_SIZES = (17971548, 5985, 5862)

PAD = "<pad>"
UNK = "<unk>"
CLS = "[CLS]"
MASK = "<mask>"


class VocabKind(enum.Enum):
    Word = "word"
    Char = "char"
    Subword = "subword"


SPECIALS = {
    VocabKind.Word: (PAD, UNK),
    VocabKind.Char: (CLS, PAD, UNK),
    VocabKind.Subword: (PAD, UNK, MASK),
}


class CorpusError(ValueError):
    pass


class InsufficientCorpusError(CorpusError):
    pass


class Vocabulary:
    """Closed symbol table with contiguous integer ids.

    Specials always occupy the lowest ids, in the fixed order given by
    ``SPECIALS[kind]``.
    """

    def __init__(self, kind: VocabKind, symbols: Iterable[str]):
        self.kind = kind
        self.specials = SPECIALS[kind]
        self.entries: list[str] = list(self.specials)
        self.id_of: dict[str, int] = {s: i for i, s in enumerate(self.entries)}
        for sym in symbols:
            if sym in self.id_of:
                raise CorpusError(f"duplicate vocabulary symbol {sym!r}")
            self.id_of[sym] = len(self.entries)
            self.entries.append(sym)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.id_of

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.kind == other.kind
            and self.entries == other.entries
        )

    def __repr__(self) -> str:
        return f"Vocabulary({self.kind.name}, size={len(self)})"

    @property
    def num_specials(self) -> int:
        return len(self.specials)

    @property
    def symbols(self) -> list[str]:
        """Corpus-derived entries, specials excluded."""
        return self.entries[self.num_specials:]

    @property
    def unk_id(self) -> int:
        return self.id_of[UNK]

    @property
    def pad_id(self) -> int:
        return self.id_of[PAD]

    def is_regular(self, symbol: str) -> bool:
        """True for a corpus-derived (non-special) entry."""
        i = self.id_of.get(symbol)
        return i is not None and i >= self.num_specials

    def lookup(self, symbol: str) -> int:
        return self.id_of.get(symbol, self.unk_id)

    def digest(self) -> str:
        h = hashlib.sha256(self.kind.value.encode())
        for sym in self.entries:
            h.update(b"\n" + sym.encode("utf-8"))
        return h.hexdigest()

    def save(self, path) -> None:
        Path(path).write_text("".join(s + "\n" for s in self.entries), encoding="utf-8")

    @classmethod
    def load(cls, path, kind: VocabKind) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        specials = SPECIALS[kind]
        if tuple(lines[: len(specials)]) != specials:
            raise CorpusError(
                f"{path}: expected specials {specials} on the first lines"
            )
        return cls(kind, lines[len(specials):])


@dataclass(frozen=True)
class SentenceRecord:
    tokens: tuple[str, ...]
    source_id: str = ""

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError(f"empty sentence {self.source_id!r}")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"bad token {tok!r} in {self.source_id!r}")


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    dev_size: int
    test_size: int
    train_size: int | None = None  # None: everything left over

    @classmethod
    def from_ratios(cls, seed: int, n: int, dev: float, test: float) -> "SplitSpec":
        return cls(seed, int(n * dev), int(n * test))


def read_sentences(path) -> Iterator[SentenceRecord]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if tokens:
                yield SentenceRecord(tuple(tokens), f"{path.name}:{lineno}")


def write_sentences(path, sentences: Iterable[SentenceRecord]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(" ".join(s.tokens) + "\n")


def count_words(sentences: Iterable[SentenceRecord]) -> Counter:
    counts: Counter = Counter()
    for s in sentences:
        counts.update(s.tokens)
    return counts


def build_word_vocab(sentences: Iterable[SentenceRecord], max_size: int = WORD_VOCAB_SIZE,
                     counts: Counter | None = None) -> Vocabulary:
    """Keep the ``max_size`` most frequent word types.

    Ties are broken by the lexicographic order of the surface string.
    ``counts`` may be passed in when partial counts were merged elsewhere.
    """
    if max_size < 1:
        raise CorpusError("max_size must be >= 1")
    if counts is None:
        counts = count_words(sentences)
    for special in SPECIALS[VocabKind.Word]:
        counts.pop(special, None)
    if not counts:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(VocabKind.Word, [w for w, _ in ranked[:max_size]])


def derive_char_vocab(word_vocab: Vocabulary) -> Vocabulary:
    if word_vocab.kind is not VocabKind.Word:
        raise CorpusError(f"expected a word vocabulary, got {word_vocab.kind.name}")
    chars = set()
    for w in word_vocab.symbols:
        chars.update(w)
    return Vocabulary(VocabKind.Char, sorted(chars))


def keep_sentence(s: SentenceRecord, word_vocab: Vocabulary,
                  max_sent_len: int = MAX_SENT_LEN, max_word_len: int = MAX_WORD_LEN) -> bool:
    return len(s.tokens) <= max_sent_len and all(
        len(t) <= max_word_len and word_vocab.is_regular(t) for t in s.tokens
    )


def filter_sentences(sentences: Iterable[SentenceRecord], word_vocab: Vocabulary,
                     max_sent_len: int = MAX_SENT_LEN,
                     max_word_len: int = MAX_WORD_LEN) -> Iterator[SentenceRecord]:
    """Drop sentences with OOV tokens, too many tokens or over-long tokens."""
    if word_vocab.kind is not VocabKind.Word:
        raise CorpusError(f"expected a word vocabulary, got {word_vocab.kind.name}")
    for s in sentences:
        if keep_sentence(s, word_vocab, max_sent_len, max_word_len):
            yield s


def split_corpus(sentences: Iterable[SentenceRecord], spec: SplitSpec):
    """Random, seed-determined train/dev/test split.

    Members keep their corpus order inside each split.
    """
    pool: Sequence[SentenceRecord] = list(sentences)
    n = len(pool)
    train_size = n - spec.dev_size - spec.test_size if spec.train_size is None else spec.train_size
    needed = spec.dev_size + spec.test_size + max(train_size, 0)
    if min(spec.dev_size, spec.test_size, train_size) < 0 or needed > n:
        raise InsufficientCorpusError(
            f"split needs {needed} sentences (train={train_size}, dev={spec.dev_size}, "
            f"test={spec.test_size}) but the corpus has {n}; short by {needed - n}"
        )
    order = np.random.default_rng(spec.seed).permutation(n)
    test_idx = np.sort(order[: spec.test_size])
    dev_idx = np.sort(order[spec.test_size: spec.test_size + spec.dev_size])
    start = spec.test_size + spec.dev_size
    train_idx = np.sort(order[start: start + train_size])
    pick = lambda idx: [pool[i] for i in idx]  # noqa: E731
    return pick(train_idx), pick(dev_idx), pick(test_idx)
