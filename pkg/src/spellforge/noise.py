"""Misspelling lexicons, synthetic character noise and sentence corruption."""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import MAX_WORD_LEN, SentenceRecord, Vocabulary

log = logging.getLogger(__name__)

NATURAL = "NaturalLexicon"
RETRY_BUDGET = 8
MIN_PERMUTE_LEN = 4


class NoiseKind(enum.Enum):
    Swap = "Swap"
    MiddleRandom = "MiddleRandom"
    FullyRandom = "FullyRandom"
    KeyboardTypo = "KeyboardTypo"
    RandomGenerate = "RandomGenerate"


NOISE_KINDS = tuple(NoiseKind)


class MisspellingClass(enum.Enum):
    RealWord = "RealWord"
    NonWord = "NonWord"


class LexiconFormatError(ValueError):
    def __init__(self, path, lineno: int, line: str):
        super().__init__(f"{path}:{lineno}: expected 'word<TAB>misspelling', got {line!r}")
        self.path = path
        self.lineno = lineno


class MisspellingLexicon:
    """Case-sensitive map from a correct word to its known misspellings."""

    def __init__(self):
        self._entries: dict[str, list[str]] = {}
        self._provenance: dict[tuple[str, str], str] = {}
        self.skipped_identical = 0

    def add(self, word: str, misspelling: str, provenance: str = "natural") -> bool:
        if misspelling == word:
            self.skipped_identical += 1
            return False
        if (word, misspelling) in self._provenance:
            return False
        self._entries.setdefault(word, []).append(misspelling)
        self._provenance[(word, misspelling)] = provenance
        return True

    def get(self, word: str) -> list[str]:
        return self._entries.get(word, [])

    def __getitem__(self, word: str) -> list[str]:
        return self._entries[word]

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __len__(self) -> int:
        return len(self._provenance)

    def __eq__(self, other) -> bool:
        return isinstance(other, MisspellingLexicon) and self._entries == other._entries

    def words(self) -> list[str]:
        return list(self._entries)

    def pairs(self) -> list[tuple[str, str]]:
        return [(w, m) for w, ms in self._entries.items() for m in ms]

    def provenance(self, word: str, misspelling: str) -> str:
        return self._provenance[(word, misspelling)]

    def save(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for w, m in self.pairs():
                fh.write(f"{w}\t{m}\n")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], provenance: str = "natural"):
        lex = cls()
        for w, m in pairs:
            lex.add(w, m, provenance)
        return lex


def load_lexicon(*paths) -> MisspellingLexicon:
    """Read and merge TSV lexicons; identical (word, misspelling) pairs collapse."""
    lex = MisspellingLexicon()
    for path in paths:
        with Path(path).open(encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\r\n")
                if not line.strip():
                    continue
                fields = line.split("\t")
                if len(fields) != 2 or not fields[0] or not fields[1]:
                    raise LexiconFormatError(path, lineno, line)
                lex.add(fields[0], fields[1])
    if lex.skipped_identical:
        log.warning("skipped %d misspellings equal to their word", lex.skipped_identical)
    return lex


def split_known(lexicon: MisspellingLexicon, fraction: float = 0.8, seed: int = 0):
    """Sample floor(fraction * N) (word, misspelling) pairs as the known list.

    Returns ``(known, full)``; ``full`` is the input lexicon itself.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    pairs = lexicon.pairs()
    k = math.floor(fraction * len(pairs))
    chosen = np.sort(np.random.default_rng(seed).choice(len(pairs), size=k, replace=False))
    known = MisspellingLexicon()
    for i in chosen:
        w, m = pairs[i]
        known.add(w, m, lexicon.provenance(w, m))
    return known, lexicon


def heldout_lexicon(full: MisspellingLexicon, known: MisspellingLexicon) -> MisspellingLexicon:
    """The pairs of ``full`` that the known list left out (unseen in training)."""
    out = MisspellingLexicon()
    seen = set(known.pairs())
    for w, m in full.pairs():
        if (w, m) not in seen:
            out.add(w, m, full.provenance(w, m))
    return out


def load_keyboard_adjacency() -> dict[str, list[str]]:
    text = resources.files("spellforge").joinpath("data/qwerty.json").read_text()
    return json.loads(text)


_ADJACENCY: dict[str, list[str]] | None = None


def keyboard_adjacency() -> dict[str, list[str]]:
    global _ADJACENCY
    if _ADJACENCY is None:
        _ADJACENCY = load_keyboard_adjacency()
    return _ADJACENCY


def _swap(word: str, rng) -> str | None:
    # adjacent pairs strictly inside the word, first and last letters stay put
    cands = [i for i in range(1, len(word) - 2) if word[i] != word[i + 1]]
    if len(word) < MIN_PERMUTE_LEN or not cands:
        return None
    i = cands[rng.integers(len(cands))]
    return word[:i] + word[i + 1] + word[i] + word[i + 2:]


def _shuffle_until_different(chars: str, rng) -> str | None:
    if len(set(chars)) < 2:
        return None
    arr = list(chars)
    while True:
        rng.shuffle(arr)
        out = "".join(arr)
        if out != chars:
            return out


def _middle_random(word: str, rng) -> str | None:
    if len(word) < MIN_PERMUTE_LEN:
        return None
    mid = _shuffle_until_different(word[1:-1], rng)
    return None if mid is None else word[0] + mid + word[-1]


def _fully_random(word: str, rng) -> str | None:
    return _shuffle_until_different(word, rng)


def _keyboard_typo(word: str, rng, adjacency) -> str | None:
    cands = [i for i, c in enumerate(word) if c.lower() in adjacency]
    if not cands:
        return None
    i = cands[rng.integers(len(cands))]
    c = word[i]
    neighbors = adjacency[c.lower()]
    n = neighbors[rng.integers(len(neighbors))]
    if c.isupper():
        n = n.upper()
    return word[:i] + n + word[i + 1:]


def _random_generate(word: str, rng, char_vocab: Vocabulary, max_word_len: int) -> str:
    alphabet = char_vocab.symbols
    if not alphabet:
        raise ValueError("character vocabulary has no regular symbols")
    while True:
        length = int(rng.integers(1, max_word_len + 1))
        out = "".join(alphabet[j] for j in rng.integers(len(alphabet), size=length))
        if out != word:
            return out


def synth_misspell_with_kind(word: str, kind: NoiseKind, char_vocab: Vocabulary, rng,
                             max_word_len: int = MAX_WORD_LEN,
                             adjacency: dict | None = None) -> tuple[str, NoiseKind]:
    """Like :func:`synth_misspell` but also reports the kind actually applied.

    A kind that cannot change ``word`` is redrawn uniformly; after
    ``RETRY_BUDGET`` failed attempts RandomGenerate is used.
    """
    if not word:
        raise ValueError("cannot misspell an empty word")
    adjacency = keyboard_adjacency() if adjacency is None else adjacency
    for _ in range(RETRY_BUDGET):
        if kind is NoiseKind.Swap:
            out = _swap(word, rng)
        elif kind is NoiseKind.MiddleRandom:
            out = _middle_random(word, rng)
        elif kind is NoiseKind.FullyRandom:
            out = _fully_random(word, rng)
        elif kind is NoiseKind.KeyboardTypo:
            out = _keyboard_typo(word, rng, adjacency)
        else:
            out = _random_generate(word, rng, char_vocab, max_word_len)
        if out is not None and out != word and len(out) <= max_word_len:
            return out, kind
        kind = NOISE_KINDS[rng.integers(len(NOISE_KINDS))]
    kind = NoiseKind.RandomGenerate
    return _random_generate(word, rng, char_vocab, max_word_len), kind


def synth_misspell(word: str, kind: NoiseKind, char_vocab: Vocabulary, rng,
                   max_word_len: int = MAX_WORD_LEN, adjacency: dict | None = None) -> str:
    """Apply one synthetic character-level noise to ``word``.

    Swap exchanges one adjacent pair strictly inside the word, MiddleRandom
    shuffles everything but the first and last character, FullyRandom
    shuffles all characters, KeyboardTypo replaces one character by a QWERTY
    neighbour and RandomGenerate draws a fresh string from ``char_vocab``.
    The result always differs from ``word``.
    """
    return synth_misspell_with_kind(word, kind, char_vocab, rng, max_word_len, adjacency)[0]


@dataclass
class CorruptionConfig:
    sigma: float = 0.2
    synthetic_fraction: float = 0.0
    seed: int = 0
    max_word_len: int = MAX_WORD_LEN

    def __post_init__(self):
        if not 0 <= self.synthetic_fraction <= 1:
            raise ValueError("synthetic_fraction must be in [0, 1]")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def replacement_count(n: int, alpha: float) -> int:
    return max(math.floor(alpha * n), 1)


def sample_replacement_count(n: int, config: CorruptionConfig, rng) -> int:
    """m = max(floor(alpha * n), 1) with alpha = min(|N(0, sigma)|, 1)."""
    if n < 1:
        raise ValueError("sentence must have at least one token")
    alpha = min(abs(rng.normal(0.0, config.sigma)), 1.0)
    return replacement_count(n, alpha)


def classify_misspelling(noisy_token: str, word_vocab: Vocabulary) -> MisspellingClass:
    if word_vocab.is_regular(noisy_token):
        return MisspellingClass.RealWord
    return MisspellingClass.NonWord


@dataclass(frozen=True)
class ParallelExample:
    clean: SentenceRecord
    noisy: tuple[str, ...]
    corrupted: tuple[tuple[int, str], ...]

    def check(self) -> None:
        """Raise AssertionError if the alignment invariants are violated."""
        gold = self.clean.tokens
        assert len(self.noisy) == len(gold), "token count changed"
        marked = {p for p, _ in self.corrupted}
        assert len(marked) == len(self.corrupted), "position corrupted twice"
        for i, (n, g) in enumerate(zip(self.noisy, gold)):
            assert (n != g) == (i in marked), f"position {i} marking is inconsistent"
        valid = {NATURAL} | {k.value for k in NoiseKind}
        assert all(src in valid for _, src in self.corrupted)

    def to_json(self) -> str:
        return json.dumps({
            "clean": list(self.clean.tokens),
            "source_id": self.clean.source_id,
            "noisy": list(self.noisy),
            "corrupted": [[p, s] for p, s in self.corrupted],
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ParallelExample":
        d = json.loads(line)
        return cls(SentenceRecord(tuple(d["clean"]), d.get("source_id", "")),
                   tuple(d["noisy"]), tuple((int(p), s) for p, s in d["corrupted"]))


@dataclass
class CorruptionStats:
    sentences: int = 0
    uncorrupted: int = 0
    shortfall: int = 0
    real_word: int = 0
    non_word: int = 0
    by_source: Counter = field(default_factory=Counter)

    @property
    def corrupted_positions(self) -> int:
        return self.real_word + self.non_word

    @property
    def real_word_fraction(self) -> float:
        total = self.corrupted_positions
        return self.real_word / total if total else 0.0

    def as_dict(self) -> dict:
        return {
            "sentences": self.sentences, "uncorrupted": self.uncorrupted,
            "shortfall": self.shortfall, "corrupted_positions": self.corrupted_positions,
            "real_word": self.real_word, "non_word": self.non_word,
            "real_word_fraction": self.real_word_fraction,
            "by_source": dict(sorted(self.by_source.items())),
        }


def corrupt_sentence(clean: SentenceRecord, lexicon: MisspellingLexicon,
                     config: CorruptionConfig, word_vocab: Vocabulary,
                     char_vocab: Vocabulary, rng,
                     stats: CorruptionStats | None = None,
                     positions: Sequence[int] | None = None) -> ParallelExample:
    """Replace m randomly chosen words of ``clean`` with misspellings.

    Candidate positions are visited in random order (or the order given by
    ``positions``); a word without lexicon entries is passed over when no
    synthetic noise is allowed, so fewer than m positions may be corrupted.
    """
    tokens = clean.tokens
    n = len(tokens)
    m = sample_replacement_count(n, config, rng)
    order = rng.permutation(n) if positions is None else positions
    noisy = list(tokens)
    corrupted = []
    for pos in order:
        if len(corrupted) == m:
            break
        word = tokens[pos]
        synthetic = config.synthetic_fraction > 0 and rng.random() < config.synthetic_fraction
        options = lexicon.get(word)
        if not synthetic and not options:
            if config.synthetic_fraction == 0:
                continue
            synthetic = True
        if synthetic:
            kind = NOISE_KINDS[rng.integers(len(NOISE_KINDS))]
            out, kind = synth_misspell_with_kind(word, kind, char_vocab, rng, config.max_word_len)
            source = kind.value
        else:
            out = options[rng.integers(len(options))]
            source = NATURAL
        noisy[pos] = out
        corrupted.append((int(pos), source))
    corrupted.sort()
    ex = ParallelExample(clean, tuple(noisy), tuple(corrupted))
    if stats is not None:
        stats.sentences += 1
        if not corrupted:
            stats.uncorrupted += 1
        stats.shortfall += m - len(corrupted)
        for pos, source in corrupted:
            stats.by_source[source] += 1
            if classify_misspelling(noisy[pos], word_vocab) is MisspellingClass.RealWord:
                stats.real_word += 1
            else:
                stats.non_word += 1
    return ex


def sentence_rng(seed: int, index: int) -> np.random.Generator:
    """Independent per-sentence stream, so output does not depend on scheduling."""
    return np.random.default_rng([seed, index])


def corrupt_corpus(sentences: Iterable[SentenceRecord], lexicon: MisspellingLexicon,
                   config: CorruptionConfig, word_vocab: Vocabulary, char_vocab: Vocabulary):
    stats = CorruptionStats()
    examples = [
        corrupt_sentence(s, lexicon, config, word_vocab, char_vocab,
                         sentence_rng(config.seed, i), stats)
        for i, s in enumerate(sentences)
    ]
    return examples, stats


def write_examples(path, examples: Iterable[ParallelExample]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(ex.to_json() + "\n")


def read_examples(path) -> list[ParallelExample]:
    with Path(path).open(encoding="utf-8") as fh:
        return [ParallelExample.from_json(line) for line in fh if line.strip()]
