"""Encoders for the word, character and subword views of a sentence.

Also converts between word labels and BIO2 subword tags.  The BIO2 label
space has no O tag: every subword belongs to some word.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (CLS, MAX_WORD_LEN, UNK, SentenceRecord, Vocabulary, VocabKind)

CONTINUATION = "##"
MERGES_HEADER = "#spellforge-bpe v1"


class TokenizeError(ValueError):
    pass


def word_encode(noisy: Sequence[str], word_vocab: Vocabulary) -> list[int]:
    """Vocabulary ids, with every out-of-vocabulary token mapped to <unk>."""
    unk = word_vocab.unk_id
    ids = []
    for tok in noisy:
        i = word_vocab.id_of.get(tok, unk)
        ids.append(i if i >= word_vocab.num_specials else unk)
    return ids


def char_encode(word: str, char_vocab: Vocabulary, max_word_len: int = MAX_WORD_LEN) -> list[int]:
    if not word:
        raise TokenizeError("cannot encode an empty word")
    unk = char_vocab.unk_id
    ids = [char_vocab.id_of[CLS]]
    for c in word[:max_word_len]:
        i = char_vocab.id_of.get(c, unk)
        ids.append(i if i >= char_vocab.num_specials else unk)
    return ids


def _initial_symbols(word: str) -> list[str]:
    return [word[0]] + [CONTINUATION + c for c in word[1:]]


def _join(left: str, right: str) -> str:
    return left + right[len(CONTINUATION):]


class SubwordModel:
    """Byte-pair style segmentation with a "##" continuation marker.

    Immutable once built; segmentation results are cached per word.
    """

    def __init__(self, merges: Sequence[tuple[str, str]], vocab: Vocabulary):
        if vocab.kind is not VocabKind.Subword:
            raise TokenizeError("subword model needs a Subword vocabulary")
        self.merges = tuple(tuple(m) for m in merges)
        self.vocab = vocab
        self.continuation_marker = CONTINUATION
        self._rank = {m: r for r, m in enumerate(self.merges)}
        self._cache: dict[str, tuple[str, ...]] = {}

    def segment(self, word: str) -> tuple[str, ...]:
        """Pieces for one word; characters outside the inventory become <unk>."""
        if not word:
            raise TokenizeError("cannot segment an empty word")
        pieces = self._cache.get(word)
        if pieces is not None:
            return pieces
        syms = [s if s in self.vocab else UNK for s in _initial_symbols(word)]
        rank = self._rank
        while len(syms) > 1:
            best, best_rank = -1, None
            for i in range(len(syms) - 1):
                r = rank.get((syms[i], syms[i + 1]))
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = i, r
            if best < 0:
                break
            syms[best: best + 2] = [_join(syms[best], syms[best + 1])]
        pieces = tuple(syms)
        self._cache[word] = pieces
        return pieces

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.vocab.save(d / "subword.vocab")
        lines = [MERGES_HEADER] + [f"{a} {b}" for a, b in self.merges]
        (d / "subword.merges").write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "SubwordModel":
        d = Path(directory)
        vocab = Vocabulary.load(d / "subword.vocab", VocabKind.Subword)
        lines = (d / "subword.merges").read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != MERGES_HEADER:
            raise TokenizeError(f"{d / 'subword.merges'}: missing header {MERGES_HEADER!r}")
        merges = []
        for lineno, line in enumerate(lines[1:], 2):
            parts = line.split(" ")
            if len(parts) != 2:
                raise TokenizeError(f"subword.merges:{lineno}: malformed merge {line!r}")
            merges.append((parts[0], parts[1]))
        return cls(merges, vocab)


def subword_alphabet(words: Iterable[str]) -> list[str]:
    symbols = set()
    for w in words:
        symbols.update(_initial_symbols(w))
    return sorted(symbols)


def train_subword(corpus: Iterable[SentenceRecord], target_vocab_size: int) -> SubwordModel:
    """Greedy pair-merge training over word types.

    ``target_vocab_size`` counts regular symbols (specials excluded).  The
    alphabet is every word-initial character plus every "##"-prefixed
    non-initial character.  Frequency ties go to the lexicographically
    smallest pair.
    """
    counts = Counter()
    for s in corpus:
        counts.update(s.tokens)
    if not counts:
        raise TokenizeError("cannot train a subword model on an empty corpus")
    alphabet = subword_alphabet(counts)
    if target_vocab_size < len(alphabet):
        raise TokenizeError(
            f"target vocabulary {target_vocab_size} is smaller than the alphabet ({len(alphabet)})"
        )
    symbols = list(alphabet)
    known = set(symbols)
    words = [(_initial_symbols(w), c) for w, c in sorted(counts.items())]
    merges = []
    while len(symbols) < target_vocab_size:
        pair_counts: Counter = Counter()
        for syms, c in words:
            for i in range(len(syms) - 1):
                pair_counts[(syms[i], syms[i + 1])] += c
        if not pair_counts:
            break
        pair = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        merges.append(pair)
        joined = _join(*pair)
        if joined not in known:
            known.add(joined)
            symbols.append(joined)
        for syms, _ in words:
            i = 0
            while i < len(syms) - 1:
                if syms[i] == pair[0] and syms[i + 1] == pair[1]:
                    syms[i: i + 2] = [joined]
                i += 1
    return SubwordModel(merges, Vocabulary(VocabKind.Subword, symbols))


def subword_encode(noisy: Sequence[str], model: SubwordModel):
    """Segment each word independently; returns ``(subword_ids, word_spans)``."""
    ids: list[int] = []
    spans: list[tuple[int, int]] = []
    lookup = model.vocab.lookup
    for word in noisy:
        start = len(ids)
        ids.extend(lookup(p) for p in model.segment(word))
        spans.append((start, len(ids)))
    return ids, spans


@dataclass(frozen=True)
class Bio2Tag:
    role: str  # "B" or "I"
    word_id: int

    def render(self, word_vocab: Vocabulary) -> str:
        return f"{self.role}-{word_vocab.entries[self.word_id]}"


def tag_index(tag: Bio2Tag, word_vocab: Vocabulary) -> int:
    """Column of ``tag`` in the 2 * |words| label space."""
    return 2 * (tag.word_id - word_vocab.num_specials) + (tag.role == "I")


def tag_from_index(index: int, word_vocab: Vocabulary) -> Bio2Tag:
    return Bio2Tag("I" if index % 2 else "B", index // 2 + word_vocab.num_specials)


def bio2_labels(word_spans: Sequence[tuple[int, int]], gold_words: Sequence[int]) -> list[Bio2Tag]:
    if len(word_spans) != len(gold_words):
        raise TokenizeError(f"{len(word_spans)} spans but {len(gold_words)} gold words")
    tags = []
    for (start, end), w in zip(word_spans, gold_words):
        tags.append(Bio2Tag("B", w))
        tags.extend(Bio2Tag("I", w) for _ in range(end - start - 1))
    return tags


@dataclass
class DecodeStats:
    disagreements: int = 0
    malformed_roles: int = 0

    def merge(self, other: "DecodeStats") -> None:
        self.disagreements += other.disagreements
        self.malformed_roles += other.malformed_roles


def bio2_decode(tags: Sequence[Bio2Tag], word_spans: Sequence[tuple[int, int]],
                stats: DecodeStats | None = None) -> list[int]:
    """Each word takes the word id of the tag at its first subword.

    Role errors at a span start and disagreeing I tags do not change the
    result; they are only counted in ``stats``.
    """
    out = []
    for start, end in word_spans:
        head = tags[start]
        out.append(head.word_id)
        if stats is not None:
            if head.role != "B":
                stats.malformed_roles += 1
            if any(t.word_id != head.word_id for t in tags[start + 1: end]):
                stats.disagreements += 1
    return out


@dataclass
class EncodedSentence:
    word_ids: list[int]
    char_ids: list[list[int]]
    subword_ids: list[int] = field(default_factory=list)
    word_spans: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.word_ids)


def encode_sentence(noisy: Sequence[str], word_vocab: Vocabulary, char_vocab: Vocabulary,
                    subword_model: SubwordModel | None = None,
                    max_word_len: int = MAX_WORD_LEN) -> EncodedSentence:
    word_ids = word_encode(noisy, word_vocab)
    char_ids = [char_encode(w, char_vocab, max_word_len) for w in noisy]
    if subword_model is None:
        # one pseudo-piece per word keeps spans meaningful for word-level models
        return EncodedSentence(word_ids, char_ids, [], [(i, i + 1) for i in range(len(noisy))])
    sub_ids, spans = subword_encode(noisy, subword_model)
    return EncodedSentence(word_ids, char_ids, sub_ids, spans)
