"""A small synthetic language with a natural-looking misspelling lexicon.

Sentences come from a handful of part-of-speech templates over invented
words.  Some words have a confusable partner in a different word class that
is one typo away, so real-word misspellings exist and can only be fixed from
context.  Everything is generated from a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SentenceRecord
from .noise import MisspellingLexicon, keyboard_adjacency

CONSONANTS = "bcdfghjklmnprstvwz"
VOWELS = "aeiou"

# word class -> share of the vocabulary
CLASSES = {"det": 0.02, "adj": 0.2, "noun": 0.34, "verb": 0.26, "adv": 0.1, "prep": 0.08}

TEMPLATES = (
    ("det", "noun", "verb", "det", "noun"),
    ("det", "adj", "noun", "verb", "adv"),
    ("det", "noun", "verb", "prep", "det", "adj", "noun"),
    ("det", "adj", "adj", "noun", "adv", "verb", "det", "noun"),
    ("prep", "det", "noun", "det", "noun", "verb"),
    ("det", "noun", "adv", "verb", "prep", "det", "noun", "prep", "det", "noun"),
)


def _pseudo_word(rng, length: int) -> str:
    start = rng.integers(2)
    return "".join(
        (CONSONANTS if (i + start) % 2 == 0 else VOWELS)[
            rng.integers(len(CONSONANTS if (i + start) % 2 == 0 else VOWELS))
        ]
        for i in range(length)
    )


def _zipf(n: int) -> np.ndarray:
    p = 1.0 / np.arange(1, n + 1) ** 0.8
    return p / p.sum()


def _typo_variants(word: str, rng, adjacency, count: int) -> list[str]:
    """Human-like misspellings: keyboard slips, transpositions, drops, doubles."""
    out = []
    for _ in range(count * 6):
        if len(out) == count:
            break
        op = rng.integers(5)
        i = int(rng.integers(len(word)))
        if op == 0 and word[i] in adjacency:
            nb = adjacency[word[i]]
            cand = word[:i] + nb[rng.integers(len(nb))] + word[i + 1:]
        elif op == 1 and len(word) > 2 and i < len(word) - 1:
            cand = word[:i] + word[i + 1] + word[i] + word[i + 2:]
        elif op == 2 and len(word) > 3:
            cand = word[:i] + word[i + 1:]
        elif op == 3:
            cand = word[:i] + word[i] + word[i:]
        else:
            cand = word[:i] + VOWELS[rng.integers(len(VOWELS))] + word[i + 1:]
        if cand != word and cand not in out:
            out.append(cand)
    return out


@dataclass
class ToyLanguage:
    words: dict[str, list[str]]  # class -> words, most frequent first
    confusables: list[tuple[str, str]]
    seed: int

    @classmethod
    def generate(cls, vocab_size: int = 500, seed: int = 0, confusable_rate: float = 0.3):
        rng = np.random.default_rng(seed)
        adjacency = keyboard_adjacency()
        taken: set[str] = set()
        words: dict[str, list[str]] = {c: [] for c in CLASSES}
        sizes = {c: max(2, int(round(share * vocab_size))) for c, share in CLASSES.items()}
        sizes["noun"] += vocab_size - sum(sizes.values())
        for c, n in sizes.items():
            while len(words[c]) < n:
                w = _pseudo_word(rng, int(rng.integers(2, 9)))
                if w not in taken:
                    taken.add(w)
                    words[c].append(w)
        # turn some words into typo-neighbours of words from other classes
        confusables = []
        classes = list(CLASSES)
        for c in classes:
            others = [o for o in classes if o != c and o != "det"]
            n_conf = int(confusable_rate * len(words[c])) if c != "det" else 0
            # biased towards frequent words, which dominate corrupted positions
            weights = _zipf(len(words[c]))
            for j in rng.choice(len(words[c]), size=n_conf, replace=False, p=weights):
                src = words[c][j]
                target_class = others[rng.integers(len(others))]
                slot = int(rng.integers((len(words[target_class]) + 1) // 2))
                old = words[target_class][slot]
                if any(old in pair for pair in confusables) or any(src in p for p in confusables):
                    continue
                for cand in _typo_variants(src, rng, adjacency, 4):
                    if cand not in taken and len(cand) >= 2:
                        taken.discard(old)
                        taken.add(cand)
                        words[target_class][slot] = cand
                        confusables.append((src, cand))
                        break
        return cls(words, confusables, seed)

    @property
    def vocabulary(self) -> list[str]:
        return [w for ws in self.words.values() for w in ws]

    def sentences(self, n: int, seed: int = 1) -> list[SentenceRecord]:
        rng = np.random.default_rng([self.seed, seed])
        probs = {c: _zipf(len(ws)) for c, ws in self.words.items()}
        out = []
        for i in range(n):
            template = TEMPLATES[rng.integers(len(TEMPLATES))]
            tokens = tuple(self.words[c][rng.choice(len(self.words[c]), p=probs[c])]
                           for c in template)
            out.append(SentenceRecord(tokens, f"toy:{seed}:{i}"))
        return out

    def lexicon(self, per_word: int = 3, seed: int = 2) -> MisspellingLexicon:
        """Typo-style misspellings per word plus the real-word confusions."""
        rng = np.random.default_rng([self.seed, seed])
        adjacency = keyboard_adjacency()
        vocab = set(self.vocabulary)
        paired = {w for pair in self.confusables for w in pair}
        lex = MisspellingLexicon()
        for w in self.vocabulary:
            k = 1 if w in paired else int(rng.integers(1, per_word + 1))
            for m in _typo_variants(w, rng, adjacency, k):
                if m not in vocab:
                    lex.add(w, m)
        for a, b in self.confusables:
            lex.add(a, b)
            lex.add(b, a)
        return lex


def toy_corpus(vocab_size: int = 500, n_sentences: int = 1000, seed: int = 0):
    """Convenience: (language, sentences, lexicon) from one seed."""
    lang = ToyLanguage.generate(vocab_size, seed)
    return lang, lang.sentences(n_sentences), lang.lexicon()
