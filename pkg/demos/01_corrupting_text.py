"""
Corrupting clean text with misspellings
=======================================

Builds a small synthetic language, draws sentences from it and injects
natural misspellings from a lexicon plus synthetic character noise.
"""

import numpy as np

from spellforge.corpus import Vocabulary, VocabKind, derive_char_vocab
from spellforge.noise import (CorruptionConfig, NoiseKind, classify_misspelling, corrupt_corpus,
                              split_known, synth_misspell)
from spellforge.toy import ToyLanguage

# a 300-word language with a handful of typo-neighbour word pairs
lang = ToyLanguage.generate(300, seed=0)
word_vocab = Vocabulary(VocabKind.Word, lang.vocabulary)
char_vocab = derive_char_vocab(word_vocab)
print(len(word_vocab), "words,", len(char_vocab), "chars")
print("confusable pairs:", lang.confusables[:5])

# the lexicon maps a correct word to its observed misspellings
lexicon = lang.lexicon()
known, full = split_known(lexicon, 0.8, seed=0)
print(len(full), "lexicon pairs,", len(known), "kept for training")

# each of the five synthetic kinds applied to one word
rng = np.random.default_rng(1)
word = max(lang.vocabulary, key=len)
for kind in NoiseKind:
    print(f"{kind.value:>15}: {word} -> {synth_misspell(word, kind, char_vocab, rng)}")

# half of the replaced positions use synthetic noise, the rest the lexicon
examples, stats = corrupt_corpus(lang.sentences(500, seed=2), known,
                                 CorruptionConfig(synthetic_fraction=0.5, seed=3),
                                 word_vocab, char_vocab)
for ex in examples[:3]:
    print(" clean:", " ".join(ex.clean.tokens))
    print(" noisy:", " ".join(ex.noisy))
    for pos, source in ex.corrupted:
        cls = classify_misspelling(ex.noisy[pos], word_vocab).value
        print(f"   {pos}: {ex.clean.tokens[pos]} -> {ex.noisy[pos]} ({source}, {cls})")
print(stats.as_dict())
