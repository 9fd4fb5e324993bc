"""
Subword segmentation and BIO2 word tags
=======================================

A word can span several subword pieces.  The tagger labels the first
piece B-<word> and the rest I-<word>; decoding reads the B tag of each
word's first piece.
"""

from spellforge.corpus import SentenceRecord, Vocabulary, VocabKind
from spellforge.tokenize import (DecodeStats, Bio2Tag, bio2_decode, bio2_labels, subword_encode,
                                 train_subword)
from spellforge.toy import ToyLanguage

lang = ToyLanguage.generate(200, seed=4)
word_vocab = Vocabulary(VocabKind.Word, lang.vocabulary)
sub = train_subword(lang.sentences(400, seed=1), 120)
print(len(sub.merges), "merges learned")

noisy = list(lang.sentences(1, seed=9)[0].tokens)
noisy[1] = noisy[1][::-1]  # an unseen spelling still segments into known pieces
ids, spans = subword_encode(noisy, sub)
for word, (a, b) in zip(noisy, spans):
    print(f"{word:>10}: {[sub.vocab.entries[i] for i in ids[a:b]]}")

gold = [word_vocab.lookup(w) for w in lang.sentences(1, seed=9)[0].tokens]
tags = bio2_labels(spans, gold)
print([t.render(word_vocab) for t in tags])

stats = DecodeStats()
print([word_vocab.entries[i] for i in bio2_decode(tags, spans, stats)], stats)

# a stray I tag on a first piece still decodes, and is counted
tags[spans[0][0]] = Bio2Tag("I", tags[spans[0][0]].word_id)
bio2_decode(tags, spans, stats)
print(stats)
